#pragma once

#include "common.hpp"
#include "frame.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <iterator>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace wmtok {

/// Shortest decimal form that parses back to the same double; "inf", "-inf", "nan" otherwise.
inline std::string format_double(double v) {
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos)
        return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + '"';
}

/// CSV writer: optional "# seed=<n>" line, then the header row, then data rows.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header,
              std::optional<std::uint64_t> seed = std::nullopt)
        : out_(path), columns_(header.size()) {
        if (!out_)
            throw IoError("csv: cannot write " + path.string());
        if (seed)
            out_ << "# seed=" << *seed << "\r\n";
        write_fields(header);
    }

    void row(const std::vector<std::string>& fields) {
        if (fields.size() != columns_)
            throw InvalidArgument("csv: row has " + std::to_string(fields.size()) + " fields, header has " +
                                  std::to_string(columns_));
        write_fields(fields);
    }

    void flush() { out_.flush(); }

private:
    void write_fields(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i)
                out_ << ',';
            out_ << csv_escape(fields[i]);
        }
        out_ << "\r\n";
        if (!out_)
            throw IoError("csv: write failed");
    }

    std::ofstream out_;
    std::size_t columns_;
};

struct CsvTable {
    std::vector<std::string> comments;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Minimal RFC-4180 reader; leading lines starting with '#' are returned as comments.
inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("csv: cannot read " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CsvTable table;
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false, at_line_start = true;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (at_line_start && c == '#' && records.empty()) {
            std::size_t end = text.find('\n', i);
            std::string line = text.substr(i, end == std::string::npos ? std::string::npos : end - i);
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            table.comments.push_back(line);
            i = end == std::string::npos ? text.size() : end;
            continue;
        }
        at_line_start = false;
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            record.push_back(std::move(field));
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n')
                ++i;
            record.push_back(std::move(field));
            field.clear();
            records.push_back(std::move(record));
            record.clear();
            at_line_start = true;
        } else {
            field += c;
        }
    }
    if (!field.empty() || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    if (records.empty())
        throw IoError("csv: " + path.string() + " has no header");
    table.header = std::move(records.front());
    table.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
    return table;
}

inline std::uint8_t to_byte(double v) {
    if (std::isnan(v))
        v = 0.0;
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

/// Writes P5 for single-channel frames and P6 for three-channel frames, maxval 255.
inline void write_pnm(const Frame& f, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("pnm: cannot write " + path.string());
    out << (f.channels == 1 ? "P5" : "P6") << '\n' << f.width << ' ' << f.height << "\n255\n";
    std::vector<char> bytes(f.data.size());
    for (std::size_t i = 0; i < f.data.size(); ++i)
        bytes[i] = static_cast<char>(to_byte(f.data[i]));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("pnm: write failed for " + path.string());
}

inline void write_pgm(const Frame& f, const std::filesystem::path& path) {
    if (f.channels != 1)
        throw InvalidArgument("pgm: frame has " + std::to_string(f.channels) + " channels");
    write_pnm(f, path);
}

namespace detail {
inline int read_header_int(std::istream& in, const std::string& path) {
    int c;
    while ((c = in.peek()) != EOF) {
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int value = -1;
    if (!(in >> value) || value < 1)
        throw IoError("pnm: malformed header in " + path);
    return value;
}
} // namespace detail

/// Reads binary P5 (grey) or P6 (RGB); ASCII variants are rejected.
inline Frame read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("pnm: cannot read " + path.string());
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (!in || magic[0] != 'P')
        throw IoError("pnm: malformed header in " + path.string());
    int channels = 0;
    if (magic[1] == '5')
        channels = 1;
    else if (magic[1] == '6')
        channels = 3;
    else
        throw IoError("unsupported PGM variant P" + std::string(1, magic[1]) + " in " + path.string());
    const int width = detail::read_header_int(in, path.string());
    const int height = detail::read_header_int(in, path.string());
    const int maxval = detail::read_header_int(in, path.string());
    if (maxval > 255)
        throw IoError("unsupported PGM variant (maxval " + std::to_string(maxval) + ") in " + path.string());
    if (!std::isspace(in.get()))
        throw IoError("pnm: malformed header in " + path.string());
    Frame f(height, width, channels);
    std::vector<unsigned char> bytes(f.data.size());
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw IoError("pnm: truncated pixel data in " + path.string());
    for (std::size_t i = 0; i < bytes.size(); ++i)
        f.data[i] = double(bytes[i]) / maxval;
    return f;
}

inline Frame read_pgm(const std::filesystem::path& path) { return read_pnm(path); }

/// Writes frames as <dir>/frame_0000.pgm, frame_0001.pgm, ...
inline std::vector<std::filesystem::path> write_frames(const Clip& frames, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> paths;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04zu.%s", i, frames[i].channels == 1 ? "pgm" : "ppm");
        paths.push_back(dir / name);
        write_pnm(frames[i], paths.back());
    }
    return paths;
}

/// Reads every .pgm/.ppm file in a directory in lexicographic filename order.
inline Clip read_frames(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw IoError("frames: not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto ext = e.path().extension().string();
        if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm"))
            files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    Clip clip;
    for (const auto& f : files)
        clip.push_back(read_pnm(f));
    return clip;
}

} // namespace wmtok
