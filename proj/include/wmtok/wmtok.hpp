#pragma once

#include "action_codec.hpp"
#include "common.hpp"
#include "config.hpp"
#include "drift.hpp"
#include "experiment.hpp"
#include "frame.hpp"
#include "fsq.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "reward.hpp"
#include "rollout.hpp"
#include "seed.hpp"
#include "synthetic_world.hpp"
#include "token_sequence.hpp"
#include "toy_policy.hpp"
