#pragma once

#include "kgwalk/beam.hpp"
#include "kgwalk/checkpoint.hpp"
#include "kgwalk/env.hpp"
#include "kgwalk/error.hpp"
#include "kgwalk/graph.hpp"
#include "kgwalk/metrics.hpp"
#include "kgwalk/pipeline.hpp"
#include "kgwalk/policy.hpp"
#include "kgwalk/reinforce.hpp"
#include "kgwalk/rng.hpp"
#include "kgwalk/score_table.hpp"
#include "kgwalk/shaper.hpp"
#include "kgwalk/split.hpp"
#include "kgwalk/tensor.hpp"
#include "kgwalk/trainer.hpp"
#include "kgwalk/triples.hpp"
