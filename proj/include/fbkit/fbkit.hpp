#pragma once

// Umbrella header.

#include "fbkit/analysis.hpp"
#include "fbkit/commands.hpp"
#include "fbkit/dense.hpp"
#include "fbkit/eval.hpp"
#include "fbkit/feedback.hpp"
#include "fbkit/fusion.hpp"
#include "fbkit/index.hpp"
#include "fbkit/io.hpp"
#include "fbkit/learned_sparse.hpp"
#include "fbkit/pipeline.hpp"
#include "fbkit/porter.hpp"
#include "fbkit/tuning.hpp"
#include "fbkit/types.hpp"
