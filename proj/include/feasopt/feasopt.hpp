// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header.

#pragma once

#include "feasopt/core.hpp"
#include "feasopt/dense.hpp"
#include "feasopt/manifold.hpp"
#include "feasopt/retraction.hpp"
#include "feasopt/generalized.hpp"
#include "feasopt/geometry.hpp"
#include "feasopt/stepsize.hpp"
#include "feasopt/linesearch.hpp"
#include "feasopt/problem.hpp"
#include "feasopt/problems.hpp"
#include "feasopt/solver.hpp"
#include "feasopt/auglag.hpp"
#include "feasopt/matrix_market.hpp"
#include "feasopt/bench.hpp"
