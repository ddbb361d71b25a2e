#pragma once

#include "fbfrac/blur.hpp"
#include "fbfrac/error.hpp"
#include "fbfrac/grid.hpp"
#include "fbfrac/localops.hpp"
#include "fbfrac/metrics.hpp"
#include "fbfrac/nonlocal.hpp"
#include "fbfrac/potential.hpp"
#include "fbfrac/relaxed.hpp"
#include "fbfrac/solver.hpp"
#include "fbfrac/solver_config.hpp"
