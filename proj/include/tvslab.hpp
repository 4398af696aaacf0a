#pragma once

// Umbrella header for the tvslab library.

#include "tvslab/params.hpp"
#include "tvslab/rng.hpp"
#include "tvslab/quadrature.hpp"
#include "tvslab/exit_law.hpp"
#include "tvslab/disc.hpp"
#include "tvslab/measure_mass.hpp"
#include "tvslab/brownian.hpp"
#include "tvslab/lattice.hpp"
#include "tvslab/tvs.hpp"
#include "tvslab/chaos.hpp"
#include "tvslab/estimators.hpp"
#include "tvslab/report.hpp"
#include "tvslab/parallel.hpp"
#include "tvslab/experiments.hpp"
