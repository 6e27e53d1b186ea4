#pragma once

// Umbrella header for the large-deviation geometry library.

#include "ldgeom/contraction.hpp"
#include "ldgeom/core.hpp"
#include "ldgeom/divergence.hpp"
#include "ldgeom/errors.hpp"
#include "ldgeom/markov.hpp"
#include "ldgeom/polytope.hpp"
#include "ldgeom/sampling.hpp"
#include "ldgeom/types.hpp"
