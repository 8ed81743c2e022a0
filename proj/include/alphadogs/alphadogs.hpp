#pragma once

// Convenience umbrella for the whole library.

#include "alphadogs/errors.hpp"
#include "alphadogs/rng.hpp"
#include "alphadogs/grid.hpp"
#include "alphadogs/geometry.hpp"
#include "alphadogs/regression.hpp"
#include "alphadogs/sampling.hpp"
#include "alphadogs/search.hpp"
#include "alphadogs/optimizer.hpp"
#include "alphadogs/problems.hpp"
#include "alphadogs/record.hpp"
