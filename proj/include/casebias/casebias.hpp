#pragma once

#include "casebias/error.hpp"
#include "casebias/rng.hpp"
#include "casebias/population.hpp"
#include "casebias/decomposition.hpp"
#include "casebias/effsize.hpp"
#include "casebias/epidemic.hpp"
#include "casebias/estimators.hpp"
#include "casebias/compare.hpp"
#include "casebias/sampling.hpp"
#include "casebias/io.hpp"
