#pragma once

// Umbrella header for the random-walk-in-random-environment toolkit.

#include "rwre/acceptance.hpp"
#include "rwre/algebra.hpp"
#include "rwre/blocks.hpp"
#include "rwre/csv.hpp"
#include "rwre/env_law.hpp"
#include "rwre/environment.hpp"
#include "rwre/error.hpp"
#include "rwre/experiments.hpp"
#include "rwre/ladder.hpp"
#include "rwre/oracle.hpp"
#include "rwre/parallel.hpp"
#include "rwre/quenched.hpp"
#include "rwre/rng.hpp"
#include "rwre/scaled_product.hpp"
#include "rwre/stability.hpp"
#include "rwre/stats.hpp"
#include "rwre/subseq.hpp"
#include "rwre/walk.hpp"
