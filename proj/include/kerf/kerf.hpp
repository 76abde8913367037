#pragma once

// Regression forests whose randomized partitions double as kernels: grow
// centred/uniform/median/CART ensembles, predict with per-tree averaging or
// occupancy pooling, evaluate the matching closed-form connection kernels,
// and check the analytic identities and bounds that tie them together.

#include "kerf/csv.hpp"
#include "kerf/dataset.hpp"
#include "kerf/experiments.hpp"
#include "kerf/forest.hpp"
#include "kerf/io.hpp"
#include "kerf/kernels.hpp"
#include "kerf/models.hpp"
#include "kerf/random.hpp"
#include "kerf/scaling.hpp"
#include "kerf/theory.hpp"
#include "kerf/threading.hpp"
#include "kerf/tree.hpp"
