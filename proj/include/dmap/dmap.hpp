#pragma once

#include "dmap/csv.hpp"
#include "dmap/data_matrix.hpp"
#include "dmap/datasets.hpp"
#include "dmap/embedding.hpp"
#include "dmap/error.hpp"
#include "dmap/kernel.hpp"
#include "dmap/nystrom.hpp"
#include "dmap/random.hpp"
#include "dmap/runner.hpp"
#include "dmap/spectral.hpp"
