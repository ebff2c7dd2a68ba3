#pragma once

#include "bathymap/compositor.hpp"
#include "bathymap/error.hpp"
#include "bathymap/experiments.hpp"
#include "bathymap/fixture_io.hpp"
#include "bathymap/forest.hpp"
#include "bathymap/grid_io.hpp"
#include "bathymap/ingest.hpp"
#include "bathymap/io_util.hpp"
#include "bathymap/linear_bathy.hpp"
#include "bathymap/metrics.hpp"
#include "bathymap/parallel.hpp"
#include "bathymap/pipeline.hpp"
#include "bathymap/raster.hpp"
#include "bathymap/rng.hpp"
#include "bathymap/simulator.hpp"
#include "bathymap/stats.hpp"
#include "bathymap/training_builder.hpp"
#include "bathymap/training_table.hpp"
