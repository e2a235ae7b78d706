#pragma once

// Umbrella header.

#include "eesm/channel.hpp"
#include "eesm/config.hpp"
#include "eesm/errors.hpp"
#include "eesm/io.hpp"
#include "eesm/l2s.hpp"
#include "eesm/linalg.hpp"
#include "eesm/mmse.hpp"
#include "eesm/optimize.hpp"
#include "eesm/parallel.hpp"
#include "eesm/pipelines.hpp"
#include "eesm/rng.hpp"
#include "eesm/sgn.hpp"
#include "eesm/toy_phy.hpp"
#include "eesm/validate.hpp"
