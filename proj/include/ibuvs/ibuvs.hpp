#pragma once

// Umbrella header.

#include "ibuvs/errors.hpp"
#include "ibuvs/experiment.hpp"
#include "ibuvs/geometry.hpp"
#include "ibuvs/homography.hpp"
#include "ibuvs/io.hpp"
#include "ibuvs/planner.hpp"
#include "ibuvs/servo.hpp"
#include "ibuvs/sim.hpp"
