#pragma once

// Umbrella header.

#include "wfa/alignment.hpp"
#include "wfa/error.hpp"
#include "wfa/geometry.hpp"
#include "wfa/linalg3.hpp"
#include "wfa/mat3.hpp"
#include "wfa/matrix.hpp"
#include "wfa/point_io.hpp"
#include "wfa/procrustes.hpp"
#include "wfa/rng.hpp"
#include "wfa/rotations.hpp"
#include "wfa/sampling.hpp"
#include "wfa/shapes.hpp"
#include "wfa/toynet.hpp"
#include "wfa/vec3.hpp"
#include "wfa/version.hpp"
