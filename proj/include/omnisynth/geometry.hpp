#pragma once

#include "omnisynth/geometry/camera_grid.hpp"
#include "omnisynth/geometry/equirect.hpp"
#include "omnisynth/geometry/perspective.hpp"
#include "omnisynth/geometry/reprojection.hpp"
#include "omnisynth/geometry/types.hpp"
