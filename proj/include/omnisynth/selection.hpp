#pragma once

#include "omnisynth/selection/loop.hpp"
#include "omnisynth/selection/variational.hpp"
