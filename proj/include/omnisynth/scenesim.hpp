#pragma once

#include "omnisynth/scenesim/box_scene.hpp"
