#pragma once

#include "omnisynth/radiance/field.hpp"
#include "omnisynth/radiance/rays.hpp"
#include "omnisynth/radiance/render.hpp"
#include "omnisynth/radiance/sampling.hpp"
#include "omnisynth/radiance/train.hpp"
#include "omnisynth/radiance/volume.hpp"
