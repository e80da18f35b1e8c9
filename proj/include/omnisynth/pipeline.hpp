#pragma once

#include "omnisynth/pipeline/config.hpp"
#include "omnisynth/pipeline/path.hpp"
#include "omnisynth/pipeline/run.hpp"
