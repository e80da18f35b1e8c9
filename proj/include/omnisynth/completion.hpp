#pragma once

#include "omnisynth/completion/baseline.hpp"
#include "omnisynth/completion/complete.hpp"
#include "omnisynth/completion/mask.hpp"
#include "omnisynth/completion/network.hpp"
#include "omnisynth/completion/train.hpp"
