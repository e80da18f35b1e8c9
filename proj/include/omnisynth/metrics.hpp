#pragma once

#include "omnisynth/metrics/metrics.hpp"
