#pragma once

#include "omnisynth/diff/adam.hpp"
#include "omnisynth/diff/checkpoint.hpp"
#include "omnisynth/diff/conv.hpp"
#include "omnisynth/diff/ops.hpp"
#include "omnisynth/diff/params.hpp"
#include "omnisynth/diff/tape.hpp"
#include "omnisynth/diff/tensor.hpp"
