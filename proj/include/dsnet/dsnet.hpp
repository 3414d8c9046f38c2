#pragma once

// Umbrella header for the dsnet crowd-density estimation library.

#include "dsnet/adam.hpp"
#include "dsnet/checkpoint.hpp"
#include "dsnet/common.hpp"
#include "dsnet/config.hpp"
#include "dsnet/data.hpp"
#include "dsnet/density.hpp"
#include "dsnet/eval.hpp"
#include "dsnet/image.hpp"
#include "dsnet/io.hpp"
#include "dsnet/losses.hpp"
#include "dsnet/model.hpp"
#include "dsnet/ops.hpp"
#include "dsnet/rng.hpp"
#include "dsnet/scale_analysis.hpp"
#include "dsnet/tensor.hpp"
#include "dsnet/train.hpp"
