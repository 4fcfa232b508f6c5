#pragma once

#include "lrad/adam.hpp"
#include "lrad/autodiff.hpp"
#include "lrad/checkpoint.hpp"
#include "lrad/csv.hpp"
#include "lrad/datasets.hpp"
#include "lrad/eval.hpp"
#include "lrad/grad_check.hpp"
#include "lrad/image_io.hpp"
#include "lrad/kernels.hpp"
#include "lrad/losses.hpp"
#include "lrad/networks.hpp"
#include "lrad/serialization.hpp"
#include "lrad/svd.hpp"
#include "lrad/synth.hpp"
#include "lrad/tensor.hpp"
#include "lrad/trainer.hpp"
