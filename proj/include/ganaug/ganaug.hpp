#pragma once

// Umbrella header for the whole library.

#include "ganaug/adam.hpp"
#include "ganaug/checkpoint.hpp"
#include "ganaug/csv.hpp"
#include "ganaug/dataset.hpp"
#include "ganaug/dcgan.hpp"
#include "ganaug/error.hpp"
#include "ganaug/eval_metrics.hpp"
#include "ganaug/image.hpp"
#include "ganaug/losses.hpp"
#include "ganaug/network.hpp"
#include "ganaug/nn.hpp"
#include "ganaug/parallel.hpp"
#include "ganaug/rng.hpp"
#include "ganaug/runconfig.hpp"
#include "ganaug/ssim.hpp"
#include "ganaug/tensor.hpp"
#include "ganaug/vgg.hpp"
