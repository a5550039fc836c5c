#pragma once

// Umbrella header for the whole library.

#include "latentbridge/arch.hpp"
#include "latentbridge/checkpoint.hpp"
#include "latentbridge/common.hpp"
#include "latentbridge/data.hpp"
#include "latentbridge/gradcheck.hpp"
#include "latentbridge/graph.hpp"
#include "latentbridge/kernels.hpp"
#include "latentbridge/losses.hpp"
#include "latentbridge/metrics.hpp"
#include "latentbridge/model.hpp"
#include "latentbridge/ops.hpp"
#include "latentbridge/optim.hpp"
#include "latentbridge/plot.hpp"
#include "latentbridge/png_io.hpp"
#include "latentbridge/rng.hpp"
#include "latentbridge/tensor.hpp"
#include "latentbridge/trainer.hpp"
