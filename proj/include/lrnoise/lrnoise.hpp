#pragma once

#include "lrnoise/augment.hpp"
#include "lrnoise/batch.hpp"
#include "lrnoise/config.hpp"
#include "lrnoise/data.hpp"
#include "lrnoise/grad_noise.hpp"
#include "lrnoise/init.hpp"
#include "lrnoise/layers.hpp"
#include "lrnoise/metrics.hpp"
#include "lrnoise/network.hpp"
#include "lrnoise/noise.hpp"
#include "lrnoise/optim.hpp"
#include "lrnoise/report.hpp"
#include "lrnoise/rng.hpp"
#include "lrnoise/sweep.hpp"
#include "lrnoise/tensor.hpp"
#include "lrnoise/train.hpp"
#include "lrnoise/weights_io.hpp"
