#pragma once

// Umbrella header for the whole runtime.

#include "ttrk/common.hpp"
#include "ttrk/container.hpp"
#include "ttrk/cost.hpp"
#include "ttrk/eval.hpp"
#include "ttrk/graph.hpp"
#include "ttrk/image.hpp"
#include "ttrk/metrics.hpp"
#include "ttrk/model.hpp"
#include "ttrk/ops.hpp"
#include "ttrk/ops_int8.hpp"
#include "ttrk/preprocess.hpp"
#include "ttrk/ptq.hpp"
#include "ttrk/quant.hpp"
#include "ttrk/tensor.hpp"
#include "ttrk/weights.hpp"
