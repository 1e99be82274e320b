// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.

#pragma once

#include "growthcast/checkpoint.hpp"
#include "growthcast/config.hpp"
#include "growthcast/convlstm.hpp"
#include "growthcast/error.hpp"
#include "growthcast/gradcheck.hpp"
#include "growthcast/image_io.hpp"
#include "growthcast/mask_ops.hpp"
#include "growthcast/metrics.hpp"
#include "growthcast/ops.hpp"
#include "growthcast/optim.hpp"
#include "growthcast/raster.hpp"
#include "growthcast/segnet.hpp"
#include "growthcast/synth.hpp"
#include "growthcast/tensor.hpp"
