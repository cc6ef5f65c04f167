#pragma once

#include "tsonet/core/autodiff.hpp"
#include "tsonet/core/error.hpp"
#include "tsonet/core/ops.hpp"
#include "tsonet/core/rng.hpp"
#include "tsonet/core/tensor.hpp"
#include "tsonet/data/patch.hpp"
#include "tsonet/data/split.hpp"
#include "tsonet/data/synthetic.hpp"
#include "tsonet/data/transforms.hpp"
#include "tsonet/model/network.hpp"
#include "tsonet/objectives/losses.hpp"
#include "tsonet/objectives/metrics.hpp"
#include "tsonet/supervision.hpp"
#include "tsonet/train/ablation.hpp"
#include "tsonet/train/trainer.hpp"
