#pragma once

#include "dlrisk/nn/checkpoint.hpp"
#include "dlrisk/nn/gradcheck.hpp"
#include "dlrisk/nn/layers.hpp"
#include "dlrisk/nn/loss.hpp"
#include "dlrisk/nn/optim.hpp"
