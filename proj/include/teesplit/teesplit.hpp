#pragma once

#include "teesplit/architectures.hpp"
#include "teesplit/cost_model.hpp"
#include "teesplit/error.hpp"
#include "teesplit/gradient.hpp"
#include "teesplit/image_io.hpp"
#include "teesplit/inversion.hpp"
#include "teesplit/layer.hpp"
#include "teesplit/model_graph.hpp"
#include "teesplit/model_json.hpp"
#include "teesplit/network.hpp"
#include "teesplit/pipeline.hpp"
#include "teesplit/planner.hpp"
#include "teesplit/privacy.hpp"
#include "teesplit/report.hpp"
#include "teesplit/ssim.hpp"
#include "teesplit/tensor.hpp"
