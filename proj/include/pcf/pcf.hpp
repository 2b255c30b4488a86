#pragma once

#include "pcf/checkpoint.hpp"
#include "pcf/cloud.hpp"
#include "pcf/completion.hpp"
#include "pcf/errors.hpp"
#include "pcf/geom.hpp"
#include "pcf/grasp_net.hpp"
#include "pcf/gripper.hpp"
#include "pcf/json_io.hpp"
#include "pcf/kernels.hpp"
#include "pcf/optim.hpp"
#include "pcf/oracles.hpp"
#include "pcf/params.hpp"
#include "pcf/pcf_layer.hpp"
#include "pcf/pipeline.hpp"
#include "pcf/random.hpp"
#include "pcf/scene.hpp"
#include "pcf/score_filter.hpp"
#include "pcf/tensor.hpp"
