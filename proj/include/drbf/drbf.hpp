#pragma once

#include "drbf/adam.hpp"
#include "drbf/checkpoint.hpp"
#include "drbf/config.hpp"
#include "drbf/datagen.hpp"
#include "drbf/dataset.hpp"
#include "drbf/errors.hpp"
#include "drbf/experiment.hpp"
#include "drbf/forecast.hpp"
#include "drbf/geometry.hpp"
#include "drbf/kmeans.hpp"
#include "drbf/loss.hpp"
#include "drbf/mlp.hpp"
#include "drbf/operator_model.hpp"
#include "drbf/rbf.hpp"
#include "drbf/reference_solver.hpp"
#include "drbf/training.hpp"
#include "drbf/types.hpp"
