#pragma once

#include "vafm/baseline.hpp"
#include "vafm/dataset.hpp"
#include "vafm/errors.hpp"
#include "vafm/inference.hpp"
#include "vafm/metrics.hpp"
#include "vafm/model.hpp"
#include "vafm/numeric_utils.hpp"
#include "vafm/outputs.hpp"
#include "vafm/parallel.hpp"
#include "vafm/random.hpp"
#include "vafm/selection.hpp"
