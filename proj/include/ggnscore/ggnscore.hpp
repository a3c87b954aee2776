#pragma once

#include "ggnscore/augmented.hpp"
#include "ggnscore/baselines.hpp"
#include "ggnscore/bench.hpp"
#include "ggnscore/data_io.hpp"
#include "ggnscore/errors.hpp"
#include "ggnscore/ggn.hpp"
#include "ggnscore/losses.hpp"
#include "ggnscore/models.hpp"
#include "ggnscore/regularizers.hpp"
#include "ggnscore/types.hpp"
