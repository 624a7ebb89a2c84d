#pragma once

#include "reacg/attack.hpp"
#include "reacg/common.hpp"
#include "reacg/dataset.hpp"
#include "reacg/diagnostics.hpp"
#include "reacg/experiment.hpp"
#include "reacg/losses.hpp"
#include "reacg/model.hpp"
#include "reacg/schedule.hpp"
#include "reacg/tuner.hpp"
