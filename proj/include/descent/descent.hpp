#pragma once

#include "descent/bench.hpp"
#include "descent/cnn.hpp"
#include "descent/config.hpp"
#include "descent/data.hpp"
#include "descent/error.hpp"
#include "descent/interp.hpp"
#include "descent/models.hpp"
#include "descent/optim.hpp"
#include "descent/plot.hpp"
#include "descent/rng.hpp"
#include "descent/schedule.hpp"
#include "descent/tensor.hpp"
