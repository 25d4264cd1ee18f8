#pragma once

#include "vehid/errors.hpp"
#include "vehid/rng.hpp"
#include "vehid/vehicle_model.hpp"
#include "vehid/excitation_noise.hpp"
#include "vehid/simulator.hpp"
#include "vehid/summaries.hpp"
#include "vehid/mdn.hpp"
#include "vehid/inference.hpp"
#include "vehid/observability.hpp"
#include "vehid/posterior_analysis.hpp"
#include "vehid/config.hpp"
#include "vehid/io.hpp"
