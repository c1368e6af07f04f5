#pragma once

#include "aging_mimo/errors.hpp"
#include "aging_mimo/specfun.hpp"
#include "aging_mimo/precision.hpp"
#include "aging_mimo/rng.hpp"
#include "aging_mimo/scenario.hpp"
#include "aging_mimo/channel.hpp"
#include "aging_mimo/receivers.hpp"
#include "aging_mimo/analysis.hpp"
#include "aging_mimo/montecarlo.hpp"
#include "aging_mimo/config.hpp"
#include "aging_mimo/report.hpp"
#include "aging_mimo/validation.hpp"
