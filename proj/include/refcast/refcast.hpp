#ifndef REFCAST_REFCAST_HPP
#define REFCAST_REFCAST_HPP

// Umbrella header: self-refined in-context traffic forecasting.

#include "refcast/arima.hpp"
#include "refcast/errors.hpp"
#include "refcast/experiment.hpp"
#include "refcast/feedback.hpp"
#include "refcast/gateway.hpp"
#include "refcast/loaders.hpp"
#include "refcast/parser.hpp"
#include "refcast/prompt.hpp"
#include "refcast/refine.hpp"
#include "refcast/report.hpp"
#include "refcast/sinusoid.hpp"
#include "refcast/timeseries.hpp"
#include "refcast/timeutil.hpp"

#endif  // REFCAST_REFCAST_HPP
