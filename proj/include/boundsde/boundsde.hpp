#pragma once

#include "boundsde/errors.hpp"
#include "boundsde/numerics.hpp"
#include "boundsde/solar_clearsky.hpp"
#include "boundsde/ingest.hpp"
#include "boundsde/forecast_prep.hpp"
#include "boundsde/moments.hpp"
#include "boundsde/surrogates.hpp"
#include "boundsde/optimize.hpp"
#include "boundsde/calibrate.hpp"
#include "boundsde/kde_transition.hpp"
#include "boundsde/simulate.hpp"
#include "boundsde/bands_analytics.hpp"
#include "boundsde/config.hpp"
