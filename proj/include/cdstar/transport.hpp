#pragma once

#include "cdstar/plans.hpp"
#include "cdstar/quantile_geodesic.hpp"
#include "cdstar/transport_lp.hpp"
