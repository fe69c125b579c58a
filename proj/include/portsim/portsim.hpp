#pragma once

#include "portsim/arrivals.hpp"
#include "portsim/csv.hpp"
#include "portsim/detection.hpp"
#include "portsim/engine.hpp"
#include "portsim/fixtures.hpp"
#include "portsim/io.hpp"
#include "portsim/metrics.hpp"
#include "portsim/rng.hpp"
#include "portsim/routing.hpp"
#include "portsim/scenario.hpp"
#include "portsim/stats.hpp"
#include "portsim/types.hpp"
