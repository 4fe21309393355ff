#pragma once

// Umbrella header: the whole library in dependency order.

#include "banditlab/errors.hpp"
#include "banditlab/rng.hpp"
#include "banditlab/core.hpp"
#include "banditlab/solver.hpp"
#include "banditlab/learners.hpp"
#include "banditlab/environments.hpp"
#include "banditlab/harness.hpp"
#include "banditlab/csv.hpp"
#include "banditlab/config.hpp"
#include "banditlab/cli.hpp"
