#pragma once

#include "linksched/baselines.hpp"
#include "linksched/cli_io.hpp"
#include "linksched/config.hpp"
#include "linksched/dqn.hpp"
#include "linksched/environment.hpp"
#include "linksched/harness.hpp"
#include "linksched/rng.hpp"
#include "linksched/scheduling.hpp"
