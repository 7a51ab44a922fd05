#pragma once

#include "causalse/common.hpp"
#include "causalse/config.hpp"
#include "causalse/dataset.hpp"
#include "causalse/discovery.hpp"
#include "causalse/estimation.hpp"
#include "causalse/explanation.hpp"
#include "causalse/graph.hpp"
#include "causalse/identification.hpp"
#include "causalse/pipeline.hpp"
#include "causalse/random.hpp"
#include "causalse/refutation.hpp"
#include "causalse/report.hpp"
#include "causalse/simulation.hpp"
#include "causalse/stats.hpp"
