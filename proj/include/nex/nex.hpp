#pragma once

#include "nex/baselines.hpp"
#include "nex/cache.hpp"
#include "nex/config.hpp"
#include "nex/credit.hpp"
#include "nex/error.hpp"
#include "nex/gmm.hpp"
#include "nex/io.hpp"
#include "nex/metrics.hpp"
#include "nex/parallel.hpp"
#include "nex/pipeline.hpp"
#include "nex/scoring.hpp"
#include "nex/segmentation.hpp"
#include "nex/slope.hpp"
#include "nex/stats.hpp"
#include "nex/synth.hpp"
