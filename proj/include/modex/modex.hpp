#pragma once

#include "modex/config.hpp"
#include "modex/core.hpp"
#include "modex/dataset.hpp"
#include "modex/effects.hpp"
#include "modex/features.hpp"
#include "modex/lfo.hpp"
#include "modex/metrics.hpp"
#include "modex/mod_io.hpp"
#include "modex/nn/lfonet.hpp"
#include "modex/nn/lstm_fx.hpp"
#include "modex/nn/optim.hpp"
#include "modex/nn/training.hpp"
#include "modex/nn/weights_io.hpp"
#include "modex/postproc.hpp"
#include "modex/wav.hpp"
