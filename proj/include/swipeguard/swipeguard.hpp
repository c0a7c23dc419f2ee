#pragma once

#include "swipeguard/authenticator.hpp"
#include "swipeguard/config.hpp"
#include "swipeguard/errors.hpp"
#include "swipeguard/eval.hpp"
#include "swipeguard/features.hpp"
#include "swipeguard/model_bayes.hpp"
#include "swipeguard/model_dp.hpp"
#include "swipeguard/model_io.hpp"
#include "swipeguard/model_shrunk.hpp"
#include "swipeguard/report.hpp"
#include "swipeguard/spline.hpp"
#include "swipeguard/stat_core.hpp"
#include "swipeguard/synth.hpp"
#include "swipeguard/trace_io.hpp"
