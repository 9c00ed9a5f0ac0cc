#pragma once

#include "ddopt/errors.hpp"
#include "ddopt/rng.hpp"
#include "ddopt/fft.hpp"
#include "ddopt/signal.hpp"
#include "ddopt/grid.hpp"
#include "ddopt/caf.hpp"
#include "ddopt/adaptive.hpp"
#include "ddopt/scene.hpp"
#include "ddopt/detection.hpp"
#include "ddopt/harness.hpp"
#include "ddopt/config.hpp"
