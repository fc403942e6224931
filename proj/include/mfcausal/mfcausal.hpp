#pragma once

#include "mfcausal/core.hpp"
#include "mfcausal/fir.hpp"
#include "mfcausal/timeseries.hpp"
#include "mfcausal/spectral.hpp"
#include "mfcausal/cca.hpp"
#include "mfcausal/stats.hpp"
#include "mfcausal/surrogate.hpp"
#include "mfcausal/pipeline.hpp"
#include "mfcausal/vargc.hpp"
#include "mfcausal/simulators.hpp"
#include "mfcausal/mfvar.hpp"
#include "mfcausal/io.hpp"
