#pragma once

// Umbrella header for the testbed-comparison toolkit.

#include "tbcmp/errors.hpp"
#include "tbcmp/manifest.hpp"
#include "tbcmp/markov.hpp"
#include "tbcmp/metrics.hpp"
#include "tbcmp/pcap.hpp"
#include "tbcmp/report.hpp"
#include "tbcmp/stats.hpp"
#include "tbcmp/synth.hpp"
#include "tbcmp/trace.hpp"
#include "tbcmp/version.hpp"
