#pragma once

#include "floodgate/dataset.hpp"
#include "floodgate/error.hpp"
#include "floodgate/features.hpp"
#include "floodgate/frames.hpp"
#include "floodgate/metrics.hpp"
#include "floodgate/mlp.hpp"
#include "floodgate/pcap.hpp"
#include "floodgate/synth.hpp"
