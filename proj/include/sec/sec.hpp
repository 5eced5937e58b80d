#pragma once

// Umbrella header.

#include "sec/affect_stream.hpp"
#include "sec/audio_io.hpp"
#include "sec/chunker.hpp"
#include "sec/device_sim.hpp"
#include "sec/error.hpp"
#include "sec/estimator.hpp"
#include "sec/features.hpp"
#include "sec/mapping.hpp"
#include "sec/pipeline.hpp"
#include "sec/protocol.hpp"
#include "sec/sinks.hpp"
