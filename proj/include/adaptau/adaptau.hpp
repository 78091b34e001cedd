#pragma once

#include "adaptau/adaptive.hpp"
#include "adaptau/calibrate.hpp"
#include "adaptau/core.hpp"
#include "adaptau/distance.hpp"
#include "adaptau/dynamic.hpp"
#include "adaptau/error.hpp"
#include "adaptau/ingest.hpp"
#include "adaptau/io/bank_file.hpp"
#include "adaptau/io/binary.hpp"
#include "adaptau/io/config.hpp"
#include "adaptau/io/fdmp.hpp"
#include "adaptau/io/text.hpp"
#include "adaptau/metrics.hpp"
#include "adaptau/parallel.hpp"
#include "adaptau/pipeline.hpp"
#include "adaptau/synth.hpp"
