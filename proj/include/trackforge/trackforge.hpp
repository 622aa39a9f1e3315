#pragma once

// Umbrella header. config_io.hpp (JSON) is left out; include it when needed.

#include "trackforge/assoc.hpp"
#include "trackforge/core.hpp"
#include "trackforge/detgen.hpp"
#include "trackforge/errors.hpp"
#include "trackforge/mot_format.hpp"
#include "trackforge/moteval.hpp"
#include "trackforge/motion.hpp"
#include "trackforge/pipeline.hpp"
#include "trackforge/postproc.hpp"
#include "trackforge/raw_output.hpp"
#include "trackforge/tracker.hpp"
