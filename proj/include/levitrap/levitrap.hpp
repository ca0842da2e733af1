#pragma once

#include "levitrap/analysis.hpp"
#include "levitrap/detection.hpp"
#include "levitrap/dynamics.hpp"
#include "levitrap/error.hpp"
#include "levitrap/fit_result.hpp"
#include "levitrap/io.hpp"
#include "levitrap/least_squares.hpp"
#include "levitrap/physics.hpp"
#include "levitrap/profile.hpp"
#include "levitrap/protocols.hpp"
#include "levitrap/random.hpp"
#include "levitrap/reference_values.hpp"
#include "levitrap/reproduction.hpp"
#include "levitrap/spectral.hpp"
#include "levitrap/time_trace.hpp"
#include "levitrap/units.hpp"
