#pragma once

// Umbrella header.

#include "fest/ccl.hpp"
#include "fest/csv.hpp"
#include "fest/eedm.hpp"
#include "fest/fusion.hpp"
#include "fest/metrics.hpp"
#include "fest/raster.hpp"
#include "fest/rng.hpp"
#include "fest/sensitivity.hpp"
#include "fest/synth.hpp"
#include "fest/toymodel.hpp"
