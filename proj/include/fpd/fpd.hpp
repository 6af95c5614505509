#pragma once

// Umbrella header for the complete library.

#include "fpd/attacks.hpp"
#include "fpd/autoencoder.hpp"
#include "fpd/baselines.hpp"
#include "fpd/config.hpp"
#include "fpd/dataset.hpp"
#include "fpd/defense.hpp"
#include "fpd/errors.hpp"
#include "fpd/experiment.hpp"
#include "fpd/model.hpp"
#include "fpd/rng.hpp"
#include "fpd/vecmath.hpp"
