#pragma once

// Umbrella header for the inductive conformal prediction toolkit.

#include "icp/classification.hpp"
#include "icp/dataset.hpp"
#include "icp/diagnostics.hpp"
#include "icp/matrix.hpp"
#include "icp/models.hpp"
#include "icp/pipeline.hpp"
#include "icp/quantile.hpp"
#include "icp/regression.hpp"
#include "icp/rng.hpp"
