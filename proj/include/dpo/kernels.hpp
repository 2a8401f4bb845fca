#pragma once

// Hot loops in two builds: a serial reference and an OpenMP version. Both
// produce bitwise-identical output (per-task results are reduced in a fixed
// order), which the tests assert and bench/ times.

#include "dpo/features.hpp"
#include "dpo/geometric_resampling.hpp"
#include "dpo/tabular.hpp"

#include <vector>

namespace dpo {

/// The resampling ladder for every layer; returns the symmetrized averages.
std::vector<Matrix> gr_kernel_serial(const FeatureSamples& samples, std::size_t M, std::size_t N,
                                     double gamma, double c);
std::vector<Matrix> gr_kernel_parallel(const FeatureSamples& samples, std::size_t M,
                                       std::size_t N, double gamma, double c);

/// Upper and lower occupancy bounds for every pair, one reach-probability
/// program per target state.
OccupancyBounds occupancy_bounds_serial(const Policy& policy, const ConfidenceSet& conf);
OccupancyBounds occupancy_bounds_parallel(const Policy& policy, const ConfidenceSet& conf);

} // namespace dpo
