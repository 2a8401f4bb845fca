#pragma once

// Brute-force references. None of these call into the code they check:
// values come from path enumeration, vertex enumeration, dense linear solves
// or eigendecompositions.

#include "dpo/features.hpp"
#include "dpo/mdp.hpp"
#include "dpo/tabular.hpp"

#include <vector>

namespace dpo {

/// Vertices of {p : |p - center| <= width, p >= 0, sum p = 1}; at most 6 coordinates.
std::vector<std::vector<double>> oracle_polytope_vertices(std::span<const double> center,
                                                          std::span<const double> width);

/// Optimum of sum p f over the polytope above, by vertex enumeration.
double oracle_polytope_optimum(std::span<const double> f, std::span<const double> center,
                               std::span<const double> width, Optimize objective);

/// q^pi by summing the probabilities of every trajectory (at most 1e6 of them).
OccupancyMeasure oracle_occupancy_enum(const LayeredMDP& mdp, const Policy& policy);

/// V^pi(x_0; loss) by trajectory enumeration.
double oracle_path_value(const LayeredMDP& mdp, const Policy& policy, const StateActionTable& loss);

/// min over all deterministic policies of V^pi(x_0; loss), by enumeration.
double oracle_best_deterministic(const LayeredMDP& mdp, const StateActionTable& loss);

/// Solves (I - dilation * P_pi) B = b as one dense system over all pairs.
StateActionTable oracle_dilated_solve(const LayeredMDP& mdp, const Policy& policy,
                                      const StateActionTable& bonus, double dilation);

/// max (or min) of the occupancy of (x,a) over every kernel built from
/// polytope vertices row by row (the optimum is attained at such kernels).
/// Throws InputError if more than `max_kernels` combinations are needed.
double oracle_occupancy_bound(const Policy& policy, const ConfidenceSet& conf, StateId x,
                              ActionId a, Optimize objective, std::size_t max_kernels = 2000000);

/// E[estimate] = Y^{-1} (I - (I - c Y)^{N+1}) with Y = gamma I + E[phi phi^T],
/// through the eigendecomposition of Y.
Matrix oracle_expected_sigma_plus(const FeatureLaw& law, double gamma, std::size_t N,
                                  double c = 0.5);

/// (gamma I + E[phi phi^T])^{-1}.
Matrix oracle_regularized_inverse(const FeatureLaw& law, double gamma);

} // namespace dpo
