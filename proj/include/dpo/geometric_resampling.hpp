#pragma once

#include "dpo/features.hpp"

#include <cstddef>
#include <vector>

namespace dpo {

/// Per-layer estimate of a regularized covariance inverse and the scalars
/// that produced it.
struct CovInverseEstimate {
    std::vector<Matrix> per_layer; // symmetric d x d, one per layer h < H
    double gamma = 0.0;
    std::size_t M = 0;
    std::size_t N = 0;
    double c = 0.5;

    const Matrix& operator[](std::size_t h) const { return per_layer[h]; }
    double op_norm(std::size_t h) const { return op_norm_symmetric(per_layer[h]); }
    /// min{1/gamma, c (N+1)}; the first term is dropped when gamma = 0.
    double op_norm_bound() const;
};

struct GrParameters {
    std::size_t M = 0;
    std::size_t N = 0;
};

/// M = ceil(scale ln(dHT) / (eps^2 gamma^2)), N = ceil((2/gamma) ln(1/(eps gamma))),
/// with scale 24 for the simulator setting. Throws InputError unless eps and
/// gamma lie in (0, 1/2).
GrParameters gr_parameters(double eps, double gamma, std::size_t d, std::size_t H, std::size_t T,
                           double scale = 24.0);

/// Exploratory-policy variant with mixing weight delta_e and eigenvalue floor
/// lambda: M = ceil(96 ln(dHT) ln^2(1/(eps delta_e lambda)) / (eps delta_e lambda)^2),
/// N = ceil((2/(delta_e lambda)) ln(1/(eps delta_e lambda))).
GrParameters gr_mixture_parameters(double eps, double delta_e, double lambda, std::size_t d,
                                   std::size_t H, std::size_t T);

/// samples[i][h] = phi(x_{i,h}, a_{i,h}) for the M*N input trajectories.
using FeatureSamples = std::vector<std::vector<Vector>>;

/// Y_n = gamma I + phi phi^T, Z_n = prod_{j<=n} (I - c Y_j),
/// estimate = mean over m of (c I + c sum_n Z_n), symmetrized.
/// Throws InputError when the sample count is not M*N.
CovInverseEstimate geometric_resampling(const FeatureSamples& samples, std::size_t M,
                                        std::size_t N, double gamma);

/// Draws one path from x_0 through the simulator; returns phi at every layer.
std::vector<Vector> simulate_features(Simulator& simulator, const FeatureMap& features,
                                      const ActionChooser& choose, Rng& rng);

/// The same ladder without the gamma term, on M*N fresh simulator paths; each
/// path follows `policy` with probability 1 - delta_e and `exploratory`
/// otherwise. Path i uses the stream rng.derive({i}).
CovInverseEstimate gr_mixture(Simulator& simulator, const FeatureMap& features,
                              const ActionChooser& policy, const ActionChooser& exploratory,
                              double delta_e, std::size_t M, std::size_t N, const Rng& rng);

} // namespace dpo
