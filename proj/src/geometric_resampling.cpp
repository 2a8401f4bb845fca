#include "dpo/geometric_resampling.hpp"

#include "dpo/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dpo {

namespace {

std::size_t ceil_count(double v) {
    if (!std::isfinite(v) || v > 1e18) throw InputError("parameter formula overflows");
    return static_cast<std::size_t>(std::ceil(v));
}

double log_dht(std::size_t d, std::size_t H, std::size_t T) {
    return std::log(static_cast<double>(d) * static_cast<double>(H) * static_cast<double>(T));
}

} // namespace

double CovInverseEstimate::op_norm_bound() const {
    const double ladder = c * static_cast<double>(N + 1);
    return gamma > 0.0 ? std::min(1.0 / gamma, ladder) : ladder;
}

GrParameters gr_parameters(double eps, double gamma, std::size_t d, std::size_t H, std::size_t T,
                           double scale) {
    if (!(eps > 0.0 && eps < 0.5)) throw InputError("epsilon must lie in (0, 1/2)");
    if (!(gamma > 0.0 && gamma < 0.5)) throw InputError("gamma must lie in (0, 1/2)");
    if (d == 0 || H == 0 || T == 0) throw InputError("d, H and T must be positive");
    GrParameters p;
    p.M = ceil_count(scale * log_dht(d, H, T) / (eps * eps * gamma * gamma));
    p.N = ceil_count(2.0 / gamma * std::log(1.0 / (eps * gamma)));
    return p;
}

GrParameters gr_mixture_parameters(double eps, double delta_e, double lambda, std::size_t d,
                                   std::size_t H, std::size_t T) {
    if (!(eps > 0.0)) throw InputError("epsilon must be positive");
    if (!(delta_e > 0.0 && delta_e <= 1.0)) throw InputError("delta_e must lie in (0, 1]");
    if (!(lambda > 0.0)) throw InputError("lambda_min must be positive");
    const double r = eps * delta_e * lambda;
    if (!(r < 1.0)) throw InputError("eps * delta_e * lambda must be below 1");
    const double lg = std::log(1.0 / r);
    GrParameters p;
    p.M = ceil_count(96.0 * log_dht(d, H, T) * lg * lg / (r * r));
    p.N = ceil_count(2.0 / (delta_e * lambda) * lg);
    return p;
}

CovInverseEstimate geometric_resampling(const FeatureSamples& samples, std::size_t M,
                                        std::size_t N, double gamma) {
    if (M == 0 || N == 0) throw InputError("M and N must be positive");
    if (samples.size() != M * N)
        throw InputError("geometric resampling needs exactly M*N = " + std::to_string(M * N) +
                         " trajectories, got " + std::to_string(samples.size()));
    if (!(gamma >= 0.0)) throw InputError("gamma must be nonnegative");
    const std::size_t H = samples.front().size();
    const auto d = samples.front().empty() ? 0 : samples.front().front().size();
    for (const auto& traj : samples) {
        if (traj.size() != H) throw InputError("trajectories of different lengths");
        for (const auto& v : traj)
            if (v.size() != d) throw InputError("feature vectors of different dimensions");
    }
    CovInverseEstimate out;
    out.gamma = gamma;
    out.M = M;
    out.N = N;
    out.per_layer = gr_kernel_parallel(samples, M, N, gamma, out.c);
    return out;
}

std::vector<Vector> simulate_features(Simulator& simulator, const FeatureMap& features,
                                      const ActionChooser& choose, Rng& rng) {
    const auto& L = simulator.layers();
    std::vector<Vector> out;
    out.reserve(L.horizon());
    StateId x = L.initial_state();
    for (std::size_t h = 0; h < L.horizon(); ++h) {
        const ActionId a = choose(h, x, rng);
        out.push_back(features(x, a));
        x = simulator.next(x, a, rng);
    }
    return out;
}

CovInverseEstimate gr_mixture(Simulator& simulator, const FeatureMap& features,
                              const ActionChooser& policy, const ActionChooser& exploratory,
                              double delta_e, std::size_t M, std::size_t N, const Rng& rng) {
    if (!(delta_e > 0.0 && delta_e <= 1.0)) throw InputError("delta_e must lie in (0, 1]");
    FeatureSamples samples(M * N);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        Rng r = rng.derive({i});
        const bool explore = r.bernoulli(delta_e);
        samples[i] = simulate_features(simulator, features, explore ? exploratory : policy, r);
    }
    return geometric_resampling(samples, M, N, 0.0);
}

} // namespace dpo
