#include "dpo/kernels.hpp"

#include <string>

namespace dpo {

namespace {

// One replicate m of the ladder at layer h.
Matrix ladder(const FeatureSamples& samples, std::size_t m, std::size_t N, std::size_t h,
              double gamma, double c, Eigen::Index d) {
    Matrix Z = Matrix::Identity(d, d);
    Matrix S = c * Matrix::Identity(d, d);
    Vector Zv(d);
    for (std::size_t n = 0; n < N; ++n) {
        const Vector& v = samples[m * N + n][h];
        // Z (I - c(gamma I + v v^T)) = (1 - c gamma) Z - c (Z v) v^T
        Zv.noalias() = Z * v;
        Z *= 1.0 - c * gamma;
        Z.noalias() -= c * Zv * v.transpose();
        S += c * Z;
    }
    return S;
}

Eigen::Index sample_dim(const FeatureSamples& samples, std::size_t& H) {
    if (samples.empty()) throw InputError("no resampling trajectories");
    H = samples.front().size();
    if (H == 0) throw InputError("empty resampling trajectory");
    return samples.front().front().size();
}

void finish(std::vector<Matrix>& acc, std::size_t M) {
    for (auto& S : acc) {
        S /= static_cast<double>(M);
        const Matrix sym = 0.5 * (S + S.transpose());
        S = sym;
    }
}

OccupancyBounds empty_bounds(const ConfidenceSet& conf) {
    const auto& L = conf.layers();
    return {StateActionTable(L.num_states(), L.num_actions()),
            StateActionTable(L.num_states(), L.num_actions())};
}

void fill_target(const Policy& policy, const ConfidenceSet& conf, StateId x, OccupancyBounds& out) {
    const double up = reach_bound(policy, conf, x, Optimize::max);
    const double lo = reach_bound(policy, conf, x, Optimize::min);
    for (ActionId a = 0; a < conf.layers().num_actions(); ++a) {
        out.upper(x, a) = policy(x, a) * up;
        out.lower(x, a) = policy(x, a) * lo;
    }
}

} // namespace

std::vector<Matrix> gr_kernel_serial(const FeatureSamples& samples, std::size_t M, std::size_t N,
                                     double gamma, double c) {
    std::size_t H = 0;
    const Eigen::Index d = sample_dim(samples, H);
    std::vector<Matrix> acc(H, Matrix::Zero(d, d));
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t m = 0; m < M; ++m) acc[h] += ladder(samples, m, N, h, gamma, c, d);
    finish(acc, M);
    return acc;
}

std::vector<Matrix> gr_kernel_parallel(const FeatureSamples& samples, std::size_t M,
                                       std::size_t N, double gamma, double c) {
    std::size_t H = 0;
    const Eigen::Index d = sample_dim(samples, H);
    std::vector<Matrix> partial(M * H);
    const auto tasks = static_cast<long>(M * H);
#pragma omp parallel for schedule(static)
    for (long task = 0; task < tasks; ++task) {
        const auto h = static_cast<std::size_t>(task) / M, m = static_cast<std::size_t>(task) % M;
        partial[static_cast<std::size_t>(task)] = ladder(samples, m, N, h, gamma, c, d);
    }
    std::vector<Matrix> acc(H, Matrix::Zero(d, d));
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t m = 0; m < M; ++m) acc[h] += partial[h * M + m];
    finish(acc, M);
    return acc;
}

OccupancyBounds occupancy_bounds_serial(const Policy& policy, const ConfidenceSet& conf) {
    OccupancyBounds out = empty_bounds(conf);
    for (StateId x = 0; x < conf.layers().num_decision_states(); ++x)
        fill_target(policy, conf, x, out);
    return out;
}

OccupancyBounds occupancy_bounds_parallel(const Policy& policy, const ConfidenceSet& conf) {
    OccupancyBounds out = empty_bounds(conf);
    const auto targets = static_cast<long>(conf.layers().num_decision_states());
#pragma omp parallel for schedule(dynamic)
    for (long x = 0; x < targets; ++x) fill_target(policy, conf, static_cast<StateId>(x), out);
    return out;
}

} // namespace dpo
