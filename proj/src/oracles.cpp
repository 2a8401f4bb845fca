#include "dpo/oracles.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace dpo {

std::vector<std::vector<double>> oracle_polytope_vertices(std::span<const double> center,
                                                          std::span<const double> width) {
    const std::size_t n = center.size();
    if (n == 0 || n > 6) throw InputError("vertex enumeration supports 1..6 coordinates");
    std::vector<double> lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
        lo[i] = std::max(0.0, center[i] - width[i]);
        hi[i] = std::min(1.0, center[i] + width[i]);
    }
    std::vector<std::vector<double>> out;
    // each vertex pins all coordinates but one to a bound; the free one closes the sum
    for (std::size_t free = 0; free < n; ++free) {
        const std::size_t combos = std::size_t{1} << (n - 1);
        for (std::size_t mask = 0; mask < combos; ++mask) {
            std::vector<double> p(n);
            double rest = 0.0;
            std::size_t bit = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (i == free) continue;
                p[i] = (mask >> bit++) & 1 ? hi[i] : lo[i];
                rest += p[i];
            }
            p[free] = 1.0 - rest;
            if (p[free] < lo[free] - 1e-12 || p[free] > hi[free] + 1e-12) continue;
            p[free] = std::clamp(p[free], lo[free], hi[free]);
            const bool seen = std::any_of(out.begin(), out.end(), [&](const auto& q) {
                for (std::size_t i = 0; i < n; ++i)
                    if (std::abs(q[i] - p[i]) > 1e-15) return false;
                return true;
            });
            if (!seen) out.push_back(std::move(p));
        }
    }
    if (out.empty()) throw InputError("empty polytope");
    return out;
}

double oracle_polytope_optimum(std::span<const double> f, std::span<const double> center,
                               std::span<const double> width, Optimize objective) {
    double best = objective == Optimize::max ? -std::numeric_limits<double>::infinity()
                                             : std::numeric_limits<double>::infinity();
    for (const auto& p : oracle_polytope_vertices(center, width)) {
        double v = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) v += p[i] * f[i];
        best = objective == Optimize::max ? std::max(best, v) : std::min(best, v);
    }
    return best;
}

namespace {

// Calls visit(prob, path) for every trajectory with positive probability.
void enumerate_paths(const LayeredMDP& mdp, const Policy& policy,
                     const std::function<void(double, const std::vector<std::pair<StateId, ActionId>>&)>& visit) {
    const auto& L = mdp.layers();
    std::size_t count = 0;
    std::vector<std::pair<StateId, ActionId>> path;
    std::function<void(StateId, double)> rec = [&](StateId x, double prob) {
        if (L.is_terminal(x)) {
            if (++count > 1000000) throw InputError("too many trajectories to enumerate");
            visit(prob, path);
            return;
        }
        for (ActionId a = 0; a < L.num_actions(); ++a) {
            const double pa = policy(x, a);
            if (pa == 0.0) continue;
            path.emplace_back(x, a);
            const std::size_t h = L.layer_of(x);
            for (std::size_t j = 0; j < L.layer_size(h + 1); ++j) {
                const StateId next = L.state(h + 1, j);
                const double pn = mdp.transition(x, a, next);
                if (pn == 0.0) continue;
                rec(next, prob * pa * pn);
            }
            path.pop_back();
        }
    };
    rec(L.initial_state(), 1.0);
}

} // namespace

OccupancyMeasure oracle_occupancy_enum(const LayeredMDP& mdp, const Policy& policy) {
    OccupancyMeasure q{StateActionTable(mdp.num_states(), mdp.num_actions())};
    enumerate_paths(mdp, policy, [&](double prob, const auto& path) {
        for (const auto& [x, a] : path) q.q(x, a) += prob;
    });
    return q;
}

double oracle_path_value(const LayeredMDP& mdp, const Policy& policy, const StateActionTable& loss) {
    double v = 0.0;
    enumerate_paths(mdp, policy, [&](double prob, const auto& path) {
        double total = 0.0;
        for (const auto& [x, a] : path) total += loss(x, a);
        v += prob * total;
    });
    return v;
}

double oracle_best_deterministic(const LayeredMDP& mdp, const StateActionTable& loss) {
    const auto& L = mdp.layers();
    const std::size_t S = L.num_decision_states(), A = L.num_actions();
    if (std::pow(static_cast<double>(A), static_cast<double>(S)) > 2e6)
        throw InputError("too many deterministic policies to enumerate");
    std::vector<ActionId> choice(L.num_states(), 0);
    double best = std::numeric_limits<double>::infinity();
    for (;;) {
        best = std::min(best, oracle_path_value(mdp, Policy::deterministic(L, choice), loss));
        std::size_t i = 0;
        while (i < S && ++choice[i] == A) choice[i++] = 0;
        if (i == S) break;
    }
    return best;
}

StateActionTable oracle_dilated_solve(const LayeredMDP& mdp, const Policy& policy,
                                      const StateActionTable& bonus, double dilation) {
    const auto& L = mdp.layers();
    const std::size_t A = L.num_actions();
    const auto n = static_cast<Eigen::Index>(L.num_states() * A);
    Matrix K = Matrix::Identity(n, n);
    Vector rhs = Vector::Zero(n);
    for (StateId x = 0; x < L.num_decision_states(); ++x)
        for (ActionId a = 0; a < A; ++a) {
            const auto row = static_cast<Eigen::Index>(x * A + a);
            rhs[row] = bonus(x, a);
            for (StateId y = 0; y < L.num_states(); ++y) {
                const double p = mdp.transition(x, a, y);
                if (p == 0.0) continue;
                for (ActionId b = 0; b < A; ++b)
                    K(row, static_cast<Eigen::Index>(y * A + b)) -= dilation * p * policy(y, b);
            }
        }
    const Vector sol = K.fullPivLu().solve(rhs);
    StateActionTable out(L.num_states(), A);
    for (Eigen::Index i = 0; i < n; ++i) out.values()[static_cast<std::size_t>(i)] = sol[i];
    return out;
}

double oracle_occupancy_bound(const Policy& policy, const ConfidenceSet& conf, StateId x,
                              ActionId a, Optimize objective, std::size_t max_kernels) {
    const auto& L = conf.layers();
    const std::size_t A = L.num_actions();
    const std::size_t hx = L.layer_of(x);
    // rows that can influence reaching layer hx: every (y,b) with y above it
    std::vector<std::pair<StateId, ActionId>> rows;
    std::vector<std::vector<std::vector<double>>> options;
    double combos = 1.0;
    for (StateId y = 0; y < L.first_state(hx); ++y)
        for (ActionId b = 0; b < A; ++b) {
            if (policy(y, b) == 0.0) continue;
            rows.emplace_back(y, b);
            options.push_back(oracle_polytope_vertices(conf.center(y, b), conf.width(y, b)));
            combos *= static_cast<double>(options.back().size());
        }
    if (combos > static_cast<double>(max_kernels)) throw InputError("too many vertex kernels");

    std::vector<std::size_t> pick(rows.size(), 0);
    double best = objective == Optimize::max ? -1.0 : 2.0;
    for (;;) {
        // forward reach probabilities under the chosen vertex rows
        std::vector<double> reach(L.num_states(), 0.0);
        reach[L.initial_state()] = 1.0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto [y, b] = rows[r];
            const std::size_t h = L.layer_of(y);
            const auto& p = options[r][pick[r]];
            for (std::size_t j = 0; j < p.size(); ++j)
                reach[L.state(h + 1, j)] += reach[y] * policy(y, b) * p[j];
        }
        const double v = reach[x] * policy(x, a);
        best = objective == Optimize::max ? std::max(best, v) : std::min(best, v);
        std::size_t i = 0;
        while (i < rows.size() && ++pick[i] == options[i].size()) pick[i++] = 0;
        if (i == rows.size()) break;
    }
    return best;
}

Matrix oracle_expected_sigma_plus(const FeatureLaw& law, double gamma, std::size_t N, double c) {
    const Matrix Y = gamma * Matrix::Identity(law.support.front().size(), law.support.front().size()) +
                     law.second_moment();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Y);
    Vector g(Y.rows());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double lam = eig.eigenvalues()[i];
        // c sum_{n=0}^{N} (1 - c lam)^n, in closed form when lam > 0
        g[i] = lam > 1e-300 ? (1.0 - std::pow(1.0 - c * lam, static_cast<double>(N + 1))) / lam
                            : c * static_cast<double>(N + 1);
    }
    return eig.eigenvectors() * g.asDiagonal() * eig.eigenvectors().transpose();
}

Matrix oracle_regularized_inverse(const FeatureLaw& law, double gamma) {
    const auto d = law.support.front().size();
    const Matrix Y = gamma * Matrix::Identity(d, d) + law.second_moment();
    return Y.inverse();
}

} // namespace dpo
