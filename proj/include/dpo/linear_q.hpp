#pragma once

#include "dpo/features.hpp"
#include "dpo/geometric_resampling.hpp"
#include "dpo/mdp.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace dpo {

class LossSchedule;
struct ExperimentRecord;

/// Stream tags for Rng::derive in the linear learners.
enum RngTag : std::uint64_t { kEpisode = 1, kResample = 2, kBonus = 3, kExplore = 4 };

/// Policy history and sampled dilated bonuses of the linear-Q learner.
///
/// pi_t(a|x) is proportional to exp(-eta sum_{s<t} (phi(x,a)^T theta_s - Bonus(s,x,a)))
/// and is only materialized at the states where it is asked for. Each
/// Bonus(s,x,a) draws its next state and action from its own stream
/// root.derive({kBonus, s, x, a}) and is cached, so every value is the same
/// whatever order the queries arrive in.
class LinearQLearner {
public:
    LinearQLearner(const LayeredMDP& mdp, const FeatureMap& features, double eta, double beta,
                   std::uint64_t seed);

    /// Number of finished episodes whose estimates have been pushed.
    std::size_t episodes() const { return sigma_plus_.size(); }

    /// Registers Sigma^+_t and theta_t for episode t = episodes() + 1.
    void push_episode(CovInverseEstimate sigma_plus, std::vector<Vector> theta);

    /// pi_t(.|x) for 1 <= t <= episodes() + 1. The span is valid until the next call.
    std::span<const double> policy_row(std::size_t t, StateId x);
    /// pi_t at every state.
    Policy policy(std::size_t t);
    /// Samples from pi_t.
    ActionChooser chooser(std::size_t t);

    /// Bonus(t,x,a) for 1 <= t <= episodes(); zero at the terminal state.
    double bonus(std::size_t t, StateId x, ActionId a);
    bool has_bonus(std::size_t t, StateId x, ActionId a) const;

    const CovInverseEstimate& sigma_plus(std::size_t t) const { return sigma_plus_[t - 1]; }
    const std::vector<Vector>& theta(std::size_t t) const { return theta_[t - 1]; }

    /// Simulator used by the bonus recursion.
    Simulator& simulator() { return simulator_; }
    const FeatureMap& features() const { return *features_; }
    double dilation() const { return dilation_; }

private:
    struct StateCache {
        std::vector<double> rows;       // pi_1..pi_k, A entries each
        std::vector<double> cumulative; // running score through episode k-1
        std::vector<double> memo;       // Bonus(s,x,.) for s = 1.., NaN when absent
        std::vector<double> quad;       // beta-free ||phi(x,.)||^2 under Sigma^+_s
    };

    void extend(StateId x, std::size_t t);
    const double* quad_row(std::size_t s, StateId x);

    const LayeredMDP* mdp_;
    const FeatureMap* features_;
    Simulator simulator_;
    double eta_;
    double beta_;
    double dilation_;
    Rng root_;
    std::vector<CovInverseEstimate> sigma_plus_;
    std::vector<std::vector<Vector>> theta_;
    std::vector<StateCache> cache_;
};

/// theta = weight * Sigma^+_h phi(x_h, a_h) L_h.
Vector theta_estimate(const Matrix& sigma_plus, const FeatureMap& features,
                      const Trajectory& trajectory, std::size_t h, double weight = 1.0);

/// Policy run on an explore episode: `exploratory` on layers 0..h_star,
/// `policy` afterwards.
Policy explore_rollin(const LayerStructure& layers, const Policy& exploratory, const Policy& policy,
                      std::size_t h_star);

/// (1 - explore) + explore * H * 1[h = h*].
double estimator_weight(bool explore, std::size_t h, std::size_t h_star, std::size_t horizon);

struct LinearQParams {
    std::optional<double> gamma;   // default (dT)^{-2/3}
    std::optional<double> beta;    // default H (dT)^{-1/3}
    std::optional<double> eta;     // default min{gamma/(2H), 3 beta/(8H^2), gamma/(12 beta H^2)}
    std::optional<double> epsilon; // default 1/(H^3 T)
    std::optional<std::size_t> M;  // default ceil(24 ln(dHT)/(eps^2 gamma^2))
    std::optional<std::size_t> N;  // default ceil((2/gamma) ln(1/(eps gamma)))
    /// Upper limit applied to N after defaults; 0 disables it.
    std::size_t N_cap = 0;
};

struct ResolvedLinearQParams {
    double gamma, beta, eta, epsilon;
    std::size_t M, N;
};

/// Throws ConfigError when M*N exceeds 1e8 resampling paths per episode.
ResolvedLinearQParams resolve(const LinearQParams& params, std::size_t d, std::size_t H,
                              std::size_t T);

struct ExploratoryParams {
    std::optional<double> lambda_min; // default: exact min_h lambda_min of the exploratory covariance
    std::optional<double> delta_e;    // default min{sqrt(H^2/(lambda T (lambda d H + 1))), 1/2}
    std::optional<double> epsilon;    // default 1/(H^4 T)
    std::optional<double> eta;        // default min{r'/(4H^2), sqrt(r'/(48 H^5))}, r' = delta_e lambda/ln(1/r)
    std::optional<double> beta;       // default 2 eta H^3
    std::optional<std::size_t> M;
    std::optional<std::size_t> N;
    std::size_t N_cap = 0;
    /// Exploratory policy; uniform when absent.
    std::optional<Policy> exploratory;
};

struct ResolvedExploratoryParams {
    double lambda_min, delta_e, epsilon, eta, beta;
    std::size_t M, N;
};

ResolvedExploratoryParams resolve(const ExploratoryParams& params, const LayeredMDP& mdp,
                                  const FeatureMap& features, std::size_t T);

struct LinearQDiagnostics {
    std::size_t theta_guard_violations = 0; // eta |phi^T theta| > 1/2
    std::size_t bonus_guard_violations = 0; // eta Bonus > 1/(2H)
    std::size_t op_norm_violations = 0;     // ||Sigma^+|| above its deterministic bound
    double max_eta_theta = 0.0;
    double max_eta_bonus = 0.0;
    double max_op_norm = 0.0;
    std::size_t simulator_calls = 0;
    std::size_t diagnostic_calls = 0;
};

/// The linear-Q learner with a simulator. The true mdp doubles as the
/// simulator; exact values are computed from it for the record only.
ExperimentRecord run_linear_q(const LayeredMDP& mdp, const FeatureMap& features,
                              const LossSchedule& schedule, std::size_t T,
                              const LinearQParams& params, std::uint64_t seed,
                              LinearQDiagnostics* diagnostics = nullptr);

/// Variant with an exploratory policy: explore episodes roll in with the
/// exploratory policy through layer h* (inclusive) and follow pi_t afterwards.
ExperimentRecord run_linear_q_exploratory(const LayeredMDP& mdp, const FeatureMap& features,
                                          const LossSchedule& schedule, std::size_t T,
                                          const ExploratoryParams& params, std::uint64_t seed,
                                          LinearQDiagnostics* diagnostics = nullptr);

} // namespace dpo
