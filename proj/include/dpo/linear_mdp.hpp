#pragma once

#include "dpo/features.hpp"
#include "dpo/geometric_resampling.hpp"
#include "dpo/mdp.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dpo {

class LossSchedule;
struct ExperimentRecord;

/// 0 if y <= -z, 1 if y >= 0, y/z + 1 in between. Throws InputError when z <= 0.
double ramp(double z, double y);

/// Mixture of greedy LSVI policies that spreads feature mass over every direction.
struct PolicyCover {
    std::vector<Policy> policies;           // pi_1..pi_{M0}, one-hot rows
    std::vector<Matrix> sigma_cov;          // Gamma_{M0+1,h} / M0 per layer
    std::vector<std::vector<Matrix>> gamma; // gamma[m][h] = Gamma_{m+1,h}, m = 0..M0
    std::size_t M0 = 0;
    std::size_t N0 = 0;
    double alpha = 0.0;
    double xi = 0.0;

    MixturePolicy mixture() const { return MixturePolicy::uniform(policies); }
};

/// Runs one real episode of `policy`; `index` counts cover episodes from 0.
using EpisodeRunner = std::function<Trajectory(const Policy& policy, std::size_t index)>;

/// Runner that samples `mdp` with zero losses from root.derive({kEpisode, index + 1}).
EpisodeRunner zero_loss_runner(const LayeredMDP& mdp, std::uint64_t seed);

/// Builds the cover from M0 * N0 real episodes. `ramp_width` is the ramp
/// parameter of the exploration reward (1/T in the algorithm).
PolicyCover policy_cover(const LayerStructure& layers, const FeatureMap& features, std::size_t M0,
                         std::size_t N0, double alpha, double xi, double ramp_width,
                         const EpisodeRunner& run);

/// Gamma/M0 built from M0 * N0 episodes of one fixed policy, for comparison
/// with a cover at the same sample budget.
std::vector<Matrix> fixed_policy_covariance(const LayerStructure& layers, const FeatureMap& features,
                                            const Policy& policy, std::size_t M0, std::size_t N0,
                                            const EpisodeRunner& run);

/// x is known iff ||phi(x,a)||^2 under the inverse cover covariance is at
/// most alpha for every action.
class KnownSet {
public:
    KnownSet() = default;
    /// Throws StructuralError when some covariance is not positive definite.
    KnownSet(const std::vector<Matrix>& sigma_cov, const FeatureMap& features, double alpha);

    bool operator()(StateId x) const { return known_[x] != 0; }
    std::size_t size() const;

private:
    std::vector<char> known_;
};

/// Pr[x_h not in K] under `policy` for every layer h < H.
std::vector<double> unknown_probability(const LayeredMDP& mdp, const KnownSet& known,
                                        const Policy& policy);

/// One episode of the second half of an epoch, with its estimator weight inputs.
struct WeightedEpisode {
    Trajectory trajectory;
    bool explore = false;
    std::size_t h_star = 0;
};

/// D_h = sum_{i > h} dilation^{i-h} b(x_i, a_i).
double dilated_tail(const Trajectory& trajectory, const StateActionTable& bonus, std::size_t h,
                    double dilation);

/// Sigma^+_h (1/|S'|) sum w phi(x_h,a_h) D_h.
Vector lambda_estimate(const Matrix& sigma_plus, const FeatureMap& features,
                       const std::vector<WeightedEpisode>& episodes, const StateActionTable& bonus,
                       std::size_t h);

/// Sigma^+_h (1/|S'|) sum w phi(x_h,a_h) L_h.
Vector theta_estimate_batch(const Matrix& sigma_plus, const FeatureMap& features,
                            const std::vector<WeightedEpisode>& episodes, std::size_t h);

/// b(x,a) = (beta ||phi(x,a)||^2 + beta E_{a'~pi} ||phi(x,a')||^2) 1[x in K],
/// norms under Sigma^+_h; zero at the terminal state.
StateActionTable gated_bonus(const FeatureMap& features, const CovInverseEstimate& sigma_plus,
                             const Policy& policy, const KnownSet& known, double beta);

struct LinearMDPParams {
    std::optional<double> delta_e; // default 0.1; 0 disables exploration
    std::optional<double> beta;    // default 0.03
    std::optional<double> gamma;   // default 36 beta^2 / delta_e
    std::optional<double> eta;     // default min{gamma/(16 H^4), beta/(40 H^4)}
    std::optional<double> epsilon; // default 0.1
    double delta = 0.01;
    std::optional<std::size_t> M;  // default ceil(96 ln(dHT)/(eps^2 gamma^2))
    std::optional<std::size_t> N;  // default ceil((2/gamma) ln(1/(eps gamma)))
    std::size_t N_cap = 0;
    std::optional<std::size_t> M0; // default ceil(alpha^2 d H^2)
    std::optional<std::size_t> N0; // default 100 M0^4 log(T/delta) / alpha^2
    std::optional<double> xi;      // default 60 d H sqrt(log(T/delta))
};

struct ResolvedLinearMDPParams {
    double delta_e, beta, gamma, eta, epsilon, delta, alpha, xi;
    std::size_t M, N, W, M0, N0, T0;
};

/// Throws ConfigError when T < T0 + W.
ResolvedLinearMDPParams resolve(const LinearMDPParams& params, std::size_t d, std::size_t H,
                                std::size_t T);

struct LinearMDPDiagnostics {
    double max_b_known_visited = 0.0; // max b_k over visited known pairs
    double max_b = 0.0;               // max b_k over every pair
    std::size_t epochs = 0;
    std::size_t gate_violations = 0;  // b_k nonzero at an unknown state
    std::size_t known_states = 0;
    std::size_t known_visits = 0;     // visited pairs at known states
    std::vector<double> lambda_min_cov;
    /// gamma >= 36 beta^2/delta_e, beta eps <= 1/8, eta/gamma <= 1/(16H^4), eta/beta <= 1/(40H^4)
    std::vector<std::string> warnings;
};

/// The linear-MDP learner with a policy cover; no simulator access.
ExperimentRecord run_linear_mdp(const LayeredMDP& mdp, const FeatureMap& features,
                                const LossSchedule& schedule, std::size_t T,
                                const LinearMDPParams& params, std::uint64_t seed,
                                LinearMDPDiagnostics* diagnostics = nullptr);

} // namespace dpo
