#pragma once

#include "dpo/mdp.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace dpo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// phi(x,a) in R^d for every pair; the terminal rows are zero.
class FeatureMap {
public:
    FeatureMap() = default;
    /// `phi[x * A + a]`, one entry per pair including the terminal state.
    /// Throws InputError when some ||phi|| exceeds 1 by more than 1e-12.
    FeatureMap(LayerStructure layers, std::size_t dim, std::vector<Vector> phi);

    /// e_{(x,a)} for non-terminal pairs, d = (|X| - 1) |A|.
    static FeatureMap one_hot(const LayerStructure& layers);

    const LayerStructure& layers() const { return layers_; }
    std::size_t dim() const { return dim_; }
    const Vector& operator()(StateId x, ActionId a) const {
        return phi_[x * layers_.num_actions() + a];
    }

    /// ||phi(x,a)||^2_M.
    double quad(StateId x, ActionId a, const Matrix& M) const {
        const Vector& v = (*this)(x, a);
        return v.dot(M * v);
    }

private:
    LayerStructure layers_;
    std::size_t dim_ = 0;
    std::vector<Vector> phi_;
};

/// Sampling access to the transition kernel; counts every draw.
class Simulator {
public:
    explicit Simulator(const LayeredMDP& mdp) : mdp_(&mdp) {}

    StateId next(StateId x, ActionId a, Rng& rng) {
        ++calls_;
        return mdp_->sample_next(x, a, rng);
    }

    const LayerStructure& layers() const { return mdp_->layers(); }
    std::size_t calls() const { return calls_; }

private:
    const LayeredMDP* mdp_;
    std::size_t calls_ = 0;
};

/// Per-layer law of phi(x_h, a_h) under a policy: pairs and their probabilities.
struct FeatureLaw {
    std::vector<Vector> support;
    std::vector<double> weights;

    /// E[phi phi^T].
    Matrix second_moment() const;
};

/// The law of phi(x_h, a_h) under `policy` for every layer h < H, computed
/// from the exact occupancy.
std::vector<FeatureLaw> feature_laws(const LayeredMDP& mdp, const FeatureMap& features,
                                     const Policy& policy);

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
double op_norm_symmetric(const Matrix& M);
/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& M);

} // namespace dpo
