#include "dpo/features.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace dpo {

FeatureMap::FeatureMap(LayerStructure layers, std::size_t dim, std::vector<Vector> phi)
    : layers_(std::move(layers)), dim_(dim), phi_(std::move(phi)) {
    if (phi_.size() != layers_.num_states() * layers_.num_actions())
        throw StructuralError("feature table has " + std::to_string(phi_.size()) +
                              " entries, expected " +
                              std::to_string(layers_.num_states() * layers_.num_actions()));
    for (const auto& v : phi_) {
        if (static_cast<std::size_t>(v.size()) != dim_)
            throw StructuralError("feature vector of wrong dimension");
        if (v.norm() > 1.0 + 1e-12) throw InputError("feature vector with norm above 1");
    }
}

FeatureMap FeatureMap::one_hot(const LayerStructure& layers) {
    const std::size_t A = layers.num_actions();
    const std::size_t d = layers.num_decision_states() * A;
    std::vector<Vector> phi(layers.num_states() * A, Vector::Zero(static_cast<Eigen::Index>(d)));
    for (StateId x = 0; x < layers.num_decision_states(); ++x)
        for (ActionId a = 0; a < A; ++a) phi[x * A + a][static_cast<Eigen::Index>(x * A + a)] = 1.0;
    return FeatureMap(layers, d, std::move(phi));
}

Matrix FeatureLaw::second_moment() const {
    const auto d = support.empty() ? 0 : support.front().size();
    Matrix S = Matrix::Zero(d, d);
    for (std::size_t i = 0; i < support.size(); ++i)
        S.noalias() += weights[i] * support[i] * support[i].transpose();
    return S;
}

std::vector<FeatureLaw> feature_laws(const LayeredMDP& mdp, const FeatureMap& features,
                                     const Policy& policy) {
    const auto& L = mdp.layers();
    const auto q = occupancy(mdp, policy);
    std::vector<FeatureLaw> laws(L.horizon());
    for (std::size_t h = 0; h < L.horizon(); ++h)
        for (std::size_t i = 0; i < L.layer_size(h); ++i) {
            const StateId x = L.state(h, i);
            for (ActionId a = 0; a < L.num_actions(); ++a) {
                if (q(x, a) <= 0.0) continue;
                laws[h].support.push_back(features(x, a));
                laws[h].weights.push_back(q(x, a));
            }
        }
    return laws;
}

double op_norm_symmetric(const Matrix& M) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(M, Eigen::EigenvaluesOnly);
    const auto& ev = solver.eigenvalues();
    return std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
}

double min_eigenvalue(const Matrix& M) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(M, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

} // namespace dpo
