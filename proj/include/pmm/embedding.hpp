#pragma once

#include "pmm/gradients.hpp"

namespace pmm {

/// Conditional probabilities p_{j|i} ∝ exp(−d²_ij / 2σ²) for one point whose
/// bandwidth σ is bisected until 2^H(p) = perplexity (|ΔH| ≤ 1e-5, 50 iterations).
///
/// `distances_sq` excludes the point itself. On non-convergence the best row found
/// is returned and a warning is emitted.
RVector perplexity_search(const RVector& distances_sq, double perplexity);

/// Pairwise squared Euclidean distances between rows.
RMatrix pairwise_squared_distances(const RMatrix& points);

/// Symmetrized, normalized input affinities P = (P_{j|i} + P_{i|j}) / 2m.
RMatrix joint_probabilities(const RMatrix& points, double perplexity);

/// Student-t (one degree of freedom) affinities on the embedding, normalized over i ≠ j.
RMatrix student_t_affinities(const RMatrix& embedding);

inline constexpr double kProbabilityFloor = 1e-12;

/// Σ_{i≠j} P log(P / Q) with P floored at kProbabilityFloor.
double kl_divergence(const RMatrix& p, const RMatrix& q);

/// KL loss and its gradient with respect to each embedding coordinate (m × 2).
struct EmbeddingLoss {
  double value = 0.0;
  RMatrix gradient;
};
EmbeddingLoss kl_embedding_objective(const RMatrix& p, const RMatrix& embedding);

/// KL embedding loss for a tensor-network PMM on a batch with precomputed P.
LossValue kl_embedding_loss(const TensorNetworkPMM& model, const RMatrix& images, const RMatrix& p,
                            bool with_gradient = true);
/// Same for an explicit affine PMM (couplings per pixel, interior-pair selector).
LossValue kl_embedding_loss(const AffinePMM& model, const RMatrix& images, const RMatrix& p,
                            bool with_gradient = true);

/// Principal components fitted on rows of `train`.
struct PcaModel {
  RVector mean;
  RMatrix components;  ///< features × k
};
PcaModel pca_fit(const RMatrix& train, Index components = 2);
RMatrix pca_transform(const PcaModel& model, const RMatrix& points);

}  // namespace pmm
