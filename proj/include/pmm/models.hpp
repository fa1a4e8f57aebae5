#pragma once

#include "pmm/hermitian.hpp"

#include <unsupported/Eigen/CXX11/Tensor>

#include <vector>

namespace pmm {

using Tensor3 = Eigen::Tensor<double, 3>;

/// Which eigenvalues of M(c) an affine model reports.
struct OutputSelector {
  enum class Kind { LowestK, InteriorPair };
  Kind kind = Kind::LowestK;
  Index k = 1;

  static OutputSelector lowest(Index k) { return {Kind::LowestK, k}; }
  static OutputSelector interior_pair() { return {Kind::InteriorPair, 2}; }

  Index count() const { return kind == Kind::InteriorPair ? 2 : k; }
  /// Ascending-spectrum indices selected for an n×n matrix.
  std::vector<Index> indices(Index dim) const;
};

/// M(c) = D + Σ_i c_i·M_i with real-diagonal D.
struct AffinePMM {
  Index dim = 0;
  PackedParams diag;                    ///< real-diagonal
  std::vector<PackedParams> couplings;  ///< one per input feature
  OutputSelector selector = OutputSelector::lowest(1);

  Index num_features() const { return static_cast<Index>(couplings.size()); }
  Index num_params() const;
};

/// U_M(dt) = exp(−i·M_1·dt)·exp(−i·M_2·dt)···exp(−i·M_L·dt), factors in stored order.
struct UnitaryProductPMM {
  Index dim = 0;
  std::vector<PackedParams> factors;  ///< complex-hermitian
  Index n_levels = 1;

  Index num_params() const;
};

/// Affine PMM over p×q images whose coupling matrices M_ij are drawn from a
/// three-tensor network: S_ijk = Σ_t Σ_{u,v} P_itu·N_ukv·Q_vtj.
///
/// Slice S_ij· is read as the packed entries (entry_mode) of M_ij, so
/// K = packed_length(n, entry_mode).
struct TensorNetworkPMM {
  Index rows = 0;       ///< p
  Index cols = 0;       ///< q
  Index dim = 0;        ///< n
  Index pixel_bond = 0; ///< d
  Index bond = 0;       ///< D
  PackMode entry_mode = PackMode::RealSymmetric;
  Tensor3 P;  ///< p × d × D
  Tensor3 N;  ///< D × K × D
  Tensor3 Q;  ///< D × d × q
  PackedParams diag;  ///< real-diagonal, length n

  Index entries_per_matrix() const { return packed_length(dim, entry_mode); }
  Index num_params() const;
  /// Values held by an unfactorized model: p·q·K coupling entries plus the diagonal.
  Index full_representation_count() const;

  static TensorNetworkPMM zeros(Index rows, Index cols, Index dim, Index pixel_bond, Index bond,
                                PackMode entry_mode = PackMode::RealSymmetric);
};

/// Learned observable ⟨ψ₀(c)|O|ψ₀(c)⟩ on a host affine model's ground state.
struct ObservableModel {
  PackedParams O;  ///< complex-hermitian
};

// ---------------------------------------------------------------------------
// Affine family

HermitianMatrix affine_eval(const AffinePMM& model, const RVector& c);
RVector affine_outputs(const AffinePMM& model, const RVector& c);
/// Spectrum of the generally non-Hermitian D + Σ c_i·M_i, sorted by sort_complex.
CVector affine_eval_complex(const AffinePMM& model, const CVector& c);

/// Folds feature/target normalization into the parameters: a model trained on
/// (c / input_scale, E / output_scale) becomes one that maps c to E directly.
AffinePMM rescale(const AffinePMM& model, const RVector& input_scale, double output_scale);

// ---------------------------------------------------------------------------
// Unitary product family

UnitaryMatrix unitary_product_eval(const UnitaryProductPMM& model, double dt);
/// Lowest n_levels eigenphase energies; at dt = 0 the spectrum of Σ_j M_j.
RVector unitary_product_energies(const UnitaryProductPMM& model, double dt);
HermitianMatrix unitary_product_generator(const UnitaryProductPMM& model);
/// Model for energies measured in units of `energy_scale`; see rescale(AffinePMM).
UnitaryProductPMM rescale(const UnitaryProductPMM& model, double energy_scale);

/// Largest |E·dt| beyond which eigenphase recovery is flagged as wrap-prone.
inline constexpr double kPhaseWrapLimit = 0.9 * 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Tensor-network family

/// S as a p × q × K tensor.
Tensor3 tn_expand_tensor(const TensorNetworkPMM& model);
/// S reshaped to (p·q) × K, row i·q + j holding the packed entries of M_ij.
RMatrix tn_coupling_matrix(const TensorNetworkPMM& model);
/// The p·q coupling matrices in row-major pixel order (i·q + j).
std::vector<PackedParams> tn_expand(const TensorNetworkPMM& model);
/// Equivalent AffinePMM with p·q explicit couplings and an interior-pair selector.
AffinePMM tn_to_affine(const TensorNetworkPMM& model);

/// M(c) for a flattened (row-major) image.
HermitianMatrix tn_eval(const TensorNetworkPMM& model, const RVector& image);
RVector tn_affine_outputs(const TensorNetworkPMM& model, const RVector& image);

/// Interior-pair embedding for every row of `images` given a precomputed expansion.
RMatrix tn_embed(const TensorNetworkPMM& model, const RMatrix& images);

// ---------------------------------------------------------------------------
// Observables

/// Non-degenerate ground eigenpair of the host at c; throws DegenerateLevelError.
struct GroundState {
  double energy;
  CVector vector;
  double gap;
};
GroundState ground_state(const HermitianMatrix& m);

double observable_expectation(const AffinePMM& host, const ObservableModel& obs, const RVector& c);

// ---------------------------------------------------------------------------
// Flat parameter views
//
// flatten concatenates every trainable PackedParams (or tensor) in storage
// order; unflatten is its inverse on a model of the same shape. Gradient
// vectors use the same layout.
//
//   AffinePMM:         diag, couplings[0], couplings[1], ...
//   UnitaryProductPMM: factors[0], factors[1], ...
//   TensorNetworkPMM:  P, N, Q (column-major tensor storage), diag
//   ObservableModel:   O

RVector flatten(const AffinePMM& model);
RVector flatten(const UnitaryProductPMM& model);
RVector flatten(const TensorNetworkPMM& model);
RVector flatten(const ObservableModel& model);

AffinePMM unflatten(const AffinePMM& shape, const RVector& params);
UnitaryProductPMM unflatten(const UnitaryProductPMM& shape, const RVector& params);
TensorNetworkPMM unflatten(const TensorNetworkPMM& shape, const RVector& params);
ObservableModel unflatten(const ObservableModel& shape, const RVector& params);

}  // namespace pmm
