#pragma once

#include "pmm/training.hpp"

#include <string_view>

namespace pmm {

// ---------------------------------------------------------------------------
// Spin operators on N qubits. Site 0 is the most significant tensor factor and
// basis state bit 0 is spin up (σᶻ = +1), so |↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩ for N = 2.

enum class Pauli { X, Y, Z };

inline constexpr Index kMaxSpinSites = 12;

CMatrix pauli_operator(Index sites, Index site, Pauli op);
/// σ^a_i σ^b_j for i ≠ j.
CMatrix pauli_product(Index sites, Index i, Pauli a, Index j, Pauli b);
/// σ_i·σ_j = σˣσˣ + σʸσʸ + σᶻσᶻ.
CMatrix exchange_operator(Index sites, Index i, Index j);
/// σˣ_i σʸ_j − σʸ_i σˣ_j.
CMatrix dm_operator(Index sites, Index i, Index j);

// ---------------------------------------------------------------------------
// Non-interacting spins: H(c) = (1/2N) Σ_i (σᶻ_i + c·σˣ_i)

double noninteracting_spin_energy(Index sites, double c);
/// H₀ = (1/2N)Σσᶻ and H₁ = (1/2N)Σσˣ, so H(c) = H₀ + c·H₁.
std::pair<HermitianMatrix, HermitianMatrix> noninteracting_spin_components(Index sites);
HermitianMatrix noninteracting_spin_hamiltonian(Index sites, double c);

// ---------------------------------------------------------------------------
// Anharmonic oscillator: H(g) = a†a + g·A⁴ with A the truncated ladder sum

struct AHOSpec {
  Index n_max = 100;
  double g = 0.0;
};

/// Truncated A = a + a† on Nmax + 1 oscillator states.
RMatrix aho_ladder(Index n_max);
/// (diag(0…Nmax), A⁴)
std::pair<HermitianMatrix, HermitianMatrix> aho_components(Index n_max);
HermitianMatrix aho_hamiltonian(const AHOSpec& spec);

// ---------------------------------------------------------------------------
// Heisenberg chains

enum class ChainVariant { Nnn, Dm };
std::string_view to_string(ChainVariant variant);
ChainVariant chain_variant_from_string(std::string_view name);

struct SpinChainSpec {
  Index sites = 8;
  double B = 1.0;
  double J1 = 1.0;     ///< J for the DM variant
  double J2 = 0.5;     ///< next-to-nearest coupling (nnn)
  double D_dm = 0.5;   ///< DM strength (dm)
  RVector r;           ///< site fields in [0, 1)

  /// r_i drawn from the "r_i" substream of `seed`.
  static SpinChainSpec with_seed(Index sites, std::uint64_t seed);
  void validate() const;
};

/// The five Trotter terms in product order: H_B, H⁰_J1, H¹_J1, then H⁰_J2, H¹_J2
/// (nnn) or H⁰_D, H¹_D (dm). Even|odd means 0-based parity of the first site,
/// bonds wrap periodically.
std::vector<HermitianMatrix> heisenberg_terms(const SpinChainSpec& spec, ChainVariant variant);
HermitianMatrix heisenberg_hamiltonian(const SpinChainSpec& spec, ChainVariant variant);

/// Caches the eigendecompositions of the Trotter terms for repeated evaluation.
class TrotterOracle {
 public:
  TrotterOracle(const SpinChainSpec& spec, ChainVariant variant);

  UnitaryMatrix unitary(double dt) const;
  /// Lowest k eigenphase energies; dt = 0 gives the exact spectrum.
  RVector energies(double dt, Index k) const;
  RVector exact(Index k) const;
  Index dim() const { return dim_; }

 private:
  Index dim_;
  std::vector<EigenDecomposition> terms_;
  RVector exact_;
};

UnitaryMatrix trotter_unitary(const SpinChainSpec& spec, ChainVariant variant, double dt);
RVector trotter_energies(const SpinChainSpec& spec, ChainVariant variant, double dt, Index k);

// ---------------------------------------------------------------------------
// LMG: H(c) = −S_z − (2c/N)(S_x² − S_y²/2) in the S = N/2 multiplet (m = −S … S)

struct LMGSpec {
  Index sites = 100;
  double c = 0.0;
};

struct AngularMomentum {
  RMatrix sx, sz;
  CMatrix sy;
};
AngularMomentum angular_momentum(Index sites);
/// (−S_z, −(2/N)(S_x² − S_y²/2)) so H(c) = H₀ + c·H₁.
std::pair<HermitianMatrix, HermitianMatrix> lmg_components(Index sites);
HermitianMatrix lmg_hamiltonian(const LMGSpec& spec);
/// Lowest `k` energies.
RVector lmg_energies(const LMGSpec& spec, Index k);
/// Ground-state eigenvalue of H(c) at complex c (lowest by sort_complex).
Complex lmg_complex_ground(Index sites, Complex c);

struct LmgObservables {
  double sx2_over_n2 = 0.0;
  double sz_over_n = 0.0;
};
LmgObservables lmg_observables(const LMGSpec& spec);

// ---------------------------------------------------------------------------
// Datasets

struct DatasetSplits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// `count` evenly spaced points on [lo, hi] (endpoints included).
RVector linspace(double lo, double hi, Index count);
/// Grid points that do not coincide (within 1e-12) with any point of `exclude`.
RVector grid_excluding(const RVector& grid, const RVector& exclude);

enum class LmgObservable { Sx2, Sz };

/// Physics presets: fig1_spin, fig2_aho, fig3_trotter, s_trotter_dm,
/// s_lmg_energies, s_lmg_observables (⟨S_x²⟩/N²), s_lmg_complex.
DatasetSplits make_dataset(std::string_view preset, std::uint64_t seed = 0);
/// Observable splits for the LMG model: 20 training c on [0, 0.4] ∪ [0.6, 1]
/// (⟨S_x²⟩/N²) or [0, 0.4] ∪ [0.55, 1] (⟨S_z⟩/N); test covers [0, 1].
DatasetSplits lmg_observable_splits(LmgObservable which, Index sites = 100);

}  // namespace pmm
