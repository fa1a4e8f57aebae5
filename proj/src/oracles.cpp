#include "pmm/oracles.hpp"

#include <cmath>
#include <sstream>

namespace pmm {

namespace {

Index spin_dim(Index sites)
{
  require(sites >= 1 && sites <= kMaxSpinSites, ErrorCode::InvalidArgument,
          "spin systems are limited to 1..12 sites");
  return Index(1) << sites;
}

void check_site(Index sites, Index site)
{
  require(site >= 0 && site < sites, ErrorCode::InvalidArgument, "site index out of range");
}

/// Applies σ^op on `site` to basis state `state`; returns the amplitude and writes the image.
Complex apply_pauli(Index sites, Index site, Pauli op, Index state, Index& image)
{
  const Index bit = Index(1) << (sites - 1 - site);
  const bool down = (state & bit) != 0;
  switch (op) {
    case Pauli::X: image = state ^ bit; return 1.0;
    case Pauli::Y: image = state ^ bit; return down ? Complex(0.0, -1.0) : Complex(0.0, 1.0);
    case Pauli::Z: image = state; return down ? -1.0 : 1.0;
  }
  image = state;
  return 1.0;
}

}  // namespace

CMatrix pauli_operator(Index sites, Index site, Pauli op)
{
  const Index dim = spin_dim(sites);
  check_site(sites, site);
  CMatrix out = CMatrix::Zero(dim, dim);
  for (Index s = 0; s < dim; ++s) {
    Index image = 0;
    const Complex amp = apply_pauli(sites, site, op, s, image);
    out(image, s) += amp;
  }
  return out;
}

CMatrix pauli_product(Index sites, Index i, Pauli a, Index j, Pauli b)
{
  const Index dim = spin_dim(sites);
  check_site(sites, i);
  check_site(sites, j);
  require(i != j, ErrorCode::InvalidArgument, "two-site operator needs distinct sites");
  CMatrix out = CMatrix::Zero(dim, dim);
  for (Index s = 0; s < dim; ++s) {
    Index mid = 0, image = 0;
    const Complex first = apply_pauli(sites, j, b, s, mid);
    const Complex second = apply_pauli(sites, i, a, mid, image);
    out(image, s) += first * second;
  }
  return out;
}

CMatrix exchange_operator(Index sites, Index i, Index j)
{
  return pauli_product(sites, i, Pauli::X, j, Pauli::X) + pauli_product(sites, i, Pauli::Y, j, Pauli::Y) +
         pauli_product(sites, i, Pauli::Z, j, Pauli::Z);
}

CMatrix dm_operator(Index sites, Index i, Index j)
{
  return pauli_product(sites, i, Pauli::X, j, Pauli::Y) - pauli_product(sites, i, Pauli::Y, j, Pauli::X);
}

// ---------------------------------------------------------------------------

double noninteracting_spin_energy(Index sites, double c)
{
  require(sites >= 1, ErrorCode::InvalidArgument, "need at least one spin");
  return -0.5 * std::sqrt(1.0 + c * c);
}

std::pair<HermitianMatrix, HermitianMatrix> noninteracting_spin_components(Index sites)
{
  const Index dim = spin_dim(sites);
  CMatrix h0 = CMatrix::Zero(dim, dim), h1 = CMatrix::Zero(dim, dim);
  for (Index i = 0; i < sites; ++i) {
    h0 += pauli_operator(sites, i, Pauli::Z);
    h1 += pauli_operator(sites, i, Pauli::X);
  }
  const double scale = 1.0 / (2.0 * double(sites));
  return {HermitianMatrix::from_dense(CMatrix(scale * h0)), HermitianMatrix::from_dense(CMatrix(scale * h1))};
}

HermitianMatrix noninteracting_spin_hamiltonian(Index sites, double c)
{
  auto [h0, h1] = noninteracting_spin_components(sites);
  return h0 + c * h1;
}

// ---------------------------------------------------------------------------

RMatrix aho_ladder(Index n_max)
{
  require(n_max >= 2, ErrorCode::InvalidArgument, "Nmax must be at least 2");
  RMatrix a = RMatrix::Zero(n_max + 1, n_max + 1);
  for (Index n = 0; n < n_max; ++n) a(n, n + 1) = a(n + 1, n) = std::sqrt(double(n + 1));
  return a;
}

std::pair<HermitianMatrix, HermitianMatrix> aho_components(Index n_max)
{
  const RMatrix a = aho_ladder(n_max);
  const RMatrix a2 = a * a;
  RVector levels(n_max + 1);
  for (Index n = 0; n <= n_max; ++n) levels(n) = double(n);
  return {HermitianMatrix::diagonal(levels), HermitianMatrix::from_dense(RMatrix(a2 * a2))};
}

HermitianMatrix aho_hamiltonian(const AHOSpec& spec)
{
  auto [h0, a4] = aho_components(spec.n_max);
  return h0 + spec.g * a4;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ChainVariant variant) { return variant == ChainVariant::Nnn ? "nnn" : "dm"; }

ChainVariant chain_variant_from_string(std::string_view name)
{
  if (name == "nnn") return ChainVariant::Nnn;
  if (name == "dm") return ChainVariant::Dm;
  fail(ErrorCode::Config, "unknown chain variant '" + std::string(name) + "'");
}

SpinChainSpec SpinChainSpec::with_seed(Index sites, std::uint64_t seed)
{
  SpinChainSpec spec;
  spec.sites = sites;
  Rng rng = Rng(seed).substream("r_i");
  spec.r.resize(sites);
  for (Index i = 0; i < sites; ++i) spec.r(i) = rng.uniform();
  return spec;
}

void SpinChainSpec::validate() const
{
  spin_dim(sites);
  require(sites % 2 == 0, ErrorCode::InvalidArgument, "spin chains need an even number of sites");
  require(r.size() == sites, ErrorCode::LengthMismatch, "site field count differs from the number of sites");
}

std::vector<HermitianMatrix> heisenberg_terms(const SpinChainSpec& spec, ChainVariant variant)
{
  spec.validate();
  const Index n = spec.sites;
  const Index dim = spin_dim(n);
  std::vector<HermitianMatrix> terms;

  CMatrix hb = CMatrix::Zero(dim, dim);
  for (Index i = 0; i < n; ++i) hb += spec.B * spec.r(i) * pauli_operator(n, i, Pauli::Z);
  terms.push_back(HermitianMatrix::from_dense(hb));

  auto bonds = [&](Index parity, Index reach, auto&& op, double strength) {
    CMatrix h = CMatrix::Zero(dim, dim);
    for (Index i = parity; i < n; i += 2) {
      const Index j = (i + reach) % n;
      if (j != i) h += strength * op(n, i, j);  // on two sites the reach-2 bond folds onto itself
    }
    return HermitianMatrix::from_dense(h);
  };
  for (Index parity : {0, 1}) terms.push_back(bonds(parity, 1, exchange_operator, spec.J1));
  for (Index parity : {0, 1}) {
    if (variant == ChainVariant::Nnn)
      terms.push_back(bonds(parity, 2, exchange_operator, spec.J2));
    else
      terms.push_back(bonds(parity, 1, dm_operator, spec.D_dm));
  }
  return terms;
}

HermitianMatrix heisenberg_hamiltonian(const SpinChainSpec& spec, ChainVariant variant)
{
  const auto terms = heisenberg_terms(spec, variant);
  HermitianMatrix total = terms.front();
  for (std::size_t t = 1; t < terms.size(); ++t) total += terms[t];
  return total;
}

TrotterOracle::TrotterOracle(const SpinChainSpec& spec, ChainVariant variant)
{
  const auto terms = heisenberg_terms(spec, variant);
  dim_ = terms.front().dim();
  HermitianMatrix total = terms.front();
  for (std::size_t t = 1; t < terms.size(); ++t) total += terms[t];
  for (const auto& t : terms) terms_.push_back(eigh(t));
  exact_ = eigvalsh(total);
}

UnitaryMatrix TrotterOracle::unitary(double dt) const
{
  UnitaryMatrix u = UnitaryMatrix::identity(dim_);
  if (dt == 0.0) return u;
  for (const auto& e : terms_) u = u * expm_hermitian(e, dt);
  return u;
}

RVector TrotterOracle::energies(double dt, Index k) const
{
  require(k >= 1 && k <= dim_, ErrorCode::InvalidArgument, "level count out of range");
  if (dt == 0.0) return exact(k);
  const RVector out = eigenphases(unitary(dt), dt).head(k);
  if (out.cwiseAbs().maxCoeff() * std::abs(dt) > kPhaseWrapLimit) {
    std::ostringstream os;
    os << "tracked Trotter energies near the phase-wrap limit at dt = " << dt;
    warn(os.str());
  }
  return out;
}

RVector TrotterOracle::exact(Index k) const { return exact_.head(k); }

UnitaryMatrix trotter_unitary(const SpinChainSpec& spec, ChainVariant variant, double dt)
{
  return TrotterOracle(spec, variant).unitary(dt);
}

RVector trotter_energies(const SpinChainSpec& spec, ChainVariant variant, double dt, Index k)
{
  return TrotterOracle(spec, variant).energies(dt, k);
}

// ---------------------------------------------------------------------------

AngularMomentum angular_momentum(Index sites)
{
  require(sites >= 2 && sites % 2 == 0, ErrorCode::InvalidArgument, "LMG needs an even number of sites >= 2");
  const Index dim = sites + 1;
  const double s = 0.5 * double(sites);
  RMatrix plus = RMatrix::Zero(dim, dim);
  AngularMomentum out;
  out.sz = RMatrix::Zero(dim, dim);
  for (Index a = 0; a < dim; ++a) {
    const double m = -s + double(a);
    out.sz(a, a) = m;
    if (a + 1 < dim) plus(a + 1, a) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
  }
  out.sx = 0.5 * (plus + plus.transpose());
  out.sy = (plus - plus.transpose()).cast<Complex>() / Complex(0.0, 2.0);
  return out;
}

std::pair<HermitianMatrix, HermitianMatrix> lmg_components(Index sites)
{
  const AngularMomentum j = angular_momentum(sites);
  const RMatrix sx2 = j.sx * j.sx;
  const RMatrix sy2 = (j.sy * j.sy).real();
  const RMatrix h1 = -(2.0 / double(sites)) * (sx2 - 0.5 * sy2);
  return {HermitianMatrix::from_dense(RMatrix(-j.sz)), HermitianMatrix::from_dense(h1)};
}

HermitianMatrix lmg_hamiltonian(const LMGSpec& spec)
{
  auto [h0, h1] = lmg_components(spec.sites);
  return h0 + spec.c * h1;
}

RVector lmg_energies(const LMGSpec& spec, Index k)
{
  const RVector all = eigvalsh(lmg_hamiltonian(spec));
  require(k >= 1 && k <= all.size(), ErrorCode::InvalidArgument, "level count out of range");
  return all.head(k);
}

Complex lmg_complex_ground(Index sites, Complex c)
{
  auto [h0, h1] = lmg_components(sites);
  return eig_general(h0.matrix() + c * h1.matrix())(0);
}

LmgObservables lmg_observables(const LMGSpec& spec)
{
  const HermitianMatrix h = lmg_hamiltonian(spec);
  const EigenDecomposition eig = eigh(h);
  if (eig.eigenvalues(1) - eig.eigenvalues(0) < degeneracy_threshold(h.norm())) {
    std::ostringstream os;
    os << "LMG ground state degenerate at c = " << spec.c << "; using the lowest-index eigenvector";
    warn(os.str());
  }
  const AngularMomentum j = angular_momentum(spec.sites);
  const CVector v = eig.eigenvectors.col(0);
  const double n = double(spec.sites);
  const CMatrix sx = j.sx.cast<Complex>();
  LmgObservables out;
  out.sx2_over_n2 = (sx * v).squaredNorm() / (n * n);
  out.sz_over_n = v.dot(j.sz.cast<Complex>() * v).real() / n;
  return out;
}

// ---------------------------------------------------------------------------

RVector linspace(double lo, double hi, Index count)
{
  require(count >= 1, ErrorCode::InvalidArgument, "linspace needs at least one point");
  if (count == 1) return RVector::Constant(1, lo);
  RVector out(count);
  for (Index i = 0; i < count; ++i) out(i) = lo + (hi - lo) * double(i) / double(count - 1);
  out(count - 1) = hi;
  return out;
}

RVector grid_excluding(const RVector& grid, const RVector& exclude)
{
  std::vector<double> keep;
  for (Index i = 0; i < grid.size(); ++i) {
    bool hit = false;
    for (Index j = 0; j < exclude.size() && !hit; ++j) hit = std::abs(grid(i) - exclude(j)) <= 1e-12;
    if (!hit) keep.push_back(grid(i));
  }
  return Eigen::Map<const RVector>(keep.data(), Index(keep.size()));
}

namespace {

RVector concat(const RVector& a, const RVector& b)
{
  RVector out(a.size() + b.size());
  out << a, b;
  return out;
}

template <typename Target>
Dataset tabulate(const RVector& x, Split split, const std::string& feature, std::vector<std::string> targets,
                 Target&& target)
{
  Dataset d;
  d.split = split;
  d.inputs = x;
  d.feature_names = {feature};
  d.target_names = std::move(targets);
  d.targets.resize(x.size(), Index(d.target_names.size()));
  for (Index i = 0; i < x.size(); ++i) d.targets.row(i) = target(x(i)).transpose();
  return d;
}

std::vector<std::string> level_names(Index k)
{
  std::vector<std::string> out;
  for (Index i = 0; i < k; ++i) out.push_back("E" + std::to_string(i));
  return out;
}

DatasetSplits trotter_splits(ChainVariant variant, double inner, std::uint64_t seed)
{
  const SpinChainSpec spec = [&] {
    SpinChainSpec s = SpinChainSpec::with_seed(8, seed);
    if (variant == ChainVariant::Dm) {
      s.B = 1.0;
      s.J1 = 1.0;
      s.D_dm = 0.5;
    }
    return s;
  }();
  const TrotterOracle oracle(spec, variant);
  auto level = [&](double dt) { return oracle.energies(dt, 3); };
  const RVector neg = linspace(-0.18, -inner, 5), pos = linspace(inner, 0.18, 5);
  const RVector train = concat(neg, pos);
  const Index fine = variant == ChainVariant::Nnn ? 13 : 9;
  const RVector val =
      concat(grid_excluding(linspace(-0.18, -inner, fine), neg), grid_excluding(linspace(inner, 0.18, fine), pos));
  DatasetSplits out;
  out.train = tabulate(train, Split::Train, "dt", level_names(3), level);
  out.validation = tabulate(val, Split::Validation, "dt", level_names(3), level);
  out.test = tabulate(linspace(-0.2, 0.2, 41), Split::Test, "dt", level_names(3), level);
  return out;
}

}  // namespace

DatasetSplits lmg_observable_splits(LmgObservable which, Index sites)
{
  const double upper_start = which == LmgObservable::Sx2 ? 0.6 : 0.55;
  const RVector train = concat(linspace(0.0, 0.4, 10), linspace(upper_start, 1.0, 10));
  const RVector val = concat(grid_excluding(linspace(0.0, 0.4, 21), train),
                             grid_excluding(linspace(upper_start, 1.0, 21), train));
  const std::string name = which == LmgObservable::Sx2 ? "Sx2_over_N2" : "Sz_over_N";
  auto target = [&](double c) {
    const LmgObservables o = lmg_observables({sites, c});
    return RVector::Constant(1, which == LmgObservable::Sx2 ? o.sx2_over_n2 : o.sz_over_n);
  };
  DatasetSplits out;
  out.train = tabulate(train, Split::Train, "c", {name}, target);
  out.validation = tabulate(val, Split::Validation, "c", {name}, target);
  out.test = tabulate(linspace(0.0, 1.0, 101), Split::Test, "c", {name}, target);
  return out;
}

DatasetSplits make_dataset(std::string_view preset, std::uint64_t seed)
{
  DatasetSplits out;
  if (preset == "fig1_spin") {
    auto e0 = [](double c) { return RVector::Constant(1, noninteracting_spin_energy(10, c)); };
    const RVector train = linspace(-1.0, -0.2, 5);
    out.train = tabulate(train, Split::Train, "c", {"E0"}, e0);
    out.validation = tabulate(grid_excluding(linspace(-1.0, -0.2, 101), train), Split::Validation, "c", {"E0"}, e0);
    out.test = tabulate(linspace(-1.0, 1.0, 201), Split::Test, "c", {"E0"}, e0);
    return out;
  }
  if (preset == "fig2_aho") {
    const auto [h0, a4] = aho_components(100);
    auto levels = [&](double g) { return RVector(eigvalsh(h0 + g * a4).head(2)); };
    const RVector train = linspace(-0.01, 0.01, 10);
    out.train = tabulate(train, Split::Train, "g", level_names(2), levels);
    out.validation =
        tabulate(grid_excluding(linspace(-0.01, 0.01, 101), train), Split::Validation, "g", level_names(2), levels);
    out.test = tabulate(linspace(-0.01, 0.01, 201), Split::Test, "g", level_names(2), levels);
    return out;
  }
  if (preset == "fig3_trotter") return trotter_splits(ChainVariant::Nnn, 0.15, seed);
  if (preset == "s_trotter_dm") return trotter_splits(ChainVariant::Dm, 0.10, seed);
  if (preset == "s_lmg_energies" || preset == "s_lmg_complex") {
    const auto [h0, h1] = lmg_components(100);
    auto levels = [&](double c) { return RVector(eigvalsh(h0 + c * h1).head(5)); };
    const RVector train = linspace(0.0, 1.0, 10);
    out.train = tabulate(train, Split::Train, "c", level_names(5), levels);
    out.validation =
        tabulate(grid_excluding(linspace(0.0, 1.0, 101), train), Split::Validation, "c", level_names(5), levels);
    out.test = tabulate(linspace(0.0, 1.0, 201), Split::Test, "c", level_names(5), levels);
    return out;
  }
  if (preset == "s_lmg_observables") return lmg_observable_splits(LmgObservable::Sx2);
  fail(ErrorCode::UnknownPreset, "no physics dataset for preset '" + std::string(preset) + "'");
}

}  // namespace pmm
