#include "pmm/models.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace pmm {

std::vector<Index> OutputSelector::indices(Index dim) const
{
  if (kind == Kind::InteriorPair) {
    require(dim >= 2, ErrorCode::InvalidArgument, "interior pair needs dim >= 2");
    const Index upper = (dim + 1) / 2;  // ceil(n/2)
    return {upper - 1, upper};
  }
  if (k > dim || k < 1) {
    std::ostringstream os;
    os << "lowest_k(" << k << ") is not valid for dim " << dim;
    fail(ErrorCode::InvalidArgument, os.str());
  }
  std::vector<Index> out(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = i;
  return out;
}

Index AffinePMM::num_params() const
{
  Index total = diag.size();
  for (const auto& m : couplings) total += m.size();
  return total;
}

Index UnitaryProductPMM::num_params() const
{
  Index total = 0;
  for (const auto& m : factors) total += m.size();
  return total;
}

Index TensorNetworkPMM::num_params() const
{
  return P.size() + N.size() + Q.size() + diag.size();
}

Index TensorNetworkPMM::full_representation_count() const
{
  return rows * cols * entries_per_matrix() + dim;
}

TensorNetworkPMM TensorNetworkPMM::zeros(Index rows, Index cols, Index dim, Index pixel_bond, Index bond,
                                         PackMode entry_mode)
{
  require(rows > 0 && cols > 0 && dim > 0 && pixel_bond > 0 && bond > 0, ErrorCode::InvalidArgument,
          "tensor-network dimensions must be positive");
  require(entry_mode != PackMode::RealDiagonal, ErrorCode::InvalidArgument,
          "tensor-network entries must be real-symmetric or complex-hermitian");
  TensorNetworkPMM m;
  m.rows = rows;
  m.cols = cols;
  m.dim = dim;
  m.pixel_bond = pixel_bond;
  m.bond = bond;
  m.entry_mode = entry_mode;
  const Index k = packed_length(dim, entry_mode);
  m.P = Tensor3(rows, pixel_bond, bond);
  m.N = Tensor3(bond, k, bond);
  m.Q = Tensor3(bond, pixel_bond, cols);
  m.P.setZero();
  m.N.setZero();
  m.Q.setZero();
  m.diag = PackedParams::zeros(dim, PackMode::RealDiagonal);
  return m;
}

// ---------------------------------------------------------------------------

namespace {

void check_affine(const AffinePMM& model, Index features)
{
  if (features != model.num_features()) {
    std::ostringstream os;
    os << "model has " << model.num_features() << " coupling matrices but input has " << features << " features";
    fail(ErrorCode::DimensionMismatch, os.str());
  }
}

}  // namespace

HermitianMatrix affine_eval(const AffinePMM& model, const RVector& c)
{
  check_affine(model, c.size());
  CMatrix m = CMatrix::Zero(model.dim, model.dim);
  accumulate_unpacked(m, model.diag);
  for (Index i = 0; i < c.size(); ++i) {
    if (c(i) != 0.0) accumulate_unpacked(m, model.couplings[static_cast<std::size_t>(i)], c(i));
  }
  return HermitianMatrix::hermitize(m);
}

RVector affine_outputs(const AffinePMM& model, const RVector& c)
{
  const auto idx = model.selector.indices(model.dim);
  const RVector spectrum = eigvalsh(affine_eval(model, c));
  RVector out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = spectrum(idx[i]);
  return out;
}

CVector affine_eval_complex(const AffinePMM& model, const CVector& c)
{
  check_affine(model, c.size());
  CMatrix m = unpack(model.diag).matrix();
  for (Index i = 0; i < c.size(); ++i) m += c(i) * unpack(model.couplings[static_cast<std::size_t>(i)]).matrix();
  return eig_general(m);
}

AffinePMM rescale(const AffinePMM& model, const RVector& input_scale, double output_scale)
{
  check_affine(model, input_scale.size());
  AffinePMM out = model;
  out.diag.values *= output_scale;
  for (Index i = 0; i < input_scale.size(); ++i) {
    require(input_scale(i) != 0.0, ErrorCode::InvalidArgument, "input scale must be nonzero");
    out.couplings[static_cast<std::size_t>(i)].values *= output_scale / input_scale(i);
  }
  return out;
}

// ---------------------------------------------------------------------------

UnitaryMatrix unitary_product_eval(const UnitaryProductPMM& model, double dt)
{
  require(std::isfinite(dt), ErrorCode::InvalidArgument, "dt must be finite");
  require(!model.factors.empty(), ErrorCode::InvalidArgument, "unitary product needs at least one factor");
  UnitaryMatrix u = UnitaryMatrix::identity(model.dim);
  if (dt == 0.0) return u;
  for (const auto& f : model.factors) u = u * expm_hermitian(unpack(f), dt);
  return UnitaryMatrix::from_dense(u.matrix());
}

HermitianMatrix unitary_product_generator(const UnitaryProductPMM& model)
{
  CMatrix sum = CMatrix::Zero(model.dim, model.dim);
  for (const auto& f : model.factors) accumulate_unpacked(sum, f);
  return HermitianMatrix::hermitize(sum);
}

RVector unitary_product_energies(const UnitaryProductPMM& model, double dt)
{
  require(model.n_levels >= 1 && model.n_levels <= model.dim, ErrorCode::InvalidArgument,
          "n_levels must lie in [1, dim]");
  RVector all;
  if (dt == 0.0) {
    all = eigvalsh(unitary_product_generator(model));
  } else {
    all = eigenphases(unitary_product_eval(model, dt), dt);
  }
  RVector out = all.head(model.n_levels);
  if (dt != 0.0 && (out.cwiseAbs() * std::abs(dt)).maxCoeff() > kPhaseWrapLimit) {
    std::ostringstream os;
    os << "eigenphase near branch cut: max |E dt| = " << (out.cwiseAbs() * std::abs(dt)).maxCoeff()
       << " at dt = " << dt;
    warn(os.str());
  }
  return out;
}

UnitaryProductPMM rescale(const UnitaryProductPMM& model, double energy_scale)
{
  UnitaryProductPMM out = model;
  for (auto& f : out.factors) f.values *= energy_scale;
  return out;
}

// ---------------------------------------------------------------------------

Tensor3 tn_expand_tensor(const TensorNetworkPMM& model)
{
  const Index k = model.entries_per_matrix();
  require(model.P.dimension(0) == model.rows && model.P.dimension(1) == model.pixel_bond &&
              model.P.dimension(2) == model.bond,
          ErrorCode::DimensionMismatch, "P must be p x d x D");
  require(model.N.dimension(0) == model.bond && model.N.dimension(1) == k && model.N.dimension(2) == model.bond,
          ErrorCode::DimensionMismatch, "N must be D x K x D");
  require(model.Q.dimension(0) == model.bond && model.Q.dimension(1) == model.pixel_bond &&
              model.Q.dimension(2) == model.cols,
          ErrorCode::DimensionMismatch, "Q must be D x d x q");

  using Pair = Eigen::IndexPair<int>;
  // (i,t,u)·(u,k,v) -> (i,t,k,v)
  const Eigen::array<Pair, 1> over_u = {Pair(2, 0)};
  Eigen::Tensor<double, 4> pn = model.P.contract(model.N, over_u);
  // (i,t,k,v)·(v,t,j) -> (i,k,j)
  const Eigen::array<Pair, 2> over_vt = {Pair(3, 0), Pair(1, 1)};
  Tensor3 ikj = pn.contract(model.Q, over_vt);
  const Eigen::array<int, 3> to_ijk = {0, 2, 1};
  return ikj.shuffle(to_ijk);
}

RMatrix tn_coupling_matrix(const TensorNetworkPMM& model)
{
  const Tensor3 s = tn_expand_tensor(model);
  const Index k = model.entries_per_matrix();
  RMatrix out(model.rows * model.cols, k);
  for (Index i = 0; i < model.rows; ++i)
    for (Index j = 0; j < model.cols; ++j)
      for (Index kk = 0; kk < k; ++kk) out(i * model.cols + j, kk) = s(i, j, kk);
  return out;
}

std::vector<PackedParams> tn_expand(const TensorNetworkPMM& model)
{
  const RMatrix s = tn_coupling_matrix(model);
  std::vector<PackedParams> out;
  out.reserve(static_cast<std::size_t>(s.rows()));
  for (Index r = 0; r < s.rows(); ++r) out.push_back({model.dim, model.entry_mode, s.row(r).transpose()});
  return out;
}

AffinePMM tn_to_affine(const TensorNetworkPMM& model)
{
  AffinePMM out;
  out.dim = model.dim;
  out.diag = model.diag;
  out.couplings = tn_expand(model);
  out.selector = OutputSelector::interior_pair();
  return out;
}

namespace {

void check_image(const TensorNetworkPMM& model, Index pixels)
{
  if (pixels != model.rows * model.cols) {
    std::ostringstream os;
    os << "image has " << pixels << " pixels, model expects " << model.rows << "x" << model.cols;
    fail(ErrorCode::DimensionMismatch, os.str());
  }
}

}  // namespace

HermitianMatrix tn_eval(const TensorNetworkPMM& model, const RVector& image)
{
  check_image(model, image.size());
  const RVector packed = tn_coupling_matrix(model).transpose() * image;
  CMatrix m = CMatrix::Zero(model.dim, model.dim);
  accumulate_unpacked(m, model.diag);
  accumulate_unpacked<Complex>(m, model.dim, model.entry_mode, {packed.data(), std::size_t(packed.size())});
  return HermitianMatrix::hermitize(m);
}

RVector tn_affine_outputs(const TensorNetworkPMM& model, const RVector& image)
{
  const auto idx = OutputSelector::interior_pair().indices(model.dim);
  const RVector spectrum = eigvalsh(tn_eval(model, image));
  return RVector{{spectrum(idx[0]), spectrum(idx[1])}};
}

RMatrix tn_embed(const TensorNetworkPMM& model, const RMatrix& images)
{
  check_image(model, images.cols());
  const RMatrix packed = images * tn_coupling_matrix(model);  // examples × K
  const auto idx = OutputSelector::interior_pair().indices(model.dim);
  RMatrix out(images.rows(), 2);
  const std::span<const double> diag{model.diag.values.data(), std::size_t(model.diag.size())};
  for (Index e = 0; e < images.rows(); ++e) {
    const RVector row = packed.row(e).transpose();
    const std::span<const double> entries{row.data(), std::size_t(row.size())};
    RVector spectrum;
    if (model.entry_mode == PackMode::RealSymmetric) {
      RMatrix m = RMatrix::Zero(model.dim, model.dim);
      accumulate_unpacked<double>(m, model.dim, PackMode::RealDiagonal, diag);
      accumulate_unpacked<double>(m, model.dim, model.entry_mode, entries);
      Eigen::SelfAdjointEigenSolver<RMatrix> solver(m, Eigen::EigenvaluesOnly);
      spectrum = solver.eigenvalues();
    } else {
      CMatrix m = CMatrix::Zero(model.dim, model.dim);
      accumulate_unpacked<Complex>(m, model.dim, PackMode::RealDiagonal, diag);
      accumulate_unpacked<Complex>(m, model.dim, model.entry_mode, entries);
      spectrum = eigvalsh(HermitianMatrix::hermitize(m));
    }
    out(e, 0) = spectrum(idx[0]);
    out(e, 1) = spectrum(idx[1]);
  }
  return out;
}

// ---------------------------------------------------------------------------

GroundState ground_state(const HermitianMatrix& m)
{
  const EigenDecomposition eig = eigh(m);
  const double gap = m.dim() > 1 ? eig.eigenvalues(1) - eig.eigenvalues(0) : std::numeric_limits<double>::infinity();
  const double threshold = degeneracy_threshold(m.norm());
  if (gap < threshold) throw DegenerateLevelError(0, gap, threshold);
  return {eig.eigenvalues(0), eig.eigenvectors.col(0), gap};
}

double observable_expectation(const AffinePMM& host, const ObservableModel& obs, const RVector& c)
{
  require(obs.O.dim == host.dim, ErrorCode::DimensionMismatch, "observable and host dimensions differ");
  const GroundState gs = ground_state(affine_eval(host, c));
  return (gs.vector.adjoint() * unpack(obs.O).matrix() * gs.vector)(0, 0).real();
}

// ---------------------------------------------------------------------------

namespace {

class Writer {
 public:
  explicit Writer(Index n) : out_(n) {}
  void put(const double* data, Index n)
  {
    out_.segment(pos_, n) = Eigen::Map<const RVector>(data, n);
    pos_ += n;
  }
  void put(const PackedParams& p) { put(p.values.data(), p.size()); }
  void put(const Tensor3& t) { put(t.data(), t.size()); }
  RVector finish()
  {
    require(pos_ == out_.size(), ErrorCode::LengthMismatch, "flatten size mismatch");
    return std::move(out_);
  }

 private:
  RVector out_;
  Index pos_ = 0;
};

class Reader {
 public:
  explicit Reader(const RVector& in, Index expected) : in_(in)
  {
    if (in.size() != expected) {
      std::ostringstream os;
      os << "parameter vector has length " << in.size() << ", model expects " << expected;
      fail(ErrorCode::LengthMismatch, os.str());
    }
  }
  void get(double* data, Index n)
  {
    Eigen::Map<RVector>(data, n) = in_.segment(pos_, n);
    pos_ += n;
  }
  void get(PackedParams& p) { get(p.values.data(), p.size()); }
  void get(Tensor3& t) { get(t.data(), t.size()); }

 private:
  const RVector& in_;
  Index pos_ = 0;
};

}  // namespace

RVector flatten(const AffinePMM& model)
{
  Writer w(model.num_params());
  w.put(model.diag);
  for (const auto& m : model.couplings) w.put(m);
  return w.finish();
}

RVector flatten(const UnitaryProductPMM& model)
{
  Writer w(model.num_params());
  for (const auto& m : model.factors) w.put(m);
  return w.finish();
}

RVector flatten(const TensorNetworkPMM& model)
{
  Writer w(model.num_params());
  w.put(model.P);
  w.put(model.N);
  w.put(model.Q);
  w.put(model.diag);
  return w.finish();
}

RVector flatten(const ObservableModel& model) { return model.O.values; }

AffinePMM unflatten(const AffinePMM& shape, const RVector& params)
{
  AffinePMM out = shape;
  Reader r(params, shape.num_params());
  r.get(out.diag);
  for (auto& m : out.couplings) r.get(m);
  return out;
}

UnitaryProductPMM unflatten(const UnitaryProductPMM& shape, const RVector& params)
{
  UnitaryProductPMM out = shape;
  Reader r(params, shape.num_params());
  for (auto& m : out.factors) r.get(m);
  return out;
}

TensorNetworkPMM unflatten(const TensorNetworkPMM& shape, const RVector& params)
{
  TensorNetworkPMM out = shape;
  Reader r(params, shape.num_params());
  r.get(out.P);
  r.get(out.N);
  r.get(out.Q);
  r.get(out.diag);
  return out;
}

ObservableModel unflatten(const ObservableModel& shape, const RVector& params)
{
  ObservableModel out = shape;
  Reader r(params, shape.O.size());
  r.get(out.O);
  return out;
}

}  // namespace pmm
