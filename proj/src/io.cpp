#include "pmm/io.hpp"

#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pmm {

namespace {

Json vector_json(const RVector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

RVector vector_from_json(const Json& j)
{
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const RVector>(values.data(), Index(values.size()));
}

Json tensor_json(const Tensor3& t)
{
  return {{"dims", {t.dimension(0), t.dimension(1), t.dimension(2)}},
          {"values", std::vector<double>(t.data(), t.data() + t.size())}};
}

Tensor3 tensor_from_json(const Json& j)
{
  const auto dims = j.at("dims").get<std::vector<Index>>();
  require(dims.size() == 3, ErrorCode::Io, "tensor payload needs three dims");
  const auto values = j.at("values").get<std::vector<double>>();
  Tensor3 t(dims[0], dims[1], dims[2]);
  require(Index(values.size()) == t.size(), ErrorCode::Io, "tensor payload length mismatch");
  std::copy(values.begin(), values.end(), t.data());
  return t;
}

Json selector_json(const OutputSelector& s)
{
  if (s.kind == OutputSelector::Kind::InteriorPair) return {{"kind", "interior_pair"}};
  return {{"kind", "lowest_k"}, {"k", s.k}};
}

OutputSelector selector_from_json(const Json& j)
{
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "interior_pair") return OutputSelector::interior_pair();
  if (kind == "lowest_k") return OutputSelector::lowest(j.at("k").get<Index>());
  fail(ErrorCode::Io, "unknown output selector '" + kind + "'");
}

template <typename T>
std::string fmt(T value)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", double(value));
  return buf;
}

}  // namespace

Json to_json(const PackedParams& p)
{
  return {{"dim", p.dim}, {"mode", std::string(to_string(p.mode))}, {"values", vector_json(p.values)}};
}

PackedParams packed_from_json(const Json& j)
{
  try {
    PackedParams p;
    p.dim = j.at("dim").get<Index>();
    p.mode = pack_mode_from_string(j.at("mode").get<std::string>());
    p.values = vector_from_json(j.at("values"));
    require(p.values.size() == packed_length(p.dim, p.mode), ErrorCode::LengthMismatch,
            "packed values length does not match dim and mode");
    return p;
  } catch (const Json::exception& e) {
    fail(ErrorCode::Io, std::string("malformed packed parameters: ") + e.what());
  }
}

Json checkpoint_json(const Checkpoint& model)
{
  Json j{{"schema", kCheckpointSchema}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, AffinePMM>) {
          j["family"] = "affine";
          j["dim"] = m.dim;
          j["selector"] = selector_json(m.selector);
          j["D"] = to_json(m.diag);
          j["M"] = Json::array();
          for (const auto& c : m.couplings) j["M"].push_back(to_json(c));
        } else if constexpr (std::is_same_v<T, UnitaryProductPMM>) {
          j["family"] = "unitary_product";
          j["dim"] = m.dim;
          j["n_levels"] = m.n_levels;
          j["factors"] = Json::array();
          for (const auto& f : m.factors) j["factors"].push_back(to_json(f));
        } else if constexpr (std::is_same_v<T, TensorNetworkPMM>) {
          j["family"] = "tensor_network";
          j["rows"] = m.rows;
          j["cols"] = m.cols;
          j["dim"] = m.dim;
          j["pixel_bond"] = m.pixel_bond;
          j["bond"] = m.bond;
          j["entry_mode"] = std::string(to_string(m.entry_mode));
          j["P"] = tensor_json(m.P);
          j["N"] = tensor_json(m.N);
          j["Q"] = tensor_json(m.Q);
          j["D"] = to_json(m.diag);
        } else {
          j["family"] = "observable";
          j["O"] = to_json(m.O);
        }
      },
      model);
  return j;
}

Checkpoint checkpoint_from_json(const Json& j)
{
  try {
    const int schema = j.at("schema").get<int>();
    require(schema == kCheckpointSchema, ErrorCode::Io, "unsupported checkpoint schema " + std::to_string(schema));
    const auto family = j.at("family").get<std::string>();
    if (family == "affine") {
      AffinePMM m;
      m.dim = j.at("dim").get<Index>();
      m.selector = selector_from_json(j.at("selector"));
      m.diag = packed_from_json(j.at("D"));
      for (const auto& c : j.at("M")) m.couplings.push_back(packed_from_json(c));
      return m;
    }
    if (family == "unitary_product") {
      UnitaryProductPMM m;
      m.dim = j.at("dim").get<Index>();
      m.n_levels = j.at("n_levels").get<Index>();
      for (const auto& f : j.at("factors")) m.factors.push_back(packed_from_json(f));
      return m;
    }
    if (family == "tensor_network") {
      TensorNetworkPMM m = TensorNetworkPMM::zeros(
          j.at("rows").get<Index>(), j.at("cols").get<Index>(), j.at("dim").get<Index>(),
          j.at("pixel_bond").get<Index>(), j.at("bond").get<Index>(),
          pack_mode_from_string(j.at("entry_mode").get<std::string>()));
      const Tensor3 p = tensor_from_json(j.at("P")), n = tensor_from_json(j.at("N")), q = tensor_from_json(j.at("Q"));
      auto same = [](const Tensor3& a, const Tensor3& b) { return a.dimensions() == b.dimensions(); };
      require(same(p, m.P) && same(n, m.N) && same(q, m.Q), ErrorCode::Io, "tensor shapes disagree with dims");
      m.P = p;
      m.N = n;
      m.Q = q;
      m.diag = packed_from_json(j.at("D"));
      return m;
    }
    if (family == "observable") return ObservableModel{packed_from_json(j.at("O"))};
    fail(ErrorCode::Io, "unknown model family '" + family + "'");
  } catch (const Json::exception& e) {
    fail(ErrorCode::Io, std::string("malformed checkpoint: ") + e.what());
  }
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& model)
{
  write_text(path, checkpoint_json(model).dump(1) + "\n");
}

Checkpoint read_checkpoint(const std::filesystem::path& path)
{
  try {
    return checkpoint_from_json(Json::parse(read_text(path)));
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::Io, path.string() + ": " + e.what());
  }
}

std::string read_text(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& path, std::string_view text)
{
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(bool(out), ErrorCode::Io, "cannot write " + path.string());
  out << text;
  require(bool(out), ErrorCode::Io, "write failed for " + path.string());
}

std::string format_csv(const std::vector<CsvColumn>& columns)
{
  require(!columns.empty(), ErrorCode::InvalidArgument, "CSV needs at least one column");
  const Index rows = columns.front().values.size();
  for (const auto& c : columns)
    require(c.values.size() == rows, ErrorCode::LengthMismatch, "CSV column '" + c.name + "' has a different length");
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c].name;
  out += "\n";
  for (Index r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + fmt(columns[c].values(r));
    out += "\n";
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const std::vector<CsvColumn>& columns)
{
  write_text(path, format_csv(columns));
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data)
{
  data.validate();
  std::vector<CsvColumn> cols;
  for (Index f = 0; f < data.num_features(); ++f)
    cols.push_back({data.feature_names.empty() ? "x" + std::to_string(f) : data.feature_names[std::size_t(f)],
                    data.inputs.col(f)});
  for (Index t = 0; t < data.targets.cols(); ++t)
    cols.push_back({data.target_names.empty() ? "y" + std::to_string(t) : data.target_names[std::size_t(t)],
                    data.targets.col(t)});
  if (!data.labels.empty()) {
    RVector labels(data.size());
    for (Index r = 0; r < data.size(); ++r) labels(r) = data.labels[std::size_t(r)];
    cols.push_back({"label", labels});
  }
  write_csv(path, cols);
}

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& history)
{
  std::string out = "epoch,train_loss,validation_loss,phase\n";
  for (const auto& h : history)
    out += std::to_string(h.epoch) + "," + fmt(h.train_loss) + "," + fmt(h.validation_loss) + "," + h.phase + "\n";
  write_text(path, out);
}

void write_error_csv(const std::filesystem::path& path, const RVector& points, const ErrorReport& report)
{
  write_csv(path, {{"point", points},
                   {"truth", report.truth},
                   {"prediction", report.prediction},
                   {"abs_err", report.abs_err},
                   {"rel_err", report.rel_err}});
}

IdxArray read_idx(const std::filesystem::path& path)
{
  gzFile f = gzopen(path.string().c_str(), "rb");
  require(f != nullptr, ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes;
  std::uint8_t chunk[1 << 16];
  int got = 0;
  while ((got = gzread(f, chunk, sizeof chunk)) > 0) bytes.insert(bytes.end(), chunk, chunk + got);
  const bool read_error = got < 0;
  gzclose(f);
  require(!read_error, ErrorCode::Io, "corrupt compressed stream in " + path.string());
  require(bytes.size() >= 4 && bytes[0] == 0 && bytes[1] == 0, ErrorCode::Io, path.string() + " is not an IDX file");
  require(bytes[2] == 0x08, ErrorCode::Io, path.string() + ": only unsigned-byte IDX data is supported");
  const std::size_t ndims = bytes[3];
  require(ndims >= 1 && bytes.size() >= 4 + 4 * ndims, ErrorCode::Io, path.string() + ": truncated IDX header");
  IdxArray out;
  std::size_t count = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    const std::uint8_t* p = bytes.data() + 4 + 4 * d;
    const std::uint32_t v = (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | p[3];
    out.dims.push_back(v);
    count *= v;
  }
  const std::size_t offset = 4 + 4 * ndims;
  require(bytes.size() == offset + count, ErrorCode::Io,
          path.string() + ": payload size " + std::to_string(bytes.size() - offset) + " does not match header");
  out.data.assign(bytes.begin() + std::ptrdiff_t(offset), bytes.end());
  return out;
}

}  // namespace pmm
