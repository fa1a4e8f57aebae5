#pragma once

#include "pmm/baselines.hpp"
#include "pmm/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <variant>

namespace pmm {

using Json = nlohmann::json;

inline constexpr int kCheckpointSchema = 1;

Json to_json(const PackedParams& p);
PackedParams packed_from_json(const Json& j);

using Checkpoint = std::variant<AffinePMM, UnitaryProductPMM, TensorNetworkPMM, ObservableModel>;

/// {schema, family, ...payload}; doubles are written with round-trip precision.
Json checkpoint_json(const Checkpoint& model);
Checkpoint checkpoint_from_json(const Json& j);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& model);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

/// Column-oriented CSV with a header row; every column must have the same length.
struct CsvColumn {
  std::string name;
  RVector values;
};
std::string format_csv(const std::vector<CsvColumn>& columns);
void write_csv(const std::filesystem::path& path, const std::vector<CsvColumn>& columns);

/// Header: feature names, then target names, then "label" when present.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
/// Columns epoch, train_loss, validation_loss, phase.
void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& history);
/// Columns point, truth, prediction, abs_err, rel_err.
void write_error_csv(const std::filesystem::path& path, const RVector& points, const ErrorReport& report);

/// Unsigned-byte IDX array (optionally gzip-compressed).
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};
IdxArray read_idx(const std::filesystem::path& path);

}  // namespace pmm
