#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace morallens {

/// Canonical label convention used across the engine: 1 = immoral.
enum class Label : std::uint8_t { moral = 0, immoral = 1 };

inline int to_int(Label label) noexcept { return static_cast<int>(label); }

enum class Split : std::uint8_t { train, test, test_hard, unlabeled };

std::string_view to_string(Split split) noexcept;
Split parse_split(std::string_view text);

using EmbeddingVector = Eigen::VectorXf;
using EmbeddingMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EmbeddingRecord {
  std::string id;
  EmbeddingVector vector;
  std::optional<Label> label;
  Split split = Split::unlabeled;
  std::string source;
  std::optional<std::string> category;
  std::optional<double> moral_rate;
  std::optional<std::string> raw_class;

  Eigen::Index dim() const noexcept { return vector.size(); }
};

/// One JSON-Lines manifest row. Row order matches the embedding file rows.
struct ManifestRow {
  std::string id;
  std::optional<Label> label;
  Split split = Split::unlabeled;
  std::string source;
  std::optional<std::string> category;
  std::optional<double> moral_rate;
  std::optional<std::string> raw_class;
};

struct DatasetManifest {
  std::vector<ManifestRow> rows;
  std::filesystem::path embedding_file;
  std::uint32_t dim = 0;
};

/// Fixed 20-byte header of a CLEM embedding file.
struct EmbeddingFileHeader {
  static constexpr std::uint8_t kVersion = 1;
  static constexpr std::size_t kSize = 20;

  std::uint32_t dim = 0;
  std::uint64_t count = 0;

  std::uint64_t payload_bytes() const noexcept { return count * dim * sizeof(float); }
};

void write_embedding_file(std::span<const EmbeddingRecord> records,
                          const std::filesystem::path& path);

/// Writes a bare matrix (one row per record) in the same format.
void write_embedding_matrix(const EmbeddingMatrix& rows, const std::filesystem::path& path);

EmbeddingFileHeader read_embedding_header(const std::filesystem::path& path);

/// Reads and validates the whole payload. Throws on bad magic/version,
/// truncation, trailing bytes, or a non-finite component (the message names
/// the row).
EmbeddingMatrix read_embedding_matrix(const std::filesystem::path& path);

/// Joins the file rows with manifest metadata by row index.
std::vector<EmbeddingRecord> read_embedding_file(const std::filesystem::path& path,
                                                 const DatasetManifest& manifest);

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Builds the manifest that describes `records` (used by writers and tests).
DatasetManifest manifest_for(std::span<const EmbeddingRecord> records,
                             const std::filesystem::path& embedding_file);

// ---- label adapters -------------------------------------------------------

/// SMID moral rate to canonical label: above 2.4 is moral (0), below is
/// immoral (1), exactly 2.4 is excluded.
std::optional<Label> convert_smid_label(double moral_rate);

/// Source-specific class name to canonical label. Known sources: ethics,
/// nsfw, sexual_intent, violence, coco, benchmark. Returns nullopt for rows
/// the source excludes (e.g. implicit sexual intent).
std::optional<Label> convert_source_label(std::string_view source, std::string_view raw_class);

/// Resolves labels from `moral_rate` / `raw_class` where a record has no
/// explicit label, and drops records whose source rule excludes them.
std::vector<EmbeddingRecord> apply_label_adapters(std::vector<EmbeddingRecord> records);

/// Keeps the records of one split, in order.
std::vector<EmbeddingRecord> select_split(std::span<const EmbeddingRecord> records, Split split);

/// Stacks record vectors into a d x n column matrix.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> stack_columns(
    std::span<const EmbeddingRecord> records) {
  const Eigen::Index dim = records.empty() ? 0 : records.front().dim();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(dim, static_cast<Eigen::Index>(records.size()));
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    out.col(j) = records[static_cast<std::size_t>(j)].vector.template cast<Scalar>();
  }
  return out;
}

}  // namespace morallens
