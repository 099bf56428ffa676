#include "morallens/embedding_store.hpp"

#include "binary_io.hpp"
#include "morallens/error.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <unordered_set>

namespace morallens {

namespace {

constexpr std::array<unsigned char, 4> kMagic = {'C', 'L', 'E', 'M'};

using nlohmann::json;

void check_finite_row(std::span<const float> row, std::size_t index, const std::string& where) {
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (!std::isfinite(row[k])) {
      throw Error(Errc::non_finite, where + ": row " + std::to_string(index) + " component " +
                                        std::to_string(k) + " is not finite");
    }
  }
}

void write_header(detail::ByteWriter& w, std::uint32_t dim, std::uint64_t count) {
  w.bytes(kMagic.data(), kMagic.size());
  w.u8(EmbeddingFileHeader::kVersion);
  w.u8(0);
  w.u8(0);
  w.u8(0);
  w.u32(dim);
  w.u64(count);
}

EmbeddingFileHeader parse_header(detail::ByteReader& r, const std::string& where) {
  if (r.remaining() < kMagic.size()) {
    throw Error(Errc::bad_magic, where + ": file too short to be CLEM");
  }
  auto magic = r.take(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
    throw Error(Errc::bad_magic, where + ": magic is not CLEM");
  }
  const auto version = r.u8();
  if (version != EmbeddingFileHeader::kVersion) {
    throw Error(Errc::bad_version, where + ": unsupported CLEM version " + std::to_string(version));
  }
  auto padding = r.take(3);
  if (padding[0] != 0 || padding[1] != 0 || padding[2] != 0) {
    throw Error(Errc::bad_magic, where + ": nonzero header padding");
  }
  EmbeddingFileHeader header;
  header.dim = r.u32();
  header.count = r.u64();
  if (header.dim == 0) throw Error(Errc::bad_magic, where + ": dimension is zero");
  return header;
}

std::optional<Label> label_from_json(const json& value, std::size_t line) {
  if (value.is_null()) return std::nullopt;
  if (value.is_number_integer()) {
    const auto v = value.get<long long>();
    if (v == 0) return Label::moral;
    if (v == 1) return Label::immoral;
  }
  throw Error(Errc::manifest, "manifest line " + std::to_string(line) + ": label must be 0, 1 or null");
}

template <typename T>
std::optional<T> optional_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

[[noreturn]] void unknown_class(std::string_view source, std::string_view raw_class) {
  throw Error(Errc::unknown_label, "source '" + std::string(source) + "' has no class '" +
                                       std::string(raw_class) + "'");
}

}  // namespace

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::test_hard: return "test_hard";
    case Split::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "test") return Split::test;
  if (text == "test_hard") return Split::test_hard;
  if (text == "unlabeled") return Split::unlabeled;
  throw Error(Errc::invalid_argument, "unknown split '" + std::string(text) + "'");
}

void write_embedding_file(std::span<const EmbeddingRecord> records,
                          const std::filesystem::path& path) {
  if (records.empty()) throw Error(Errc::empty_input, "refusing to write an empty embedding file");
  const auto dim = records.front().dim();
  if (dim < 1) throw Error(Errc::dimension_mismatch, "records have dimension 0");

  detail::ByteWriter w;
  write_header(w, static_cast<std::uint32_t>(dim), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& v = records[i].vector;
    if (v.size() != dim) {
      throw Error(Errc::dimension_mismatch, "record " + std::to_string(i) + " ('" + records[i].id +
                                                "') has dimension " + std::to_string(v.size()) +
                                                ", expected " + std::to_string(dim));
    }
    std::span<const float> row(v.data(), static_cast<std::size_t>(v.size()));
    check_finite_row(row, i, path.string());
    w.f32s(row);
  }
  detail::write_file_bytes(path, w.buffer());
}

void write_embedding_matrix(const EmbeddingMatrix& rows, const std::filesystem::path& path) {
  if (rows.rows() == 0) throw Error(Errc::empty_input, "refusing to write an empty embedding file");
  if (rows.cols() == 0) throw Error(Errc::dimension_mismatch, "records have dimension 0");
  detail::ByteWriter w;
  write_header(w, static_cast<std::uint32_t>(rows.cols()), static_cast<std::uint64_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    std::span<const float> row(rows.row(i).data(), static_cast<std::size_t>(rows.cols()));
    check_finite_row(row, static_cast<std::size_t>(i), path.string());
    w.f32s(row);
  }
  detail::write_file_bytes(path, w.buffer());
}

EmbeddingFileHeader read_embedding_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::array<unsigned char, EmbeddingFileHeader::kSize> raw{};
  in.read(reinterpret_cast<char*>(raw.data()), raw.size());
  detail::ByteReader r(std::span(raw.data(), static_cast<std::size_t>(in.gcount())), path.string());
  return parse_header(r, path.string());
}

EmbeddingMatrix read_embedding_matrix(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  detail::ByteReader r(bytes, path.string());
  const auto header = parse_header(r, path.string());
  if (r.remaining() < header.payload_bytes()) {
    throw Error(Errc::truncated, path.string() + ": payload holds " + std::to_string(r.remaining()) +
                                     " bytes, header promises " +
                                     std::to_string(header.payload_bytes()));
  }
  if (r.remaining() > header.payload_bytes()) {
    throw Error(Errc::truncated, path.string() + ": " +
                                     std::to_string(r.remaining() - header.payload_bytes()) +
                                     " trailing bytes after payload");
  }
  EmbeddingMatrix out(static_cast<Eigen::Index>(header.count), static_cast<Eigen::Index>(header.dim));
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    std::span<float> row(out.row(i).data(), header.dim);
    r.f32s(row);
    check_finite_row(row, static_cast<std::size_t>(i), path.string());
  }
  return out;
}

std::vector<EmbeddingRecord> read_embedding_file(const std::filesystem::path& path,
                                                 const DatasetManifest& manifest) {
  const auto matrix = read_embedding_matrix(path);
  if (static_cast<std::size_t>(matrix.rows()) != manifest.rows.size()) {
    throw Error(Errc::count_mismatch, path.string() + " has " + std::to_string(matrix.rows()) +
                                          " rows but the manifest lists " +
                                          std::to_string(manifest.rows.size()));
  }
  if (manifest.dim != 0 && manifest.dim != static_cast<std::uint32_t>(matrix.cols())) {
    throw Error(Errc::dimension_mismatch, path.string() + " has dimension " +
                                              std::to_string(matrix.cols()) + ", manifest declares " +
                                              std::to_string(manifest.dim));
  }
  std::vector<EmbeddingRecord> records;
  records.reserve(manifest.rows.size());
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const auto& row = manifest.rows[i];
    EmbeddingRecord rec;
    rec.id = row.id;
    rec.vector = matrix.row(static_cast<Eigen::Index>(i)).transpose();
    rec.label = row.label;
    rec.split = row.split;
    rec.source = row.source;
    rec.category = row.category;
    rec.moral_rate = row.moral_rate;
    rec.raw_class = row.raw_class;
    records.push_back(std::move(rec));
  }
  return records;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open manifest " + path.string());

  DatasetManifest manifest;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(Errc::manifest, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw Error(Errc::manifest, path.string() + ":" + std::to_string(line_no) + ": not a JSON object");
    }
    // Optional header line: {"embedding_file": ..., "dim": ...}
    if (!obj.contains("id") && (obj.contains("embedding_file") || obj.contains("dim"))) {
      if (auto f = optional_field<std::string>(obj, "embedding_file")) manifest.embedding_file = *f;
      if (auto d = optional_field<std::uint32_t>(obj, "dim")) manifest.dim = *d;
      continue;
    }
    try {
      ManifestRow row;
      row.id = obj.at("id").get<std::string>();
      row.label = obj.contains("label") ? label_from_json(obj["label"], line_no) : std::nullopt;
      row.split = obj.contains("split") ? parse_split(obj["split"].get<std::string>()) : Split::unlabeled;
      row.source = obj.value("source", std::string{});
      row.category = optional_field<std::string>(obj, "category");
      row.moral_rate = optional_field<double>(obj, "moral_rate");
      row.raw_class = optional_field<std::string>(obj, "raw_class");
      if (!seen.insert(row.id).second) {
        throw Error(Errc::manifest, "duplicate id '" + row.id + "'");
      }
      manifest.rows.push_back(std::move(row));
    } catch (const json::exception& e) {
      throw Error(Errc::manifest, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open for writing " + path.string());
  if (!manifest.embedding_file.empty() || manifest.dim != 0) {
    json head;
    head["embedding_file"] = manifest.embedding_file.string();
    head["dim"] = manifest.dim;
    out << head.dump() << '\n';
  }
  for (const auto& row : manifest.rows) {
    json obj;
    obj["id"] = row.id;
    obj["label"] = row.label ? json(to_int(*row.label)) : json(nullptr);
    obj["split"] = std::string(to_string(row.split));
    obj["source"] = row.source;
    if (row.category) obj["category"] = *row.category;
    if (row.moral_rate) obj["moral_rate"] = *row.moral_rate;
    if (row.raw_class) obj["raw_class"] = *row.raw_class;
    out << obj.dump() << '\n';
  }
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

DatasetManifest manifest_for(std::span<const EmbeddingRecord> records,
                             const std::filesystem::path& embedding_file) {
  DatasetManifest manifest;
  manifest.embedding_file = embedding_file;
  manifest.dim = records.empty() ? 0 : static_cast<std::uint32_t>(records.front().dim());
  manifest.rows.reserve(records.size());
  for (const auto& r : records) {
    manifest.rows.push_back({r.id, r.label, r.split, r.source, r.category, r.moral_rate, r.raw_class});
  }
  return manifest;
}

std::optional<Label> convert_smid_label(double moral_rate) {
  if (!std::isfinite(moral_rate)) {
    throw Error(Errc::non_finite, "SMID moral rate is not finite");
  }
  constexpr double kThreshold = 2.4;
  if (moral_rate > kThreshold) return Label::moral;
  if (moral_rate < kThreshold) return Label::immoral;
  return std::nullopt;
}

std::optional<Label> convert_source_label(std::string_view source, std::string_view raw_class) {
  const auto cls = lower(raw_class);
  if (source == "ethics") {
    if (cls == "1") return Label::immoral;
    if (cls == "0") return Label::moral;
    unknown_class(source, raw_class);
  }
  if (source == "nsfw") {
    if (cls == "sexy" || cls == "porn") return Label::immoral;
    if (cls == "drawings" || cls == "neutral") return Label::moral;
    unknown_class(source, raw_class);
  }
  if (source == "sexual_intent") {
    if (cls == "provocative" || cls == "i") return Label::immoral;
    if (cls == "implicit" || cls == "ii") return std::nullopt;
    if (cls == "non_sexual" || cls == "none" || cls == "iii") return Label::moral;
    unknown_class(source, raw_class);
  }
  if (source == "violence") {
    if (cls == "violence") return Label::immoral;
    if (cls == "non-violence" || cls == "non_violence" || cls == "nonviolence") return Label::moral;
    unknown_class(source, raw_class);
  }
  if (source == "coco") return Label::moral;
  if (source == "benchmark") {
    if (cls.empty()) unknown_class(source, raw_class);
    return Label::immoral;
  }
  throw Error(Errc::unknown_label, "unknown label source '" + std::string(source) + "'");
}

std::vector<EmbeddingRecord> apply_label_adapters(std::vector<EmbeddingRecord> records) {
  std::vector<EmbeddingRecord> kept;
  kept.reserve(records.size());
  for (auto& rec : records) {
    if (!rec.label) {
      if (rec.moral_rate) {
        rec.label = convert_smid_label(*rec.moral_rate);
        if (!rec.label) continue;
      } else if (rec.raw_class) {
        rec.label = convert_source_label(rec.source, *rec.raw_class);
        if (!rec.label) continue;
      }
    }
    kept.push_back(std::move(rec));
  }
  return kept;
}

std::vector<EmbeddingRecord> select_split(std::span<const EmbeddingRecord> records, Split split) {
  std::vector<EmbeddingRecord> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

}  // namespace morallens
