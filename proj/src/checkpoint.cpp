#include "morallens/checkpoint.hpp"

#include "binary_io.hpp"

#include <json.hpp>

#include <array>
#include <limits>

namespace morallens {

namespace {

constexpr std::array<unsigned char, 4> kMagic = {'C', 'L', 'M', 'H'};

// Layout: "CLMH", u8 version, 3 zero bytes, u32 d_in, u32 d_hidden,
// f32 W1 (row-major), f32 b1, f32 w2, f32 b2, u32 metadata length, metadata.

}  // namespace

std::vector<unsigned char> encode_checkpoint(const ModelCheckpoint& ckpt) {
  const auto& h = ckpt.head;
  if (h.w1.rows() != h.config.d_hidden || h.w1.cols() != h.config.d_in ||
      h.b1.size() != h.config.d_hidden || h.w2.size() != h.config.d_hidden) {
    throw Error(Errc::dimension_mismatch, "head parameters disagree with its configuration");
  }
  if (!h.all_finite()) throw Error(Errc::non_finite, "head has non-finite parameters");
  if (ckpt.metadata_json.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(Errc::invalid_argument, "checkpoint metadata too large");
  }

  detail::ByteWriter w;
  w.bytes(kMagic.data(), kMagic.size());
  w.u8(ModelCheckpoint::kVersion);
  w.u8(0);
  w.u8(0);
  w.u8(0);
  w.u32(static_cast<std::uint32_t>(h.config.d_in));
  w.u32(static_cast<std::uint32_t>(h.config.d_hidden));
  for (Eigen::Index i = 0; i < h.w1.rows(); ++i) {
    for (Eigen::Index j = 0; j < h.w1.cols(); ++j) w.f32(h.w1(i, j));
  }
  w.f32s(std::span<const float>(h.b1.data(), static_cast<std::size_t>(h.b1.size())));
  w.f32s(std::span<const float>(h.w2.data(), static_cast<std::size_t>(h.w2.size())));
  w.f32(h.b2);
  w.u32(static_cast<std::uint32_t>(ckpt.metadata_json.size()));
  w.bytes(ckpt.metadata_json.data(), ckpt.metadata_json.size());
  return w.buffer();
}

ModelCheckpoint decode_checkpoint(std::span<const unsigned char> bytes, const std::string& what) {
  detail::ByteReader r(bytes, what);
  if (r.remaining() < kMagic.size()) throw Error(Errc::bad_magic, what + ": too short to be CLMH");
  auto magic = r.take(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
    throw Error(Errc::bad_magic, what + ": magic is not CLMH");
  }
  const auto version = r.u8();
  if (version != ModelCheckpoint::kVersion) {
    throw Error(Errc::bad_version, what + ": unsupported CLMH version " + std::to_string(version));
  }
  auto padding = r.take(3);
  if (padding[0] != 0 || padding[1] != 0 || padding[2] != 0) {
    throw Error(Errc::bad_magic, what + ": nonzero header padding");
  }
  const auto d_in = r.u32();
  const auto d_hidden = r.u32();
  if (d_in == 0 || d_hidden == 0) throw Error(Errc::bad_magic, what + ": zero head dimension");
  const std::uint64_t param_floats =
      static_cast<std::uint64_t>(d_in) * d_hidden + 2ull * d_hidden + 1;
  r.require(param_floats * sizeof(float));

  ModelCheckpoint ckpt;
  HeadConfig config;
  config.d_in = d_in;
  config.d_hidden = d_hidden;
  ckpt.head = ClassifierHead<float>::zeros(config);
  auto& h = ckpt.head;
  for (Eigen::Index i = 0; i < h.w1.rows(); ++i) {
    for (Eigen::Index j = 0; j < h.w1.cols(); ++j) h.w1(i, j) = r.f32();
  }
  r.f32s(std::span<float>(h.b1.data(), d_hidden));
  r.f32s(std::span<float>(h.w2.data(), d_hidden));
  h.b2 = r.f32();
  if (!h.all_finite()) throw Error(Errc::non_finite, what + ": non-finite parameter");

  const auto meta_len = r.u32();
  auto meta = r.take(meta_len);
  if (r.remaining() != 0) {
    throw Error(Errc::truncated, what + ": " + std::to_string(r.remaining()) + " trailing bytes");
  }
  ckpt.metadata_json.assign(meta.begin(), meta.end());

  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(ckpt.metadata_json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::manifest, what + ": metadata is not JSON: " + e.what());
  }
  if (parsed.is_object()) {
    auto it = parsed.find("head");
    if (it != parsed.end() && it->contains("dropout_p")) {
      h.config.dropout_p = (*it)["dropout_p"].get<double>();
    }
  }
  return ckpt;
}

void write_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_checkpoint(checkpoint));
}

ModelCheckpoint read_checkpoint(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  return decode_checkpoint(bytes, path.string());
}

}  // namespace morallens
