#pragma once

#include "morallens/classifier_head.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace morallens {

/// A head as stored on disk: 32-bit parameters plus a JSON metadata blob
/// (seed, hyperparameters, provenance). The metadata bytes are kept verbatim
/// so a read/write cycle reproduces the file exactly.
struct ModelCheckpoint {
  static constexpr std::uint8_t kVersion = 1;

  ClassifierHead<float> head;
  std::string metadata_json = "{}";
};

std::vector<unsigned char> encode_checkpoint(const ModelCheckpoint& checkpoint);
ModelCheckpoint decode_checkpoint(std::span<const unsigned char> bytes, const std::string& what = "checkpoint");

void write_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path);
ModelCheckpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace morallens
