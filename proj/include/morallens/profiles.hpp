#pragma once

#include "morallens/optimizer.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace morallens {

enum class EncoderProfile : std::uint8_t { vitb32, vitb16, vitl14, custom };

/// One row of the training-hyperparameter table for a frozen encoder.
struct ProfileSpec {
  EncoderProfile profile;
  std::string_view name;
  std::uint32_t dim;  // 0 for custom
  double lr;
  double epsilon;
  double weight_decay;
  std::uint32_t batch_size;
  std::uint32_t epochs;
  double dropout_p;
};

std::span<const ProfileSpec> encoder_profiles() noexcept;
const ProfileSpec& profile_spec(EncoderProfile profile) noexcept;
std::string_view to_string(EncoderProfile profile) noexcept;

/// Accepts "vitb32", "ViT-B/32", "vit-b-32" and similar spellings.
EncoderProfile parse_profile(std::string_view text);

/// Optimizer settings of a profile (betas are the optimizer defaults).
OptimizerConfig optimizer_for(EncoderProfile profile);

}  // namespace morallens
