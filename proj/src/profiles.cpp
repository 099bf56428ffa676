#include "morallens/profiles.hpp"

#include "morallens/error.hpp"

#include <array>
#include <cctype>
#include <string>

namespace morallens {

namespace {

constexpr std::array<ProfileSpec, 4> kProfiles = {{
    {EncoderProfile::vitb32, "vitb32", 512, 0.002, 1e-8, 0.01, 64, 100, 0.5},
    {EncoderProfile::vitb16, "vitb16", 512, 0.002, 1e-10, 0.01, 64, 100, 0.5},
    {EncoderProfile::vitl14, "vitl14", 768, 0.001, 1e-8, 0.01, 64, 100, 0.5},
    // Custom keeps the ViT-B/32 optimizer row and takes its dimension from the data.
    {EncoderProfile::custom, "custom", 0, 0.002, 1e-8, 0.01, 64, 100, 0.5},
}};

}  // namespace

std::span<const ProfileSpec> encoder_profiles() noexcept { return kProfiles; }

const ProfileSpec& profile_spec(EncoderProfile profile) noexcept {
  return kProfiles[static_cast<std::size_t>(profile)];
}

std::string_view to_string(EncoderProfile profile) noexcept { return profile_spec(profile).name; }

EncoderProfile parse_profile(std::string_view text) {
  std::string key;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  for (const auto& p : kProfiles) {
    if (key == p.name) return p.profile;
  }
  throw Error(Errc::invalid_argument, "unknown encoder profile '" + std::string(text) +
                                          "' (expected vitb32, vitb16, vitl14 or custom)");
}

OptimizerConfig optimizer_for(EncoderProfile profile) {
  const auto& p = profile_spec(profile);
  OptimizerConfig c;
  c.lr = p.lr;
  c.epsilon = p.epsilon;
  c.weight_decay = p.weight_decay;
  return c;
}

}  // namespace morallens
