#include "morallens/error.hpp"

namespace morallens {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::non_finite: return "non_finite";
    case Errc::io: return "io";
    case Errc::bad_magic: return "bad_magic";
    case Errc::bad_version: return "bad_version";
    case Errc::truncated: return "truncated";
    case Errc::count_mismatch: return "count_mismatch";
    case Errc::manifest: return "manifest";
    case Errc::unknown_label: return "unknown_label";
    case Errc::empty_input: return "empty_input";
    case Errc::training: return "training";
  }
  return "unknown";
}

bool is_input_error(Errc code) noexcept {
  return code != Errc::training;
}

}  // namespace morallens
