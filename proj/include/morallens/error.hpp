#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace morallens {

/// Error categories surfaced by every module. The CLI prints the category
/// name on stderr and maps it to an exit code (see `is_input_error`).
enum class Errc {
  invalid_argument,    // precondition on a value (threshold, window, alpha, ...)
  dimension_mismatch,  // vector/matrix shapes disagree
  non_finite,          // NaN or Inf where a finite value is required
  io,                  // open/read/write failure
  bad_magic,           // file does not start with the expected magic
  bad_version,         // unsupported format version
  truncated,           // file shorter than its header promises
  count_mismatch,      // manifest rows != embedding rows
  manifest,            // malformed manifest line
  unknown_label,       // source or raw class the label adapters do not know
  empty_input,         // an operation received nothing to work on
  training,            // training diverged (non-finite loss)
};

std::string_view to_string(Errc code) noexcept;

/// Input-side categories map to exit code 2, the rest to 1.
bool is_input_error(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace morallens
