#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace o2b {

enum class Errc {
  invalid_argument,
  shape_mismatch,
  non_finite,
  missing_blob,
  cyclic_graph,
  unknown_layer,
  invalid_graph,
  parse_error,
  io_error,
  unknown_node,
  invalid_resume_point,
  not_captured,
  undefined_correlation,
  unmapped_class,
  unknown_image,
};

std::string_view errc_name(Errc code) noexcept;

// Every failure raised by the library carries a machine-checkable code so
// callers (and tests) can distinguish e.g. a missing blob from a bad shape.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace o2b
