#include "o2b/tensor.hpp"

#include <functional>
#include <numeric>

namespace o2b {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::non_finite: return "non-finite value";
    case Errc::missing_blob: return "missing blob";
    case Errc::cyclic_graph: return "cyclic graph";
    case Errc::unknown_layer: return "unknown layer kind";
    case Errc::invalid_graph: return "invalid graph";
    case Errc::parse_error: return "parse error";
    case Errc::io_error: return "io error";
    case Errc::unknown_node: return "unknown node";
    case Errc::invalid_resume_point: return "invalid resume point";
    case Errc::not_captured: return "not captured";
    case Errc::undefined_correlation: return "undefined correlation";
    case Errc::unmapped_class: return "unmapped class";
    case Errc::unknown_image: return "unknown image";
  }
  return "error";
}

std::size_t shape_numel(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

}  // namespace o2b
