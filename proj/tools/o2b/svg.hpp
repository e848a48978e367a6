#pragma once

#include <string>

#include <json.hpp>

namespace o2b::cli {

/// Renders a figure document written by the pipeline. The document's "kind"
/// selects the figure: correlation_table, overlap_matrix or category_scatter.
std::string render_svg(const nlohmann::ordered_json& doc);

}  // namespace o2b::cli
