#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "o2b/tensor.hpp"

namespace o2b {

// Reserved id by which nodes refer to the network input image.
inline constexpr std::string_view kInputNode = "input";

enum class LayerKind {
  conv2d,
  relu,
  maxpool2d,
  avgpool2d,
  adaptive_avgpool2d,
  batchnorm2d,
  linear,
  flatten,
  sigmoid,
  add,
};

std::string_view to_string(LayerKind kind) noexcept;
std::optional<LayerKind> parse_layer_kind(std::string_view name) noexcept;

struct LayerParams {
  LayerKind kind = LayerKind::relu;
  // conv2d
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  // conv2d / pools (square windows)
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  // adaptive_avgpool2d
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  // linear
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  // Blob references; empty string means absent.
  std::string weight;
  std::string bias;
  std::string scale;
  std::string shift;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct Node {
  std::string id;
  LayerParams params;
  std::vector<std::string> inputs;

  friend bool operator==(const Node&, const Node&) = default;
};

struct Blob {
  std::string name;
  Shape shape;
  std::vector<float> data;

  friend bool operator==(const Blob&, const Blob&) = default;
};

struct ModelMetadata {
  std::string architecture;
  std::int64_t seed = 0;
  std::string label_semantics;
  std::string cut_point;
  std::vector<std::string> target_layers;

  friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

/// A trained network as an ordered DAG of typed layers plus weight blobs.
/// Immutable once loaded; ablation is expressed through AblationMask values.
struct ModelGraph {
  std::vector<Node> nodes;
  std::string output;
  Shape input_shape;
  ModelMetadata metadata;
  std::vector<Blob> blobs;

  const Node* find_node(std::string_view id) const noexcept;
  const Blob* find_blob(std::string_view name) const noexcept;
  std::optional<std::size_t> index_of(std::string_view id) const noexcept;

  friend bool operator==(const ModelGraph&, const ModelGraph&) = default;
};

struct Violation {
  enum class Kind {
    duplicate_id,
    unknown_input,
    cycle,
    ordering,
    bad_params,
    missing_blob,
    blob_shape,
    shape_mismatch,
    output,
    dangling,
  };
  Kind kind;
  std::string node;
  std::string message;
};

std::string_view to_string(Violation::Kind kind) noexcept;

struct ValidationReport {
  std::vector<Violation> violations;
  // Output shape per node (index-aligned with graph.nodes); empty where
  // inference failed.
  std::vector<Shape> shapes;

  bool ok() const noexcept { return violations.empty(); }
  bool has(Violation::Kind kind) const noexcept;
  std::string summary() const;
};

ValidationReport validate_graph(const ModelGraph& graph);

/// Throws the Errc matching the first violation class found
/// (cycle -> cyclic_graph, blob -> missing_blob / shape_mismatch, else invalid_graph).
void require_valid(const ModelGraph& graph);

struct TargetLayer {
  std::string node_id;
  std::size_t filters = 0;
};
using TargetLayerSet = std::vector<TargetLayer>;

/// Resolves node ids into target layers. Accepted nodes: conv2d outputs, or a
/// relu fed by conv2d, batchnorm2d or a residual add. Order follows the graph.
TargetLayerSet make_target_set(const ModelGraph& graph, const std::vector<std::string>& node_ids);

struct FilterRef {
  std::string node_id;
  std::size_t channel = 0;

  friend auto operator<=>(const FilterRef&, const FilterRef&) = default;
};

/// Target layers in topological order, channels ascending.
std::vector<FilterRef> enumerate_filters(const ModelGraph& graph, const TargetLayerSet& targets);

class AblationMask {
 public:
  AblationMask() = default;

  static AblationMask single(std::string node_id, std::size_t channel);

  void add(const std::string& node_id, std::size_t channel);
  bool empty() const noexcept { return channels_.empty(); }
  bool touches(std::string_view node_id) const;
  std::vector<std::size_t> channels(std::string_view node_id) const;
  const std::map<std::string, std::set<std::size_t>, std::less<>>& entries() const noexcept {
    return channels_;
  }

 private:
  std::map<std::string, std::set<std::size_t>, std::less<>> channels_;
};

/// Reads a bundle directory (model.json + weights.bin) and validates it.
ModelGraph load_model(const std::filesystem::path& bundle_dir);

/// Writes a bundle; blobs are laid out contiguously in graph order.
void save_model(const ModelGraph& graph, const std::filesystem::path& bundle_dir);

}  // namespace o2b
