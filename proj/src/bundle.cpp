// Model bundle format: a directory holding
//   model.json  - manifest (nodes, params, blob table, input shape, metadata)
//   weights.bin - concatenated little-endian float32 blobs
// The manifest schema is closed: unknown fields are rejected at every level.

#include <filesystem>

#include "json_util.hpp"
#include "o2b/io.hpp"
#include "o2b/model_graph.hpp"

namespace o2b {

namespace {

using detail::json;
using detail::ordered_json;
using detail::reject_unknown_keys;
using detail::required;

constexpr std::string_view kFormat = "o2b-bundle-v1";

void parse_params(const json& j, LayerParams& p, const std::string& ctx) {
  switch (p.kind) {
    case LayerKind::conv2d:
      reject_unknown_keys(j, {"in_channels", "out_channels", "kernel", "stride", "padding"}, ctx);
      p.in_channels = required<std::size_t>(j, "in_channels", ctx);
      p.out_channels = required<std::size_t>(j, "out_channels", ctx);
      p.kernel = required<std::size_t>(j, "kernel", ctx);
      p.stride = detail::optional_field<std::size_t>(j, "stride", 1, ctx);
      p.padding = detail::optional_field<std::size_t>(j, "padding", 0, ctx);
      break;
    case LayerKind::maxpool2d:
    case LayerKind::avgpool2d:
      reject_unknown_keys(j, {"kernel", "stride", "padding"}, ctx);
      p.kernel = required<std::size_t>(j, "kernel", ctx);
      p.stride = detail::optional_field<std::size_t>(j, "stride", p.kernel, ctx);
      p.padding = detail::optional_field<std::size_t>(j, "padding", 0, ctx);
      break;
    case LayerKind::adaptive_avgpool2d: {
      reject_unknown_keys(j, {"output"}, ctx);
      const auto out = required<std::vector<std::size_t>>(j, "output", ctx);
      if (out.size() != 2) throw Error(Errc::parse_error, ctx + ": output must be [h, w]");
      p.out_h = out[0];
      p.out_w = out[1];
      break;
    }
    case LayerKind::linear:
      reject_unknown_keys(j, {"in_features", "out_features"}, ctx);
      p.in_features = required<std::size_t>(j, "in_features", ctx);
      p.out_features = required<std::size_t>(j, "out_features", ctx);
      break;
    default:
      reject_unknown_keys(j, {}, ctx);
      break;
  }
}

void parse_weights(const json& j, LayerParams& p, const std::string& ctx) {
  switch (p.kind) {
    case LayerKind::conv2d:
    case LayerKind::linear:
      reject_unknown_keys(j, {"weight", "bias"}, ctx);
      p.weight = detail::optional_field<std::string>(j, "weight", "", ctx);
      p.bias = detail::optional_field<std::string>(j, "bias", "", ctx);
      break;
    case LayerKind::batchnorm2d:
      reject_unknown_keys(j, {"scale", "shift"}, ctx);
      p.scale = detail::optional_field<std::string>(j, "scale", "", ctx);
      p.shift = detail::optional_field<std::string>(j, "shift", "", ctx);
      break;
    default:
      reject_unknown_keys(j, {}, ctx);
      break;
  }
}

ordered_json params_json(const LayerParams& p) {
  ordered_json j = ordered_json::object();
  switch (p.kind) {
    case LayerKind::conv2d:
      j["in_channels"] = p.in_channels;
      j["out_channels"] = p.out_channels;
      j["kernel"] = p.kernel;
      j["stride"] = p.stride;
      j["padding"] = p.padding;
      break;
    case LayerKind::maxpool2d:
    case LayerKind::avgpool2d:
      j["kernel"] = p.kernel;
      j["stride"] = p.stride;
      j["padding"] = p.padding;
      break;
    case LayerKind::adaptive_avgpool2d:
      j["output"] = {p.out_h, p.out_w};
      break;
    case LayerKind::linear:
      j["in_features"] = p.in_features;
      j["out_features"] = p.out_features;
      break;
    default:
      break;
  }
  return j;
}

ordered_json weights_json(const LayerParams& p) {
  ordered_json j = ordered_json::object();
  auto put = [&](const char* key, const std::string& ref) {
    if (!ref.empty()) j[key] = ref;
  };
  put("weight", p.weight);
  put("bias", p.bias);
  put("scale", p.scale);
  put("shift", p.shift);
  return j;
}

// Names of the nodes referencing a blob, for error messages.
std::string referencing_nodes(const json& nodes, const std::string& blob) {
  std::string out;
  for (const auto& n : nodes) {
    const auto w = n.find("weights");
    if (w == n.end() || !w->is_object()) continue;
    for (const auto& [key, ref] : w->items()) {
      if (ref.is_string() && ref.get<std::string>() == blob) {
        if (!out.empty()) out += ", ";
        out += n.value("id", std::string("?"));
      }
    }
  }
  return out.empty() ? "no node" : "node " + out;
}

}  // namespace

ModelGraph load_model(const std::filesystem::path& bundle_dir) {
  const auto manifest_path = bundle_dir / "model.json";
  if (!std::filesystem::exists(manifest_path)) {
    throw Error(Errc::io_error, "bundle manifest not found: " + manifest_path.string());
  }
  const json m = detail::parse_json(io::read_text(manifest_path), manifest_path.string());
  reject_unknown_keys(m, {"format", "input_shape", "output", "metadata", "nodes", "blobs"},
                      "model.json");
  if (required<std::string>(m, "format", "model.json") != kFormat) {
    throw Error(Errc::parse_error, "model.json: unsupported format, expected " +
                                       std::string(kFormat));
  }

  ModelGraph g;
  g.input_shape = required<std::vector<std::size_t>>(m, "input_shape", "model.json");
  g.output = required<std::string>(m, "output", "model.json");

  if (const auto md = m.find("metadata"); md != m.end()) {
    reject_unknown_keys(*md,
                        {"architecture", "seed", "label_semantics", "cut_point", "target_layers"},
                        "model.json metadata");
    const std::string ctx = "model.json metadata";
    g.metadata.architecture = detail::optional_field<std::string>(*md, "architecture", "", ctx);
    g.metadata.seed = detail::optional_field<std::int64_t>(*md, "seed", 0, ctx);
    g.metadata.label_semantics =
        detail::optional_field<std::string>(*md, "label_semantics", "", ctx);
    g.metadata.cut_point = detail::optional_field<std::string>(*md, "cut_point", "", ctx);
    g.metadata.target_layers =
        detail::optional_field<std::vector<std::string>>(*md, "target_layers", {}, ctx);
  }

  const json nodes = required<json>(m, "nodes", "model.json");
  if (!nodes.is_array()) throw Error(Errc::parse_error, "model.json: nodes must be an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const json& jn = nodes[i];
    const std::string ctx = "model.json nodes[" + std::to_string(i) + "]";
    reject_unknown_keys(jn, {"id", "kind", "inputs", "params", "weights"}, ctx);
    Node n;
    n.id = required<std::string>(jn, "id", ctx);
    const auto kind_name = required<std::string>(jn, "kind", ctx);
    const auto kind = parse_layer_kind(kind_name);
    if (!kind) {
      throw Error(Errc::unknown_layer, "node '" + n.id + "' has unknown kind '" + kind_name + "'");
    }
    n.params.kind = *kind;
    n.inputs = required<std::vector<std::string>>(jn, "inputs", ctx);
    parse_params(jn.value("params", json::object()), n.params, ctx + " params");
    parse_weights(jn.value("weights", json::object()), n.params, ctx + " weights");
    g.nodes.push_back(std::move(n));
  }

  const json blobs = m.value("blobs", json::array());
  if (!blobs.is_array()) throw Error(Errc::parse_error, "model.json: blobs must be an array");
  std::vector<std::uint8_t> bytes;
  if (!blobs.empty()) {
    const auto weights_path = bundle_dir / "weights.bin";
    if (!std::filesystem::exists(weights_path)) {
      throw Error(Errc::missing_blob, "weight file not found: " + weights_path.string());
    }
    bytes = io::read_bytes(weights_path);
  }
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    const json& jb = blobs[i];
    const std::string ctx = "model.json blobs[" + std::to_string(i) + "]";
    reject_unknown_keys(jb, {"name", "dtype", "shape", "offset", "length"}, ctx);
    Blob b;
    b.name = required<std::string>(jb, "name", ctx);
    if (required<std::string>(jb, "dtype", ctx) != "float32") {
      throw Error(Errc::parse_error, ctx + ": only float32 blobs are supported");
    }
    b.shape = required<std::vector<std::size_t>>(jb, "shape", ctx);
    const auto offset = required<std::size_t>(jb, "offset", ctx);
    const auto length = required<std::size_t>(jb, "length", ctx);
    if (offset > bytes.size() || length > bytes.size() - offset) {
      throw Error(Errc::missing_blob, "blob '" + b.name + "' lies outside weights.bin");
    }
    if (length != shape_numel(b.shape) * sizeof(float)) {
      throw Error(Errc::shape_mismatch,
                  "blob '" + b.name + "' (" + referencing_nodes(nodes, b.name) + ") has " +
                      std::to_string(length / sizeof(float)) + " elements, shape " +
                      shape_str(b.shape) + " needs " + std::to_string(shape_numel(b.shape)));
    }
    b.data = io::decode_f32_le(std::span<const std::uint8_t>(bytes).subspan(offset, length));
    if (g.find_blob(b.name)) throw Error(Errc::parse_error, "duplicate blob '" + b.name + "'");
    g.blobs.push_back(std::move(b));
  }

  require_valid(g);
  return g;
}

void save_model(const ModelGraph& graph, const std::filesystem::path& bundle_dir) {
  ordered_json m;
  m["format"] = kFormat;
  m["input_shape"] = graph.input_shape;
  m["output"] = graph.output;
  ordered_json md;
  md["architecture"] = graph.metadata.architecture;
  md["seed"] = graph.metadata.seed;
  md["label_semantics"] = graph.metadata.label_semantics;
  md["cut_point"] = graph.metadata.cut_point;
  md["target_layers"] = graph.metadata.target_layers;
  m["metadata"] = md;

  ordered_json nodes = ordered_json::array();
  for (const auto& n : graph.nodes) {
    ordered_json jn;
    jn["id"] = n.id;
    jn["kind"] = std::string(to_string(n.params.kind));
    jn["inputs"] = n.inputs;
    jn["params"] = params_json(n.params);
    jn["weights"] = weights_json(n.params);
    nodes.push_back(std::move(jn));
  }
  m["nodes"] = std::move(nodes);

  std::vector<std::uint8_t> bytes;
  ordered_json blobs = ordered_json::array();
  for (const auto& b : graph.blobs) {
    const auto enc = io::encode_f32_le(b.data);
    ordered_json jb;
    jb["name"] = b.name;
    jb["dtype"] = "float32";
    jb["shape"] = b.shape;
    jb["offset"] = bytes.size();
    jb["length"] = enc.size();
    bytes.insert(bytes.end(), enc.begin(), enc.end());
    blobs.push_back(std::move(jb));
  }
  m["blobs"] = std::move(blobs);

  std::filesystem::create_directories(bundle_dir);
  io::write_text(bundle_dir / "model.json", m.dump(2) + "\n");
  io::write_bytes(bundle_dir / "weights.bin", bytes);
}

}  // namespace o2b
