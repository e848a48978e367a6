#include "o2b/model_graph.hpp"

#include <algorithm>
#include <functional>
#include <unordered_map>

#include "o2b/kernels.hpp"

namespace o2b {

namespace {

constexpr std::pair<LayerKind, std::string_view> kKindNames[] = {
    {LayerKind::conv2d, "conv2d"},
    {LayerKind::relu, "relu"},
    {LayerKind::maxpool2d, "maxpool2d"},
    {LayerKind::avgpool2d, "avgpool2d"},
    {LayerKind::adaptive_avgpool2d, "adaptive_avgpool2d"},
    {LayerKind::batchnorm2d, "batchnorm2d"},
    {LayerKind::linear, "linear"},
    {LayerKind::flatten, "flatten"},
    {LayerKind::sigmoid, "sigmoid"},
    {LayerKind::add, "add"},
};

class Checker {
 public:
  explicit Checker(const ModelGraph& g) : g_(g) {}

  ValidationReport run() {
    check_ids();
    const bool wired = check_wiring();
    if (wired) infer_shapes();
    check_output();
    check_dangling();
    return std::move(report_);
  }

 private:
  void add(Violation::Kind kind, const std::string& node, std::string message) {
    report_.violations.push_back({kind, node, std::move(message)});
  }

  void check_ids() {
    for (std::size_t i = 0; i < g_.nodes.size(); ++i) {
      const auto& id = g_.nodes[i].id;
      if (id.empty() || id == kInputNode) {
        add(Violation::Kind::duplicate_id, id, "node id '" + id + "' is empty or reserved");
        continue;
      }
      if (!index_.emplace(id, i).second) {
        add(Violation::Kind::duplicate_id, id, "duplicate node id '" + id + "'");
      }
    }
  }

  // Arity, unknown references, cycles and ordering. Returns true when the
  // graph is wired well enough for shape inference.
  bool check_wiring() {
    bool ok = true;
    for (std::size_t i = 0; i < g_.nodes.size(); ++i) {
      const auto& n = g_.nodes[i];
      const std::size_t want = n.params.kind == LayerKind::add ? 2 : 1;
      if (n.inputs.size() != want) {
        add(Violation::Kind::bad_params, n.id,
            std::string(to_string(n.params.kind)) + " needs " + std::to_string(want) +
                " input(s), has " + std::to_string(n.inputs.size()));
        ok = false;
      }
      for (const auto& in : n.inputs) {
        if (in != kInputNode && !index_.contains(in)) {
          add(Violation::Kind::unknown_input, n.id, "input '" + in + "' does not exist");
          ok = false;
        }
      }
    }

    // Depth-first cycle search over known edges.
    enum class Mark { white, grey, black };
    std::vector<Mark> mark(g_.nodes.size(), Mark::white);
    bool cyclic = false;
    std::function<void(std::size_t)> visit = [&](std::size_t i) {
      mark[i] = Mark::grey;
      for (const auto& in : g_.nodes[i].inputs) {
        auto it = index_.find(in);
        if (it == index_.end()) continue;
        const std::size_t j = it->second;
        if (mark[j] == Mark::grey) {
          if (!cyclic) {
            add(Violation::Kind::cycle, g_.nodes[i].id,
                "cycle through '" + g_.nodes[i].id + "' and '" + in + "'");
          }
          cyclic = true;
        } else if (mark[j] == Mark::white) {
          visit(j);
        }
      }
      mark[i] = Mark::black;
    };
    for (std::size_t i = 0; i < g_.nodes.size(); ++i) {
      if (mark[i] == Mark::white) visit(i);
    }
    if (cyclic) return false;

    for (std::size_t i = 0; i < g_.nodes.size(); ++i) {
      for (const auto& in : g_.nodes[i].inputs) {
        auto it = index_.find(in);
        if (it != index_.end() && it->second >= i) {
          add(Violation::Kind::ordering, g_.nodes[i].id,
              "input '" + in + "' appears after its consumer");
          ok = false;
        }
      }
    }
    return ok;
  }

  const Blob* blob_for(const Node& n, const std::string& ref, std::string_view role,
                       bool required) {
    if (ref.empty()) {
      if (required) {
        add(Violation::Kind::missing_blob, n.id, std::string(role) + " blob not referenced");
      }
      return nullptr;
    }
    const Blob* b = g_.find_blob(ref);
    if (!b) {
      add(Violation::Kind::missing_blob, n.id,
          std::string(role) + " blob '" + ref + "' is absent from the bundle");
      return nullptr;
    }
    if (b->data.size() != shape_numel(b->shape)) {
      add(Violation::Kind::blob_shape, n.id,
          "blob '" + ref + "' holds " + std::to_string(b->data.size()) + " values for shape " +
              shape_str(b->shape));
      return nullptr;
    }
    return b;
  }

  void expect_blob_shape(const Node& n, const Blob* b, const Shape& want) {
    if (b && b->shape != want) {
      add(Violation::Kind::blob_shape, n.id,
          "blob '" + b->name + "' has shape " + shape_str(b->shape) + ", expected " +
              shape_str(want));
    }
  }

  std::optional<Shape> infer(const Node& n, const std::vector<Shape>& in) {
    const auto& p = n.params;
    auto bad = [&](std::string msg) -> std::optional<Shape> {
      add(Violation::Kind::bad_params, n.id, std::move(msg));
      return std::nullopt;
    };
    auto mismatch = [&](std::string msg) -> std::optional<Shape> {
      add(Violation::Kind::shape_mismatch, n.id, std::move(msg));
      return std::nullopt;
    };
    const Shape& x = in.front();
    switch (p.kind) {
      case LayerKind::conv2d: {
        if (p.kernel == 0 || p.stride == 0 || p.out_channels == 0 || p.in_channels == 0) {
          return bad("conv2d needs kernel, stride, in/out channels >= 1");
        }
        const Blob* w = blob_for(n, p.weight, "weight", true);
        const Blob* b = blob_for(n, p.bias, "bias", false);
        expect_blob_shape(n, w, {p.out_channels, p.in_channels, p.kernel, p.kernel});
        expect_blob_shape(n, b, {p.out_channels});
        if (x.size() != 3 || x[0] != p.in_channels) {
          return mismatch("expected input (" + std::to_string(p.in_channels) + ",H,W), got " +
                          shape_str(x));
        }
        const auto oh = window_output_size(x[1], p.kernel, p.stride, p.padding);
        const auto ow = window_output_size(x[2], p.kernel, p.stride, p.padding);
        if (oh == 0 || ow == 0) return mismatch("kernel does not fit input " + shape_str(x));
        return Shape{p.out_channels, oh, ow};
      }
      case LayerKind::relu:
      case LayerKind::sigmoid:
        return x;
      case LayerKind::maxpool2d:
      case LayerKind::avgpool2d: {
        if (p.kernel == 0 || p.stride == 0) return bad("pool needs kernel, stride >= 1");
        if (2 * p.padding > p.kernel) return bad("pool padding exceeds half the window");
        if (x.size() != 3) return mismatch("expected CHW input, got " + shape_str(x));
        const auto oh = window_output_size(x[1], p.kernel, p.stride, p.padding);
        const auto ow = window_output_size(x[2], p.kernel, p.stride, p.padding);
        if (oh == 0 || ow == 0) return mismatch("window does not fit input " + shape_str(x));
        return Shape{x[0], oh, ow};
      }
      case LayerKind::adaptive_avgpool2d:
        if (p.out_h == 0 || p.out_w == 0) return bad("adaptive pool output must be >= 1");
        if (x.size() != 3) return mismatch("expected CHW input, got " + shape_str(x));
        return Shape{x[0], p.out_h, p.out_w};
      case LayerKind::batchnorm2d: {
        const Blob* s = blob_for(n, p.scale, "scale", true);
        const Blob* t = blob_for(n, p.shift, "shift", true);
        if (x.size() != 3) return mismatch("expected CHW input, got " + shape_str(x));
        expect_blob_shape(n, s, {x[0]});
        expect_blob_shape(n, t, {x[0]});
        return x;
      }
      case LayerKind::linear: {
        if (p.in_features == 0 || p.out_features == 0) return bad("linear needs features >= 1");
        const Blob* w = blob_for(n, p.weight, "weight", true);
        const Blob* b = blob_for(n, p.bias, "bias", false);
        expect_blob_shape(n, w, {p.out_features, p.in_features});
        expect_blob_shape(n, b, {p.out_features});
        if (x.size() != 1 || x[0] != p.in_features) {
          return mismatch("expected input (" + std::to_string(p.in_features) + "), got " +
                          shape_str(x));
        }
        return Shape{p.out_features};
      }
      case LayerKind::flatten:
        return Shape{shape_numel(x)};
      case LayerKind::add:
        if (in[0] != in[1]) {
          return mismatch("add branches differ: " + shape_str(in[0]) + " vs " + shape_str(in[1]));
        }
        return x;
    }
    return bad("unhandled layer kind");
  }

  void infer_shapes() {
    report_.shapes.assign(g_.nodes.size(), Shape{});
    if (g_.input_shape.size() != 3 || shape_numel(g_.input_shape) == 0) {
      add(Violation::Kind::bad_params, std::string(kInputNode),
          "input shape must be non-empty CHW, got " + shape_str(g_.input_shape));
      return;
    }
    std::vector<bool> known(g_.nodes.size(), false);
    for (std::size_t i = 0; i < g_.nodes.size(); ++i) {
      const auto& n = g_.nodes[i];
      std::vector<Shape> in;
      bool ready = true;
      for (const auto& ref : n.inputs) {
        if (ref == kInputNode) {
          in.push_back(g_.input_shape);
        } else {
          const std::size_t j = index_.at(ref);
          if (!known[j]) ready = false;
          in.push_back(report_.shapes[j]);
        }
      }
      if (!ready) continue;
      if (auto s = infer(n, in)) {
        report_.shapes[i] = std::move(*s);
        known[i] = true;
      }
    }
  }

  void check_output() {
    const auto it = index_.find(g_.output);
    if (it == index_.end()) {
      add(Violation::Kind::output, g_.output, "output node '" + g_.output + "' does not exist");
      return;
    }
    const auto& n = g_.nodes[it->second];
    if (n.params.kind != LayerKind::sigmoid) {
      add(Violation::Kind::output, n.id, "output node must be a sigmoid");
    }
    if (!report_.shapes.empty() && !report_.shapes[it->second].empty() &&
        report_.shapes[it->second] != Shape{1}) {
      add(Violation::Kind::output, n.id,
          "output must be a scalar, got " + shape_str(report_.shapes[it->second]));
    }
  }

  void check_dangling() {
    std::set<std::string, std::less<>> consumed;
    for (const auto& n : g_.nodes) consumed.insert(n.inputs.begin(), n.inputs.end());
    for (const auto& n : g_.nodes) {
      if (n.id != g_.output && !consumed.contains(n.id)) {
        add(Violation::Kind::dangling, n.id, "node output is never consumed");
      }
    }
  }

  const ModelGraph& g_;
  std::unordered_map<std::string, std::size_t> index_;
  ValidationReport report_;
};

}  // namespace

std::string_view to_string(LayerKind kind) noexcept {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<LayerKind> parse_layer_kind(std::string_view name) noexcept {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

std::string_view to_string(Violation::Kind kind) noexcept {
  switch (kind) {
    case Violation::Kind::duplicate_id: return "duplicate_id";
    case Violation::Kind::unknown_input: return "unknown_input";
    case Violation::Kind::cycle: return "cycle";
    case Violation::Kind::ordering: return "ordering";
    case Violation::Kind::bad_params: return "bad_params";
    case Violation::Kind::missing_blob: return "missing_blob";
    case Violation::Kind::blob_shape: return "blob_shape";
    case Violation::Kind::shape_mismatch: return "shape_mismatch";
    case Violation::Kind::output: return "output";
    case Violation::Kind::dangling: return "dangling";
  }
  return "unknown";
}

const Node* ModelGraph::find_node(std::string_view id) const noexcept {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

const Blob* ModelGraph::find_blob(std::string_view name) const noexcept {
  for (const auto& b : blobs) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

std::optional<std::size_t> ModelGraph::index_of(std::string_view id) const noexcept {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return i;
  }
  return std::nullopt;
}

bool ValidationReport::has(Violation::Kind kind) const noexcept {
  return std::any_of(violations.begin(), violations.end(),
                     [kind](const Violation& v) { return v.kind == kind; });
}

std::string ValidationReport::summary() const {
  std::string s;
  for (const auto& v : violations) {
    if (!s.empty()) s += "; ";
    s += "[" + std::string(to_string(v.kind)) + "] " + v.node + ": " + v.message;
  }
  return s;
}

ValidationReport validate_graph(const ModelGraph& graph) { return Checker(graph).run(); }

void require_valid(const ModelGraph& graph) {
  const auto report = validate_graph(graph);
  if (report.ok()) return;
  Errc code = Errc::invalid_graph;
  if (report.has(Violation::Kind::cycle)) {
    code = Errc::cyclic_graph;
  } else if (report.has(Violation::Kind::missing_blob)) {
    code = Errc::missing_blob;
  } else if (report.has(Violation::Kind::blob_shape)) {
    code = Errc::shape_mismatch;
  }
  throw Error(code, report.summary());
}

TargetLayerSet make_target_set(const ModelGraph& graph, const std::vector<std::string>& node_ids) {
  const auto report = validate_graph(graph);
  if (!report.ok()) throw Error(Errc::invalid_graph, report.summary());

  std::vector<std::pair<std::size_t, TargetLayer>> found;
  for (const auto& id : node_ids) {
    const auto idx = graph.index_of(id);
    if (!idx) throw Error(Errc::unknown_node, "target layer '" + id + "' is not in the graph");
    const Node& n = graph.nodes[*idx];
    bool accepted = n.params.kind == LayerKind::conv2d;
    if (n.params.kind == LayerKind::relu && n.inputs.front() != kInputNode) {
      const auto feed = graph.find_node(n.inputs.front())->params.kind;
      accepted = feed == LayerKind::conv2d || feed == LayerKind::batchnorm2d ||
                 feed == LayerKind::add;
    }
    if (!accepted) {
      throw Error(Errc::invalid_argument,
                  "target layer '" + id + "' is not a conv2d output or its following relu");
    }
    const Shape& s = report.shapes[*idx];
    if (std::none_of(found.begin(), found.end(), [&](const auto& f) { return f.first == *idx; })) {
      found.push_back({*idx, TargetLayer{id, s.at(0)}});
    }
  }
  std::sort(found.begin(), found.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  TargetLayerSet out;
  for (auto& [idx, t] : found) out.push_back(std::move(t));
  return out;
}

std::vector<FilterRef> enumerate_filters(const ModelGraph& graph, const TargetLayerSet& targets) {
  std::vector<std::pair<std::size_t, const TargetLayer*>> ordered;
  for (const auto& t : targets) {
    const auto idx = graph.index_of(t.node_id);
    if (!idx) throw Error(Errc::unknown_node, "target layer '" + t.node_id + "' is not in the graph");
    ordered.emplace_back(*idx, &t);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<FilterRef> out;
  for (const auto& [idx, t] : ordered) {
    for (std::size_t c = 0; c < t->filters; ++c) out.push_back({t->node_id, c});
  }
  return out;
}

AblationMask AblationMask::single(std::string node_id, std::size_t channel) {
  AblationMask m;
  m.add(node_id, channel);
  return m;
}

void AblationMask::add(const std::string& node_id, std::size_t channel) {
  channels_[node_id].insert(channel);
}

bool AblationMask::touches(std::string_view node_id) const {
  return channels_.find(node_id) != channels_.end();
}

std::vector<std::size_t> AblationMask::channels(std::string_view node_id) const {
  const auto it = channels_.find(node_id);
  if (it == channels_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

}  // namespace o2b
