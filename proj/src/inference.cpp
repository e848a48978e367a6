#include "o2b/inference.hpp"

#include <algorithm>

#include "o2b/kernels.hpp"
#include "o2b/parallel.hpp"

namespace o2b {

namespace {

template <typename T>
std::vector<T> convert(const Blob* b) {
  if (!b) return {};
  return std::vector<T>(b->data.begin(), b->data.end());
}

template <typename T>
Tensor<T> apply_mask(Tensor<T> t, const AblationMask& mask, std::string_view node_id) {
  if (!mask.touches(node_id)) return t;
  const auto ch = mask.channels(node_id);
  return zero_channels(t, ch);
}

template <typename T>
void accumulate(std::optional<std::vector<T>>& slot, const Tensor<T>& g) {
  if (!slot) {
    slot.emplace(g.data().begin(), g.data().end());
    return;
  }
  auto& acc = *slot;
  const auto src = g.data();
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += src[i];
}

}  // namespace

template <typename T>
Network<T>::Network(const ModelGraph& graph) : graph_(graph) {
  const auto report = validate_graph(graph_);
  if (!report.ok()) require_valid(graph_);
  shapes_ = report.shapes;
  const std::size_t n = graph_.nodes.size();
  params_.resize(n);
  input_index_.resize(n);
  last_use_.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = graph_.nodes[i];
    const LayerParams& p = node.params;
    Params& out = params_[i];
    if (!p.weight.empty()) {
      const Blob* w = graph_.find_blob(p.weight);
      out.weight = Tensor<T>(w->shape, convert<T>(w));
    }
    out.bias = convert<T>(p.bias.empty() ? nullptr : graph_.find_blob(p.bias));
    out.scale = convert<T>(p.scale.empty() ? nullptr : graph_.find_blob(p.scale));
    out.shift = convert<T>(p.shift.empty() ? nullptr : graph_.find_blob(p.shift));
    for (const auto& in : node.inputs) {
      if (in == kInputNode) {
        input_index_[i].push_back(-1);
      } else {
        const std::size_t k = *graph_.index_of(in);
        input_index_[i].push_back(static_cast<std::ptrdiff_t>(k));
        last_use_[k] = std::max(last_use_[k], i);
      }
    }
  }
  output_index_ = *graph_.index_of(graph_.output);
  last_use_[output_index_] = n;
  const auto& logit_ref = graph_.nodes[output_index_].inputs.front();
  if (logit_ref == kInputNode) {
    throw Error(Errc::invalid_graph, "the output sigmoid must not read the input image directly");
  }
  logit_index_ = *graph_.index_of(logit_ref);
}

template <typename T>
std::size_t Network<T>::require_node(std::string_view node_id) const {
  const auto idx = graph_.index_of(node_id);
  if (!idx) throw Error(Errc::unknown_node, "node '" + std::string(node_id) + "' is not in the graph");
  return *idx;
}

template <typename T>
const Shape& Network<T>::output_shape(std::string_view node_id) const {
  return shapes_[require_node(node_id)];
}

template <typename T>
std::size_t Network<T>::channels(std::string_view node_id) const {
  return output_shape(node_id).at(0);
}

template <typename T>
void Network<T>::check_mask(const AblationMask& mask) const {
  for (const auto& [id, chans] : mask.entries()) {
    const auto idx = graph_.index_of(id);
    if (!idx) throw Error(Errc::unknown_node, "mask references unknown node '" + id + "'");
    const Shape& s = shapes_[*idx];
    if (s.size() != 3) {
      throw Error(Errc::invalid_argument,
                  "mask node '" + id + "' has no channels (shape " + shape_str(s) + ")");
    }
    if (!chans.empty() && *chans.rbegin() >= s[0]) {
      throw Error(Errc::invalid_argument, "mask channel " + std::to_string(*chans.rbegin()) +
                                              " out of range for node '" + id + "' with " +
                                              std::to_string(s[0]) + " channels");
    }
  }
}

template <typename T>
Tensor<T> Network<T>::eval(std::size_t i, const std::vector<const Tensor<T>*>& in,
                           std::vector<std::size_t>* argmax) const {
  const Node& node = graph_.nodes[i];
  const LayerParams& p = node.params;
  const Params& w = params_[i];
  const Tensor<T>& x = *in.front();
  switch (p.kind) {
    case LayerKind::conv2d:
      return conv2d_forward(x, w.weight, std::span<const T>(w.bias), {p.stride, p.padding}, node.id);
    case LayerKind::relu:
      return relu_forward(x);
    case LayerKind::maxpool2d: {
      auto r = maxpool2d_forward(x, {p.kernel, p.stride, p.padding}, node.id);
      if (argmax) *argmax = std::move(r.argmax);
      return std::move(r.output);
    }
    case LayerKind::avgpool2d:
      return avgpool2d_forward(x, {p.kernel, p.stride, p.padding}, node.id);
    case LayerKind::adaptive_avgpool2d:
      return adaptive_avgpool2d_forward(x, p.out_h, p.out_w);
    case LayerKind::batchnorm2d:
      return batchnorm_forward(x, std::span<const T>(w.scale), std::span<const T>(w.shift), node.id);
    case LayerKind::linear:
      return linear_forward(x, w.weight, std::span<const T>(w.bias), node.id);
    case LayerKind::flatten:
      return x.reshaped({x.numel()});
    case LayerKind::sigmoid:
      return sigmoid_forward(x);
    case LayerKind::add:
      return add_forward(x, *in[1], node.id);
  }
  throw Error(Errc::unknown_layer, "node '" + node.id + "' has an unsupported kind");
}

template <typename T>
ForwardResult<T> Network<T>::forward(const Tensor<T>& input, const AblationMask& mask,
                                     const CaptureSet& capture) const {
  if (input.shape() != graph_.input_shape) {
    throw Error(Errc::shape_mismatch, "input shape " + shape_str(input.shape()) +
                                          " does not match model input " +
                                          shape_str(graph_.input_shape));
  }
  check_mask(mask);
  for (const auto& id : capture) require_node(id);

  ForwardResult<T> r;
  r.mask = mask;
  r.input = input;
  const std::size_t n = graph_.nodes.size();
  r.outputs.resize(n);
  r.argmax.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<const Tensor<T>*> in;
    for (const auto k : input_index_[i]) in.push_back(k < 0 ? &r.input : &r.outputs[k]);
    r.outputs[i] = apply_mask(eval(i, in, &r.argmax[i]), mask, graph_.nodes[i].id);
  }
  for (const auto& id : capture) r.captures.emplace(id, r.outputs[*graph_.index_of(id)]);
  r.prediction = r.outputs[output_index_][0];
  r.logit = r.outputs[logit_index_][0];
  return r;
}

template <typename T>
T Network<T>::run(std::size_t first, std::vector<std::optional<Tensor<T>>>& values,
                  const Tensor<T>* input, const AblationMask& mask) const {
  const std::size_t n = graph_.nodes.size();
  for (std::size_t i = first; i < n; ++i) {
    std::vector<const Tensor<T>*> in;
    for (const auto k : input_index_[i]) in.push_back(k < 0 ? input : &*values[k]);
    values[i] = apply_mask(eval(i, in, nullptr), mask, graph_.nodes[i].id);
    for (const auto k : input_index_[i]) {
      if (k >= 0 && last_use_[k] == i) values[k].reset();
    }
  }
  return (*values[output_index_])[0];
}

template <typename T>
T Network<T>::predict(const Tensor<T>& input, const AblationMask& mask) const {
  if (input.shape() != graph_.input_shape) {
    throw Error(Errc::shape_mismatch, "input shape " + shape_str(input.shape()) +
                                          " does not match model input " +
                                          shape_str(graph_.input_shape));
  }
  check_mask(mask);
  std::vector<std::optional<Tensor<T>>> values(graph_.nodes.size());
  return run(0, values, &input, mask);
}

template <typename T>
Tensor<T> Network<T>::activation(const Tensor<T>& input, std::string_view node_id) const {
  const std::size_t target = require_node(node_id);
  if (input.shape() != graph_.input_shape) {
    throw Error(Errc::shape_mismatch, "input shape " + shape_str(input.shape()) +
                                          " does not match model input " +
                                          shape_str(graph_.input_shape));
  }
  std::vector<std::optional<Tensor<T>>> values(target + 1);
  for (std::size_t i = 0; i <= target; ++i) {
    std::vector<const Tensor<T>*> in;
    for (const auto k : input_index_[i]) in.push_back(k < 0 ? &input : &*values[k]);
    values[i] = eval(i, in, nullptr);
    for (const auto k : input_index_[i]) {
      if (k >= 0 && last_use_[k] == i) values[k].reset();
    }
  }
  return std::move(*values[target]);
}

template <typename T>
bool Network<T>::is_resume_point(std::string_view node_id) const {
  const auto idx = graph_.index_of(node_id);
  if (!idx) return false;
  for (std::size_t j = *idx + 1; j < graph_.nodes.size(); ++j) {
    for (const auto k : input_index_[j]) {
      if (k < static_cast<std::ptrdiff_t>(*idx)) return false;
    }
  }
  return true;
}

template <typename T>
T Network<T>::forward_from(std::string_view node_id, const Tensor<T>& cached,
                           const AblationMask& mask) const {
  const std::size_t r = require_node(node_id);
  if (!is_resume_point(node_id)) {
    throw Error(Errc::invalid_resume_point,
                "node '" + std::string(node_id) +
                    "' does not separate the input from the output; later nodes read earlier ones");
  }
  if (cached.shape() != shapes_[r]) {
    throw Error(Errc::shape_mismatch, "cached activation for '" + std::string(node_id) +
                                          "' has shape " + shape_str(cached.shape()) +
                                          ", expected " + shape_str(shapes_[r]));
  }
  check_mask(mask);
  for (const auto& [id, chans] : mask.entries()) {
    if (*graph_.index_of(id) < r) {
      throw Error(Errc::invalid_argument,
                  "mask touches '" + id + "', which precedes resume point '" +
                      std::string(node_id) + "'");
    }
  }
  std::vector<std::optional<Tensor<T>>> values(graph_.nodes.size());
  values[r] = apply_mask(cached, mask, node_id);
  if (r == output_index_) return (*values[r])[0];
  return run(r + 1, values, nullptr, mask);
}

template <typename T>
Tensor<T> Network<T>::backward_to_layer(const ForwardResult<T>& fwd, std::string_view node_id,
                                        GradientOf of) const {
  const std::size_t t = require_node(node_id);
  if (!fwd.captures.contains(node_id)) {
    throw Error(Errc::not_captured,
                "node '" + std::string(node_id) + "' was not captured by the forward pass");
  }
  if (fwd.outputs.size() != graph_.nodes.size()) {
    throw Error(Errc::not_captured, "forward result carries no backward bookkeeping");
  }
  const std::size_t seed = of == GradientOf::logit ? logit_index_ : output_index_;
  if (t > seed) {
    throw Error(Errc::invalid_argument,
                "node '" + std::string(node_id) + "' lies after the differentiated scalar");
  }

  std::vector<std::optional<std::vector<T>>> grads(graph_.nodes.size());
  grads[seed] = std::vector<T>{T(1)};
  for (std::size_t j = seed; j > t; --j) {
    if (!grads[j]) continue;
    const Node& node = graph_.nodes[j];
    const LayerParams& p = node.params;
    const Params& w = params_[j];
    Tensor<T> g(shapes_[j], std::move(*grads[j]));
    grads[j].reset();
    g = apply_mask(std::move(g), fwd.mask, node.id);

    auto input_of = [&](std::size_t slot) -> const Tensor<T>& {
      const auto k = input_index_[j][slot];
      return k < 0 ? fwd.input : fwd.outputs[k];
    };
    auto push = [&](std::size_t slot, const Tensor<T>& gi) {
      const auto k = input_index_[j][slot];
      if (k >= static_cast<std::ptrdiff_t>(t)) accumulate(grads[k], gi);
    };
    const Shape& in_shape = input_of(0).shape();
    switch (p.kind) {
      case LayerKind::conv2d:
        push(0, conv2d_backward_input(g, w.weight, in_shape, {p.stride, p.padding}, node.id));
        break;
      case LayerKind::relu:
        push(0, relu_backward(g, input_of(0)));
        break;
      case LayerKind::maxpool2d:
        push(0, maxpool2d_backward(g, std::span<const std::size_t>(fwd.argmax[j]), in_shape));
        break;
      case LayerKind::avgpool2d:
        push(0, avgpool2d_backward(g, in_shape, {p.kernel, p.stride, p.padding}));
        break;
      case LayerKind::adaptive_avgpool2d:
        push(0, adaptive_avgpool2d_backward(g, in_shape));
        break;
      case LayerKind::batchnorm2d:
        push(0, batchnorm_backward(g, std::span<const T>(w.scale)));
        break;
      case LayerKind::linear:
        push(0, linear_backward_input(g, w.weight, node.id));
        break;
      case LayerKind::flatten:
        push(0, g.reshaped(in_shape));
        break;
      case LayerKind::sigmoid:
        push(0, sigmoid_backward(g, fwd.outputs[j]));
        break;
      case LayerKind::add:
        push(0, g);
        push(1, g);
        break;
    }
  }
  if (!grads[t]) return Tensor<T>(shapes_[t]);
  return Tensor<T>(shapes_[t], std::move(*grads[t]));
}

template <typename T>
PredictionTable predict_corpus(const Network<T>& net, const Corpus& corpus,
                               const AblationMask& mask, std::size_t jobs) {
  std::vector<double> values(corpus.size());
  parallel_for(corpus.size(), jobs, [&](std::size_t i) {
    const Tensor<float> img = corpus.image(i);
    if (img.shape() != net.input_shape()) {
      throw Error(Errc::shape_mismatch, "image '" + corpus.id(i) + "' has shape " +
                                            shape_str(img.shape()) + ", model expects " +
                                            shape_str(net.input_shape()));
    }
    if constexpr (std::is_same_v<T, float>) {
      values[i] = net.predict(img, mask);
    } else {
      values[i] = static_cast<double>(net.predict(img.template cast<T>(), mask));
    }
  });
  std::vector<std::pair<std::string, double>> rows;
  rows.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) rows.emplace_back(corpus.id(i), values[i]);
  return PredictionTable(std::move(rows));
}

template class Network<float>;
template class Network<double>;
template PredictionTable predict_corpus(const Network<float>&, const Corpus&, const AblationMask&,
                                        std::size_t);
template PredictionTable predict_corpus(const Network<double>&, const Corpus&, const AblationMask&,
                                        std::size_t);

}  // namespace o2b
