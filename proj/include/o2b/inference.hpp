#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "o2b/corpus.hpp"
#include "o2b/model_graph.hpp"
#include "o2b/tensor.hpp"

namespace o2b {

using CaptureSet = std::set<std::string, std::less<>>;

/// Scalar that backward_to_layer differentiates.
enum class GradientOf {
  logit,        // input of the final sigmoid
  probability,  // the sigmoid output itself
};

/// Everything a forward pass leaves behind for the backward pass.
template <typename T>
struct ForwardResult {
  T prediction = 0;
  T logit = 0;
  std::map<std::string, Tensor<T>, std::less<>> captures;
  AblationMask mask;
  Tensor<T> input;
  std::vector<Tensor<T>> outputs;                  // post-mask output per node
  std::vector<std::vector<std::size_t>> argmax;    // maxpool bookkeeping per node
};

/// Executable form of a validated ModelGraph with weights held in T.
template <typename T>
class Network {
 public:
  explicit Network(const ModelGraph& graph);

  const ModelGraph& graph() const noexcept { return graph_; }
  const Shape& input_shape() const noexcept { return graph_.input_shape; }
  const Shape& output_shape(std::string_view node_id) const;
  std::size_t channels(std::string_view node_id) const;

  ForwardResult<T> forward(const Tensor<T>& input, const AblationMask& mask = {},
                           const CaptureSet& capture = {}) const;

  /// Prediction only; frees intermediates as soon as they are dead.
  T predict(const Tensor<T>& input, const AblationMask& mask = {}) const;

  /// Unmasked post-node activation of `node_id`, for later forward_from calls.
  Tensor<T> activation(const Tensor<T>& input, std::string_view node_id) const;

  /// True when every output-relevant node after `node_id` reads only
  /// `node_id` or later nodes, so its activation alone determines the output.
  bool is_resume_point(std::string_view node_id) const;

  /// Resumes from a cached unmasked activation at `node_id`. The mask may not
  /// touch nodes before it.
  T forward_from(std::string_view node_id, const Tensor<T>& cached,
                 const AblationMask& mask = {}) const;

  /// Exact reverse-mode gradient of the chosen scalar with respect to the
  /// post-mask activation of `node_id`, which must have been captured.
  Tensor<T> backward_to_layer(const ForwardResult<T>& fwd, std::string_view node_id,
                              GradientOf of = GradientOf::logit) const;

 private:
  struct Params {
    Tensor<T> weight;
    std::vector<T> bias;
    std::vector<T> scale;
    std::vector<T> shift;
  };

  std::size_t require_node(std::string_view node_id) const;
  void check_mask(const AblationMask& mask) const;
  Tensor<T> eval(std::size_t i, const std::vector<const Tensor<T>*>& in,
                 std::vector<std::size_t>* argmax) const;
  // Runs nodes [first, end) given an evaluator for already-known tensors.
  T run(std::size_t first, std::vector<std::optional<Tensor<T>>>& values,
        const Tensor<T>* input, const AblationMask& mask) const;

  ModelGraph graph_;
  std::vector<Params> params_;
  std::vector<Shape> shapes_;
  std::vector<std::vector<std::ptrdiff_t>> input_index_;  // -1 is the network input
  std::vector<bool> relevant_;                             // ancestor of the output
  std::vector<std::size_t> last_use_;
  std::size_t output_index_ = 0;
  std::size_t logit_index_ = 0;
};

/// Predictions for every corpus image, evaluated on up to `jobs` threads.
template <typename T>
PredictionTable predict_corpus(const Network<T>& net, const Corpus& corpus,
                               const AblationMask& mask = {}, std::size_t jobs = 1);

}  // namespace o2b
