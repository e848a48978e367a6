#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "o2b/corpus.hpp"
#include "o2b/detection.hpp"
#include "o2b/inference.hpp"

namespace o2b {

/// S_l: mean box score per (filter, class) over the corpus.
struct ScoreMatrix {
  std::string node_id;
  std::size_t filters = 0;
  std::size_t classes = 0;
  std::vector<double> scores;                  // row-major filters x classes
  std::vector<std::size_t> detection_counts;   // per class

  double at(std::size_t filter, std::size_t cls) const { return scores.at(filter * classes + cls); }
};

/// Builds one score matrix per target layer. Each image runs one forward pass
/// and one backward pass per layer; per-filter maps are upsampled to the
/// detection's image size. Sums are reduced in canonical detection order.
template <typename T>
std::vector<ScoreMatrix> build_score_matrices(const Network<T>& net, const TargetLayerSet& targets,
                                              const Corpus& corpus,
                                              const std::vector<Detection>& detections,
                                              const ClassVocabulary& vocabulary,
                                              std::size_t jobs = 1,
                                              GradientOf of = GradientOf::logit);

template <typename T>
ScoreMatrix build_score_matrix(const Network<T>& net, const std::string& node_id,
                               const Corpus& corpus, const std::vector<Detection>& detections,
                               const ClassVocabulary& vocabulary, std::size_t jobs = 1,
                               GradientOf of = GradientOf::logit);

/// `<stem>.f64` (row-major little-endian float64), `<stem>.json` sidecar and
/// `<stem>.csv` (one row per filter, one column per class).
void write_score_matrix(const std::filesystem::path& stem, const ScoreMatrix& m,
                        const ClassVocabulary& vocabulary,
                        const std::vector<std::string>& comments = {});
ScoreMatrix read_score_matrix(const std::filesystem::path& stem);

}  // namespace o2b
