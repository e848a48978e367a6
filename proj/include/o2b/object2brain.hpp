#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "o2b/corpus.hpp"
#include "o2b/detection.hpp"
#include "o2b/inference.hpp"
#include "o2b/score_matrix.hpp"
#include "o2b/stats.hpp"

namespace o2b {

/// Top/bottom class count for category aggregation: 10% of the 250 classes
/// the detector found on the training corpus.
inline constexpr std::size_t kDefaultTopX = 25;

/// C_l: change in correlation per (filter, target) when the filter is zeroed.
struct DeltaMatrix {
  std::string node_id;
  std::size_t filters = 0;
  std::vector<std::string> targets;
  std::vector<std::optional<double>> base;        // per target
  std::vector<double> deltas;                     // filters x targets; 0 where undefined
  std::vector<std::uint8_t> defined;              // filters x targets

  double at(std::size_t filter, std::size_t target) const {
    return deltas.at(filter * targets.size() + target);
  }
  bool is_defined(std::size_t filter, std::size_t target) const {
    return defined.at(filter * targets.size() + target) != 0;
  }
};

enum class AblationStrategy {
  automatic,    // incremental when the layer is a resume point
  incremental,  // resume from cached activations (errors if not allowed)
  full,         // recompute the whole network per filter
};

/// delta = base - ablated Spearman for every filter of `node_id` and every
/// target. `base` must hold the unmasked predictions for all stimuli.
template <typename T>
DeltaMatrix ablation_deltas(const Network<T>& net, const std::string& node_id,
                            const Corpus& stimuli, const std::vector<CorrelationTarget>& targets,
                            const PredictionTable& base, std::size_t jobs = 1,
                            AblationStrategy strategy = AblationStrategy::automatic);

/// W_l[i, j, k] = C_l[j, i] * S_l[j, k].
struct WeightCube {
  std::string node_id;
  std::vector<std::string> targets;
  std::size_t filters = 0;
  std::size_t classes = 0;
  std::vector<double> values;          // targets x filters x classes
  std::vector<std::uint8_t> defined;   // targets x filters

  double at(std::size_t t, std::size_t f, std::size_t k) const {
    return values.at((t * filters + f) * classes + k);
  }
};

WeightCube weight_cube(const DeltaMatrix& delta, const ScoreMatrix& scores);

/// V^{t}[k] = sum over filters of W[t, j, k], ascending filter order;
/// undefined (target, filter) slices are skipped.
struct ClassWeights {
  std::string node_id;
  std::vector<std::string> targets;
  std::size_t classes = 0;
  std::vector<double> values;  // targets x classes

  double at(std::size_t t, std::size_t k) const { return values.at(t * classes + k); }
};

ClassWeights class_weights(const WeightCube& cube);

struct CategoryContribution {
  std::string target;
  std::string category;
  std::size_t constituents = 0;
  double positive_sum = 0;
  double negative_sum = 0;
  double positive_avg = 0;
  double negative_avg = 0;
  std::size_t x = 0;
};

/// Per target, classes are ranked by weight (descending, ties by class id).
/// Positive weights among the first X feed positive_sum, negative weights
/// among the last X feed negative_sum; averages divide by the category's
/// constituent count. Output is target-major, categories in map order.
std::vector<CategoryContribution> topx_category_contributions(const ClassWeights& weights,
                                                              const ClassVocabulary& vocabulary,
                                                              const CategoryMap& map,
                                                              std::size_t x = kDefaultTopX);

// Serialization. JSON holds full-precision values; CSV is for people.
void write_delta_matrix(const std::filesystem::path& stem, const DeltaMatrix& d,
                        const std::vector<std::string>& comments = {});
DeltaMatrix read_delta_matrix(const std::filesystem::path& stem);
void write_weight_cube(const std::filesystem::path& stem, const WeightCube& cube,
                       const std::vector<std::string>& comments = {});
void write_class_weights(const std::filesystem::path& stem, const ClassWeights& v,
                         const ClassVocabulary& vocabulary,
                         const std::vector<std::string>& comments = {});
void write_contributions(const std::filesystem::path& stem,
                         const std::vector<CategoryContribution>& rows,
                         const std::vector<std::string>& comments = {});

}  // namespace o2b
