#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "o2b/corpus.hpp"

namespace o2b {

/// 1-based ranks; tied values share the mean of their rank range.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks. Throws undefined_correlation when
/// either vector is constant.
double spearman_r(std::span<const double> x, std::span<const double> y);

/// Two-sided p from t = r sqrt((n-2)/(1-r^2)) on n-2 degrees of freedom.
/// |r| = 1 gives 0.
double spearman_p(double r, std::size_t n);

/// Exact two-sided permutation p-value (n <= 10).
double spearman_p_exact(std::span<const double> x, std::span<const double> y);

enum class Stars { none, one, two, three };

/// * p<0.05, ** p<0.01, *** p<0.001.
Stars stars_for(double p) noexcept;
std::string_view to_string(Stars s) noexcept;

enum class Condition { pos_pos, pos_neg, neg_neg, neg_pos };  // P+S+, P+S-, P-S-, P-S+

std::string_view to_string(Condition c) noexcept;
std::optional<Condition> parse_condition(std::string_view text) noexcept;
bool is_congruent(Condition c) noexcept;

inline constexpr std::array<std::string_view, 4> kTargetSources = {"True", "LLR", "MLR", "HLR"};
inline constexpr std::array<std::string_view, 3> kValenceTypes = {"IV", "PV", "SV"};
inline constexpr std::size_t kTargetCount = 24;

/// CSV column holding (source, valence), e.g. "iv_true" or "mlr_pv".
std::string stimulus_column(std::string_view source, std::string_view valence);

struct Stimulus {
  std::string image_id;
  Condition condition = Condition::pos_pos;
  bool congruent = true;
};

/// The fMRI stimulus set: conditions plus numeric label / decoder columns.
struct StimulusTable {
  std::vector<Stimulus> rows;                               // sorted by image_id
  std::map<std::string, std::vector<double>> columns;       // row-aligned

  static StimulusTable parse_csv(std::string_view text, std::string_view context = "stimuli");
  static StimulusTable load(const std::filesystem::path& path);
  std::string to_csv() const;

  std::vector<std::string> image_ids() const;
};

struct CorrelationTarget {
  std::string source;   // True, LLR, MLR, HLR
  std::string valence;  // IV, PV, SV
  bool congruent = true;
  std::vector<std::string> image_ids;
  std::vector<double> values;

  /// e.g. "IV Cg. True", "SV Incg. HLR".
  std::string name() const;
};

/// Validates the table and yields the 24 targets: congruent split first, then
/// source (True, LLR, MLR, HLR), then valence (IV, PV, SV).
std::vector<CorrelationTarget> build_targets(const StimulusTable& table);

/// Positions of each target's image_ids within `ids`; errors list the missing ids.
std::vector<std::vector<std::size_t>> align_targets(const std::vector<CorrelationTarget>& targets,
                                                    const std::vector<std::string>& ids,
                                                    std::string_view context = "predictions");

/// Spearman of `predictions` (aligned with the ids used in align_targets)
/// against one target; nullopt when undefined.
std::optional<double> target_correlation(std::span<const double> predictions,
                                         const CorrelationTarget& target,
                                         const std::vector<std::size_t>& positions);

struct CorrelationCell {
  std::string target;
  std::vector<std::optional<double>> per_seed;  // in the given seed order
  bool defined = false;
  double mean_r = 0;
  double std_r = 0;  // population
  double p_value = 1;
  Stars stars = Stars::none;
};

/// One cell per target. Mean/std are summed over seed values in sorted order,
/// so the result does not depend on seed order. p uses the mean with n equal
/// to the split size.
std::vector<CorrelationCell> correlation_table(const std::vector<PredictionTable>& seeds,
                                               const std::vector<CorrelationTarget>& targets);

}  // namespace o2b
