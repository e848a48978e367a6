#include "o2b/stats.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

#include <boost/math/special_functions/beta.hpp>

#include "o2b/io.hpp"

namespace o2b {

namespace {

void require_finite(std::span<const double> v, std::string_view what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(Errc::non_finite, std::string(what) + " holds NaN/Inf");
  }
}

double mean_of(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double r = static_cast<double>(i + 1 + j) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

double spearman_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(Errc::shape_mismatch, "spearman_r needs equal lengths, got " +
                                          std::to_string(x.size()) + " and " +
                                          std::to_string(y.size()));
  }
  if (x.size() < 3) throw Error(Errc::invalid_argument, "spearman_r needs at least 3 values");
  require_finite(x, "spearman_r input");
  require_finite(y, "spearman_r input");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mx = mean_of(rx), my = mean_of(ry);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx, dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) {
    throw Error(Errc::undefined_correlation, "Spearman correlation of a constant vector");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman_p(double r, std::size_t n) {
  if (n < 4) throw Error(Errc::invalid_argument, "spearman_p needs n >= 4");
  if (!std::isfinite(r) || std::abs(r) > 1.0) {
    throw Error(Errc::invalid_argument, "correlation must lie in [-1, 1]");
  }
  if (std::abs(r) == 1.0) return 0.0;
  if (r == 0.0) return 1.0;
  // P(|T| >= |t|) with t^2 = r^2 (n-2) / (1-r^2) reduces to I_{1-r^2}((n-2)/2, 1/2).
  const double df = static_cast<double>(n - 2);
  return boost::math::ibeta(df / 2.0, 0.5, 1.0 - r * r);
}

double spearman_p_exact(std::span<const double> x, std::span<const double> y) {
  const double r = spearman_r(x, y);
  const std::size_t n = x.size();
  if (n > 10) throw Error(Errc::invalid_argument, "exact permutation test supports n <= 10");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mx = mean_of(rx), my = mean_of(ry);
  double sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  const double scale = std::sqrt(sxx * syy);
  const double threshold = std::abs(r) - 1e-12;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t hits = 0, total = 0;
  do {
    double sxy = 0;
    for (std::size_t i = 0; i < n; ++i) sxy += (rx[i] - mx) * (ry[perm[i]] - my);
    if (std::abs(sxy / scale) >= threshold) ++hits;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

Stars stars_for(double p) noexcept {
  if (p < 0.001) return Stars::three;
  if (p < 0.01) return Stars::two;
  if (p < 0.05) return Stars::one;
  return Stars::none;
}

std::string_view to_string(Stars s) noexcept {
  switch (s) {
    case Stars::one:
      return "*";
    case Stars::two:
      return "**";
    case Stars::three:
      return "***";
    case Stars::none:
      break;
  }
  return "";
}

std::string_view to_string(Condition c) noexcept {
  switch (c) {
    case Condition::pos_pos:
      return "P+S+";
    case Condition::pos_neg:
      return "P+S-";
    case Condition::neg_neg:
      return "P-S-";
    case Condition::neg_pos:
      return "P-S+";
  }
  return "?";
}

std::optional<Condition> parse_condition(std::string_view text) noexcept {
  std::string s;
  for (std::size_t i = 0; i < text.size(); ++i) {
    // U+2212 minus sign
    if (text.substr(i, 3) == "\xE2\x88\x92") {
      s += '-';
      i += 2;
    } else {
      s += text[i];
    }
  }
  for (auto c : {Condition::pos_pos, Condition::pos_neg, Condition::neg_neg, Condition::neg_pos}) {
    if (s == to_string(c)) return c;
  }
  return std::nullopt;
}

bool is_congruent(Condition c) noexcept {
  return c == Condition::pos_pos || c == Condition::neg_neg;
}

std::string stimulus_column(std::string_view source, std::string_view valence) {
  auto lower = [](std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
  };
  if (source == "True") return lower(valence) + "_true";
  return lower(source) + "_" + lower(valence);
}

namespace {

std::vector<std::string> all_value_columns() {
  std::vector<std::string> cols;
  for (auto src : kTargetSources) {
    for (auto val : kValenceTypes) cols.push_back(stimulus_column(src, val));
  }
  return cols;
}

}  // namespace

StimulusTable StimulusTable::parse_csv(std::string_view text, std::string_view context) {
  const std::string ctx(context);
  const auto lines = io::csv_data_lines(text);
  if (lines.empty()) throw Error(Errc::parse_error, ctx + ": empty stimulus table");
  const auto header = io::split_csv_line(lines.front());
  const auto known = all_value_columns();
  std::optional<std::size_t> id_col, cond_col, cong_col;
  std::vector<std::pair<std::size_t, std::string>> value_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto& h = header[i];
    if (h == "image_id") {
      id_col = i;
    } else if (h == "condition") {
      cond_col = i;
    } else if (h == "congruent") {
      cong_col = i;
    } else if (std::find(known.begin(), known.end(), h) != known.end()) {
      for (const auto& [j, name] : value_cols) {
        if (name == h) throw Error(Errc::parse_error, ctx + ": duplicate column '" + h + "'");
      }
      value_cols.emplace_back(i, h);
    } else {
      throw Error(Errc::parse_error, ctx + ": unknown column '" + h + "'");
    }
  }
  if (!id_col || !cond_col || !cong_col) {
    throw Error(Errc::parse_error, ctx + ": header needs image_id, condition and congruent");
  }

  struct Row {
    Stimulus s;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto f = io::split_csv_line(lines[li]);
    const std::string rctx = ctx + " row " + std::to_string(li);
    if (f.size() != header.size()) {
      throw Error(Errc::parse_error, rctx + ": expected " + std::to_string(header.size()) +
                                         " fields, got " + std::to_string(f.size()));
    }
    Row r;
    r.s.image_id = f[*id_col];
    if (r.s.image_id.empty()) throw Error(Errc::parse_error, rctx + ": empty image_id");
    const auto cond = parse_condition(f[*cond_col]);
    if (!cond) throw Error(Errc::parse_error, rctx + ": unknown condition '" + f[*cond_col] + "'");
    r.s.condition = *cond;
    const auto& cg = f[*cong_col];
    if (cg == "1" || cg == "true" || cg == "True") {
      r.s.congruent = true;
    } else if (cg == "0" || cg == "false" || cg == "False") {
      r.s.congruent = false;
    } else {
      throw Error(Errc::parse_error, rctx + ": congruent must be 0/1, got '" + cg + "'");
    }
    for (const auto& [j, name] : value_cols) {
      const double v = io::parse_double(f[j], rctx + " " + name);
      if (!std::isfinite(v)) throw Error(Errc::non_finite, rctx + ": " + name + " is not finite");
      r.values.push_back(v);
    }
    rows.push_back(std::move(r));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.s.image_id < b.s.image_id; });
  StimulusTable t;
  for (const auto& [j, name] : value_cols) t.columns[name];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].s.image_id == rows[i - 1].s.image_id) {
      throw Error(Errc::parse_error, ctx + ": duplicate image_id '" + rows[i].s.image_id + "'");
    }
    t.rows.push_back(rows[i].s);
    for (std::size_t c = 0; c < value_cols.size(); ++c) {
      t.columns[value_cols[c].second].push_back(rows[i].values[c]);
    }
  }
  return t;
}

StimulusTable StimulusTable::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(Errc::io_error, "stimulus table not found: " + path.string());
  }
  return parse_csv(io::read_text(path), path.string());
}

std::string StimulusTable::to_csv() const {
  std::vector<std::string> header{"image_id", "condition", "congruent"};
  std::vector<std::string> present;
  for (const auto& c : all_value_columns()) {
    if (columns.contains(c)) present.push_back(c);
  }
  header.insert(header.end(), present.begin(), present.end());
  std::string out = io::csv_row(header);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> f{rows[i].image_id, std::string(to_string(rows[i].condition)),
                               rows[i].congruent ? "1" : "0"};
    for (const auto& c : present) f.push_back(io::format_double(columns.at(c)[i]));
    out += io::csv_row(f);
  }
  return out;
}

std::vector<std::string> StimulusTable::image_ids() const {
  std::vector<std::string> ids;
  for (const auto& r : rows) ids.push_back(r.image_id);
  return ids;
}

std::string CorrelationTarget::name() const {
  return valence + (congruent ? " Cg. " : " Incg. ") + source;
}

std::vector<CorrelationTarget> build_targets(const StimulusTable& table) {
  std::vector<std::string> missing;
  for (const auto& c : all_value_columns()) {
    if (!table.columns.contains(c)) missing.push_back(c);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw Error(Errc::invalid_argument, "stimulus table is missing columns: " + list);
  }
  if (table.rows.size() != 48) {
    throw Error(Errc::invalid_argument,
                "stimulus table needs 48 rows, has " + std::to_string(table.rows.size()));
  }
  std::array<std::size_t, 4> per_condition{};
  std::size_t congruent = 0;
  for (const auto& r : table.rows) {
    ++per_condition[static_cast<std::size_t>(r.condition)];
    if (r.congruent != is_congruent(r.condition)) {
      throw Error(Errc::invalid_argument, "stimulus '" + r.image_id + "' is marked " +
                                              (r.congruent ? "congruent" : "incongruent") +
                                              " but has condition " +
                                              std::string(to_string(r.condition)));
    }
    congruent += r.congruent ? 1 : 0;
  }
  for (std::size_t c = 0; c < 4; ++c) {
    if (per_condition[c] != 12) {
      throw Error(Errc::invalid_argument,
                  "condition " + std::string(to_string(static_cast<Condition>(c))) + " has " +
                      std::to_string(per_condition[c]) + " stimuli, expected 12");
    }
  }
  if (congruent != 24) {
    throw Error(Errc::invalid_argument, "expected 24 congruent stimuli, found " +
                                            std::to_string(congruent));
  }
  for (auto val : kValenceTypes) {
    const auto col = stimulus_column("True", val);
    const auto& v = table.columns.at(col);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] != 0.0 && v[i] != 1.0) {
        throw Error(Errc::invalid_argument, "true label " + col + " of '" +
                                                table.rows[i].image_id + "' must be 0 or 1");
      }
    }
  }

  std::vector<CorrelationTarget> targets;
  for (bool split : {true, false}) {
    for (auto src : kTargetSources) {
      for (auto val : kValenceTypes) {
        CorrelationTarget t;
        t.source = src;
        t.valence = val;
        t.congruent = split;
        const auto& col = table.columns.at(stimulus_column(src, val));
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
          if (table.rows[i].congruent != split) continue;
          t.image_ids.push_back(table.rows[i].image_id);
          t.values.push_back(col[i]);
        }
        targets.push_back(std::move(t));
      }
    }
  }
  return targets;
}

std::vector<std::vector<std::size_t>> align_targets(const std::vector<CorrelationTarget>& targets,
                                                    const std::vector<std::string>& ids,
                                                    std::string_view context) {
  std::map<std::string_view, std::size_t> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) pos.emplace(ids[i], i);
  std::set<std::string> missing;
  std::vector<std::vector<std::size_t>> out;
  for (const auto& t : targets) {
    auto& v = out.emplace_back();
    for (const auto& id : t.image_ids) {
      const auto it = pos.find(id);
      if (it == pos.end()) {
        missing.insert(id);
      } else {
        v.push_back(it->second);
      }
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw Error(Errc::unknown_image,
                std::string(context) + " lack stimuli: " + list);
  }
  return out;
}

std::optional<double> target_correlation(std::span<const double> predictions,
                                         const CorrelationTarget& target,
                                         const std::vector<std::size_t>& positions) {
  std::vector<double> x(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) x[i] = predictions[positions[i]];
  try {
    return spearman_r(x, target.values);
  } catch (const Error& e) {
    if (e.code() == Errc::undefined_correlation) return std::nullopt;
    throw;
  }
}

std::vector<CorrelationCell> correlation_table(const std::vector<PredictionTable>& seeds,
                                               const std::vector<CorrelationTarget>& targets) {
  if (seeds.empty()) throw Error(Errc::invalid_argument, "correlation_table needs at least one seed");
  std::vector<CorrelationCell> cells(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) cells[t].target = targets[t].name();
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    std::vector<std::string> ids;
    std::vector<double> values;
    for (const auto& [id, v] : seeds[s].rows()) {
      ids.push_back(id);
      values.push_back(v);
    }
    const auto pos = align_targets(targets, ids, "predictions of seed " + std::to_string(s));
    for (std::size_t t = 0; t < targets.size(); ++t) {
      cells[t].per_seed.push_back(target_correlation(values, targets[t], pos[t]));
    }
  }
  for (std::size_t t = 0; t < targets.size(); ++t) {
    auto& c = cells[t];
    if (std::any_of(c.per_seed.begin(), c.per_seed.end(), [](const auto& v) { return !v; })) {
      continue;
    }
    std::vector<double> r;
    for (const auto& v : c.per_seed) r.push_back(*v);
    std::sort(r.begin(), r.end());
    double sum = 0;
    for (double v : r) sum += v;
    c.mean_r = sum / static_cast<double>(r.size());
    double sq = 0;
    for (double v : r) sq += (v - c.mean_r) * (v - c.mean_r);
    c.std_r = std::sqrt(sq / static_cast<double>(r.size()));
    c.p_value = spearman_p(std::clamp(c.mean_r, -1.0, 1.0), targets[t].values.size());
    c.stars = stars_for(c.p_value);
    c.defined = true;
  }
  return cells;
}

}  // namespace o2b
