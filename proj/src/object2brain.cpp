#include "o2b/object2brain.hpp"

#include <algorithm>
#include <numeric>

#include "json_util.hpp"
#include "o2b/io.hpp"
#include "o2b/parallel.hpp"

namespace o2b {

namespace {

using detail::ordered_json;

std::filesystem::path with(const std::filesystem::path& stem, const char* ext) {
  auto p = stem;
  p += ext;
  return p;
}

std::string comment_block(const std::vector<std::string>& comments) {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  return out;
}

template <typename T>
Tensor<T> as(const Tensor<float>& t) {
  if constexpr (std::is_same_v<T, float>) {
    return t;
  } else {
    return t.template cast<T>();
  }
}

}  // namespace

template <typename T>
DeltaMatrix ablation_deltas(const Network<T>& net, const std::string& node_id,
                            const Corpus& stimuli, const std::vector<CorrelationTarget>& targets,
                            const PredictionTable& base, std::size_t jobs,
                            AblationStrategy strategy) {
  const auto layer = make_target_set(net.graph(), {node_id});
  const std::size_t filters = layer.front().filters;
  for (const auto& t : targets) {
    if (t.image_ids.size() < 4) {
      throw Error(Errc::invalid_argument,
                  "target '" + t.name() + "' has fewer than 4 stimuli in its split");
    }
  }

  std::vector<std::string> ids;
  for (const auto& e : stimuli.entries()) ids.push_back(e.image_id);
  const auto positions = align_targets(targets, ids, "stimulus corpus");
  std::vector<double> base_values(ids.size());
  {
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto v = base.find(ids[i]);
      if (!v) {
        missing.push_back(ids[i]);
      } else {
        base_values[i] = *v;
      }
    }
    if (!missing.empty()) {
      std::string list;
      for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
      throw Error(Errc::unknown_image, "base predictions lack stimuli: " + list);
    }
  }

  bool incremental = false;
  switch (strategy) {
    case AblationStrategy::automatic:
      incremental = net.is_resume_point(node_id);
      break;
    case AblationStrategy::incremental:
      if (!net.is_resume_point(node_id)) {
        throw Error(Errc::invalid_resume_point,
                    "node '" + node_id + "' cannot be resumed from; use full recomputation");
      }
      incremental = true;
      break;
    case AblationStrategy::full:
      break;
  }

  std::vector<Tensor<T>> inputs(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t i) {
    const Tensor<float> img = stimuli.image(i);
    if (img.shape() != net.input_shape()) {
      throw Error(Errc::shape_mismatch, "image '" + ids[i] + "' has shape " +
                                            shape_str(img.shape()) + ", model expects " +
                                            shape_str(net.input_shape()));
    }
    inputs[i] = incremental ? net.activation(as<T>(img), node_id) : as<T>(img);
  });

  DeltaMatrix d;
  d.node_id = node_id;
  d.filters = filters;
  for (const auto& t : targets) d.targets.push_back(t.name());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    d.base.push_back(target_correlation(base_values, targets[t], positions[t]));
  }
  const std::size_t nt = targets.size();
  d.deltas.assign(filters * nt, 0.0);
  d.defined.assign(filters * nt, 0);

  parallel_for(filters, jobs, [&](std::size_t f) {
    const auto mask = AblationMask::single(node_id, f);
    std::vector<double> preds(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      preds[i] = static_cast<double>(incremental ? net.forward_from(node_id, inputs[i], mask)
                                                 : net.predict(inputs[i], mask));
    }
    for (std::size_t t = 0; t < nt; ++t) {
      const auto ablated = target_correlation(preds, targets[t], positions[t]);
      if (d.base[t] && ablated) {
        d.deltas[f * nt + t] = *d.base[t] - *ablated;
        d.defined[f * nt + t] = 1;
      }
    }
  });
  return d;
}

WeightCube weight_cube(const DeltaMatrix& delta, const ScoreMatrix& scores) {
  if (delta.node_id != scores.node_id) {
    throw Error(Errc::invalid_argument, "delta matrix is for '" + delta.node_id +
                                            "' but score matrix is for '" + scores.node_id + "'");
  }
  if (delta.filters != scores.filters) {
    throw Error(Errc::shape_mismatch, "delta matrix has " + std::to_string(delta.filters) +
                                          " filters, score matrix " +
                                          std::to_string(scores.filters));
  }
  WeightCube w;
  w.node_id = delta.node_id;
  w.targets = delta.targets;
  w.filters = delta.filters;
  w.classes = scores.classes;
  const std::size_t nt = w.targets.size();
  w.values.assign(nt * w.filters * w.classes, 0.0);
  w.defined.assign(nt * w.filters, 0);
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < w.filters; ++j) {
      if (!delta.is_defined(j, i)) continue;
      w.defined[i * w.filters + j] = 1;
      const double c = delta.at(j, i);
      double* out = w.values.data() + (i * w.filters + j) * w.classes;
      for (std::size_t k = 0; k < w.classes; ++k) out[k] = c * scores.at(j, k);
    }
  }
  return w;
}

ClassWeights class_weights(const WeightCube& cube) {
  ClassWeights v;
  v.node_id = cube.node_id;
  v.targets = cube.targets;
  v.classes = cube.classes;
  v.values.assign(cube.targets.size() * cube.classes, 0.0);
  for (std::size_t i = 0; i < cube.targets.size(); ++i) {
    double* out = v.values.data() + i * cube.classes;
    for (std::size_t j = 0; j < cube.filters; ++j) {
      if (!cube.defined[i * cube.filters + j]) continue;
      const double* w = cube.values.data() + (i * cube.filters + j) * cube.classes;
      for (std::size_t k = 0; k < cube.classes; ++k) out[k] += w[k];
    }
  }
  return v;
}

std::vector<CategoryContribution> topx_category_contributions(const ClassWeights& weights,
                                                              const ClassVocabulary& vocabulary,
                                                              const CategoryMap& map,
                                                              std::size_t x) {
  const std::size_t nc = weights.classes;
  if (vocabulary.size() != nc) {
    throw Error(Errc::shape_mismatch, "vocabulary has " + std::to_string(vocabulary.size()) +
                                          " classes, weights " + std::to_string(nc));
  }
  if (x < 1 || x > nc) {
    throw Error(Errc::invalid_argument,
                "X must lie in [1, " + std::to_string(nc) + "], got " + std::to_string(x));
  }
  const auto groups = categorize(vocabulary, map);
  std::vector<std::size_t> category_of(nc);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (auto k : groups[g].class_ids) category_of[k] = g;
  }

  std::vector<CategoryContribution> out;
  for (std::size_t t = 0; t < weights.targets.size(); ++t) {
    const double* v = weights.values.data() + t * nc;
    std::vector<std::size_t> order(nc);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    std::vector<double> pos(groups.size(), 0.0), neg(groups.size(), 0.0);
    for (std::size_t r = 0; r < x; ++r) {
      const std::size_t k = order[r];
      if (v[k] > 0) pos[category_of[k]] += v[k];
    }
    for (std::size_t r = nc - x; r < nc; ++r) {
      const std::size_t k = order[r];
      if (v[k] < 0) neg[category_of[k]] += v[k];
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
      CategoryContribution c;
      c.target = weights.targets[t];
      c.category = groups[g].category;
      c.constituents = map.constituent_count(c.category);
      c.positive_sum = pos[g];
      c.negative_sum = neg[g];
      const double n = static_cast<double>(std::max<std::size_t>(c.constituents, 1));
      c.positive_avg = pos[g] / n;
      c.negative_avg = neg[g] / n;
      c.x = x;
      out.push_back(std::move(c));
    }
  }
  return out;
}

void write_delta_matrix(const std::filesystem::path& stem, const DeltaMatrix& d,
                        const std::vector<std::string>& comments) {
  const std::size_t nt = d.targets.size();
  ordered_json j;
  j["format"] = "o2b-delta-matrix-v1";
  j["node_id"] = d.node_id;
  j["filters"] = d.filters;
  j["targets"] = d.targets;
  ordered_json base = ordered_json::array();
  for (const auto& b : d.base) base.push_back(b ? ordered_json(*b) : ordered_json(nullptr));
  j["base"] = std::move(base);
  ordered_json rows = ordered_json::array();
  for (std::size_t f = 0; f < d.filters; ++f) {
    ordered_json row = ordered_json::array();
    for (std::size_t t = 0; t < nt; ++t) {
      row.push_back(d.is_defined(f, t) ? ordered_json(d.at(f, t)) : ordered_json(nullptr));
    }
    rows.push_back(std::move(row));
  }
  j["deltas"] = std::move(rows);
  if (!comments.empty()) j["provenance"] = comments;
  io::write_text(with(stem, ".json"), j.dump(2) + "\n");

  std::string csv = comment_block(comments);
  std::vector<std::string> header{"filter"};
  header.insert(header.end(), d.targets.begin(), d.targets.end());
  csv += io::csv_row(header);
  std::vector<std::string> brow{"base"};
  for (const auto& b : d.base) brow.push_back(b ? io::format_double(*b) : "");
  csv += io::csv_row(brow);
  for (std::size_t f = 0; f < d.filters; ++f) {
    std::vector<std::string> row{std::to_string(f)};
    for (std::size_t t = 0; t < nt; ++t) {
      row.push_back(d.is_defined(f, t) ? io::format_double(d.at(f, t)) : "");
    }
    csv += io::csv_row(row);
  }
  io::write_text(with(stem, ".csv"), csv);
}

DeltaMatrix read_delta_matrix(const std::filesystem::path& stem) {
  const auto path = with(stem, ".json");
  const auto j = detail::parse_json(io::read_text(path), path.string());
  const std::string ctx = path.string();
  detail::reject_unknown_keys(j, {"format", "node_id", "filters", "targets", "base", "deltas",
                                  "provenance"},
                              ctx);
  DeltaMatrix d;
  d.node_id = detail::required<std::string>(j, "node_id", ctx);
  d.filters = detail::required<std::size_t>(j, "filters", ctx);
  d.targets = detail::required<std::vector<std::string>>(j, "targets", ctx);
  const auto base = detail::required<detail::json>(j, "base", ctx);
  const auto rows = detail::required<detail::json>(j, "deltas", ctx);
  if (!base.is_array() || base.size() != d.targets.size() || !rows.is_array() ||
      rows.size() != d.filters) {
    throw Error(Errc::shape_mismatch, ctx + ": delta matrix dimensions disagree");
  }
  for (const auto& b : base) {
    d.base.push_back(b.is_null() ? std::nullopt : std::optional<double>(b.get<double>()));
  }
  for (const auto& row : rows) {
    if (!row.is_array() || row.size() != d.targets.size()) {
      throw Error(Errc::shape_mismatch, ctx + ": delta row has the wrong length");
    }
    for (const auto& v : row) {
      d.deltas.push_back(v.is_null() ? 0.0 : v.get<double>());
      d.defined.push_back(v.is_null() ? 0 : 1);
    }
  }
  return d;
}

void write_weight_cube(const std::filesystem::path& stem, const WeightCube& cube,
                       const std::vector<std::string>& comments) {
  io::write_bytes(with(stem, ".f64"), io::encode_f64_le(cube.values));
  ordered_json j;
  j["format"] = "o2b-weight-cube-v1";
  j["node_id"] = cube.node_id;
  j["dtype"] = "float64";
  j["shape"] = {cube.targets.size(), cube.filters, cube.classes};
  j["targets"] = cube.targets;
  j["defined"] = cube.defined;
  if (!comments.empty()) j["provenance"] = comments;
  io::write_text(with(stem, ".json"), j.dump(2) + "\n");
}

void write_class_weights(const std::filesystem::path& stem, const ClassWeights& v,
                         const ClassVocabulary& vocabulary,
                         const std::vector<std::string>& comments) {
  ordered_json j;
  j["format"] = "o2b-class-weights-v1";
  j["node_id"] = v.node_id;
  j["targets"] = v.targets;
  j["classes"] = vocabulary.names();
  ordered_json rows = ordered_json::array();
  for (std::size_t t = 0; t < v.targets.size(); ++t) {
    rows.push_back(std::vector<double>(v.values.begin() + static_cast<std::ptrdiff_t>(t * v.classes),
                                       v.values.begin() +
                                           static_cast<std::ptrdiff_t>((t + 1) * v.classes)));
  }
  j["weights"] = std::move(rows);
  if (!comments.empty()) j["provenance"] = comments;
  io::write_text(with(stem, ".json"), j.dump(2) + "\n");

  std::string csv = comment_block(comments);
  csv += io::csv_row({"target", "class_id", "class_name", "weight"});
  for (std::size_t t = 0; t < v.targets.size(); ++t) {
    for (std::size_t k = 0; k < v.classes; ++k) {
      csv += io::csv_row({v.targets[t], std::to_string(k), vocabulary.name(k),
                          io::format_double(v.at(t, k))});
    }
  }
  io::write_text(with(stem, ".csv"), csv);
}

void write_contributions(const std::filesystem::path& stem,
                         const std::vector<CategoryContribution>& rows,
                         const std::vector<std::string>& comments) {
  ordered_json j;
  j["format"] = "o2b-category-contributions-v1";
  ordered_json arr = ordered_json::array();
  std::string csv = comment_block(comments);
  csv += io::csv_row({"target", "category", "constituents", "x", "positive_sum", "negative_sum",
                      "positive_avg", "negative_avg"});
  for (const auto& c : rows) {
    ordered_json r;
    r["target"] = c.target;
    r["category"] = c.category;
    r["constituents"] = c.constituents;
    r["x"] = c.x;
    r["positive_sum"] = c.positive_sum;
    r["negative_sum"] = c.negative_sum;
    r["positive_avg"] = c.positive_avg;
    r["negative_avg"] = c.negative_avg;
    arr.push_back(std::move(r));
    csv += io::csv_row({c.target, c.category, std::to_string(c.constituents), std::to_string(c.x),
                        io::format_double(c.positive_sum), io::format_double(c.negative_sum),
                        io::format_double(c.positive_avg), io::format_double(c.negative_avg)});
  }
  j["rows"] = std::move(arr);
  if (!comments.empty()) j["provenance"] = comments;
  io::write_text(with(stem, ".json"), j.dump(2) + "\n");
  io::write_text(with(stem, ".csv"), csv);
}

template DeltaMatrix ablation_deltas(const Network<float>&, const std::string&, const Corpus&,
                                     const std::vector<CorrelationTarget>&,
                                     const PredictionTable&, std::size_t, AblationStrategy);
template DeltaMatrix ablation_deltas(const Network<double>&, const std::string&, const Corpus&,
                                     const std::vector<CorrelationTarget>&,
                                     const PredictionTable&, std::size_t, AblationStrategy);

}  // namespace o2b
