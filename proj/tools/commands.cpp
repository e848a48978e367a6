#include "o2b/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "o2b/corpus.hpp"
#include "o2b/detection.hpp"
#include "o2b/io.hpp"
#include "o2b/model_graph.hpp"
#include "o2b/object2brain.hpp"
#include "o2b/parallel.hpp"
#include "o2b/score_matrix.hpp"
#include "o2b/stats.hpp"
#include "o2b/svg.hpp"
#include "o2b/synthetic.hpp"

namespace o2b::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::shared_ptr<spdlog::logger> logger() {
  if (auto existing = spdlog::get("o2b")) return existing;
  auto logger = spdlog::stderr_color_mt("o2b");
  logger->set_pattern("o2b: [%l] %v");
  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("O2B_LOG")) level = spdlog::level::from_str(env);
  logger->set_level(level);
  return logger;
}

void require_set(const fs::path& p, std::string_view what) {
  if (p.empty()) throw Error(Errc::invalid_argument, "the config does not set " + std::string(what));
}

void write_json(const fs::path& path, const json& doc) { io::write_text(path, doc.dump(2) + "\n"); }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

CategoryMap category_map(const Context& ctx) {
  if (ctx.config.category_map.empty()) return CategoryMap::builtin();
  return CategoryMap::load(ctx.config.category_map);
}

std::vector<std::string> selected_categories(const Context& ctx, const CategoryMap& map) {
  if (ctx.config.category_selection.empty()) return map.categories();
  for (const auto& c : ctx.config.category_selection) {
    if (!map.category_index(c)) {
      throw Error(Errc::invalid_argument, "selected category '" + c + "' is not in the category map");
    }
  }
  return ctx.config.category_selection;
}

const fs::path& first_bundle(const ModelEntry& m) {
  if (m.bundles.empty()) {
    throw Error(Errc::invalid_argument, "model '" + m.name + "' lists no bundles");
  }
  return m.bundles.front();
}

std::vector<fs::path> all_bundles(const RunConfig& c) {
  std::vector<fs::path> out;
  for (const auto& m : c.models) out.insert(out.end(), m.bundles.begin(), m.bundles.end());
  return out;
}

TargetLayerSet target_layers(const Context& ctx, const ModelGraph& g, const std::string& model) {
  const auto& ids = ctx.config.target_layers.empty() ? g.metadata.target_layers
                                                     : ctx.config.target_layers;
  if (ids.empty()) {
    throw Error(Errc::invalid_argument,
                "no target layers for model '" + model + "': set [analysis] target_layers");
  }
  return make_target_set(g, ids);
}

fs::path predictions_path(const Context& ctx, const ModelEntry& m, std::size_t run) {
  return ctx.output_dir / "predictions" / m.name / ("run" + std::to_string(run) + ".csv");
}

std::vector<fs::path> prediction_inputs(const Context& ctx, const ModelEntry& m) {
  if (!m.predictions.empty()) return m.predictions;
  std::vector<fs::path> out;
  for (std::size_t i = 0; i < m.bundles.size(); ++i) out.push_back(predictions_path(ctx, m, i));
  if (out.empty()) {
    throw Error(Errc::invalid_argument, "model '" + m.name + "' has neither bundles nor predictions");
  }
  return out;
}

fs::path emocam_stem(const Context& ctx, const std::string& model, const std::string& node) {
  return ctx.output_dir / "emocam" / model / node;
}

fs::path ablation_stem(const Context& ctx, const std::string& model, const std::string& node) {
  return ctx.output_dir / "ablation" / model / node;
}

DetectionSet read_detections(const Context& ctx) {
  require_set(ctx.config.detections, "[emocam] detections");
  auto set = load_detections(ctx.config.detections, ctx.config.threshold);
  logger()->info("detections: {} kept, {} below threshold, {} degenerate, {} outside, {} clamped",
              set.detections.size(), set.below_threshold, set.degenerate, set.outside, set.clamped);
  if (set.degenerate > 0) logger()->warn("dropped {} degenerate boxes", set.degenerate);
  return set;
}

std::vector<ScoreMatrix> emocam_for(const Context& ctx, const ModelEntry& m) {
  require_set(ctx.config.corpus_manifest, "[emocam] manifest");
  const auto& bundle = first_bundle(m);
  const auto graph = load_model(bundle);
  const Network<float> net(graph);
  const auto targets = target_layers(ctx, graph, m.name);
  const auto corpus = Corpus::load(ctx.config.corpus_manifest);
  const auto dets = read_detections(ctx);
  if (dets.detections.empty()) {
    logger()->warn("no detections to score; score matrices for '{}' are all zero", m.name);
  }
  const auto map = category_map(ctx);
  const auto vocab = map.vocabulary();
  logger()->info("emocam: model {} on {} images, {} layers", m.name, corpus.size(), targets.size());
  auto matrices = build_score_matrices(net, targets, corpus, dets.detections, vocab, ctx.jobs,
                                       ctx.config.gradient);

  const auto prov = ctx.provenance("emocam", {bundle}).lines();
  struct Pair {
    std::string node;
    std::size_t filter, cls;
    double score;
  };
  std::vector<Pair> pairs;
  for (const auto& s : matrices) {
    write_score_matrix(emocam_stem(ctx, m.name, s.node_id), s, vocab, prov);
    for (std::size_t f = 0; f < s.filters; ++f) {
      for (std::size_t k = 0; k < s.classes; ++k) {
        if (s.at(f, k) > 0) pairs.push_back({s.node_id, f, k, s.at(f, k)});
      }
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& a, const Pair& b) { return a.score > b.score; });
  std::string csv;
  for (const auto& line : prov) csv += "# " + line + "\n";
  csv += "node_id,filter,class_id,class_name,score,detections\n";
  std::map<std::string, const ScoreMatrix*> by_node;
  for (const auto& s : matrices) by_node[s.node_id] = &s;
  for (std::size_t i = 0; i < std::min<std::size_t>(pairs.size(), 50); ++i) {
    const auto& p = pairs[i];
    csv += io::csv_row({p.node, std::to_string(p.filter), std::to_string(p.cls), vocab.name(p.cls),
                        io::format_double(p.score),
                        std::to_string(by_node.at(p.node)->detection_counts[p.cls])});
  }
  io::write_text(ctx.output_dir / "emocam" / m.name / "top_pairs.csv", csv);
  return matrices;
}

std::vector<DeltaMatrix> ablate_for(const Context& ctx, const ModelEntry& m) {
  require_set(ctx.config.stimuli_manifest, "[stimuli] manifest");
  require_set(ctx.config.stimulus_table, "[stimuli] table");
  const auto& bundle = first_bundle(m);
  const auto graph = load_model(bundle);
  const Network<float> net(graph);
  const auto layers = target_layers(ctx, graph, m.name);
  const auto corpus = Corpus::load(ctx.config.stimuli_manifest);
  const auto targets = build_targets(StimulusTable::load(ctx.config.stimulus_table));
  const auto base = predict_corpus(net, corpus, {}, ctx.jobs);
  const auto prov = ctx.provenance("ablate", {bundle}).lines();
  std::vector<DeltaMatrix> out;
  for (const auto& layer : layers) {
    logger()->info("ablate: model {} layer {} ({} filters)", m.name, layer.node_id, layer.filters);
    auto d = ablation_deltas(net, layer.node_id, corpus, targets, base, ctx.jobs, ctx.config.strategy);
    std::size_t undefined = 0;
    for (auto flag : d.defined) undefined += flag ? 0 : 1;
    if (undefined > 0) {
      logger()->warn("layer {}: {} undefined (filter, target) deltas", layer.node_id, undefined);
    }
    write_delta_matrix(ablation_stem(ctx, m.name, layer.node_id), d, prov);
    out.push_back(std::move(d));
  }
  return out;
}

json scatter_doc(const std::vector<std::string>& prov, const std::string& title,
                 const std::vector<std::string>& x_labels, const std::vector<std::string>& categories) {
  json doc;
  doc["kind"] = "category_scatter";
  doc["provenance"] = prov;
  doc["title"] = title;
  doc["x_labels"] = x_labels;
  doc["categories"] = categories;
  doc["points"] = json::array();
  return doc;
}

void add_points(json& doc, std::size_t x, std::size_t y, const CategoryContribution& c) {
  for (const auto& [sign, value] : {std::pair<const char*, double>{"positive", c.positive_avg},
                                    std::pair<const char*, double>{"negative", c.negative_avg}}) {
    json p;
    p["x"] = x;
    p["y"] = y;
    p["target"] = c.target;
    p["category"] = c.category;
    p["sign"] = sign;
    p["value"] = value;
    doc["points"].push_back(std::move(p));
  }
}

std::optional<std::size_t> index_in(const std::vector<std::string>& list, const std::string& v) {
  const auto it = std::find(list.begin(), list.end(), v);
  if (it == list.end()) return std::nullopt;
  return static_cast<std::size_t>(it - list.begin());
}

json contribution_json(const CategoryContribution& c) {
  json j;
  j["target"] = c.target;
  j["category"] = c.category;
  j["constituents"] = c.constituents;
  j["positive_sum"] = c.positive_sum;
  j["negative_sum"] = c.negative_sum;
  j["positive_avg"] = c.positive_avg;
  j["negative_avg"] = c.negative_avg;
  return j;
}

void write_overlap(const Context& ctx, const std::string& command) {
  const auto dets = read_detections(ctx);
  const auto map = category_map(ctx);
  const auto m = overlap_matrix(dets.detections, map);
  const auto prov = ctx.provenance(command, {}).lines();
  const std::size_t k = m.categories.size();

  json doc;
  doc["kind"] = "overlap_matrix";
  doc["provenance"] = prov;
  doc["categories"] = m.categories;
  json values = json::array(), pairs = json::array();
  std::string csv;
  for (const auto& line : prov) csv += "# " + line + "\n";
  std::vector<std::string> head{"category"};
  head.insert(head.end(), m.categories.begin(), m.categories.end());
  csv += io::csv_row(head);
  for (std::size_t r = 0; r < k; ++r) {
    json row = json::array(), prow = json::array();
    std::vector<std::string> fields{m.categories[r]};
    for (std::size_t c = 0; c < k; ++c) {
      const auto v = m.at(r, c);
      row.push_back(v ? json(*v) : json(nullptr));
      prow.push_back(m.pairs[r * k + c]);
      fields.push_back(v ? io::format_double(*v) : "");
    }
    values.push_back(std::move(row));
    pairs.push_back(std::move(prow));
    csv += io::csv_row(fields);
  }
  doc["values"] = std::move(values);
  doc["pairs"] = std::move(pairs);
  const auto dir = ctx.output_dir / "overlap";
  write_json(dir / "overlap.json", doc);
  io::write_text(dir / "overlap.csv", csv);
  io::write_text(dir / "overlap.svg", render_svg(doc));
}

}  // namespace

Provenance Context::provenance(std::string command, const std::vector<fs::path>& bundles) const {
  return {std::move(command), config_hash, combined_bundle_hash(bundles)};
}

void cmd_predict(const Context& ctx) {
  require_set(ctx.config.stimuli_manifest, "[stimuli] manifest");
  if (ctx.config.models.empty()) throw Error(Errc::invalid_argument, "the config lists no [[models]]");
  const auto corpus = Corpus::load(ctx.config.stimuli_manifest);
  for (const auto& m : ctx.config.models) {
    for (std::size_t i = 0; i < m.bundles.size(); ++i) {
      const auto graph = load_model(m.bundles[i]);
      const Network<float> net(graph);
      const auto table = predict_corpus(net, corpus, {}, ctx.jobs);
      auto comments = ctx.provenance("predict", {m.bundles[i]}).lines();
      comments.push_back("model " + m.name + " run " + std::to_string(i) + " seed " +
                         std::to_string(graph.metadata.seed));
      io::write_text(predictions_path(ctx, m, i), table.to_csv(comments));
      logger()->info("predict: {} run {} -> {} rows", m.name, i, table.size());
    }
  }
}

void cmd_correlate(const Context& ctx) {
  require_set(ctx.config.stimulus_table, "[stimuli] table");
  if (ctx.config.models.empty()) throw Error(Errc::invalid_argument, "the config lists no [[models]]");
  const auto targets = build_targets(StimulusTable::load(ctx.config.stimulus_table));
  const auto prov = ctx.provenance("correlate", all_bundles(ctx.config)).lines();

  json doc;
  doc["kind"] = "correlation_table";
  doc["provenance"] = prov;
  std::vector<std::string> names;
  for (const auto& t : targets) names.push_back(t.name());
  doc["targets"] = names;
  doc["rows"] = json::array();

  std::string csv;
  for (const auto& line : prov) csv += "# " + line + "\n";
  std::vector<std::string> head{"model", "seeds"};
  head.insert(head.end(), names.begin(), names.end());
  csv += io::csv_row(head);

  for (const auto& m : ctx.config.models) {
    std::vector<PredictionTable> seeds;
    for (const auto& p : prediction_inputs(ctx, m)) seeds.push_back(PredictionTable::read(p));
    const auto cells = correlation_table(seeds, targets);
    json row;
    row["model"] = m.name;
    row["seeds"] = seeds.size();
    row["cells"] = json::array();
    std::vector<std::string> fields{m.name, std::to_string(seeds.size())};
    for (const auto& c : cells) {
      json cell;
      cell["target"] = c.target;
      cell["defined"] = c.defined;
      cell["mean_r"] = c.mean_r;
      cell["std_r"] = c.std_r;
      cell["p_value"] = c.p_value;
      cell["stars"] = std::string(to_string(c.stars));
      json per_seed = json::array();
      for (const auto& r : c.per_seed) per_seed.push_back(r ? json(*r) : json(nullptr));
      cell["per_seed"] = std::move(per_seed);
      row["cells"].push_back(std::move(cell));
      fields.push_back(c.defined ? fixed(c.mean_r, 4) + " (" + fixed(c.std_r, 4) + ")" +
                                       std::string(to_string(c.stars))
                                 : "NA");
      if (!c.defined) logger()->warn("model {}: correlation with {} is undefined", m.name, c.target);
    }
    doc["rows"].push_back(std::move(row));
    csv += io::csv_row(fields);
  }
  const auto dir = ctx.output_dir / "correlation";
  write_json(dir / "correlation.json", doc);
  io::write_text(dir / "correlation.csv", csv);
  io::write_text(dir / "correlation.svg", render_svg(doc));
}

void cmd_emocam(const Context& ctx) {
  for (const auto* m : ctx.config.analysed_models()) emocam_for(ctx, *m);
}

void cmd_ablate(const Context& ctx) {
  for (const auto* m : ctx.config.analysed_models()) ablate_for(ctx, *m);
}

void cmd_object2brain(const Context& ctx) {
  const auto map = category_map(ctx);
  const auto vocab = map.vocabulary();
  const auto selection = selected_categories(ctx, map);

  json comparison;
  comparison["kind"] = "category_comparison";
  comparison["provenance"] = ctx.provenance("o2b", all_bundles(ctx.config)).lines();
  comparison["categories"] = selection;
  comparison["models"] = json::array();
  std::vector<std::string> model_names;
  std::vector<std::vector<CategoryContribution>> model_last;

  for (const auto* m : ctx.config.analysed_models()) {
    const auto& bundle = first_bundle(*m);
    const auto graph = load_model(bundle);
    const auto layers = target_layers(ctx, graph, m->name);
    const auto prov = ctx.provenance("o2b", {bundle}).lines();

    std::optional<std::vector<ScoreMatrix>> fresh_scores;
    std::optional<std::vector<DeltaMatrix>> fresh_deltas;
    std::vector<std::string> layer_ids;
    std::vector<std::vector<CategoryContribution>> per_layer;
    std::vector<std::string> target_names;

    for (std::size_t li = 0; li < layers.size(); ++li) {
      const auto& node = layers[li].node_id;
      layer_ids.push_back(node);
      const auto s_stem = emocam_stem(ctx, m->name, node);
      ScoreMatrix scores;
      if (fs::exists(fs::path(s_stem) += ".json")) {
        scores = read_score_matrix(s_stem);
      } else {
        if (!fresh_scores) fresh_scores = emocam_for(ctx, *m);
        scores = (*fresh_scores)[li];
      }
      const auto d_stem = ablation_stem(ctx, m->name, node);
      DeltaMatrix delta;
      if (fs::exists(fs::path(d_stem) += ".json")) {
        delta = read_delta_matrix(d_stem);
      } else {
        if (!fresh_deltas) fresh_deltas = ablate_for(ctx, *m);
        delta = (*fresh_deltas)[li];
      }
      if (scores.classes != vocab.size()) {
        throw Error(Errc::shape_mismatch, "score matrix for " + node + " has " +
                                              std::to_string(scores.classes) +
                                              " classes, the category map has " +
                                              std::to_string(vocab.size()));
      }

      const auto cube = weight_cube(delta, scores);
      const auto weights = class_weights(cube);
      const auto rows = topx_category_contributions(weights, vocab, map,
                                                    std::min(ctx.config.top_x, vocab.size()));
      target_names = weights.targets;

      const auto dir = ctx.output_dir / "o2b" / m->name / node;
      write_weight_cube(dir / "cube", cube, prov);
      write_class_weights(dir / "class_weights", weights, vocab, prov);
      write_contributions(dir / "contributions", rows, prov);

      auto scatter = scatter_doc(prov, m->name + " " + node + ": top-" +
                                           std::to_string(rows.empty() ? 0 : rows.front().x) +
                                           " category contributions per target",
                                 target_names, selection);
      for (const auto& r : rows) {
        const auto y = index_in(selection, r.category);
        const auto x = index_in(target_names, r.target);
        if (y && x) add_points(scatter, *x, *y, r);
      }
      write_json(dir / "scatter.json", scatter);
      io::write_text(dir / "scatter.svg", render_svg(scatter));
      per_layer.push_back(rows);
    }

    json evolution;
    evolution["kind"] = "category_evolution";
    evolution["provenance"] = prov;
    evolution["model"] = m->name;
    evolution["layers"] = layer_ids;
    evolution["targets"] = target_names;
    evolution["categories"] = selection;
    evolution["series"] = json::array();
    for (const auto& t : target_names) {
      for (const auto& c : selection) {
        json series;
        series["target"] = t;
        series["category"] = c;
        json pos = json::array(), neg = json::array();
        for (const auto& rows : per_layer) {
          for (const auto& r : rows) {
            if (r.target == t && r.category == c) {
              pos.push_back(r.positive_avg);
              neg.push_back(r.negative_avg);
            }
          }
        }
        series["positive_avg"] = std::move(pos);
        series["negative_avg"] = std::move(neg);
        evolution["series"].push_back(std::move(series));
      }
    }
    const auto mdir = ctx.output_dir / "o2b" / m->name;
    write_json(mdir / "evolution.json", evolution);
    if (!target_names.empty()) {
      auto fig = scatter_doc(prov, m->name + ": " + target_names.front() + " across layers",
                             layer_ids, selection);
      for (std::size_t l = 0; l < per_layer.size(); ++l) {
        for (const auto& r : per_layer[l]) {
          const auto y = index_in(selection, r.category);
          if (r.target == target_names.front() && y) add_points(fig, l, *y, r);
        }
      }
      write_json(mdir / "evolution_scatter.json", fig);
      io::write_text(mdir / "evolution_scatter.svg", render_svg(fig));
    }

    json entry;
    entry["model"] = m->name;
    entry["architecture"] = graph.metadata.architecture;
    entry["layer"] = layer_ids.back();
    entry["contributions"] = json::array();
    for (const auto& r : per_layer.back()) {
      if (index_in(selection, r.category)) entry["contributions"].push_back(contribution_json(r));
    }
    comparison["models"].push_back(std::move(entry));
    model_names.push_back(m->name);
    model_last.push_back(per_layer.back());
  }
  write_json(ctx.output_dir / "o2b" / "comparison.json", comparison);
  if (!model_last.empty() && !model_last.front().empty()) {
    const auto first_target = model_last.front().front().target;
    auto fig = scatter_doc(comparison["provenance"], "Last target layer, " + first_target + ", per model",
                           model_names, selection);
    for (std::size_t i = 0; i < model_last.size(); ++i) {
      for (const auto& r : model_last[i]) {
        const auto y = index_in(selection, r.category);
        if (r.target == first_target && y) add_points(fig, i, *y, r);
      }
    }
    write_json(ctx.output_dir / "o2b" / "comparison_scatter.json", fig);
    io::write_text(ctx.output_dir / "o2b" / "comparison_scatter.svg", render_svg(fig));
  }

  if (!ctx.config.detections.empty()) write_overlap(ctx, "o2b");
}

void cmd_overlap(const Context& ctx) { write_overlap(ctx, "overlap"); }

void cmd_render(const fs::path& input, const fs::path& output) {
  if (!fs::exists(input)) throw Error(Errc::io_error, "figure document not found: " + input.string());
  json doc;
  try {
    doc = json::parse(io::read_text(input));
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse_error, input.string() + ": " + e.what());
  }
  auto out = output;
  if (out.empty()) {
    out = input;
    out.replace_extension(".svg");
  }
  io::write_text(out, render_svg(doc));
}

BenchResult run_bench(std::size_t repeats, std::uint64_t seed) {
  const Network<float> net(synth::toy_network(seed));
  const auto table = synth::stimulus_table(seed);
  const auto targets = build_targets(table);
  auto ids = table.image_ids();
  const auto corpus = synth::random_corpus(ids, net.input_shape(), seed + 1);
  const auto base = predict_corpus(net, corpus);
  const std::string node = "relu3";

  BenchResult r;
  r.node_id = node;
  r.filters = net.channels(node);
  r.images = corpus.size();
  r.repeats = std::max<std::size_t>(repeats, 1);

  using clock = std::chrono::steady_clock;
  auto time_sweep = [&](AblationStrategy s, DeltaMatrix& out) {
    double best = 0;
    for (std::size_t i = 0; i < r.repeats; ++i) {
      const auto t0 = clock::now();
      out = ablation_deltas(net, node, corpus, targets, base, 1, s);
      const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      best = i == 0 ? ms : std::min(best, ms);
    }
    return best;
  };
  DeltaMatrix inc, full;
  r.incremental_ms = time_sweep(AblationStrategy::incremental, inc);
  r.full_ms = time_sweep(AblationStrategy::full, full);
  r.speedup = r.incremental_ms > 0 ? r.full_ms / r.incremental_ms : 0;
  r.identical = inc.deltas == full.deltas && inc.defined == full.defined;
  return r;
}

std::string to_json(const BenchResult& r) {
  json j;
  j["node_id"] = r.node_id;
  j["filters"] = r.filters;
  j["images"] = r.images;
  j["repeats"] = r.repeats;
  j["threads"] = 1;
  j["incremental_ms"] = r.incremental_ms;
  j["full_ms"] = r.full_ms;
  j["speedup"] = r.speedup;
  j["identical_deltas"] = r.identical;
  return j.dump(2) + "\n";
}

void write_synthetic_workspace(const fs::path& dir, std::uint64_t seed) {
  const std::vector<std::pair<std::string, std::uint64_t>> families{{"toy", seed},
                                                                    {"toy-alt", seed + 100}};
  std::string models_toml;
  for (const auto& [name, base_seed] : families) {
    models_toml += "\n[[models]]\nname = \"" + name + "\"\nbundles = [";
    for (std::uint64_t s = 0; s < 5; ++s) {
      auto g = synth::toy_network(base_seed + s);
      g.metadata.architecture = name;
      const std::string rel = "models/" + name + "-" + std::to_string(s + 1);
      save_model(g, dir / rel);
      models_toml += (s ? ", \"" : "\"") + rel + "\"";
    }
    models_toml += "]\n";
  }

  const auto table = synth::stimulus_table(seed);
  io::write_text(dir / "stimuli" / "stimuli.csv", table.to_csv());
  synth::random_corpus(table.image_ids(), {3, 12, 12}, seed + 1).save(dir / "stimuli" / "corpus.json");

  std::vector<std::string> ids;
  for (std::size_t i = 0; i < 24; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "img_%03zu", i);
    ids.push_back(buf);
  }
  synth::random_corpus(ids, {3, 12, 12}, seed + 2).save(dir / "corpus" / "corpus.json");
  const auto& map = CategoryMap::builtin();
  const auto vocab = map.vocabulary();
  auto dets = synth::random_detections(ids, vocab, vocab.size(), 4, 48, 48, seed + 3);
  auto add = [&](const std::string& id, const std::string& name, BBox box, double conf) {
    Detection d;
    d.image_id = id;
    d.class_id = *vocab.index_of(name);
    d.class_name = name;
    d.bbox = box;
    d.confidence = conf;
    d.image_w = 48;
    d.image_h = 48;
    dets.push_back(std::move(d));
  };
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i % 3 == 0) {
      add(ids[i], "Person", {4, 4, 40, 44}, 0.9);
      add(ids[i], "Human arm", {10, 10, 20, 30}, 0.7);
    }
    if (i % 4 == 0) add(ids[i], "Car", {0, 24, 30, 48}, 0.8);
    if (i % 5 == 0) add(ids[i], "Bus", {20, 20, 46, 46}, 0.2);
  }
  io::write_text(dir / "corpus" / "detections.jsonl", detections_to_jsonl(dets));

  io::write_text(dir / "config.toml",
                 "[run]\n"
                 "output_dir = \"out\"\n"
                 "jobs = 1\n"
                 "\n[stimuli]\n"
                 "manifest = \"stimuli/corpus.json\"\n"
                 "table = \"stimuli/stimuli.csv\"\n"
                 "\n[emocam]\n"
                 "manifest = \"corpus/corpus.json\"\n"
                 "detections = \"corpus/detections.jsonl\"\n"
                 "threshold = 0.25\n"
                 "gradient = \"logit\"\n"
                 "\n[categories]\n"
                 "selection = [\"Body Parts\", \"Human\", \"Transport\"]\n"
                 "\n[analysis]\n"
                 "target_layers = [\"relu1\", \"relu2\", \"relu3\"]\n"
                 "top_x = 25\n"
                 "strategy = \"automatic\"\n" +
                     models_toml);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Object-class influence on model-to-brain alignment", "o2b"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kToolVersion));

  std::string config_path, output_dir;
  int jobs = -1;
  app.add_option("-c,--config", config_path, "Run configuration (TOML)");
  app.add_option("-o,--output-dir", output_dir, "Output directory (overrides the config)");
  app.add_option("-j,--jobs", jobs, "Worker threads, 0 for all cores (overrides the config)")
      ->check(CLI::NonNegativeNumber);

  std::map<std::string, void (*)(const Context&)> pipeline{
      {"predict", cmd_predict}, {"correlate", cmd_correlate}, {"emocam", cmd_emocam},
      {"ablate", cmd_ablate},   {"o2b", cmd_object2brain},     {"overlap", cmd_overlap}};
  const std::map<std::string, std::string> help{
      {"predict", "Predict every stimulus with every model bundle"},
      {"correlate", "Correlation table of predictions against the 24 targets"},
      {"emocam", "Per-filter class score matrices for each target layer"},
      {"ablate", "Single-filter ablation correlation deltas"},
      {"o2b", "Weight cubes, class weights and category contributions"},
      {"overlap", "Category bounding-box overlap matrix"}};
  for (const auto& [name, fn] : pipeline) app.add_subcommand(name, help.at(name));

  auto* render = app.add_subcommand("render", "Render an SVG from a figure JSON");
  std::string render_in, render_out;
  render->add_option("input", render_in, "Figure JSON")->required();
  render->add_option("--svg", render_out, "Output SVG (default: input with .svg)");

  auto* bench = app.add_subcommand("bench", "Time incremental against full ablation sweeps");
  std::size_t repeats = 3;
  std::uint64_t bench_seed = 1;
  std::string bench_out;
  bench->add_option("--repeats", repeats, "Timed repetitions per sweep");
  bench->add_option("--seed", bench_seed, "Toy network seed");
  bench->add_option("--json", bench_out, "Also write the result to this file");

  auto* synth_cmd = app.add_subcommand("synth", "Write a toy workspace");
  std::string synth_dir;
  std::uint64_t synth_seed = 1;
  synth_cmd->add_option("dir", synth_dir, "Workspace directory")->required();
  synth_cmd->add_option("--seed", synth_seed, "Base seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (render->parsed()) {
      cmd_render(render_in, render_out);
      return 0;
    }
    if (bench->parsed()) {
      const auto r = run_bench(repeats, bench_seed);
      const auto text = to_json(r);
      std::cout << text;
      if (!bench_out.empty()) io::write_text(bench_out, text);
      return 0;
    }
    if (synth_cmd->parsed()) {
      write_synthetic_workspace(synth_dir, synth_seed);
      logger()->info("wrote workspace {}", synth_dir);
      return 0;
    }

    Context ctx;
    if (config_path.empty()) throw Error(Errc::invalid_argument, "this command needs --config");
    ctx.config = load_config(config_path);
    ctx.config_hash = sha256_hex(ctx.config.source_text);
    ctx.output_dir = output_dir.empty() ? ctx.config.output_dir : fs::path(output_dir);
    ctx.jobs = resolve_jobs(jobs >= 0 ? static_cast<std::size_t>(jobs) : ctx.config.jobs);
    for (const auto& [name, fn] : pipeline) {
      if (app.got_subcommand(name)) fn(ctx);
    }
    return 0;
  } catch (const Error& e) {
    logger()->error("{} ({})", e.what(), errc_name(e.code()));
    return 1;
  } catch (const std::exception& e) {
    logger()->error("{}", e.what());
    return 1;
  }
}

}  // namespace o2b::cli
