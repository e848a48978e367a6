#include "o2b/config.hpp"

#include <set>
#include <sstream>

#include <toml.hpp>

#include "o2b/io.hpp"

namespace o2b::cli {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void fail(std::string_view context, const std::string& message) {
  throw Error(Errc::parse_error, std::string(context) + ": " + message);
}

void reject_unknown(const toml::table& t, std::initializer_list<std::string_view> allowed,
                    std::string_view context) {
  for (const auto& [key, value] : t) {
    bool known = false;
    for (auto a : allowed) known = known || key.str() == a;
    if (!known) fail(context, "unknown key '" + std::string(key.str()) + "'");
  }
}

const toml::table* table_of(const toml::table& root, std::string_view key, std::string_view context) {
  const auto* node = root.get(key);
  if (!node) return nullptr;
  const auto* t = node->as_table();
  if (!t) fail(context, "[" + std::string(key) + "] must be a table");
  return t;
}

std::string get_string(const toml::table& t, std::string_view key, std::string fallback,
                       std::string_view context) {
  const auto* node = t.get(key);
  if (!node) return fallback;
  const auto v = node->value<std::string>();
  if (!v || !node->is_string()) fail(context, "'" + std::string(key) + "' must be a string");
  return *v;
}

double get_double(const toml::table& t, std::string_view key, double fallback,
                  std::string_view context) {
  const auto* node = t.get(key);
  if (!node) return fallback;
  if (!node->is_number()) fail(context, "'" + std::string(key) + "' must be a number");
  return *node->value<double>();
}

std::size_t get_size(const toml::table& t, std::string_view key, std::size_t fallback,
                     std::string_view context) {
  const auto* node = t.get(key);
  if (!node) return fallback;
  const auto v = node->value<std::int64_t>();
  if (!node->is_integer() || !v || *v < 0) {
    fail(context, "'" + std::string(key) + "' must be a non-negative integer");
  }
  return static_cast<std::size_t>(*v);
}

std::vector<std::string> get_strings(const toml::table& t, std::string_view key,
                                     std::string_view context) {
  std::vector<std::string> out;
  const auto* node = t.get(key);
  if (!node) return out;
  const auto* arr = node->as_array();
  if (!arr) fail(context, "'" + std::string(key) + "' must be an array of strings");
  for (const auto& item : *arr) {
    const auto v = item.value<std::string>();
    if (!v || !item.is_string()) fail(context, "'" + std::string(key) + "' must hold strings");
    out.push_back(*v);
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

const ModelEntry& RunConfig::model(std::string_view name) const {
  for (const auto& m : models) {
    if (m.name == name) return m;
  }
  throw Error(Errc::invalid_argument, "no model named '" + std::string(name) + "' in the config");
}

std::vector<const ModelEntry*> RunConfig::analysed_models() const {
  std::vector<const ModelEntry*> out;
  if (analysis_models.empty()) {
    for (const auto& m : models) out.push_back(&m);
  } else {
    for (const auto& name : analysis_models) out.push_back(&model(name));
  }
  return out;
}

RunConfig parse_config(std::string_view text, const fs::path& base_dir, std::string_view context) {
  toml::table root;
  try {
    root = toml::parse(text, context);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << e.description() << " (line " << e.source().begin.line << ")";
    fail(context, msg.str());
  }
  reject_unknown(root, {"run", "stimuli", "emocam", "categories", "analysis", "models"}, context);

  RunConfig c;
  c.source_text = std::string(text);

  if (const auto* t = table_of(root, "run", context)) {
    const std::string ctx = std::string(context) + " [run]";
    reject_unknown(*t, {"output_dir", "jobs"}, ctx);
    c.output_dir = resolve(base_dir, get_string(*t, "output_dir", "out", ctx));
    c.jobs = get_size(*t, "jobs", 1, ctx);
  } else {
    c.output_dir = resolve(base_dir, "out");
  }

  if (const auto* t = table_of(root, "stimuli", context)) {
    const std::string ctx = std::string(context) + " [stimuli]";
    reject_unknown(*t, {"manifest", "table"}, ctx);
    c.stimuli_manifest = resolve(base_dir, get_string(*t, "manifest", "", ctx));
    c.stimulus_table = resolve(base_dir, get_string(*t, "table", "", ctx));
  }

  if (const auto* t = table_of(root, "emocam", context)) {
    const std::string ctx = std::string(context) + " [emocam]";
    reject_unknown(*t, {"manifest", "detections", "threshold", "gradient"}, ctx);
    c.corpus_manifest = resolve(base_dir, get_string(*t, "manifest", "", ctx));
    c.detections = resolve(base_dir, get_string(*t, "detections", "", ctx));
    c.threshold = get_double(*t, "threshold", kDefaultConfidenceThreshold, ctx);
    if (!(c.threshold >= 0 && c.threshold <= 1)) fail(ctx, "threshold must lie in [0, 1]");
    const auto g = get_string(*t, "gradient", "logit", ctx);
    if (g == "logit") {
      c.gradient = GradientOf::logit;
    } else if (g == "probability") {
      c.gradient = GradientOf::probability;
    } else {
      fail(ctx, "gradient must be 'logit' or 'probability'");
    }
  }

  if (const auto* t = table_of(root, "categories", context)) {
    const std::string ctx = std::string(context) + " [categories]";
    reject_unknown(*t, {"map", "selection"}, ctx);
    c.category_map = resolve(base_dir, get_string(*t, "map", "", ctx));
    c.category_selection = get_strings(*t, "selection", ctx);
  }

  if (const auto* t = table_of(root, "analysis", context)) {
    const std::string ctx = std::string(context) + " [analysis]";
    reject_unknown(*t, {"models", "target_layers", "top_x", "strategy"}, ctx);
    c.analysis_models = get_strings(*t, "models", ctx);
    c.target_layers = get_strings(*t, "target_layers", ctx);
    c.top_x = get_size(*t, "top_x", kDefaultTopX, ctx);
    if (c.top_x == 0) fail(ctx, "top_x must be at least 1");
    const auto s = get_string(*t, "strategy", "automatic", ctx);
    if (s == "automatic") {
      c.strategy = AblationStrategy::automatic;
    } else if (s == "incremental") {
      c.strategy = AblationStrategy::incremental;
    } else if (s == "full") {
      c.strategy = AblationStrategy::full;
    } else {
      fail(ctx, "strategy must be 'automatic', 'incremental' or 'full'");
    }
  }

  if (const auto* node = root.get("models")) {
    const auto* arr = node->as_array();
    if (!arr) fail(context, "[[models]] must be an array of tables");
    std::set<std::string> names;
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const auto* t = (*arr)[i].as_table();
      const std::string ctx = std::string(context) + " [[models]] #" + std::to_string(i + 1);
      if (!t) fail(ctx, "must be a table");
      reject_unknown(*t, {"name", "bundles", "predictions"}, ctx);
      ModelEntry m;
      m.name = get_string(*t, "name", "", ctx);
      if (m.name.empty()) fail(ctx, "missing 'name'");
      if (m.name.find_first_of("/\\") != std::string::npos) fail(ctx, "name may not contain slashes");
      if (!names.insert(m.name).second) fail(ctx, "duplicate model name '" + m.name + "'");
      for (const auto& b : get_strings(*t, "bundles", ctx)) m.bundles.push_back(resolve(base_dir, b));
      for (const auto& p : get_strings(*t, "predictions", ctx)) {
        m.predictions.push_back(resolve(base_dir, p));
      }
      c.models.push_back(std::move(m));
    }
  }
  for (const auto& name : c.analysis_models) (void)c.model(name);
  return c;
}

RunConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(Errc::io_error, "config file not found: " + path.string());
  auto c = parse_config(io::read_text(path), path.parent_path(), path.string());
  c.source = path;
  return c;
}

}  // namespace o2b::cli
