#include "o2b/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace o2b::synth {

namespace {

class Builder {
 public:
  explicit Builder(std::uint64_t seed) : rng_(seed) {}

  std::string blob(const std::string& name, Shape shape, double scale, double offset = 0.0) {
    const auto n = shape_numel(shape);
    std::vector<float> data(n);
    for (auto& v : data) v = static_cast<float>(offset + uniform(rng_, -scale, scale));
    g.blobs.push_back({name, std::move(shape), std::move(data)});
    return name;
  }

  void conv(const std::string& id, const std::string& in, std::size_t ci, std::size_t co,
            std::size_t k, std::size_t stride = 1, std::size_t pad = 0) {
    LayerParams p;
    p.kind = LayerKind::conv2d;
    p.in_channels = ci;
    p.out_channels = co;
    p.kernel = k;
    p.stride = stride;
    p.padding = pad;
    const double fan_in = static_cast<double>(ci * k * k);
    p.weight = blob(id + ".weight", {co, ci, k, k}, std::sqrt(6.0 / fan_in));
    p.bias = blob(id + ".bias", {co}, 0.1);
    g.nodes.push_back({id, p, {in}});
  }

  void simple(const std::string& id, LayerKind kind, const std::string& in) {
    LayerParams p;
    p.kind = kind;
    g.nodes.push_back({id, p, {in}});
  }

  void pool(const std::string& id, LayerKind kind, const std::string& in, std::size_t k,
            std::size_t stride, std::size_t pad = 0) {
    LayerParams p;
    p.kind = kind;
    p.kernel = k;
    p.stride = stride;
    p.padding = pad;
    g.nodes.push_back({id, p, {in}});
  }

  void batchnorm(const std::string& id, const std::string& in, std::size_t c) {
    LayerParams p;
    p.kind = LayerKind::batchnorm2d;
    p.scale = blob(id + ".scale", {c}, 0.3, 1.0);
    p.shift = blob(id + ".shift", {c}, 0.1);
    g.nodes.push_back({id, p, {in}});
  }

  void linear(const std::string& id, const std::string& in, std::size_t fin, std::size_t fout,
              double scale) {
    LayerParams p;
    p.kind = LayerKind::linear;
    p.in_features = fin;
    p.out_features = fout;
    p.weight = blob(id + ".weight", {fout, fin}, scale);
    p.bias = blob(id + ".bias", {fout}, 0.1);
    g.nodes.push_back({id, p, {in}});
  }

  Blob& find(const std::string& name) {
    return *std::find_if(g.blobs.begin(), g.blobs.end(),
                         [&](const Blob& b) { return b.name == name; });
  }

  ModelGraph g;

 private:
  std::mt19937_64 rng_;
};

}  // namespace

double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

ModelGraph toy_network(std::uint64_t seed) {
  Builder b(seed);
  b.g.input_shape = {3, 12, 12};
  b.conv("conv1", "input", 3, 4, 3, 1, 1);
  b.simple("relu1", LayerKind::relu, "conv1");
  b.pool("pool1", LayerKind::maxpool2d, "relu1", 2, 2);
  b.conv("conv2", "pool1", 4, 6, 3, 1, 1);
  b.simple("relu2", LayerKind::relu, "conv2");
  b.conv("conv3", "relu2", 6, 6, 3, 1, 1);
  b.simple("relu3", LayerKind::relu, "conv3");
  b.simple("flatten", LayerKind::flatten, "relu3");
  b.linear("head", "flatten", 6 * 6 * 6, 1, 0.08);
  b.simple("output", LayerKind::sigmoid, "head");
  b.g.output = "output";

  auto& w = b.find("conv2.weight");
  const std::size_t per = 4 * 3 * 3;
  std::fill_n(w.data.begin() + static_cast<std::ptrdiff_t>(kToyDeadChannel * per), per, 0.0f);
  b.find("conv2.bias").data[kToyDeadChannel] = -0.5f;

  b.g.metadata = {"toy3conv", static_cast<std::int64_t>(seed), "0 = negative valence, 1 = positive",
                  "full", {"relu1", "relu2", "relu3"}};
  return b.g;
}

ModelGraph residual_network(std::uint64_t seed) {
  Builder b(seed);
  b.g.input_shape = {3, 8, 8};
  b.conv("stem", "input", 3, 4, 3, 1, 1);
  b.batchnorm("stem_bn", "stem", 4);
  b.simple("stem_relu", LayerKind::relu, "stem_bn");
  b.conv("block.conv1", "stem_relu", 4, 4, 3, 1, 1);
  b.batchnorm("block.bn1", "block.conv1", 4);
  b.simple("block.relu1", LayerKind::relu, "block.bn1");
  b.conv("block.conv2", "block.relu1", 4, 4, 3, 1, 1);
  b.batchnorm("block.bn2", "block.conv2", 4);
  LayerParams add;
  add.kind = LayerKind::add;
  b.g.nodes.push_back({"block.add", add, {"block.bn2", "stem_relu"}});
  b.simple("layer1", LayerKind::relu, "block.add");
  LayerParams ap;
  ap.kind = LayerKind::adaptive_avgpool2d;
  ap.out_h = 3;
  ap.out_w = 3;
  b.g.nodes.push_back({"avgpool", ap, {"layer1"}});
  b.simple("flatten", LayerKind::flatten, "avgpool");
  b.linear("fc", "flatten", 4 * 3 * 3, 1, 0.3);
  b.simple("output", LayerKind::sigmoid, "fc");
  b.g.output = "output";
  b.g.metadata = {"residual", static_cast<std::int64_t>(seed), "0 = negative valence, 1 = positive",
                  "layer1", {"stem_relu", "layer1"}};
  return b.g;
}

ModelGraph tiny_network() {
  ModelGraph g;
  g.input_shape = {1, 3, 3};
  LayerParams conv;
  conv.kind = LayerKind::conv2d;
  conv.in_channels = 1;
  conv.out_channels = 2;
  conv.kernel = 2;
  conv.weight = "conv.weight";
  conv.bias = "conv.bias";
  g.nodes.push_back({"conv", conv, {"input"}});
  LayerParams relu;
  relu.kind = LayerKind::relu;
  g.nodes.push_back({"relu", relu, {"conv"}});
  LayerParams flat;
  flat.kind = LayerKind::flatten;
  g.nodes.push_back({"flatten", flat, {"relu"}});
  LayerParams fc;
  fc.kind = LayerKind::linear;
  fc.in_features = 8;
  fc.out_features = 1;
  fc.weight = "fc.weight";
  fc.bias = "fc.bias";
  g.nodes.push_back({"fc", fc, {"flatten"}});
  LayerParams sig;
  sig.kind = LayerKind::sigmoid;
  g.nodes.push_back({"output", sig, {"fc"}});
  g.output = "output";
  g.blobs = {
      {"conv.weight", {2, 1, 2, 2}, {1, 0, 0, 1, 0.5f, -0.5f, 0.25f, 0.25f}},
      {"conv.bias", {2}, {0, 0.1f}},
      {"fc.weight", {1, 8}, {0.1f, -0.2f, 0.3f, -0.4f, 0.5f, -0.6f, 0.7f, -0.8f}},
      {"fc.bias", {1}, {0.3f}},
  };
  g.metadata = {"tiny", 0, "0 = negative valence, 1 = positive", "full", {"relu"}};
  return g;
}

ModelGraph alexnet_like(std::uint64_t seed) {
  Builder b(seed);
  b.g.input_shape = {3, 64, 64};
  b.conv("features.0", "input", 3, 64, 11, 4, 2);
  b.simple("features.1", LayerKind::relu, "features.0");
  b.pool("features.2", LayerKind::maxpool2d, "features.1", 3, 2);
  b.conv("features.3", "features.2", 64, 192, 5, 1, 2);
  b.simple("features.4", LayerKind::relu, "features.3");
  b.pool("features.5", LayerKind::maxpool2d, "features.4", 3, 2);
  b.conv("features.6", "features.5", 192, 384, 3, 1, 1);
  b.simple("features.7", LayerKind::relu, "features.6");
  b.conv("features.8", "features.7", 384, 256, 3, 1, 1);
  b.simple("features.9", LayerKind::relu, "features.8");
  b.conv("features.10", "features.9", 256, 256, 3, 1, 1);
  b.simple("features.11", LayerKind::relu, "features.10");
  b.pool("features.12", LayerKind::maxpool2d, "features.11", 3, 2);
  LayerParams ap;
  ap.kind = LayerKind::adaptive_avgpool2d;
  ap.out_h = 6;
  ap.out_w = 6;
  b.g.nodes.push_back({"avgpool", ap, {"features.12"}});
  b.simple("flatten", LayerKind::flatten, "avgpool");
  b.linear("head", "flatten", 256 * 6 * 6, 1, 0.01);
  b.simple("output", LayerKind::sigmoid, "head");
  b.g.output = "output";
  b.g.metadata = {"alexnet", static_cast<std::int64_t>(seed), "0 = negative valence, 1 = positive",
                  "full", {"features.1", "features.4", "features.7", "features.9", "features.11"}};
  return b.g;
}

StimulusTable stimulus_table(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  StimulusTable t;
  const Condition order[] = {Condition::pos_pos, Condition::pos_neg, Condition::neg_neg,
                             Condition::neg_pos};
  for (std::size_t i = 0; i < 48; ++i) {
    Stimulus s;
    s.image_id = std::string("stim_") + (i < 10 ? "0" : "") + std::to_string(i);
    s.condition = order[i % 4];
    s.congruent = is_congruent(s.condition);
    t.rows.push_back(s);
  }
  for (auto src : kTargetSources) {
    for (auto val : kValenceTypes) {
      auto& col = t.columns[stimulus_column(src, val)];
      for (std::size_t i = 0; i < 48; ++i) {
        if (src == "True") {
          // Alternate within each split so neither split is constant.
          const bool pos = (i / 4 + (val == "PV" ? 1 : 0)) % 2 == 0;
          col.push_back(uniform(rng, 0, 1) < 0.8 ? (pos ? 1.0 : 0.0) : (pos ? 0.0 : 1.0));
        } else {
          col.push_back(uniform(rng, -1, 1));
        }
      }
    }
  }
  return t;
}

Corpus random_corpus(const std::vector<std::string>& ids, const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<std::string, Tensor<float>>> images;
  for (const auto& id : ids) {
    std::vector<float> v(shape_numel(shape));
    for (auto& x : v) x = static_cast<float>(uniform(rng, -1, 1));
    images.emplace_back(id, Tensor<float>(shape, std::move(v)));
  }
  return Corpus::from_tensors(std::move(images));
}

std::vector<Detection> random_detections(const std::vector<std::string>& ids,
                                         const ClassVocabulary& vocabulary,
                                         std::size_t classes_used, std::size_t max_per_image,
                                         std::size_t image_w, std::size_t image_h,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  classes_used = std::min(classes_used, vocabulary.size());
  std::vector<Detection> out;
  const double w = static_cast<double>(image_w), h = static_cast<double>(image_h);
  for (const auto& id : ids) {
    const auto count = static_cast<std::size_t>(
        uniform(rng, 0, static_cast<double>(max_per_image) + 1));
    for (std::size_t d = 0; d < count; ++d) {
      Detection det;
      det.image_id = id;
      det.class_id = static_cast<std::size_t>(uniform(rng, 0, static_cast<double>(classes_used)));
      det.class_name = vocabulary.name(det.class_id);
      const double x1 = std::floor(uniform(rng, 0, w - 2));
      const double y1 = std::floor(uniform(rng, 0, h - 2));
      const double x2 = std::min(w, x1 + 2 + std::floor(uniform(rng, 0, w / 2)));
      const double y2 = std::min(h, y1 + 2 + std::floor(uniform(rng, 0, h / 2)));
      det.bbox = {x1, y1, x2, y2};
      det.confidence = std::round(uniform(rng, 0.25, 1.0) * 1000.0) / 1000.0;
      det.image_w = image_w;
      det.image_h = image_h;
      out.push_back(std::move(det));
    }
  }
  return out;
}

}  // namespace o2b::synth
