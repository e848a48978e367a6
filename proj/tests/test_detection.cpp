#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "o2b/detection.hpp"
#include "o2b/gradcam.hpp"
#include "o2b/io.hpp"
#include "o2b/score_matrix.hpp"
#include "o2b/synthetic.hpp"
#include "oracles.hpp"

using o2b::BBox;
using o2b::CategoryMap;
using o2b::Detection;
using o2b::Errc;
using o2b::Tensor;

namespace {

std::string record(const std::string& id, std::size_t cls, const std::string& name,
                   const std::string& box, double conf, int w = 100, int h = 80) {
  return R"({"image_id": ")" + id + R"(", "class_id": )" + std::to_string(cls) +
         R"(, "class_name": ")" + name + R"(", "bbox": )" + box +
         R"(, "confidence": )" + std::to_string(conf) + R"(, "image_w": )" + std::to_string(w) +
         R"(, "image_h": )" + std::to_string(h) + "}\n";
}

Errc error_of(const std::function<void()>& f, std::string* what = nullptr) {
  try {
    f();
  } catch (const o2b::Error& e) {
    if (what) *what = e.what();
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::invalid_argument;
}

Detection det(const std::string& image, const std::string& name, BBox box) {
  const auto& map = CategoryMap::builtin();
  const auto vocab = map.vocabulary();
  Detection d;
  d.image_id = image;
  d.class_name = name;
  d.class_id = *vocab.index_of(name);
  d.bbox = box;
  d.confidence = 0.9;
  d.image_w = 100;
  d.image_h = 100;
  return d;
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("im" + std::to_string(10 + i));
  return out;
}

}  // namespace

TEST(LoadDetections, ThresholdDropsLowConfidence) {
  const auto text = record("a", 1, "x", "[1, 1, 5, 5]", 0.2) + record("a", 1, "x", "[1, 1, 5, 5]", 0.25) +
                    record("a", 1, "x", "[1, 1, 5, 5]", 0.9);
  const auto set = o2b::parse_detections(text);
  EXPECT_EQ(set.detections.size(), 2u);
  EXPECT_EQ(set.below_threshold, 1u);
  EXPECT_EQ(o2b::parse_detections(text, 0.1).detections.size(), 3u);
}

TEST(LoadDetections, DegenerateBoxesAreCounted) {
  const auto text = record("a", 1, "x", "[5, 1, 5, 5]", 0.9) + record("a", 1, "x", "[6, 1, 5, 5]", 0.9) +
                    record("a", 1, "x", "[1, 4, 5, 4]", 0.9) + record("a", 1, "x", "[1, 1, 2, 2]", 0.9);
  const auto set = o2b::parse_detections(text);
  EXPECT_EQ(set.detections.size(), 1u);
  EXPECT_EQ(set.degenerate, 3u);
}

TEST(LoadDetections, OrderPreservedAndClamped) {
  const auto text = record("b", 3, "x", "[10, 10, 20, 20]", 0.5) +
                    record("a", 1, "y", "[-5, 70, 30, 95]", 0.6) +
                    record("c", 2, "z", "[0, 0, 100, 80]", 0.7) +
                    record("c", 2, "z", "[120, 0, 130, 10]", 0.7);
  const auto set = o2b::parse_detections(text);
  ASSERT_EQ(set.detections.size(), 3u);
  EXPECT_EQ(set.detections[0].image_id, "b");
  EXPECT_EQ(set.detections[1].image_id, "a");
  EXPECT_EQ(set.detections[2].image_id, "c");
  EXPECT_EQ(set.detections[1].bbox, (BBox{0, 70, 30, 80}));
  EXPECT_EQ(set.clamped, 1u);
  EXPECT_EQ(set.outside, 1u);
}

TEST(LoadDetections, MalformedRecordNamesLine) {
  std::string what;
  const auto text = record("a", 1, "x", "[1, 1, 5, 5]", 0.9) + "{\"image_id\": \"a\"}\n";
  EXPECT_EQ(error_of([&] { o2b::parse_detections(text); }, &what), Errc::parse_error);
  EXPECT_NE(what.find("line 2"), std::string::npos) << what;

  const auto bad_box = record("a", 1, "x", "[1, 1, 5]", 0.9);
  EXPECT_EQ(error_of([&] { o2b::parse_detections(bad_box); }, &what), Errc::parse_error);
  EXPECT_NE(what.find("line 1"), std::string::npos) << what;

  const auto bad_conf = record("a", 1, "x", "[1, 1, 5, 5]", 1.5);
  EXPECT_EQ(error_of([&] { o2b::parse_detections(bad_conf); }), Errc::parse_error);
  EXPECT_EQ(error_of([&] { o2b::parse_detections("not json\n"); }), Errc::parse_error);
  EXPECT_TRUE(o2b::parse_detections("\n\n").detections.empty());
}

TEST(LoadDetections, JsonlRoundTrip) {
  const auto text = record("b", 3, "x", "[10.5, 10, 20, 20.25]", 0.5) +
                    record("a", 1, "y", "[0, 0, 30, 40]", 0.625);
  const auto set = o2b::parse_detections(text);
  EXPECT_EQ(o2b::parse_detections(o2b::detections_to_jsonl(set.detections)).detections,
            set.detections);
}

TEST(Categories, BuiltinMapShape) {
  const auto& map = CategoryMap::builtin();
  const auto vocab = map.vocabulary();
  EXPECT_EQ(vocab.size(), 601u);
  EXPECT_EQ(map.categories().size(), 34u);
  std::size_t total = 0;
  for (const auto& c : map.categories()) total += map.constituent_count(c);
  EXPECT_EQ(total, 601u);
}

TEST(Categories, StatedCounts) {
  const auto& map = CategoryMap::builtin();
  const std::vector<std::pair<std::string, std::size_t>> counts{
      {"Human", 5},      {"Body Parts", 13}, {"Transport", 28}, {"Clothing", 30}, {"Furniture", 25},
      {"Health", 9},     {"Nature", 14},     {"Places", 11},    {"Sports", 39}};
  const auto groups = o2b::categorize(map.vocabulary(), map);
  for (const auto& [name, n] : counts) {
    EXPECT_EQ(map.constituent_count(name), n) << name;
    const auto it = std::find_if(groups.begin(), groups.end(),
                                 [&](const auto& g) { return g.category == name; });
    ASSERT_NE(it, groups.end());
    EXPECT_EQ(it->class_ids.size(), n) << name;
  }
}

TEST(Categories, NamedClasses) {
  const auto& map = CategoryMap::builtin();
  EXPECT_EQ(map.category_of("Person"), "Human");
  EXPECT_EQ(map.category_of("Human arm"), "Body Parts");
  EXPECT_EQ(map.category_of("Human ear"), "Body Parts");
  for (const char* h : {"Boy", "Girl", "Man", "Woman", "Person"}) EXPECT_EQ(map.category_of(h), "Human");
  EXPECT_EQ(map.vocabulary().index_of("Car"), 90u);
  EXPECT_EQ(map.vocabulary().name(90), "Car");
  EXPECT_FALSE(map.category_of("Unicorn").has_value());
}

TEST(Categories, UnmappedClassIsNamed) {
  const auto map = CategoryMap::parse_csv("class_name,category\nCat,Animals\n");
  const o2b::ClassVocabulary vocab({"Cat", "Dog"});
  std::string what;
  EXPECT_EQ(error_of([&] { o2b::categorize(vocab, map); }, &what), Errc::unmapped_class);
  EXPECT_NE(what.find("Dog"), std::string::npos);
  EXPECT_EQ(error_of([&] { CategoryMap::parse_csv("name,cat\nCat,Animals\n"); }), Errc::parse_error);
}

TEST(ScoreBox, Examples) {
  const auto flat = Tensor<double>::filled({10, 10}, 0.7);
  EXPECT_DOUBLE_EQ(o2b::score_box(flat, {2, 2, 6, 6}), 0.7);
  EXPECT_DOUBLE_EQ(o2b::emocam_score(1.0, 0.0), 0.5);
  EXPECT_EQ(o2b::score_box(Tensor<double>({10, 10}), {0, 0, 10, 10}), 0.0);
  EXPECT_EQ(error_of([&] { o2b::score_box(flat, {20, 20, 30, 30}); }), Errc::invalid_argument);
}

TEST(ScoreBox, MatchesPixelOracle) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = 3 + rng() % 10, w = 3 + rng() % 10;
    const auto values = oracle::random_vector(rng, h * w, 0, 1);
    const Tensor<double> map({h, w}, values);
    const double x1 = oracle::uniform(rng, -2, static_cast<double>(w) - 1);
    const double y1 = oracle::uniform(rng, -2, static_cast<double>(h) - 1);
    const double x2 = x1 + oracle::uniform(rng, 0.1, 6), y2 = y1 + oracle::uniform(rng, 0.1, 6);
    const double want = oracle::pixel_box_score(values, h, w, {x1, y1, x2, y2});
    if (x2 <= 0 || y2 <= 0) continue;
    EXPECT_NEAR(o2b::score_box(map, {x1, y1, x2, y2}), want, 1e-14);
  }
}

TEST(ScoreBox, HomogeneousRegionScoresItsValue) {
  for (double v : {0.1, 0.3, 0.7, 1.0 / 3.0}) {
    std::vector<double> values(9 * 13, v);
    values[0] = 1.0;
    const Tensor<double> map({9, 13}, values);
    const auto stats = o2b::box_stats(map, {1, 1, 12, 8});
    EXPECT_EQ(stats.mean, v);
    EXPECT_EQ(o2b::score_box(map, {1, 1, 12, 8}), v);
    EXPECT_LT(o2b::score_box(map, {0, 0, 12, 8}), 1.0);
  }
}

TEST(ScoreBox, ScoringFunctionProperties) {
  for (int i = 0; i <= 40; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double m = i / 40.0, a = j / 40.0;
      const double s = o2b::emocam_score(m, a);
      EXPECT_LE(s, m + 1e-15);
      EXPECT_GE(s, 0.0);
      if (i == j) EXPECT_DOUBLE_EQ(s, m);
      if (i != j) EXPECT_LT(s, m);
      if (j > 0) EXPECT_GT(s, o2b::emocam_score(m, (j - 1) / 40.0));
      if (i > 0 && j > 0) {
        const double gap = m - a;
        EXPECT_GT(s, o2b::emocam_score(m - 1 / 40.0, m - 1 / 40.0 - gap));
      }
    }
  }
}

TEST(Overlap, IdenticalDisjointAndHalf) {
  const auto& map = CategoryMap::builtin();
  const auto human = *map.category_index("Human"), transport = *map.category_index("Transport");
  const auto body = *map.category_index("Body Parts");

  auto m = o2b::overlap_matrix({det("i", "Person", {10, 10, 30, 30}), det("i", "Car", {10, 10, 30, 30})}, map);
  EXPECT_EQ(m.categories.size(), 34u);
  EXPECT_DOUBLE_EQ(*m.at(human, transport), 100.0);
  EXPECT_DOUBLE_EQ(*m.at(transport, human), 100.0);
  EXPECT_FALSE(m.at(human, human).has_value());
  EXPECT_FALSE(m.at(body, human).has_value());

  m = o2b::overlap_matrix({det("i", "Person", {0, 0, 10, 10}), det("i", "Car", {20, 20, 30, 30})}, map);
  EXPECT_DOUBLE_EQ(*m.at(human, transport), 0.0);

  const oracle::Rect a{0, 0, 10, 10}, b{5, 0, 30, 10};
  m = o2b::overlap_matrix({det("i", "Person", {0, 0, 10, 10}), det("i", "Car", {5, 0, 30, 10})}, map);
  EXPECT_DOUBLE_EQ(*m.at(human, transport), 50.0);
  EXPECT_DOUBLE_EQ(*m.at(transport, human), 100.0 * oracle::rect_intersection(a, b) / 250.0);
}

TEST(Overlap, NestedBoxesAreAsymmetric) {
  const auto& map = CategoryMap::builtin();
  const auto human = *map.category_index("Human"), body = *map.category_index("Body Parts");
  const auto m = o2b::overlap_matrix(
      {det("i", "Person", {0, 0, 40, 40}), det("i", "Human arm", {10, 10, 20, 30})}, map);
  EXPECT_DOUBLE_EQ(*m.at(body, human), 100.0);
  EXPECT_DOUBLE_EQ(*m.at(human, body), 100.0 * 200.0 / 1600.0);
}

TEST(Overlap, PairsOnlyWithinImagesAndSelfPairsExcluded) {
  const auto& map = CategoryMap::builtin();
  const auto human = *map.category_index("Human"), transport = *map.category_index("Transport");
  const auto m = o2b::overlap_matrix({det("i", "Person", {0, 0, 10, 10}), det("i", "Man", {0, 0, 10, 20}),
                                      det("j", "Car", {0, 0, 10, 10}), det("j", "Bus", {0, 0, 5, 10})},
                                     map);
  EXPECT_FALSE(m.at(human, transport).has_value());
  // Person->Man 100, Man->Person 50.
  EXPECT_DOUBLE_EQ(*m.at(human, human), 75.0);
  EXPECT_EQ(m.pairs[human * 34 + human], 2u);
  EXPECT_DOUBLE_EQ(*m.at(transport, transport), 75.0);
}

TEST(Overlap, RangeProperty) {
  const auto& map = CategoryMap::builtin();
  const auto vocab = map.vocabulary();
  const auto dets = o2b::synth::random_detections(ids(30), vocab, 601, 6, 50, 40, 17);
  const auto m = o2b::overlap_matrix(dets, map);
  for (const auto& v : m.values) {
    if (!v) continue;
    EXPECT_GE(*v, 0.0);
    EXPECT_LE(*v, 100.0);
  }
}

namespace {

// Independent reference: per image, forward, backward, per-filter maps at
// detection resolution, pixel-oracle box scores, then a plain mean.
std::vector<double> reference_scores(const o2b::Network<double>& net, const std::string& node,
                                     const o2b::Corpus& corpus, const std::vector<Detection>& dets,
                                     std::size_t classes) {
  const auto filters = net.channels(node);
  std::vector<double> sum(filters * classes, 0.0);
  std::vector<double> count(classes, 0.0);
  for (const auto& d : dets) {
    const auto image = corpus.image(*corpus.find(d.image_id)).cast<double>();
    const auto fwd = net.forward(image, {}, {node});
    const auto& act = fwd.captures.at(node);
    const auto grad = net.backward_to_layer(fwd, node);
    const auto maps = o2b::per_filter_cam(act, grad, d.image_h, d.image_w);
    for (std::size_t f = 0; f < filters; ++f) {
      std::vector<double> values(maps[f].map.data().begin(), maps[f].map.data().end());
      sum[f * classes + d.class_id] += oracle::pixel_box_score(
          values, d.image_h, d.image_w, {d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2});
    }
    count[d.class_id] += 1;
  }
  for (std::size_t f = 0; f < filters; ++f) {
    for (std::size_t k = 0; k < classes; ++k) {
      if (count[k] > 0) sum[f * classes + k] /= count[k];
    }
  }
  return sum;
}

}  // namespace

TEST(ScoreMatrix, MatchesReferenceOnToyNetwork) {
  const o2b::Network<double> net(o2b::synth::toy_network(13));
  const auto corpus = o2b::synth::random_corpus(ids(6), net.input_shape(), 14);
  const o2b::ClassVocabulary vocab({"a", "b", "c", "d", "e"});
  const auto dets = o2b::synth::random_detections(ids(6), vocab, 4, 3, 24, 20, 15);
  ASSERT_FALSE(dets.empty());
  const auto m = o2b::build_score_matrix(net, "relu2", corpus, dets, vocab);
  EXPECT_EQ(m.filters, 6u);
  EXPECT_EQ(m.classes, 5u);
  const auto want = reference_scores(net, "relu2", corpus, dets, 5);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(m.scores[i], want[i], 1e-12);
  for (std::size_t f = 0; f < 6; ++f) EXPECT_EQ(m.at(f, 4), 0.0);
  EXPECT_EQ(m.detection_counts[4], 0u);
  for (double v : m.scores) EXPECT_GE(v, 0.0);
}

TEST(ScoreMatrix, HomogeneousSingleDetection) {
  // A one-pixel activation map upsamples to a constant map; with a positive
  // gradient every filter is a constant-one map and every box scores 1.
  const o2b::Network<double> net(o2b::synth::tiny_network());
  const auto corpus = o2b::Corpus::from_tensors({{"only", Tensor<float>::filled({1, 3, 3}, 0.5f)}});
  const o2b::ClassVocabulary vocab({"a", "b", "c"});
  Detection d;
  d.image_id = "only";
  d.class_id = 1;
  d.class_name = "b";
  d.bbox = {1, 1, 3, 4};
  d.image_w = 6;
  d.image_h = 6;
  const auto m = o2b::build_score_matrix(net, "relu", corpus, {d}, vocab);
  const auto want = reference_scores(net, "relu", corpus, {d}, 3);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(m.scores[i], want[i], 1e-12);
  EXPECT_EQ(m.at(0, 0), 0.0);
  EXPECT_EQ(m.at(0, 2), 0.0);
}

TEST(ScoreMatrix, InvariantToDetectionOrder) {
  const o2b::Network<float> net(o2b::synth::toy_network(16));
  const auto corpus = o2b::synth::random_corpus(ids(8), net.input_shape(), 17);
  const o2b::ClassVocabulary vocab({"a", "b", "c", "d"});
  auto dets = o2b::synth::random_detections(ids(8), vocab, 4, 4, 30, 30, 18);
  const auto targets = o2b::make_target_set(net.graph(), {"relu1", "relu3"});
  const auto base = o2b::build_score_matrices(net, targets, corpus, dets, vocab, 1);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 3; ++trial) {
    std::shuffle(dets.begin(), dets.end(), rng);
    const auto again = o2b::build_score_matrices(net, targets, corpus, dets, vocab, 3);
    ASSERT_EQ(again.size(), 2u);
    for (std::size_t l = 0; l < 2; ++l) EXPECT_EQ(again[l].scores, base[l].scores);
  }
}

TEST(ScoreMatrix, UndetectedClassesGiveZeroColumns) {
  const auto& map = CategoryMap::builtin();
  const auto vocab = map.vocabulary();
  const o2b::Network<float> net(o2b::synth::toy_network(19));
  const auto images = ids(25);
  const auto corpus = o2b::synth::random_corpus(images, net.input_shape(), 20);
  std::vector<Detection> dets;
  for (std::size_t k = 0; k < 250; ++k) {
    Detection d;
    d.image_id = images[k % images.size()];
    d.class_id = (k * 7) % 601;
    d.class_name = vocab.name(d.class_id);
    d.bbox = {0, 0, 16, 16};
    d.image_w = 16;
    d.image_h = 16;
    dets.push_back(d);
  }
  const auto m = o2b::build_score_matrix(net, "relu3", corpus, dets, vocab, 2);
  std::size_t zero_columns = 0, detected = 0;
  for (std::size_t k = 0; k < 601; ++k) {
    bool zero = true;
    for (std::size_t f = 0; f < m.filters; ++f) zero = zero && m.at(f, k) == 0.0;
    zero_columns += zero ? 1 : 0;
    detected += m.detection_counts[k] > 0 ? 1 : 0;
  }
  EXPECT_EQ(detected, 250u);
  EXPECT_EQ(zero_columns, 351u);
}

TEST(ScoreMatrix, DetectionErrors) {
  const o2b::Network<float> net(o2b::synth::toy_network(19));
  const auto corpus = o2b::synth::random_corpus(ids(2), net.input_shape(), 20);
  const o2b::ClassVocabulary vocab({"a", "b"});
  Detection d;
  d.image_id = "missing";
  d.class_id = 0;
  d.class_name = "a";
  d.bbox = {0, 0, 4, 4};
  d.image_w = 8;
  d.image_h = 8;
  EXPECT_EQ(error_of([&] { o2b::build_score_matrix(net, "relu1", corpus, {d}, vocab); }),
            Errc::unknown_image);
  d.image_id = ids(2)[0];
  d.class_id = 5;
  EXPECT_EQ(error_of([&] { o2b::build_score_matrix(net, "relu1", corpus, {d}, vocab); }),
            Errc::invalid_argument);
}

TEST(ScoreMatrix, FileRoundTrip) {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "o2b_score_matrix";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const o2b::Network<float> net(o2b::synth::toy_network(22));
  const auto corpus = o2b::synth::random_corpus(ids(4), net.input_shape(), 23);
  const o2b::ClassVocabulary vocab({"a", "b", "c"});
  const auto dets = o2b::synth::random_detections(ids(4), vocab, 3, 3, 20, 20, 24);
  const auto m = o2b::build_score_matrix(net, "relu2", corpus, dets, vocab);
  o2b::write_score_matrix(dir / "relu2", m, vocab, {"seed 22"});
  const auto back = o2b::read_score_matrix(dir / "relu2");
  EXPECT_EQ(back.node_id, "relu2");
  EXPECT_EQ(back.scores, m.scores);
  EXPECT_EQ(back.detection_counts, m.detection_counts);
  EXPECT_TRUE(fs::exists(dir / "relu2.csv"));
}
