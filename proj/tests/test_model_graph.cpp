#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "o2b/io.hpp"
#include "o2b/model_graph.hpp"
#include "o2b/synthetic.hpp"

namespace fs = std::filesystem;
using o2b::Errc;
using o2b::LayerKind;
using o2b::ModelGraph;
using o2b::Violation;

namespace {

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("o2b_graph_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void expect_code(const std::function<void()>& f, Errc code) {
  try {
    f();
    ADD_FAILURE() << "no error raised";
  } catch (const o2b::Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

// Hand-written bundle: conv(1->1, k2) -> relu -> flatten -> linear(4->1) -> sigmoid.
void write_fixture_bundle(const fs::path& dir) {
  const std::string manifest = R"({
  "format": "o2b-bundle-v1",
  "input_shape": [1, 3, 3],
  "output": "out",
  "metadata": {"architecture": "fixture", "seed": 7, "label_semantics": "binary valence"},
  "nodes": [
    {"id": "c", "kind": "conv2d", "inputs": ["input"],
     "params": {"in_channels": 1, "out_channels": 1, "kernel": 2},
     "weights": {"weight": "c.w", "bias": "c.b"}},
    {"id": "r", "kind": "relu", "inputs": ["c"]},
    {"id": "f", "kind": "flatten", "inputs": ["r"]},
    {"id": "l", "kind": "linear", "inputs": ["f"],
     "params": {"in_features": 4, "out_features": 1},
     "weights": {"weight": "l.w", "bias": "l.b"}},
    {"id": "out", "kind": "sigmoid", "inputs": ["l"]}
  ],
  "blobs": [
    {"name": "c.w", "dtype": "float32", "shape": [1, 1, 2, 2], "offset": 0, "length": 16},
    {"name": "c.b", "dtype": "float32", "shape": [1], "offset": 16, "length": 4},
    {"name": "l.w", "dtype": "float32", "shape": [1, 4], "offset": 20, "length": 16},
    {"name": "l.b", "dtype": "float32", "shape": [1], "offset": 36, "length": 4}
  ]
})";
  o2b::io::write_text(dir / "model.json", manifest);
  const std::vector<float> w{1, 0, 0, 1, 0.5f, 0.1f, 0.2f, 0.3f, 0.4f, -0.25f};
  o2b::io::write_bytes(dir / "weights.bin", o2b::io::encode_f32_le(w));
}

}  // namespace

TEST(LoadModel, MinimalFixtureBundle) {
  const auto dir = temp_dir("minimal");
  write_fixture_bundle(dir);
  const ModelGraph g = o2b::load_model(dir);
  ASSERT_EQ(g.nodes.size(), 5u);
  EXPECT_EQ(g.output, "out");
  EXPECT_EQ(g.nodes[0].params.kind, LayerKind::conv2d);
  EXPECT_EQ(g.metadata.seed, 7);
  const auto report = o2b::validate_graph(g);
  EXPECT_TRUE(report.ok());
  EXPECT_EQ(report.shapes.back(), (o2b::Shape{1}));
  EXPECT_EQ(g.find_blob("l.b")->data, std::vector<float>{-0.25f});
}

TEST(LoadModel, MissingWeightFile) {
  const auto dir = temp_dir("missing");
  write_fixture_bundle(dir);
  fs::remove(dir / "weights.bin");
  expect_code([&] { o2b::load_model(dir); }, Errc::missing_blob);
}

TEST(LoadModel, MissingBlobReference) {
  const auto dir = temp_dir("missing_ref");
  write_fixture_bundle(dir);
  auto text = o2b::io::read_text(dir / "model.json");
  text.replace(text.find("\"l.b\"}}"), 5, "\"nope\"");
  o2b::io::write_text(dir / "model.json", text);
  expect_code([&] { o2b::load_model(dir); }, Errc::missing_blob);
}

TEST(LoadModel, WrongBlobLengthNamesNode) {
  const auto dir = temp_dir("wrong_len");
  write_fixture_bundle(dir);
  auto text = o2b::io::read_text(dir / "model.json");
  const auto pos = text.find("\"shape\": [1, 1, 2, 2]");
  text.replace(pos, 21, "\"shape\": [1, 1, 3, 3]");
  o2b::io::write_text(dir / "model.json", text);
  try {
    o2b::load_model(dir);
    FAIL();
  } catch (const o2b::Error& e) {
    EXPECT_EQ(e.code(), Errc::shape_mismatch);
    EXPECT_NE(std::string(e.what()).find("node c"), std::string::npos) << e.what();
  }
}

TEST(LoadModel, UnknownKindAndUnknownField) {
  const auto dir = temp_dir("unknown");
  write_fixture_bundle(dir);
  const auto base = o2b::io::read_text(dir / "model.json");
  auto text = base;
  text.replace(text.find("\"relu\""), 6, "\"gelu\"");
  o2b::io::write_text(dir / "model.json", text);
  expect_code([&] { o2b::load_model(dir); }, Errc::unknown_layer);

  text = base;
  text.replace(text.find("\"output\": \"out\""), 15, "\"output\": \"out\", \"extra\": 1");
  o2b::io::write_text(dir / "model.json", text);
  expect_code([&] { o2b::load_model(dir); }, Errc::parse_error);
}

TEST(LoadModel, CyclicGraph) {
  const auto dir = temp_dir("cycle");
  write_fixture_bundle(dir);
  auto text = o2b::io::read_text(dir / "model.json");
  text.replace(text.find("\"inputs\": [\"input\"]"), 19, "\"inputs\": [\"r\"]");
  o2b::io::write_text(dir / "model.json", text);
  expect_code([&] { o2b::load_model(dir); }, Errc::cyclic_graph);
}

TEST(ValidateGraph, ValidToyGraphs) {
  EXPECT_TRUE(o2b::validate_graph(o2b::synth::toy_network(1)).ok());
  EXPECT_TRUE(o2b::validate_graph(o2b::synth::residual_network(1)).ok());
  EXPECT_TRUE(o2b::validate_graph(o2b::synth::tiny_network()).ok());
}

TEST(ValidateGraph, AddBranchMismatch) {
  auto g = o2b::synth::residual_network(1);
  // Feed the add from the (4, 8, 8) stem and a pooled (4, 4, 4) branch.
  o2b::LayerParams pool;
  pool.kind = LayerKind::maxpool2d;
  pool.kernel = 2;
  pool.stride = 2;
  const auto add = *g.index_of("block.add");
  g.nodes.insert(g.nodes.begin() + static_cast<std::ptrdiff_t>(add), {"shrink", pool, {"block.bn2"}});
  g.nodes[add + 1].inputs = {"shrink", "stem_relu"};
  const auto report = o2b::validate_graph(g);
  ASSERT_EQ(report.violations.size(), 1u) << report.summary();
  EXPECT_EQ(report.violations[0].kind, Violation::Kind::shape_mismatch);
  EXPECT_EQ(report.violations[0].node, "block.add");
}

TEST(ValidateGraph, CycleEntry) {
  auto g = o2b::synth::tiny_network();
  g.nodes[0].inputs = {"relu"};
  const auto report = o2b::validate_graph(g);
  EXPECT_TRUE(report.has(Violation::Kind::cycle));
}

TEST(ValidateGraph, OutputMustBeScalarSigmoid) {
  auto g = o2b::synth::tiny_network();
  g.output = "fc";
  g.nodes.pop_back();
  EXPECT_TRUE(o2b::validate_graph(g).has(Violation::Kind::output));
}

TEST(EnumerateFilters, OrderingAndCounts) {
  const auto g = o2b::synth::toy_network(3);
  const auto one = o2b::make_target_set(g, {"relu1"});
  const auto f1 = o2b::enumerate_filters(g, one);
  ASSERT_EQ(f1.size(), 4u);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(f1[c], (o2b::FilterRef{"relu1", c}));

  const auto tiny = o2b::synth::tiny_network();
  const auto two = o2b::make_target_set(tiny, {"relu", "conv"});
  const auto f2 = o2b::enumerate_filters(tiny, two);
  ASSERT_EQ(f2.size(), 4u);
  EXPECT_EQ(f2[0].node_id, "conv");
  EXPECT_EQ(f2[2].node_id, "relu");

  // Targets given in reverse order still come out in graph order.
  const auto mixed = o2b::make_target_set(g, {"relu3", "relu1"});
  const auto f3 = o2b::enumerate_filters(g, mixed);
  ASSERT_EQ(f3.size(), 10u);
  EXPECT_EQ(f3.front().node_id, "relu1");
  EXPECT_EQ(f3.back(), (o2b::FilterRef{"relu3", 5}));
}

TEST(EnumerateFilters, AlexNetLayoutCount) {
  const auto g = o2b::synth::alexnet_like(1);
  const auto targets = o2b::make_target_set(g, g.metadata.target_layers);
  std::size_t expected = 0;
  for (const auto& n : g.nodes) {
    if (n.params.kind == LayerKind::conv2d) expected += n.params.out_channels;
  }
  EXPECT_EQ(expected, 64u + 192 + 384 + 256 + 256);
  EXPECT_EQ(o2b::enumerate_filters(g, targets).size(), expected);
}

TEST(EnumerateFilters, Errors) {
  const auto g = o2b::synth::toy_network(3);
  expect_code([&] { o2b::make_target_set(g, {"nope"}); }, Errc::unknown_node);
  expect_code([&] { o2b::make_target_set(g, {"pool1"}); }, Errc::invalid_argument);
  expect_code([&] { o2b::enumerate_filters(g, {{"nope", 3}}); }, Errc::unknown_node);
}

TEST(SaveModel, RoundTripIsExact) {
  for (const auto& g : {o2b::synth::toy_network(5), o2b::synth::residual_network(6),
                        o2b::synth::tiny_network()}) {
    const auto dir = temp_dir("roundtrip_" + g.metadata.architecture);
    o2b::save_model(g, dir);
    const auto bytes = o2b::io::read_bytes(dir / "weights.bin");
    const auto back = o2b::load_model(dir);
    EXPECT_TRUE(back == g);
    o2b::save_model(back, dir / "again");
    EXPECT_EQ(o2b::io::read_bytes(dir / "again" / "weights.bin"), bytes);
    EXPECT_EQ(o2b::io::read_text(dir / "again" / "model.json"),
              o2b::io::read_text(dir / "model.json"));
  }
}

TEST(AblationMask, Basics) {
  auto m = o2b::AblationMask::single("relu2", 3);
  m.add("relu2", 1);
  m.add("relu1", 0);
  EXPECT_TRUE(m.touches("relu2"));
  EXPECT_FALSE(m.touches("relu3"));
  EXPECT_EQ(m.channels("relu2"), (std::vector<std::size_t>{1, 3}));
  EXPECT_TRUE(o2b::AblationMask().empty());
}
