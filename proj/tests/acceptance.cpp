// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "o2b/commands.hpp"
#include "o2b/detection.hpp"
#include "o2b/gradcam.hpp"
#include "o2b/io.hpp"
#include "o2b/kernels.hpp"
#include "o2b/object2brain.hpp"
#include "o2b/stats.hpp"
#include "o2b/synthetic.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using T = o2b::Tensor<double>;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

// Collects failures and a summary line for one criterion.
class Check {
 public:
  void expect(bool cond, const std::string& what) {
    if (!cond && failures_++ < 5) notes_ << "; " << what;
  }
  void near(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol)) {
      std::ostringstream s;
      s << what << " got " << got << " want " << want;
      expect(false, s.str());
    }
  }
  Outcome done(const std::string& summary) const {
    std::ostringstream s;
    s << summary;
    if (failures_) s << ", " << failures_ << " failures" << notes_.str();
    return {failures_ == 0, s.str()};
  }

 private:
  std::size_t failures_ = 0;
  std::ostringstream notes_;
};

std::vector<double> vec(const T& t) { return {t.data().begin(), t.data().end()}; }

T random_tensor(std::mt19937_64& rng, o2b::Shape s, double lo = -1, double hi = 1) {
  const auto n = o2b::shape_numel(s);
  return T(std::move(s), oracle::random_vector(rng, n, lo, hi));
}

// Loss sum(r * f(x)) against its analytic gradient backward(r, x).
double fd_error(const std::function<T(const T&)>& forward,
                const std::function<T(const T&, const T&)>& backward, const T& x,
                std::mt19937_64& rng) {
  const T r = random_tensor(rng, forward(x).shape());
  auto loss = [&](const std::vector<double>& v) {
    const T out = forward(T(x.shape(), v));
    double s = 0;
    for (std::size_t i = 0; i < out.numel(); ++i) s += out[i] * r[i];
    return s;
  };
  return oracle::max_relative_error(vec(backward(r, x)), oracle::finite_difference(loss, vec(x)));
}

// Shuffled ramp: values `gap` apart and at least gap / 2 from zero.
T tie_free(std::mt19937_64& rng, o2b::Shape s, double gap) {
  std::vector<double> v(o2b::shape_numel(s));
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = gap * (static_cast<double>(i) - static_cast<double>(v.size()) / 2 + 0.5);
  }
  std::shuffle(v.begin(), v.end(), rng);
  return T(std::move(s), v);
}

Outcome gradient_suite() {
  Check c;
  std::mt19937_64 rng(2024);
  std::size_t cases = 0;
  const double tol = 1e-6;
  auto record = [&](double err, const std::string& what) {
    ++cases;
    c.expect(err <= tol, what + " error " + std::to_string(err));
  };
  for (int i = 0; i < 4; ++i) {
    const T w = random_tensor(rng, {3, 2, 3, 3});
    const std::vector<double> b = oracle::random_vector(rng, 3);
    const o2b::ConvSpec spec{1 + static_cast<std::size_t>(i % 2), static_cast<std::size_t>(i % 2)};
    record(fd_error([&](const T& x) { return o2b::conv2d_forward(x, w, std::span<const double>(b), spec); },
                    [&](const T& g, const T& x) { return o2b::conv2d_backward_input(g, w, x.shape(), spec); },
                    random_tensor(rng, {2, 5, 5}), rng),
           "conv2d");
  }
  for (int i = 0; i < 3; ++i) {
    const o2b::PoolSpec spec{static_cast<std::size_t>(2 + i % 2), 2, static_cast<std::size_t>(i % 2)};
    record(fd_error([&](const T& x) { return o2b::maxpool2d_forward(x, spec).output; },
                    [&](const T& g, const T& x) {
                      return o2b::maxpool2d_backward(g, o2b::maxpool2d_forward(x, spec).argmax, x.shape());
                    },
                    tie_free(rng, {2, 6, 6}, 0.05), rng),
           "maxpool2d");
  }
  for (int i = 0; i < 2; ++i) {
    const o2b::PoolSpec spec{3, 2, static_cast<std::size_t>(i)};
    record(fd_error([&](const T& x) { return o2b::avgpool2d_forward(x, spec); },
                    [&](const T& g, const T& x) { return o2b::avgpool2d_backward(g, x.shape(), spec); },
                    random_tensor(rng, {3, 6, 6}), rng),
           "avgpool2d");
  }
  for (std::size_t out : {1, 3}) {
    record(fd_error([&](const T& x) { return o2b::adaptive_avgpool2d_forward(x, out, out); },
                    [&](const T& g, const T& x) { return o2b::adaptive_avgpool2d_backward(g, x.shape()); },
                    random_tensor(rng, {2, 5, 7}), rng),
           "adaptive_avgpool2d");
  }
  for (int i = 0; i < 2; ++i) {
    const T w = random_tensor(rng, {3, 8});
    const std::vector<double> b = oracle::random_vector(rng, 3);
    record(fd_error([&](const T& x) { return o2b::linear_forward(x, w, std::span<const double>(b)); },
                    [&](const T& g, const T&) { return o2b::linear_backward_input(g, w); },
                    random_tensor(rng, {8}), rng),
           "linear");
  }
  for (int i = 0; i < 2; ++i) {
    record(fd_error([](const T& x) { return o2b::relu_forward(x); },
                    [](const T& g, const T& x) { return o2b::relu_backward(g, x); },
                    tie_free(rng, {2, 3, 3}, 0.07), rng),
           "relu");
    record(fd_error([](const T& x) { return o2b::sigmoid_forward(x); },
                    [](const T& g, const T& x) { return o2b::sigmoid_backward(g, o2b::sigmoid_forward(x)); },
                    random_tensor(rng, {2, 3, 3}, -3, 3), rng),
           "sigmoid");
    const auto scale = oracle::random_vector(rng, 2, 0.5, 2), shift = oracle::random_vector(rng, 2);
    record(fd_error([&](const T& x) {
                      return o2b::batchnorm_forward(x, std::span<const double>(scale), std::span<const double>(shift));
                    },
                    [&](const T& g, const T&) { return o2b::batchnorm_backward(g, std::span<const double>(scale)); },
                    random_tensor(rng, {2, 3, 3}), rng),
           "batchnorm");
  }

  auto layer_case = [&](const o2b::Network<double>& net, const T& input, const std::string& node) {
    const auto fwd = net.forward(input, {}, {node});
    const auto grad = net.backward_to_layer(fwd, node);
    const auto act = net.activation(input, node);
    const auto logit = [&](const std::vector<double>& a) {
      const double p = net.forward_from(node, T(act.shape(), a));
      return std::log(p / (1 - p));
    };
    record(oracle::max_relative_error(vec(grad), oracle::finite_difference(logit, vec(act))),
           "backward_to_layer " + node);
  };
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const o2b::Network<double> net(o2b::synth::toy_network(seed));
    std::mt19937_64 irng(100 + seed);
    const auto input = random_tensor(irng, net.input_shape());
    for (const char* node : {"conv1", "relu2", "relu3", "conv3"}) layer_case(net, input, node);
  }
  for (std::uint64_t seed = 5; seed <= 6; ++seed) {
    const o2b::Network<double> net(o2b::synth::residual_network(seed));
    std::mt19937_64 irng(seed);
    layer_case(net, random_tensor(irng, net.input_shape()), "stem_relu");
  }
  c.expect(cases >= 20, "fewer than 20 cases");
  return c.done(std::to_string(cases) + " cases, max relative error <= 1e-6");
}

bool constant(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

Outcome rank_suite() {
  Check c;
  std::mt19937_64 rng(77);
  std::size_t tied = 0;
  while (tied < 1000) {
    const std::size_t n = 3 + rng() % 40;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng() % 5);
      y[i] = static_cast<double>(rng() % 8);
    }
    if (constant(x) || constant(y)) continue;
    ++tied;
    c.near(o2b::spearman_r(x, y), oracle::rank_pearson(x, y), 1e-12, "tied vector");
  }
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 3 + rng() % 60;
    const auto x = oracle::random_vector(rng, n), y = oracle::random_vector(rng, n);
    c.near(o2b::spearman_r(x, y), oracle::classical_spearman(x, y), 1e-12, "tie-free vector");
  }
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 4 + rng() % 40;
    const auto x = oracle::random_vector(rng, n), y = oracle::random_vector(rng, n);
    const double r = o2b::spearman_r(x, y);
    std::vector<double> ex(n), cube(n), lin(n), neg(n);
    for (std::size_t k = 0; k < n; ++k) {
      ex[k] = std::exp(x[k]);
      cube[k] = x[k] * x[k] * x[k];
      lin[k] = 2.5 * y[k] + 7;
      neg[k] = -std::exp(y[k]);
    }
    c.near(o2b::spearman_r(ex, y), r, 1e-12, "exp transform");
    c.near(o2b::spearman_r(cube, lin), r, 1e-12, "cube/affine transform");
    c.near(o2b::spearman_r(x, neg), -r, 1e-12, "decreasing transform");
  }
  return c.done("1000 tied, 1000 tie-free, 100 transform cases");
}

Outcome score_suite() {
  Check c;
  std::mt19937_64 rng(99);
  std::size_t pairs = 0;
  while (pairs < 500) {
    const std::size_t h = 2 + rng() % 20, w = 2 + rng() % 20;
    auto values = oracle::random_vector(rng, h * w, 0, 1);
    const double x1 = oracle::uniform(rng, -3, static_cast<double>(w) - 0.5);
    const double y1 = oracle::uniform(rng, -3, static_cast<double>(h) - 0.5);
    const double x2 = x1 + oracle::uniform(rng, 0.05, 10), y2 = y1 + oracle::uniform(rng, 0.05, 10);
    if (x2 <= 0 || y2 <= 0) continue;
    ++pairs;
    if (pairs % 5 == 0) std::fill(values.begin(), values.end(), values[0]);
    const T map({h, w}, values);
    const oracle::Rect box{x1, y1, x2, y2};
    const double want = oracle::pixel_box_score(values, h, w, box);
    const double got = o2b::score_box(map, {x1, y1, x2, y2});
    c.near(got, want, 1e-12, "score_box");
    const auto stats = o2b::box_stats(map, {x1, y1, x2, y2});
    double lo = 2, hi = -1;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double px = static_cast<double>(x), py = static_cast<double>(y);
        if (px >= std::floor(x1) && px < std::ceil(x2) && py >= std::floor(y1) && py < std::ceil(y2)) {
          lo = std::min(lo, values[y * w + x]);
          hi = std::max(hi, values[y * w + x]);
        }
      }
    }
    c.expect((got == stats.max) == (lo == hi), "S = M iff homogeneous");
  }
  for (int i = 0; i <= 50; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double m = i / 50.0, a = j / 50.0, s = o2b::emocam_score(m, a);
      c.expect(s >= 0 && s <= m, "0 <= S <= M");
      c.expect((s == m) == (i == j), "S = M iff A = M");
      if (j > 0) c.expect(s > o2b::emocam_score(m, (j - 1) / 50.0), "increasing in A");
      if (i > j && i < 50) c.expect(o2b::emocam_score(m + 0.02, a + 0.02) > s, "increasing at fixed gap");
    }
  }
  return c.done("500 (map, box) pairs, homogeneity and monotonicity grid");
}

Outcome algebra_suite() {
  Check c;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nf = 1 + rng() % 16, nc = 1 + rng() % 40, nt = 24;
    o2b::DeltaMatrix d;
    d.node_id = "layer";
    d.filters = nf;
    for (std::size_t t = 0; t < nt; ++t) d.targets.push_back("t" + std::to_string(t));
    d.base.assign(nt, 0.1);
    d.deltas = oracle::random_vector(rng, nf * nt, -0.5, 0.5);
    d.defined.assign(nf * nt, 1);
    o2b::ScoreMatrix s;
    s.node_id = "layer";
    s.filters = nf;
    s.classes = nc;
    s.scores = oracle::random_vector(rng, nf * nc, 0, 1);
    s.detection_counts.assign(nc, 1);
    const auto w = o2b::weight_cube(d, s);
    const auto v = o2b::class_weights(w);
    for (std::size_t i = 0; i < nt; ++i) {
      for (std::size_t k = 0; k < nc; ++k) {
        double direct = 0;
        for (std::size_t j = 0; j < nf; ++j) {
          const double want = d.deltas[j * nt + i] * s.scores[j * nc + k];
          c.expect(w.at(i, j, k) == want, "W[i,j,k] != C[j,i] S[j,k]");
          direct += want;
        }
        c.near(v.at(i, k), direct, 1e-12, "V[k]");
      }
    }
  }
  return c.done("100 random (C, S) pairs");
}

Outcome ablation_suite() {
  Check c;
  const o2b::Network<double> net(o2b::synth::toy_network(11));
  const auto table = o2b::synth::stimulus_table(11);
  const auto targets = o2b::build_targets(table);
  const auto corpus = o2b::synth::random_corpus(table.image_ids(), net.input_shape(), 12);
  const auto base = o2b::predict_corpus(net, corpus);
  std::size_t cells = 0, filters = 0;
  for (const char* node : {"relu1", "relu2", "relu3"}) {
    const auto d = o2b::ablation_deltas(net, node, corpus, targets, base, 1);
    c.expect(d.filters == net.channels(node) && d.targets.size() == 24 &&
                 d.deltas.size() == d.filters * 24,
             std::string("shape ") + node);
    c.expect(d.filters <= 16, "too many filters");
    filters += d.filters;
    for (std::size_t f = 0; f < d.filters; ++f) {
      std::vector<double> ablated_all;
      std::map<std::string, double> ablated;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto image = corpus.image(i).cast<double>();
        ablated[corpus.id(i)] = net.predict(image, o2b::AblationMask::single(node, f));
      }
      for (std::size_t t = 0; t < 24; ++t) {
        std::vector<double> b, a;
        for (const auto& id : targets[t].image_ids) {
          b.push_back(net.predict(corpus.image(*corpus.find(id)).cast<double>()));
          a.push_back(ablated[id]);
        }
        const double want = oracle::rank_pearson(b, targets[t].values) -
                            oracle::rank_pearson(a, targets[t].values);
        c.expect(d.is_defined(f, t), "undefined cell");
        c.near(d.at(f, t), want, 1e-10, std::string(node) + " delta");
        ++cells;
      }
    }
    if (std::string(node) == "relu2") {
      for (std::size_t t = 0; t < 24; ++t) {
        c.expect(d.at(o2b::synth::kToyDeadChannel, t) == 0.0, "dead filter row not exactly zero");
      }
    }
  }
  return c.done(std::to_string(filters) + " filters, " + std::to_string(cells) +
                " cells within 1e-10, dead row zero");
}

Outcome structural_checks() {
  Check c;
  const auto targets = o2b::build_targets(o2b::synth::stimulus_table(3));
  c.expect(targets.size() == 24, "target count");
  std::size_t cg = 0, incg = 0;
  for (const auto& t : targets) {
    c.expect(t.image_ids.size() == 24, "split size");
    (t.congruent ? cg : incg) += 1;
  }
  c.expect(cg == 12 && incg == 12, "targets per split");
  using o2b::Stars;
  c.expect(o2b::stars_for(0.05) == Stars::none && o2b::stars_for(0.049) == Stars::one, "p < 0.05");
  c.expect(o2b::stars_for(0.01) == Stars::one && o2b::stars_for(0.0099) == Stars::two, "p < 0.01");
  c.expect(o2b::stars_for(0.001) == Stars::two && o2b::stars_for(0.00099) == Stars::three, "p < 0.001");
  c.expect(o2b::to_string(Stars::one) == "*" && o2b::to_string(Stars::two) == "**" &&
               o2b::to_string(Stars::three) == "***",
           "star strings");
  c.expect(o2b::kDefaultTopX == 25 && o2b::kDefaultTopX * 10 == 250, "default X");
  const auto& map = o2b::CategoryMap::builtin();
  const std::vector<std::pair<std::string, std::size_t>> counts{
      {"Human", 5},  {"Body Parts", 13}, {"Transport", 28}, {"Clothing", 30}, {"Furniture", 25},
      {"Health", 9}, {"Nature", 14},     {"Places", 11},    {"Sports", 39}};
  for (const auto& [name, n] : counts) {
    c.expect(map.constituent_count(name) == n, name + " constituent count");
  }
  return c.done("24 targets (24/24 split), star thresholds, X = 25 = 250/10, nine category counts");
}

Outcome overlap_suite() {
  Check c;
  const auto& map = o2b::CategoryMap::builtin();
  const auto vocab = map.vocabulary();
  std::vector<std::string> ids;
  for (int i = 0; i < 200; ++i) ids.push_back("img" + std::to_string(i));
  const auto dets = o2b::synth::random_detections(ids, vocab, 120, 7, 64, 48, 314);
  const std::size_t k = map.categories().size();
  std::vector<double> sum(k * k, 0.0);
  std::vector<std::size_t> count(k * k, 0);
  std::map<std::string, std::vector<const o2b::Detection*>> by_image;
  for (const auto& d : dets) by_image[d.image_id].push_back(&d);
  std::size_t multi = 0;
  for (const auto& [id, list] : by_image) {
    multi += list.size() > 1;
    for (std::size_t i = 0; i < list.size(); ++i) {
      for (std::size_t j = 0; j < list.size(); ++j) {
        if (i == j) continue;
        const auto& a = list[i]->bbox;
        const auto& b = list[j]->bbox;
        const auto r = *map.category_index(*map.category_of(list[i]->class_name));
        const auto col = *map.category_index(*map.category_of(list[j]->class_name));
        const double inter = oracle::rect_intersection({a.x1, a.y1, a.x2, a.y2}, {b.x1, b.y1, b.x2, b.y2});
        sum[r * k + col] += 100.0 * inter / ((a.x2 - a.x1) * (a.y2 - a.y1));
        count[r * k + col] += 1;
      }
    }
  }
  const auto m = o2b::overlap_matrix(dets, map);
  for (std::size_t i = 0; i < k * k; ++i) {
    c.expect(m.values[i].has_value() == (count[i] > 0), "defined cells");
    if (m.values[i] && count[i]) c.near(*m.values[i], sum[i] / static_cast<double>(count[i]), 1e-9, "cell");
  }
  c.expect(multi >= 100, "too few multi-box images");

  auto det = [&](const std::string& name, o2b::BBox box) {
    o2b::Detection d;
    d.image_id = "x";
    d.class_name = name;
    d.class_id = *vocab.index_of(name);
    d.bbox = box;
    d.confidence = 0.9;
    d.image_w = d.image_h = 100;
    return d;
  };
  const auto human = *map.category_index("Human"), transport = *map.category_index("Transport");
  const auto same = o2b::overlap_matrix({det("Person", {5, 5, 25, 40}), det("Car", {5, 5, 25, 40})}, map);
  c.expect(same.at(human, transport) == 100.0 && same.at(transport, human) == 100.0, "identical boxes");
  const auto apart = o2b::overlap_matrix({det("Person", {0, 0, 10, 10}), det("Car", {50, 50, 60, 70})}, map);
  c.expect(apart.at(human, transport) == 0.0 && apart.at(transport, human) == 0.0, "disjoint boxes");
  return c.done("200 images (" + std::to_string(multi) + " multi-box) within 1e-9, identical 100, disjoint 0");
}

std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = o2b::io::read_bytes(e.path());
  }
  return files;
}

Outcome determinism() {
  Check c;
  const auto dir = fs::temp_directory_path() / "o2b_acceptance_determinism";
  fs::remove_all(dir);
  const auto config = (dir / "config.toml").string();
  c.expect(o2b::cli::run({"synth", dir.string()}) == 0, "synth");
  for (const auto& [out, jobs] : {std::pair{"run_a", "1"}, std::pair{"run_b", "4"}}) {
    for (const char* cmd : {"predict", "correlate", "emocam", "ablate", "o2b", "overlap"}) {
      c.expect(o2b::cli::run({"-c", config, "-o", (dir / out).string(), "-j", jobs, cmd}) == 0, cmd);
    }
  }
  const auto a = snapshot(dir / "run_a"), b = snapshot(dir / "run_b");
  c.expect(!a.empty() && a.size() == b.size(), "file sets differ");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) {
      ++differing;
      c.expect(false, name + " differs");
    }
  }
  fs::remove_all(dir);
  return c.done(std::to_string(a.size()) + " files compared, " + std::to_string(differing) + " differ");
}

Outcome performance() {
  Check c;
  const auto r = o2b::cli::run_bench(5, 1);
  c.expect(r.identical, "sweeps disagree");
  c.expect(r.speedup >= 2.0, "speedup below 2x");
  std::ostringstream s;
  s.precision(3);
  s << r.node_id << ": incremental " << r.incremental_ms << " ms, full " << r.full_ms
    << " ms, speedup " << r.speedup << "x";
  return c.done(s.str());
}

}  // namespace

int main() {
  setenv("O2B_LOG", "warn", 0);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"rank-correlation suite", rank_suite},
      {"box score suite", score_suite},
      {"pipeline algebra", algebra_suite},
      {"ablation suite", ablation_suite},
      {"structural checks", structural_checks},
      {"overlap suite", overlap_suite},
      {"determinism", determinism},
      {"performance", performance},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %s (%s) [%.1fs]\n", o.ok ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.ok;
  }
  return failed == 0 ? 0 : 1;
}
