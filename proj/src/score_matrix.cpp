#include "o2b/score_matrix.hpp"

#include <algorithm>
#include <map>

#include "json_util.hpp"
#include "o2b/gradcam.hpp"
#include "o2b/io.hpp"
#include "o2b/parallel.hpp"

namespace o2b {

namespace {

void check_detections(const std::vector<Detection>& detections, const Corpus& corpus,
                      const ClassVocabulary& vocabulary) {
  for (const auto& d : detections) {
    if (!corpus.find(d.image_id)) {
      throw Error(Errc::unknown_image,
                  "detection references image '" + d.image_id + "', which is not in the corpus");
    }
    if (d.class_id >= vocabulary.size()) {
      throw Error(Errc::invalid_argument, "detection class_id " + std::to_string(d.class_id) +
                                              " exceeds the vocabulary of " +
                                              std::to_string(vocabulary.size()));
    }
    if (vocabulary.name(d.class_id) != d.class_name) {
      throw Error(Errc::invalid_argument, "detection class_id " + std::to_string(d.class_id) +
                                              " is '" + vocabulary.name(d.class_id) +
                                              "' in the vocabulary, not '" + d.class_name + "'");
    }
  }
}

}  // namespace

template <typename T>
std::vector<ScoreMatrix> build_score_matrices(const Network<T>& net, const TargetLayerSet& targets,
                                              const Corpus& corpus,
                                              const std::vector<Detection>& detections,
                                              const ClassVocabulary& vocabulary, std::size_t jobs,
                                              GradientOf of) {
  check_detections(detections, corpus, vocabulary);
  const auto ordered = canonical_order(detections);

  // Detection ranges per image, in corpus order.
  struct Group {
    std::size_t image = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
  };
  std::vector<Group> groups;
  for (std::size_t i = 0; i < ordered.size();) {
    std::size_t j = i;
    while (j < ordered.size() && ordered[j].image_id == ordered[i].image_id) ++j;
    groups.push_back({*corpus.find(ordered[i].image_id), i, j});
    i = j;
  }

  const std::size_t layers = targets.size();
  // scores[g][l]: filters x detections-of-image, row-major.
  std::vector<std::vector<std::vector<double>>> scores(groups.size(),
                                                       std::vector<std::vector<double>>(layers));
  parallel_for(groups.size(), jobs, [&](std::size_t g) {
    const Group& grp = groups[g];
    const Tensor<float> raw = corpus.image(grp.image);
    if (raw.shape() != net.input_shape()) {
      throw Error(Errc::shape_mismatch, "image '" + corpus.id(grp.image) + "' has shape " +
                                            shape_str(raw.shape()) + ", model expects " +
                                            shape_str(net.input_shape()));
    }
    Tensor<T> img;
    if constexpr (std::is_same_v<T, float>) {
      img = raw;
    } else {
      img = raw.template cast<T>();
    }
    CaptureSet capture;
    for (const auto& t : targets) capture.insert(t.node_id);
    const auto fwd = net.forward(img, {}, capture);
    const std::size_t ndet = grp.end - grp.begin;
    for (std::size_t l = 0; l < layers; ++l) {
      const auto& node = targets[l].node_id;
      const Tensor<T>& act = fwd.captures.find(node)->second;
      const auto grad = net.backward_to_layer(fwd, node, of);
      const auto alphas = channel_weights(grad);
      auto& out = scores[g][l];
      out.assign(alphas.size() * ndet, 0.0);
      for (std::size_t c = 0; c < alphas.size(); ++c) {
        const auto raw_map = raw_filter_map(act, alphas[c], c);
        std::map<std::pair<std::size_t, std::size_t>, Tensor<double>> by_size;
        for (std::size_t d = 0; d < ndet; ++d) {
          const Detection& det = ordered[grp.begin + d];
          const auto key = std::make_pair(det.image_h, det.image_w);
          auto it = by_size.find(key);
          if (it == by_size.end()) {
            it = by_size.emplace(key, normalize_map(raw_map, det.image_h, det.image_w)).first;
          }
          out[c * ndet + d] = score_box(it->second, det.bbox);
        }
      }
    }
  });

  std::vector<ScoreMatrix> result;
  for (std::size_t l = 0; l < layers; ++l) {
    ScoreMatrix m;
    m.node_id = targets[l].node_id;
    m.filters = net.channels(m.node_id);
    m.classes = vocabulary.size();
    m.scores.assign(m.filters * m.classes, 0.0);
    m.detection_counts.assign(m.classes, 0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const std::size_t ndet = groups[g].end - groups[g].begin;
      for (std::size_t d = 0; d < ndet; ++d) {
        const std::size_t cls = ordered[groups[g].begin + d].class_id;
        ++m.detection_counts[cls];
        for (std::size_t c = 0; c < m.filters; ++c) {
          m.scores[c * m.classes + cls] += scores[g][l][c * ndet + d];
        }
      }
    }
    for (std::size_t c = 0; c < m.filters; ++c) {
      for (std::size_t k = 0; k < m.classes; ++k) {
        if (m.detection_counts[k] > 0) {
          m.scores[c * m.classes + k] /= static_cast<double>(m.detection_counts[k]);
        }
      }
    }
    result.push_back(std::move(m));
  }
  return result;
}

template <typename T>
ScoreMatrix build_score_matrix(const Network<T>& net, const std::string& node_id,
                               const Corpus& corpus, const std::vector<Detection>& detections,
                               const ClassVocabulary& vocabulary, std::size_t jobs,
                               GradientOf of) {
  const auto targets = make_target_set(net.graph(), {node_id});
  return std::move(build_score_matrices(net, targets, corpus, detections, vocabulary, jobs, of)
                       .front());
}

void write_score_matrix(const std::filesystem::path& stem, const ScoreMatrix& m,
                        const ClassVocabulary& vocabulary,
                        const std::vector<std::string>& comments) {
  if (vocabulary.size() != m.classes) {
    throw Error(Errc::shape_mismatch, "vocabulary size does not match score matrix columns");
  }
  auto with = [&](const char* ext) {
    auto p = stem;
    p += ext;
    return p;
  };
  io::write_bytes(with(".f64"), io::encode_f64_le(m.scores));

  detail::ordered_json side;
  side["format"] = "o2b-score-matrix-v1";
  side["node_id"] = m.node_id;
  side["dtype"] = "float64";
  side["shape"] = {m.filters, m.classes};
  side["classes"] = vocabulary.names();
  side["detection_counts"] = m.detection_counts;
  if (!comments.empty()) side["provenance"] = comments;
  io::write_text(with(".json"), side.dump(2) + "\n");

  std::string csv;
  for (const auto& c : comments) csv += "# " + c + "\n";
  std::vector<std::string> header{"filter"};
  header.insert(header.end(), vocabulary.names().begin(), vocabulary.names().end());
  csv += io::csv_row(header);
  for (std::size_t f = 0; f < m.filters; ++f) {
    std::vector<std::string> row{std::to_string(f)};
    for (std::size_t k = 0; k < m.classes; ++k) row.push_back(io::format_double(m.at(f, k)));
    csv += io::csv_row(row);
  }
  io::write_text(with(".csv"), csv);
}

ScoreMatrix read_score_matrix(const std::filesystem::path& stem) {
  auto with = [&](const char* ext) {
    auto p = stem;
    p += ext;
    return p;
  };
  const auto side = detail::parse_json(io::read_text(with(".json")), with(".json").string());
  ScoreMatrix m;
  m.node_id = detail::required<std::string>(side, "node_id", "score matrix sidecar");
  const auto shape = detail::required<std::vector<std::size_t>>(side, "shape", "score matrix sidecar");
  if (shape.size() != 2) throw Error(Errc::parse_error, "score matrix shape must be 2-D");
  m.filters = shape[0];
  m.classes = shape[1];
  m.detection_counts =
      detail::required<std::vector<std::size_t>>(side, "detection_counts", "score matrix sidecar");
  m.scores = io::decode_f64_le(io::read_bytes(with(".f64")));
  if (m.scores.size() != m.filters * m.classes || m.detection_counts.size() != m.classes) {
    throw Error(Errc::shape_mismatch, "score matrix " + stem.string() + " disagrees with its sidecar");
  }
  return m;
}

template std::vector<ScoreMatrix> build_score_matrices(const Network<float>&,
                                                       const TargetLayerSet&, const Corpus&,
                                                       const std::vector<Detection>&,
                                                       const ClassVocabulary&, std::size_t,
                                                       GradientOf);
template std::vector<ScoreMatrix> build_score_matrices(const Network<double>&,
                                                       const TargetLayerSet&, const Corpus&,
                                                       const std::vector<Detection>&,
                                                       const ClassVocabulary&, std::size_t,
                                                       GradientOf);
template ScoreMatrix build_score_matrix(const Network<float>&, const std::string&, const Corpus&,
                                        const std::vector<Detection>&, const ClassVocabulary&,
                                        std::size_t, GradientOf);
template ScoreMatrix build_score_matrix(const Network<double>&, const std::string&,
                                        const Corpus&, const std::vector<Detection>&,
                                        const ClassVocabulary&, std::size_t, GradientOf);

}  // namespace o2b
