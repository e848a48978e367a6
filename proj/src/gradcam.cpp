#include "o2b/gradcam.hpp"

#include <algorithm>

#include "json_util.hpp"
#include "o2b/io.hpp"
#include "o2b/kernels.hpp"

namespace o2b {

std::string_view to_string(CamStatus status) noexcept {
  switch (status) {
    case CamStatus::normal:
      return "normal";
    case CamStatus::constant:
      return "constant";
    case CamStatus::zero:
      return "zero";
  }
  return "?";
}

template <typename T>
std::vector<double> channel_weights(const Tensor<T>& gradient) {
  if (gradient.rank() != 3) {
    throw Error(Errc::shape_mismatch, "gradient must be CHW, got " + shape_str(gradient.shape()));
  }
  const std::size_t c = gradient.dim(0), hw = gradient.dim(1) * gradient.dim(2);
  const auto g = gradient.data();
  std::vector<double> alphas(c);
  for (std::size_t k = 0; k < c; ++k) {
    double s = 0;
    for (std::size_t i = 0; i < hw; ++i) s += static_cast<double>(g[k * hw + i]);
    alphas[k] = s / static_cast<double>(hw);
  }
  return alphas;
}

template <typename T>
Tensor<double> raw_filter_map(const Tensor<T>& activation, double alpha, std::size_t channel) {
  if (activation.rank() != 3 || channel >= activation.dim(0)) {
    throw Error(Errc::shape_mismatch, "channel " + std::to_string(channel) +
                                          " not in activation " + shape_str(activation.shape()));
  }
  const std::size_t h = activation.dim(1), w = activation.dim(2);
  const auto a = activation.data().subspan(channel * h * w, h * w);
  std::vector<double> out(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    out[i] = std::max(0.0, alpha * static_cast<double>(a[i]));
  }
  return Tensor<double>({h, w}, std::move(out));
}

template <typename T>
Tensor<double> aggregate_cam(const Tensor<T>& activation, const Tensor<T>& gradient) {
  if (activation.shape() != gradient.shape() || activation.rank() != 3) {
    throw Error(Errc::shape_mismatch, "activation " + shape_str(activation.shape()) +
                                          " and gradient " + shape_str(gradient.shape()) +
                                          " must be equal CHW shapes");
  }
  const auto alphas = channel_weights(gradient);
  const std::size_t h = activation.dim(1), w = activation.dim(2);
  std::vector<double> sum(h * w, 0.0);
  const auto a = activation.data();
  for (std::size_t c = 0; c < alphas.size(); ++c) {
    for (std::size_t i = 0; i < h * w; ++i) sum[i] += alphas[c] * static_cast<double>(a[c * h * w + i]);
  }
  for (auto& v : sum) v = std::max(0.0, v);
  return Tensor<double>({h, w}, std::move(sum));
}

Tensor<double> normalize_map(const Tensor<double>& raw, std::size_t out_h, std::size_t out_w,
                             CamStatus* status) {
  if (raw.rank() != 2) throw Error(Errc::shape_mismatch, "CAM map must be (H, W)");
  if (out_h == 0 || out_w == 0) {
    throw Error(Errc::invalid_argument, "CAM output size must be at least 1x1");
  }
  const auto [lo_it, hi_it] = std::minmax_element(raw.data().begin(), raw.data().end());
  CamStatus st = CamStatus::normal;
  if (*hi_it == 0.0) {
    st = CamStatus::zero;
  } else if (*lo_it == *hi_it) {
    st = CamStatus::constant;
  }
  if (status) *status = st;
  if (st == CamStatus::zero) return Tensor<double>({out_h, out_w});
  if (st == CamStatus::constant) return Tensor<double>::filled({out_h, out_w}, 1.0);

  const auto up = bilinear_upsample(raw.reshaped({1, raw.dim(0), raw.dim(1)}), out_h, out_w);
  auto values = Tensor<double>(up).release();
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn, range = *mx - *mn;
  if (range == 0.0) {
    if (status) *status = CamStatus::constant;
    return Tensor<double>::filled({out_h, out_w}, 1.0);
  }
  for (auto& v : values) v = (v - lo) / range;
  return Tensor<double>({out_h, out_w}, std::move(values));
}

template <typename T>
FilterCamMap filter_cam(const Tensor<T>& activation, const std::vector<double>& alphas,
                        std::size_t channel, std::size_t out_h, std::size_t out_w) {
  FilterCamMap m;
  m.channel = channel;
  m.map = normalize_map(raw_filter_map(activation, alphas.at(channel), channel), out_h, out_w,
                        &m.status);
  return m;
}

template <typename T>
std::vector<FilterCamMap> per_filter_cam(const Tensor<T>& activation, const Tensor<T>& gradient,
                                         std::size_t out_h, std::size_t out_w,
                                         std::string_view image_id, std::string_view node_id) {
  if (activation.shape() != gradient.shape() || activation.rank() != 3) {
    throw Error(Errc::shape_mismatch, "activation " + shape_str(activation.shape()) +
                                          " and gradient " + shape_str(gradient.shape()) +
                                          " must be equal CHW shapes");
  }
  const auto alphas = channel_weights(gradient);
  std::vector<FilterCamMap> out;
  out.reserve(alphas.size());
  for (std::size_t c = 0; c < alphas.size(); ++c) {
    auto m = filter_cam(activation, alphas, c, out_h, out_w);
    m.image_id = image_id;
    m.node_id = node_id;
    out.push_back(std::move(m));
  }
  return out;
}

template <typename T>
LayerGrad<T> layer_gradient(const Network<T>& net, const Tensor<T>& image,
                            std::string_view node_id, GradientOf of) {
  const CaptureSet capture{std::string(node_id)};
  const auto fwd = net.forward(image, {}, capture);
  auto grad = net.backward_to_layer(fwd, node_id, of);
  return {fwd.captures.find(node_id)->second, std::move(grad)};
}

void write_cam_dump(const std::filesystem::path& stem, const std::vector<FilterCamMap>& maps) {
  std::vector<float> values;
  detail::ordered_json side;
  side["format"] = "o2b-cam-v1";
  side["dtype"] = "float32";
  Shape shape{maps.size(), 0, 0};
  if (!maps.empty()) {
    shape[1] = maps.front().map.dim(0);
    shape[2] = maps.front().map.dim(1);
    side["image_id"] = maps.front().image_id;
    side["node_id"] = maps.front().node_id;
  }
  side["shape"] = shape;
  auto& status = side["status"] = detail::ordered_json::array();
  for (const auto& m : maps) {
    if (m.map.shape() != Shape{shape[1], shape[2]}) {
      throw Error(Errc::shape_mismatch, "CAM dump maps must share one size");
    }
    for (double v : m.map.data()) values.push_back(static_cast<float>(v));
    status.push_back(std::string(to_string(m.status)));
  }
  auto bin = stem;
  bin += ".f32";
  auto json_path = stem;
  json_path += ".json";
  io::write_bytes(bin, io::encode_f32_le(values));
  io::write_text(json_path, side.dump(2) + "\n");
}

#define O2B_INSTANTIATE_GRADCAM(T)                                                              \
  template std::vector<double> channel_weights(const Tensor<T>&);                               \
  template Tensor<double> raw_filter_map(const Tensor<T>&, double, std::size_t);                \
  template Tensor<double> aggregate_cam(const Tensor<T>&, const Tensor<T>&);                    \
  template FilterCamMap filter_cam(const Tensor<T>&, const std::vector<double>&, std::size_t,   \
                                   std::size_t, std::size_t);                                   \
  template std::vector<FilterCamMap> per_filter_cam(const Tensor<T>&, const Tensor<T>&,         \
                                                    std::size_t, std::size_t, std::string_view, \
                                                    std::string_view);                          \
  template LayerGrad<T> layer_gradient(const Network<T>&, const Tensor<T>&, std::string_view,   \
                                       GradientOf);

O2B_INSTANTIATE_GRADCAM(float)
O2B_INSTANTIATE_GRADCAM(double)

}  // namespace o2b
