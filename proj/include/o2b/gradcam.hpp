#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "o2b/inference.hpp"
#include "o2b/tensor.hpp"

namespace o2b {

enum class CamStatus {
  normal,
  constant,  // nonzero constant raw map; normalized to all ones
  zero,      // all-zero raw map; stays all zeros
};

std::string_view to_string(CamStatus status) noexcept;

/// One filter's normalized Grad-CAM heatmap at image resolution.
struct FilterCamMap {
  std::string image_id;
  std::string node_id;
  std::size_t channel = 0;
  Tensor<double> map;  // (H, W), values in [0, 1]
  CamStatus status = CamStatus::zero;
};

/// alpha_c: spatial mean of each gradient channel.
template <typename T>
std::vector<double> channel_weights(const Tensor<T>& gradient);

/// relu(alpha_c * A_c) for one channel, at activation resolution (H, W).
template <typename T>
Tensor<double> raw_filter_map(const Tensor<T>& activation, double alpha, std::size_t channel);

/// Classical aggregated Grad-CAM relu(sum_c alpha_c A_c) at activation resolution.
template <typename T>
Tensor<double> aggregate_cam(const Tensor<T>& activation, const Tensor<T>& gradient);

/// Upsamples a raw (H, W) map and min-max normalizes it.
Tensor<double> normalize_map(const Tensor<double>& raw, std::size_t out_h, std::size_t out_w,
                             CamStatus* status = nullptr);

/// One filter's map; cheaper than per_filter_cam when only a few are needed.
template <typename T>
FilterCamMap filter_cam(const Tensor<T>& activation, const std::vector<double>& alphas,
                        std::size_t channel, std::size_t out_h, std::size_t out_w);

template <typename T>
std::vector<FilterCamMap> per_filter_cam(const Tensor<T>& activation, const Tensor<T>& gradient,
                                         std::size_t out_h, std::size_t out_w,
                                         std::string_view image_id = {},
                                         std::string_view node_id = {});

/// Activation and gradient of one target layer for one image.
template <typename T>
struct LayerGrad {
  Tensor<T> activation;
  Tensor<T> gradient;
};

template <typename T>
LayerGrad<T> layer_gradient(const Network<T>& net, const Tensor<T>& image,
                            std::string_view node_id, GradientOf of = GradientOf::logit);

/// Writes `<stem>.f32` (N_f x H x W little-endian float32) and `<stem>.json`.
void write_cam_dump(const std::filesystem::path& stem, const std::vector<FilterCamMap>& maps);

}  // namespace o2b
