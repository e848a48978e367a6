#include "o2b/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace o2b {

namespace {

std::string where(std::string_view layer) { return "[" + std::string(layer) + "] "; }

void require_chw(const Shape& shape, std::string_view layer) {
  if (shape.size() != 3) {
    throw Error(Errc::shape_mismatch,
                where(layer) + "expected a CHW tensor, got shape " + shape_str(shape));
  }
}

void require_same_shape(const Shape& expected, const Shape& actual, std::string_view layer,
                        std::string_view what) {
  if (expected != actual) {
    throw Error(Errc::shape_mismatch, where(layer) + std::string(what) + " expected " +
                                          shape_str(expected) + ", got " + shape_str(actual));
  }
}

// Valid output range [lo, hi) for which in = out * stride + offset - padding
// stays inside [0, size).
struct Range {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

Range valid_outputs(std::size_t out_size, std::size_t in_size, std::size_t stride,
                    std::size_t offset, std::size_t padding) {
  // out * stride + offset >= padding  and  out * stride + offset < in_size + padding
  Range r;
  r.lo = offset >= padding ? 0 : (padding - offset + stride - 1) / stride;
  const std::size_t limit = in_size + padding;
  r.hi = offset >= limit ? 0 : std::min(out_size, (limit - offset + stride - 1) / stride);
  if (r.hi < r.lo) r.hi = r.lo;
  return r;
}

}  // namespace

std::size_t window_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding) noexcept {
  if (kernel == 0 || stride == 0 || in + 2 * padding < kernel) return 0;
  return (in + 2 * padding - kernel) / stride + 1;
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, std::span<const T> bias,
                         ConvSpec spec, std::string_view layer) {
  require_chw(input.shape(), layer);
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw Error(Errc::shape_mismatch,
                where(layer) + "weight must be (O,I,k,k), got " + shape_str(weight.shape()));
  }
  const std::size_t out_c = weight.dim(0), in_c = weight.dim(1), k = weight.dim(2);
  if (input.dim(0) != in_c) {
    throw Error(Errc::shape_mismatch, where(layer) + "input channels expected " +
                                          std::to_string(in_c) + ", got " +
                                          shape_str(input.shape()));
  }
  if (!bias.empty() && bias.size() != out_c) {
    throw Error(Errc::shape_mismatch, where(layer) + "bias length " + std::to_string(bias.size()) +
                                          " != out channels " + std::to_string(out_c));
  }
  if (spec.stride == 0) throw Error(Errc::invalid_argument, where(layer) + "stride must be >= 1");
  const std::size_t h = input.dim(1), w = input.dim(2);
  const std::size_t oh = window_output_size(h, k, spec.stride, spec.padding);
  const std::size_t ow = window_output_size(w, k, spec.stride, spec.padding);
  if (oh == 0 || ow == 0) {
    throw Error(Errc::shape_mismatch, where(layer) + "kernel " + std::to_string(k) +
                                          " does not fit input " + shape_str(input.shape()));
  }

  const auto x = input.data();
  const auto wt = weight.data();
  std::vector<T> out(out_c * oh * ow);
  const std::size_t s = spec.stride, p = spec.padding;
  for (std::size_t o = 0; o < out_c; ++o) {
    T* plane = out.data() + o * oh * ow;
    std::fill(plane, plane + oh * ow, bias.empty() ? T(0) : bias[o]);
    for (std::size_t c = 0; c < in_c; ++c) {
      const T* src = x.data() + c * h * w;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const Range ry = valid_outputs(oh, h, s, ky, p);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const T wv = wt[((o * in_c + c) * k + ky) * k + kx];
          const Range rx = valid_outputs(ow, w, s, kx, p);
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const T* row = src + (oy * s + ky - p) * w;
            T* dst = plane + oy * ow;
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
              dst[ox] += wv * row[ox * s + kx - p];
            }
          }
        }
      }
    }
  }
  return Tensor<T>({out_c, oh, ow}, std::move(out));
}

template <typename T>
Tensor<T> conv2d_backward_input(const Tensor<T>& grad_out, const Tensor<T>& weight,
                                const Shape& input_shape, ConvSpec spec, std::string_view layer) {
  require_chw(input_shape, layer);
  if (weight.rank() != 4) {
    throw Error(Errc::shape_mismatch, where(layer) + "weight must be rank 4");
  }
  const std::size_t out_c = weight.dim(0), in_c = weight.dim(1), k = weight.dim(2);
  const std::size_t h = input_shape[1], w = input_shape[2];
  const std::size_t oh = window_output_size(h, k, spec.stride, spec.padding);
  const std::size_t ow = window_output_size(w, k, spec.stride, spec.padding);
  require_same_shape({out_c, oh, ow}, grad_out.shape(), layer, "grad_out");
  if (input_shape[0] != in_c) {
    throw Error(Errc::shape_mismatch, where(layer) + "input shape " + shape_str(input_shape) +
                                          " inconsistent with weight");
  }

  const auto g = grad_out.data();
  const auto wt = weight.data();
  std::vector<T> dx(in_c * h * w, T(0));
  const std::size_t s = spec.stride, p = spec.padding;
  for (std::size_t o = 0; o < out_c; ++o) {
    const T* gplane = g.data() + o * oh * ow;
    for (std::size_t c = 0; c < in_c; ++c) {
      T* dst = dx.data() + c * h * w;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const Range ry = valid_outputs(oh, h, s, ky, p);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const T wv = wt[((o * in_c + c) * k + ky) * k + kx];
          const Range rx = valid_outputs(ow, w, s, kx, p);
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            T* row = dst + (oy * s + ky - p) * w;
            const T* grow = gplane + oy * ow;
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
              row[ox * s + kx - p] += wv * grow[ox];
            }
          }
        }
      }
    }
  }
  return Tensor<T>(input_shape, std::move(dx));
}

template <typename T>
MaxPoolResult<T> maxpool2d_forward(const Tensor<T>& input, PoolSpec spec, std::string_view layer) {
  require_chw(input.shape(), layer);
  if (spec.kernel == 0) throw Error(Errc::invalid_argument, where(layer) + "window size 0");
  if (spec.stride == 0) throw Error(Errc::invalid_argument, where(layer) + "stride must be >= 1");
  const std::size_t c_n = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = window_output_size(h, spec.kernel, spec.stride, spec.padding);
  const std::size_t ow = window_output_size(w, spec.kernel, spec.stride, spec.padding);
  if (oh == 0 || ow == 0) {
    throw Error(Errc::shape_mismatch, where(layer) + "window does not fit input " +
                                          shape_str(input.shape()));
  }
  const auto x = input.data();
  std::vector<T> out(c_n * oh * ow);
  std::vector<std::size_t> arg(out.size());
  for (std::size_t c = 0; c < c_n; ++c) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        bool found = false;
        T best = -std::numeric_limits<T>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t ky = 0; ky < spec.kernel; ++ky) {
          const std::size_t yy = oy * spec.stride + ky;
          if (yy < spec.padding || yy - spec.padding >= h) continue;
          for (std::size_t kx = 0; kx < spec.kernel; ++kx) {
            const std::size_t xx = ox * spec.stride + kx;
            if (xx < spec.padding || xx - spec.padding >= w) continue;
            const std::size_t idx = (c * h + (yy - spec.padding)) * w + (xx - spec.padding);
            if (!found || x[idx] > best) {
              best = x[idx];
              best_idx = idx;
              found = true;
            }
          }
        }
        if (!found) {
          throw Error(Errc::invalid_argument, where(layer) + "window covers only padding");
        }
        const std::size_t o = (c * oh + oy) * ow + ox;
        out[o] = best;
        arg[o] = best_idx;
      }
    }
  }
  return {Tensor<T>({c_n, oh, ow}, std::move(out)), std::move(arg)};
}

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out, std::span<const std::size_t> argmax,
                             const Shape& input_shape) {
  if (argmax.size() != grad_out.numel()) {
    throw Error(Errc::shape_mismatch, "[maxpool2d] argmax count " + std::to_string(argmax.size()) +
                                          " != grad_out size " + std::to_string(grad_out.numel()));
  }
  std::vector<T> dx(shape_numel(input_shape), T(0));
  const auto g = grad_out.data();
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    if (argmax[i] >= dx.size()) {
      throw Error(Errc::invalid_argument, "[maxpool2d] argmax index " + std::to_string(argmax[i]) +
                                              " out of range for " + shape_str(input_shape));
    }
    dx[argmax[i]] += g[i];
  }
  return Tensor<T>(input_shape, std::move(dx));
}

template <typename T>
Tensor<T> avgpool2d_forward(const Tensor<T>& input, PoolSpec spec, std::string_view layer) {
  require_chw(input.shape(), layer);
  if (spec.kernel == 0) throw Error(Errc::invalid_argument, where(layer) + "window size 0");
  if (spec.stride == 0) throw Error(Errc::invalid_argument, where(layer) + "stride must be >= 1");
  const std::size_t c_n = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = window_output_size(h, spec.kernel, spec.stride, spec.padding);
  const std::size_t ow = window_output_size(w, spec.kernel, spec.stride, spec.padding);
  if (oh == 0 || ow == 0) {
    throw Error(Errc::shape_mismatch, where(layer) + "window does not fit input " +
                                          shape_str(input.shape()));
  }
  const auto x = input.data();
  const T inv = T(1) / static_cast<T>(spec.kernel * spec.kernel);
  std::vector<T> out(c_n * oh * ow);
  for (std::size_t c = 0; c < c_n; ++c) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        T sum = 0;
        for (std::size_t ky = 0; ky < spec.kernel; ++ky) {
          const std::size_t yy = oy * spec.stride + ky;
          if (yy < spec.padding || yy - spec.padding >= h) continue;
          for (std::size_t kx = 0; kx < spec.kernel; ++kx) {
            const std::size_t xx = ox * spec.stride + kx;
            if (xx < spec.padding || xx - spec.padding >= w) continue;
            sum += x[(c * h + (yy - spec.padding)) * w + (xx - spec.padding)];
          }
        }
        out[(c * oh + oy) * ow + ox] = sum * inv;
      }
    }
  }
  return Tensor<T>({c_n, oh, ow}, std::move(out));
}

template <typename T>
Tensor<T> avgpool2d_backward(const Tensor<T>& grad_out, const Shape& input_shape, PoolSpec spec) {
  require_chw(input_shape, "avgpool2d");
  const std::size_t c_n = input_shape[0], h = input_shape[1], w = input_shape[2];
  const std::size_t oh = window_output_size(h, spec.kernel, spec.stride, spec.padding);
  const std::size_t ow = window_output_size(w, spec.kernel, spec.stride, spec.padding);
  require_same_shape({c_n, oh, ow}, grad_out.shape(), "avgpool2d", "grad_out");
  const auto g = grad_out.data();
  const T inv = T(1) / static_cast<T>(spec.kernel * spec.kernel);
  std::vector<T> dx(c_n * h * w, T(0));
  for (std::size_t c = 0; c < c_n; ++c) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const T gv = g[(c * oh + oy) * ow + ox] * inv;
        for (std::size_t ky = 0; ky < spec.kernel; ++ky) {
          const std::size_t yy = oy * spec.stride + ky;
          if (yy < spec.padding || yy - spec.padding >= h) continue;
          for (std::size_t kx = 0; kx < spec.kernel; ++kx) {
            const std::size_t xx = ox * spec.stride + kx;
            if (xx < spec.padding || xx - spec.padding >= w) continue;
            dx[(c * h + (yy - spec.padding)) * w + (xx - spec.padding)] += gv;
          }
        }
      }
    }
  }
  return Tensor<T>(input_shape, std::move(dx));
}

namespace {

std::size_t bin_start(std::size_t i, std::size_t in, std::size_t out) { return (i * in) / out; }
std::size_t bin_end(std::size_t i, std::size_t in, std::size_t out) {
  return ((i + 1) * in + out - 1) / out;
}

}  // namespace

template <typename T>
Tensor<T> adaptive_avgpool2d_forward(const Tensor<T>& input, std::size_t out_h, std::size_t out_w) {
  require_chw(input.shape(), "adaptive_avgpool2d");
  if (out_h == 0 || out_w == 0) {
    throw Error(Errc::invalid_argument, "[adaptive_avgpool2d] output size must be >= 1");
  }
  const std::size_t c_n = input.dim(0), h = input.dim(1), w = input.dim(2);
  const auto x = input.data();
  std::vector<T> out(c_n * out_h * out_w);
  for (std::size_t c = 0; c < c_n; ++c) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const std::size_t y0 = bin_start(oy, h, out_h), y1 = bin_end(oy, h, out_h);
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const std::size_t x0 = bin_start(ox, w, out_w), x1 = bin_end(ox, w, out_w);
        T sum = 0;
        for (std::size_t y = y0; y < y1; ++y) {
          for (std::size_t xx = x0; xx < x1; ++xx) sum += x[(c * h + y) * w + xx];
        }
        out[(c * out_h + oy) * out_w + ox] = sum / static_cast<T>((y1 - y0) * (x1 - x0));
      }
    }
  }
  return Tensor<T>({c_n, out_h, out_w}, std::move(out));
}

template <typename T>
Tensor<T> adaptive_avgpool2d_backward(const Tensor<T>& grad_out, const Shape& input_shape) {
  require_chw(input_shape, "adaptive_avgpool2d");
  require_chw(grad_out.shape(), "adaptive_avgpool2d");
  const std::size_t c_n = input_shape[0], h = input_shape[1], w = input_shape[2];
  const std::size_t out_h = grad_out.dim(1), out_w = grad_out.dim(2);
  if (grad_out.dim(0) != c_n) {
    throw Error(Errc::shape_mismatch, "[adaptive_avgpool2d] grad_out channels mismatch");
  }
  const auto g = grad_out.data();
  std::vector<T> dx(c_n * h * w, T(0));
  for (std::size_t c = 0; c < c_n; ++c) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const std::size_t y0 = bin_start(oy, h, out_h), y1 = bin_end(oy, h, out_h);
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const std::size_t x0 = bin_start(ox, w, out_w), x1 = bin_end(ox, w, out_w);
        const T gv = g[(c * out_h + oy) * out_w + ox] / static_cast<T>((y1 - y0) * (x1 - x0));
        for (std::size_t y = y0; y < y1; ++y) {
          for (std::size_t xx = x0; xx < x1; ++xx) dx[(c * h + y) * w + xx] += gv;
        }
      }
    }
  }
  return Tensor<T>(input_shape, std::move(dx));
}

template <typename T>
Tensor<T> linear_forward(const Tensor<T>& input, const Tensor<T>& weight, std::span<const T> bias,
                         std::string_view layer) {
  if (weight.rank() != 2) {
    throw Error(Errc::shape_mismatch, where(layer) + "weight must be (out,in)");
  }
  const std::size_t out_n = weight.dim(0), in_n = weight.dim(1);
  if (input.rank() != 1 || input.numel() != in_n) {
    throw Error(Errc::shape_mismatch, where(layer) + "input expected [" + std::to_string(in_n) +
                                          "], got " + shape_str(input.shape()));
  }
  if (!bias.empty() && bias.size() != out_n) {
    throw Error(Errc::shape_mismatch, where(layer) + "bias length mismatch");
  }
  const auto x = input.data();
  const auto wt = weight.data();
  std::vector<T> out(out_n);
  for (std::size_t o = 0; o < out_n; ++o) {
    T acc = bias.empty() ? T(0) : bias[o];
    const T* row = wt.data() + o * in_n;
    for (std::size_t i = 0; i < in_n; ++i) acc += row[i] * x[i];
    out[o] = acc;
  }
  return Tensor<T>({out_n}, std::move(out));
}

template <typename T>
Tensor<T> linear_backward_input(const Tensor<T>& grad_out, const Tensor<T>& weight,
                                std::string_view layer) {
  if (weight.rank() != 2) {
    throw Error(Errc::shape_mismatch, where(layer) + "weight must be (out,in)");
  }
  const std::size_t out_n = weight.dim(0), in_n = weight.dim(1);
  if (grad_out.rank() != 1 || grad_out.numel() != out_n) {
    throw Error(Errc::shape_mismatch, where(layer) + "grad_out expected [" +
                                          std::to_string(out_n) + "], got " +
                                          shape_str(grad_out.shape()));
  }
  const auto g = grad_out.data();
  const auto wt = weight.data();
  std::vector<T> dx(in_n, T(0));
  for (std::size_t o = 0; o < out_n; ++o) {
    const T* row = wt.data() + o * in_n;
    for (std::size_t i = 0; i < in_n; ++i) dx[i] += row[i] * g[o];
  }
  return Tensor<T>({in_n}, std::move(dx));
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
  std::vector<T> out(input.data().begin(), input.data().end());
  for (T& v : out) v = v > T(0) ? v : T(0);
  return Tensor<T>(input.shape(), std::move(out));
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& saved_input) {
  require_same_shape(saved_input.shape(), grad_out.shape(), "relu", "grad_out");
  const auto g = grad_out.data();
  const auto x = saved_input.data();
  std::vector<T> dx(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) dx[i] = x[i] > T(0) ? g[i] : T(0);
  return Tensor<T>(grad_out.shape(), std::move(dx));
}

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& input) {
  std::vector<T> out(input.data().begin(), input.data().end());
  for (T& v : out) v = T(1) / (T(1) + std::exp(-v));
  return Tensor<T>(input.shape(), std::move(out));
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& grad_out, const Tensor<T>& saved_output) {
  require_same_shape(saved_output.shape(), grad_out.shape(), "sigmoid", "grad_out");
  const auto g = grad_out.data();
  const auto s = saved_output.data();
  std::vector<T> dx(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * s[i] * (T(1) - s[i]);
  return Tensor<T>(grad_out.shape(), std::move(dx));
}

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& input, std::span<const T> scale,
                            std::span<const T> shift, std::string_view layer) {
  require_chw(input.shape(), layer);
  const std::size_t c_n = input.dim(0), plane = input.dim(1) * input.dim(2);
  if (scale.size() != c_n || shift.size() != c_n) {
    throw Error(Errc::shape_mismatch, where(layer) + "scale/shift length != channels " +
                                          std::to_string(c_n));
  }
  std::vector<T> out(input.data().begin(), input.data().end());
  for (std::size_t c = 0; c < c_n; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      T& v = out[c * plane + i];
      v = scale[c] * v + shift[c];
    }
  }
  return Tensor<T>(input.shape(), std::move(out));
}

template <typename T>
Tensor<T> batchnorm_backward(const Tensor<T>& grad_out, std::span<const T> scale) {
  require_chw(grad_out.shape(), "batchnorm2d");
  const std::size_t c_n = grad_out.dim(0), plane = grad_out.dim(1) * grad_out.dim(2);
  if (scale.size() != c_n) {
    throw Error(Errc::shape_mismatch, "[batchnorm2d] scale length != channels");
  }
  std::vector<T> dx(grad_out.data().begin(), grad_out.data().end());
  for (std::size_t c = 0; c < c_n; ++c) {
    for (std::size_t i = 0; i < plane; ++i) dx[c * plane + i] *= scale[c];
  }
  return Tensor<T>(grad_out.shape(), std::move(dx));
}

template <typename T>
Tensor<T> add_forward(const Tensor<T>& a, const Tensor<T>& b, std::string_view layer) {
  require_same_shape(a.shape(), b.shape(), layer, "second operand");
  std::vector<T> out(a.data().begin(), a.data().end());
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  return Tensor<T>(a.shape(), std::move(out));
}

template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& input, std::size_t out_h, std::size_t out_w) {
  require_chw(input.shape(), "bilinear_upsample");
  if (out_h == 0 || out_w == 0) {
    throw Error(Errc::invalid_argument, "[bilinear_upsample] output size must be >= 1");
  }
  const std::size_t c_n = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h == 0 || w == 0) {
    throw Error(Errc::shape_mismatch, "[bilinear_upsample] empty input");
  }

  struct Tap {
    std::size_t i0, i1;
    T frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
      double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      const std::size_t i1 = std::min(i0 + 1, in - 1);
      t[i] = {i0, i1, static_cast<T>(src - static_cast<double>(i0))};
    }
    return t;
  };
  const auto ty = taps(h, out_h);
  const auto tx = taps(w, out_w);

  const auto x = input.data();
  std::vector<T> out(c_n * out_h * out_w);
  for (std::size_t c = 0; c < c_n; ++c) {
    const T* src = x.data() + c * h * w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const Tap& vy = ty[oy];
      const T* r0 = src + vy.i0 * w;
      const T* r1 = src + vy.i1 * w;
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const Tap& vx = tx[ox];
        const T top = r0[vx.i0] + (r0[vx.i1] - r0[vx.i0]) * vx.frac;
        const T bot = r1[vx.i0] + (r1[vx.i1] - r1[vx.i0]) * vx.frac;
        out[(c * out_h + oy) * out_w + ox] = top + (bot - top) * vy.frac;
      }
    }
  }
  return Tensor<T>({c_n, out_h, out_w}, std::move(out));
}

template <typename T>
Tensor<T> zero_channels(const Tensor<T>& input, std::span<const std::size_t> channels) {
  if (input.rank() == 0) {
    throw Error(Errc::shape_mismatch, "cannot mask a rank-0 tensor");
  }
  const std::size_t c_n = input.dim(0);
  const std::size_t plane = c_n == 0 ? 0 : input.numel() / c_n;
  std::vector<T> out(input.data().begin(), input.data().end());
  for (std::size_t c : channels) {
    if (c >= c_n) {
      throw Error(Errc::invalid_argument, "mask channel " + std::to_string(c) +
                                              " out of range for " + shape_str(input.shape()));
    }
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(c * plane),
              out.begin() + static_cast<std::ptrdiff_t>((c + 1) * plane), T(0));
  }
  return Tensor<T>(input.shape(), std::move(out));
}

#define O2B_INSTANTIATE_KERNELS(T)                                                              \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, std::span<const T>,    \
                                    ConvSpec, std::string_view);                               \
  template Tensor<T> conv2d_backward_input(const Tensor<T>&, const Tensor<T>&, const Shape&,   \
                                           ConvSpec, std::string_view);                        \
  template MaxPoolResult<T> maxpool2d_forward(const Tensor<T>&, PoolSpec, std::string_view);   \
  template Tensor<T> maxpool2d_backward(const Tensor<T>&, std::span<const std::size_t>,        \
                                        const Shape&);                                         \
  template Tensor<T> avgpool2d_forward(const Tensor<T>&, PoolSpec, std::string_view);          \
  template Tensor<T> avgpool2d_backward(const Tensor<T>&, const Shape&, PoolSpec);             \
  template Tensor<T> adaptive_avgpool2d_forward(const Tensor<T>&, std::size_t, std::size_t);   \
  template Tensor<T> adaptive_avgpool2d_backward(const Tensor<T>&, const Shape&);              \
  template Tensor<T> linear_forward(const Tensor<T>&, const Tensor<T>&, std::span<const T>,    \
                                    std::string_view);                                         \
  template Tensor<T> linear_backward_input(const Tensor<T>&, const Tensor<T>&,                 \
                                           std::string_view);                                  \
  template Tensor<T> relu_forward(const Tensor<T>&);                                           \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> sigmoid_forward(const Tensor<T>&);                                        \
  template Tensor<T> sigmoid_backward(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> batchnorm_forward(const Tensor<T>&, std::span<const T>,                   \
                                       std::span<const T>, std::string_view);                  \
  template Tensor<T> batchnorm_backward(const Tensor<T>&, std::span<const T>);                 \
  template Tensor<T> add_forward(const Tensor<T>&, const Tensor<T>&, std::string_view);        \
  template Tensor<T> bilinear_upsample(const Tensor<T>&, std::size_t, std::size_t);            \
  template Tensor<T> zero_channels(const Tensor<T>&, std::span<const std::size_t>);

O2B_INSTANTIATE_KERNELS(float)
O2B_INSTANTIATE_KERNELS(double)

#undef O2B_INSTANTIATE_KERNELS

}  // namespace o2b
