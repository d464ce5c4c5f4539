#include "pel/ops.hpp"

#include <Eigen/Core>
#include <span>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "pel/errors.hpp"

namespace pel {
namespace {

using Impl = std::shared_ptr<detail::TensorImpl>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

void require_same_dims(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dims() != b.dims()) {
    throw ShapeError(fmt::format("{}: dims {} vs {}", op, to_string(a.dims()), to_string(b.dims())));
  }
}

bool has_bias(const Tensor& bias) { return bias.size() != 0; }

void require_channel_vector(const Tensor& v, std::size_t c, const char* op, const char* what) {
  if (v.dims() != Dims{1, c, 1, 1}) {
    throw ShapeError(fmt::format("{}: {} must be (1, {}, 1, 1), got {}", op, what, c, to_string(v.dims())));
  }
}

// Adds `factor * g` into t's gradient when t is tracked.
void accumulate(const Impl& t, std::span<const double> g, double factor = 1.0) {
  if (!t->requires_grad) return;
  auto& dst = t->ensure_grad();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * g[i];
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_filter_kernel(std::size_t kernel, const char* op) {
  if (kernel != 3 && kernel != 5 && kernel != 7) {
    throw ConfigError(fmt::format("{}: kernel must be 3, 5 or 7, got {}", op, kernel));
  }
}

std::size_t clamp_index(std::ptrdiff_t i, std::size_t extent) {
  if (i < 0) return 0;
  if (i >= static_cast<std::ptrdiff_t>(extent)) return extent - 1;
  return static_cast<std::size_t>(i);
}

// Gathers the flat indices of the replicate-padded kernel x kernel window
// centred on (y, x) of one plane starting at `base`.
void window_indices(std::size_t base, std::size_t h, std::size_t w, std::size_t y, std::size_t x,
                    std::size_t kernel, std::vector<std::size_t>& out) {
  const auto r = static_cast<std::ptrdiff_t>(kernel / 2);
  out.clear();
  for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
    const std::size_t sy = clamp_index(static_cast<std::ptrdiff_t>(y) + dy, h);
    for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
      const std::size_t sx = clamp_index(static_cast<std::ptrdiff_t>(x) + dx, w);
      out.push_back(base + sy * w + sx);
    }
  }
}

void im2col3x3(const double* src, std::size_t c, std::size_t h, std::size_t w, std::size_t stride,
               std::size_t ho, std::size_t wo, double* cols) {
  const std::size_t plane_out = ho * wo;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = src + ch * h * w;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* row = cols + ((ch * 3 + ky) * 3 + kx) * plane_out;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - 1;
          double* dst = row + oy * wo;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + wo, 0.0);
            continue;
          }
          const double* line = plane + static_cast<std::size_t>(iy) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - 1;
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? 0.0 : line[ix];
          }
        }
      }
    }
  }
}

void col2im3x3(const double* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t stride,
               std::size_t ho, std::size_t wo, double* dst) {
  const std::size_t plane_out = ho * wo;
  for (std::size_t ch = 0; ch < c; ++ch) {
    double* plane = dst + ch * h * w;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* row = cols + ((ch * 3 + ky) * 3 + kx) * plane_out;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - 1;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          double* line = plane + static_cast<std::size_t>(iy) * w;
          const double* src = row + oy * wo;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - 1;
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) line[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "add");
  Tensor out(a.dims());
  auto o = out.data();
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  if (g.tracks({&a, &b})) {
    g.record("add", out, [ai = a.impl(), bi = b.impl(), oi = out.impl()] {
      accumulate(ai, oi->grad);
      accumulate(bi, oi->grad);
    });
  }
  return out;
}

Tensor sub(Graph& g, const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "sub");
  Tensor out(a.dims());
  auto o = out.data();
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  if (g.tracks({&a, &b})) {
    g.record("sub", out, [ai = a.impl(), bi = b.impl(), oi = out.impl()] {
      accumulate(ai, oi->grad);
      accumulate(bi, oi->grad, -1.0);
    });
  }
  return out;
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "mul");
  Tensor out(a.dims());
  auto o = out.data();
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  if (g.tracks({&a, &b})) {
    g.record("mul", out, [ai = a.impl(), bi = b.impl(), oi = out.impl()] {
      const auto& go = oi->grad;
      if (ai->requires_grad) {
        auto& ga = ai->ensure_grad();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bi->data[i];
      }
      if (bi->requires_grad) {
        auto& gb = bi->ensure_grad();
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * ai->data[i];
      }
    });
  }
  return out;
}

Tensor scale(Graph& g, const Tensor& x, double factor) {
  Tensor out(x.dims());
  auto o = out.data();
  const auto v = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = factor * v[i];
  if (g.tracks({&x})) {
    g.record("scale", out, [xi = x.impl(), oi = out.impl(), factor] { accumulate(xi, oi->grad, factor); });
  }
  return out;
}

Tensor sigmoid(Graph& g, const Tensor& x) {
  Tensor out(x.dims());
  auto o = out.data();
  const auto v = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = stable_sigmoid(v[i]);
  if (g.tracks({&x})) {
    g.record("sigmoid", out, [xi = x.impl(), oi = out.impl()] {
      if (!xi->requires_grad) return;
      auto& gx = xi->ensure_grad();
      const auto& go = oi->grad;
      const auto& y = oi->data;
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * y[i] * (1.0 - y[i]);
    });
  }
  return out;
}

Tensor relu(Graph& g, const Tensor& x) {
  Tensor out(x.dims());
  auto o = out.data();
  const auto v = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = v[i] > 0.0 ? v[i] : 0.0;
  if (g.tracks({&x})) {
    g.record("relu", out, [xi = x.impl(), oi = out.impl()] {
      if (!xi->requires_grad) return;
      auto& gx = xi->ensure_grad();
      const auto& go = oi->grad;
      for (std::size_t i = 0; i < go.size(); ++i) {
        if (xi->data[i] > 0.0) gx[i] += go[i];
      }
    });
  }
  return out;
}

Tensor conv_pointwise(Graph& g, const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const Dims& d = x.dims();
  const Dims& wd = weight.dims();
  if (wd.h != 1 || wd.w != 1 || wd.n == 0) {
    throw ShapeError("conv_pointwise: weight must be (c_out, c_in, 1, 1), got " + to_string(wd));
  }
  if (wd.c != d.c) {
    throw ShapeError(fmt::format("conv_pointwise: weight expects {} input channels, tensor has {}", wd.c, d.c));
  }
  const std::size_t c_out = wd.n;
  if (has_bias(bias)) require_channel_vector(bias, c_out, "conv_pointwise", "bias");

  const std::size_t hw = d.plane();
  Tensor out(Dims{d.n, c_out, d.h, d.w});
  ConstMatMap w(weight.data().data(), c_out, d.c);
  for (std::size_t n = 0; n < d.n; ++n) {
    ConstMatMap in(x.data().data() + n * d.c * hw, d.c, hw);
    MatMap o(out.data().data() + n * c_out * hw, c_out, hw);
    o.noalias() = w * in;
    if (has_bias(bias)) {
      for (std::size_t k = 0; k < c_out; ++k) o.row(k).array() += bias.data()[k];
    }
  }
  if (g.tracks({&x, &weight, &bias})) {
    g.record("conv_pointwise", out, [xi = x.impl(), wi = weight.impl(), bi = bias.impl(), oi = out.impl(), c_out] {
      const Dims& d = xi->dims;
      const std::size_t hw = d.plane();
      ConstMatMap w(wi->data.data(), c_out, d.c);
      for (std::size_t n = 0; n < d.n; ++n) {
        ConstMatMap go(oi->grad.data() + n * c_out * hw, c_out, hw);
        ConstMatMap in(xi->data.data() + n * d.c * hw, d.c, hw);
        if (xi->requires_grad) {
          MatMap gx(xi->ensure_grad().data() + n * d.c * hw, d.c, hw);
          gx.noalias() += w.transpose() * go;
        }
        if (wi->requires_grad) {
          MatMap gw(wi->ensure_grad().data(), c_out, d.c);
          gw.noalias() += go * in.transpose();
        }
        if (!bi->data.empty() && bi->requires_grad) {
          auto& gb = bi->ensure_grad();
          for (std::size_t k = 0; k < c_out; ++k) gb[k] += go.row(k).sum();
        }
      }
    });
  }
  return out;
}

Tensor conv_depthwise_1x1(Graph& g, const Tensor& x, const Tensor& scale_vec, const Tensor& bias) {
  const Dims& d = x.dims();
  require_channel_vector(scale_vec, d.c, "conv_depthwise_1x1", "scale");
  require_channel_vector(bias, d.c, "conv_depthwise_1x1", "bias");
  Tensor out(d);
  const std::size_t hw = d.plane();
  const auto in = x.data();
  auto o = out.data();
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t k = 0; k < d.c; ++k) {
      const double s = scale_vec.data()[k];
      const double b = bias.data()[k];
      const std::size_t base = (n * d.c + k) * hw;
      for (std::size_t i = 0; i < hw; ++i) o[base + i] = s * in[base + i] + b;
    }
  }
  if (g.tracks({&x, &scale_vec, &bias})) {
    g.record("conv_depthwise_1x1", out, [xi = x.impl(), si = scale_vec.impl(), bi = bias.impl(), oi = out.impl()] {
      const Dims& d = xi->dims;
      const std::size_t hw = d.plane();
      const auto& go = oi->grad;
      for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t k = 0; k < d.c; ++k) {
          const std::size_t base = (n * d.c + k) * hw;
          double gs = 0.0;
          double gb = 0.0;
          for (std::size_t i = 0; i < hw; ++i) {
            gs += go[base + i] * xi->data[base + i];
            gb += go[base + i];
          }
          if (si->requires_grad) si->ensure_grad()[k] += gs;
          if (bi->requires_grad) bi->ensure_grad()[k] += gb;
          if (xi->requires_grad) {
            auto& gx = xi->ensure_grad();
            const double s = si->data[k];
            for (std::size_t i = 0; i < hw; ++i) gx[base + i] += s * go[base + i];
          }
        }
      }
    });
  }
  return out;
}

Tensor conv3x3(Graph& g, const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride) {
  if (stride != 1 && stride != 2) throw ShapeError(fmt::format("conv3x3: stride must be 1 or 2, got {}", stride));
  const Dims& d = x.dims();
  const Dims& wd = weight.dims();
  if (wd.h != 3 || wd.w != 3 || wd.n == 0) {
    throw ShapeError("conv3x3: weight must be (c_out, c_in, 3, 3), got " + to_string(wd));
  }
  if (wd.c != d.c) {
    throw ShapeError(fmt::format("conv3x3: weight expects {} input channels, tensor has {}", wd.c, d.c));
  }
  if (d.h == 0 || d.w == 0) throw ShapeError("conv3x3: empty spatial extent");
  const std::size_t c_out = wd.n;
  if (has_bias(bias)) require_channel_vector(bias, c_out, "conv3x3", "bias");

  const std::size_t ho = (d.h + stride - 1) / stride;
  const std::size_t wo = (d.w + stride - 1) / stride;
  const std::size_t k = d.c * 9;
  Tensor out(Dims{d.n, c_out, ho, wo});
  RowMat cols(k, ho * wo);
  ConstMatMap w(weight.data().data(), c_out, k);
  for (std::size_t n = 0; n < d.n; ++n) {
    im2col3x3(x.data().data() + n * d.c * d.plane(), d.c, d.h, d.w, stride, ho, wo, cols.data());
    MatMap o(out.data().data() + n * c_out * ho * wo, c_out, ho * wo);
    o.noalias() = w * cols;
    if (has_bias(bias)) {
      for (std::size_t j = 0; j < c_out; ++j) o.row(j).array() += bias.data()[j];
    }
  }
  if (g.tracks({&x, &weight, &bias})) {
    g.record("conv3x3", out, [xi = x.impl(), wi = weight.impl(), bi = bias.impl(), oi = out.impl(), stride, ho, wo, c_out] {
      const Dims& d = xi->dims;
      const std::size_t k = d.c * 9;
      const std::size_t plane_out = ho * wo;
      RowMat cols(k, plane_out);
      RowMat gcols(k, plane_out);
      ConstMatMap w(wi->data.data(), c_out, k);
      for (std::size_t n = 0; n < d.n; ++n) {
        ConstMatMap go(oi->grad.data() + n * c_out * plane_out, c_out, plane_out);
        if (wi->requires_grad) {
          im2col3x3(xi->data.data() + n * d.c * d.plane(), d.c, d.h, d.w, stride, ho, wo, cols.data());
          MatMap gw(wi->ensure_grad().data(), c_out, k);
          gw.noalias() += go * cols.transpose();
        }
        if (!bi->data.empty() && bi->requires_grad) {
          auto& gb = bi->ensure_grad();
          for (std::size_t j = 0; j < c_out; ++j) gb[j] += go.row(j).sum();
        }
        if (xi->requires_grad) {
          gcols.noalias() = w.transpose() * go;
          col2im3x3(gcols.data(), d.c, d.h, d.w, stride, ho, wo, xi->ensure_grad().data() + n * d.c * d.plane());
        }
      }
    });
  }
  return out;
}

Tensor grouped_reduce(Graph& g, const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const Dims& d = x.dims();
  const Dims& wd = weight.dims();
  const std::size_t c = wd.n;
  const std::size_t groups = wd.c;
  if (wd.h != 1 || wd.w != 1 || c == 0 || groups == 0 || d.c != c * groups) {
    throw ShapeError(fmt::format("grouped_reduce: weight {} incompatible with input {}", to_string(wd), to_string(d)));
  }
  if (has_bias(bias)) require_channel_vector(bias, c, "grouped_reduce", "bias");
  const std::size_t hw = d.plane();
  Tensor out(Dims{d.n, c, d.h, d.w});
  auto o = out.data();
  const auto in = x.data();
  const auto wv = weight.data();
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t k = 0; k < c; ++k) {
      double* dst = o.data() + (n * c + k) * hw;
      const double b = has_bias(bias) ? bias.data()[k] : 0.0;
      std::fill(dst, dst + hw, b);
      for (std::size_t gi = 0; gi < groups; ++gi) {
        const double wk = wv[k * groups + gi];
        const double* src = in.data() + (n * d.c + gi * c + k) * hw;
        for (std::size_t i = 0; i < hw; ++i) dst[i] += wk * src[i];
      }
    }
  }
  if (g.tracks({&x, &weight, &bias})) {
    g.record("grouped_reduce", out, [xi = x.impl(), wi = weight.impl(), bi = bias.impl(), oi = out.impl(), c, groups] {
      const Dims& d = xi->dims;
      const std::size_t hw = d.plane();
      const auto& go = oi->grad;
      for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t k = 0; k < c; ++k) {
          const double* gsrc = go.data() + (n * c + k) * hw;
          if (!bi->data.empty() && bi->requires_grad) {
            double s = 0.0;
            for (std::size_t i = 0; i < hw; ++i) s += gsrc[i];
            bi->ensure_grad()[k] += s;
          }
          for (std::size_t gi = 0; gi < groups; ++gi) {
            const std::size_t base = (n * d.c + gi * c + k) * hw;
            if (wi->requires_grad) {
              double s = 0.0;
              for (std::size_t i = 0; i < hw; ++i) s += gsrc[i] * xi->data[base + i];
              wi->ensure_grad()[k * groups + gi] += s;
            }
            if (xi->requires_grad) {
              auto& gx = xi->ensure_grad();
              const double wk = wi->data[k * groups + gi];
              for (std::size_t i = 0; i < hw; ++i) gx[base + i] += wk * gsrc[i];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor median_filter(Graph& g, const Tensor& x, std::size_t kernel) {
  check_filter_kernel(kernel, "median_filter");
  const Dims& d = x.dims();
  const std::size_t hw = d.plane();
  const bool track = g.tracks({&x});
  Tensor out(d);
  std::vector<std::size_t> source;
  if (track) source.resize(d.count());

  std::vector<std::size_t> idx;
  std::vector<double> vals;
  const auto in = x.data();
  auto o = out.data();
  const std::size_t mid = kernel * kernel / 2;
  for (std::size_t plane = 0; plane < d.n * d.c; ++plane) {
    const std::size_t base = plane * hw;
    for (std::size_t y = 0; y < d.h; ++y) {
      for (std::size_t xx = 0; xx < d.w; ++xx) {
        window_indices(base, d.h, d.w, y, xx, kernel, idx);
        vals.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) vals[i] = in[idx[i]];
        std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid), vals.end());
        const double m = vals[mid];
        const std::size_t at = base + y * d.w + xx;
        o[at] = m;
        if (track) {
          std::size_t best = idx.front();
          bool found = false;
          for (std::size_t i : idx) {
            if (in[i] == m && (!found || i < best)) {
              best = i;
              found = true;
            }
          }
          source[at] = best;
        }
      }
    }
  }
  if (track) {
    g.record("median_filter", out, [xi = x.impl(), oi = out.impl(), src = std::move(source)] {
      if (!xi->requires_grad) return;
      auto& gx = xi->ensure_grad();
      const auto& go = oi->grad;
      for (std::size_t i = 0; i < go.size(); ++i) gx[src[i]] += go[i];
    });
  }
  return out;
}

Tensor mean_filter(Graph& g, const Tensor& x, std::size_t kernel) {
  check_filter_kernel(kernel, "mean_filter");
  const Dims& d = x.dims();
  const std::size_t hw = d.plane();
  const double inv = 1.0 / static_cast<double>(kernel * kernel);
  Tensor out(d);
  std::vector<std::size_t> idx;
  const auto in = x.data();
  auto o = out.data();
  for (std::size_t plane = 0; plane < d.n * d.c; ++plane) {
    const std::size_t base = plane * hw;
    for (std::size_t y = 0; y < d.h; ++y) {
      for (std::size_t xx = 0; xx < d.w; ++xx) {
        window_indices(base, d.h, d.w, y, xx, kernel, idx);
        double s = 0.0;
        for (std::size_t i : idx) s += in[i];
        o[base + y * d.w + xx] = s / static_cast<double>(idx.size());
      }
    }
  }
  if (g.tracks({&x})) {
    g.record("mean_filter", out, [xi = x.impl(), oi = out.impl(), kernel, inv] {
      if (!xi->requires_grad) return;
      const Dims& d = xi->dims;
      const std::size_t hw = d.plane();
      auto& gx = xi->ensure_grad();
      const auto& go = oi->grad;
      std::vector<std::size_t> idx;
      for (std::size_t plane = 0; plane < d.n * d.c; ++plane) {
        const std::size_t base = plane * hw;
        for (std::size_t y = 0; y < d.h; ++y) {
          for (std::size_t xx = 0; xx < d.w; ++xx) {
            window_indices(base, d.h, d.w, y, xx, kernel, idx);
            const double share = go[base + y * d.w + xx] * inv;
            for (std::size_t i : idx) gx[i] += share;
          }
        }
      }
    });
  }
  return out;
}

Tensor gap(Graph& g, const Tensor& x) {
  const Dims& d = x.dims();
  const std::size_t hw = d.plane();
  if (hw == 0) throw ShapeError("gap: empty spatial extent");
  Tensor out(Dims{d.n, d.c, 1, 1});
  const auto in = x.data();
  for (std::size_t p = 0; p < d.n * d.c; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += in[p * hw + i];
    out.data()[p] = s / static_cast<double>(hw);
  }
  if (g.tracks({&x})) {
    g.record("gap", out, [xi = x.impl(), oi = out.impl()] {
      if (!xi->requires_grad) return;
      const std::size_t hw = xi->dims.plane();
      auto& gx = xi->ensure_grad();
      for (std::size_t p = 0; p < oi->grad.size(); ++p) {
        const double share = oi->grad[p] / static_cast<double>(hw);
        for (std::size_t i = 0; i < hw; ++i) gx[p * hw + i] += share;
      }
    });
  }
  return out;
}

Tensor gmp(Graph& g, const Tensor& x) {
  const Dims& d = x.dims();
  const std::size_t hw = d.plane();
  if (hw == 0) throw ShapeError("gmp: empty spatial extent");
  Tensor out(Dims{d.n, d.c, 1, 1});
  std::vector<std::size_t> arg(d.n * d.c);
  const auto in = x.data();
  for (std::size_t p = 0; p < d.n * d.c; ++p) {
    std::size_t best = p * hw;
    for (std::size_t i = 1; i < hw; ++i) {
      if (in[p * hw + i] > in[best]) best = p * hw + i;
    }
    arg[p] = best;
    out.data()[p] = in[best];
  }
  if (g.tracks({&x})) {
    g.record("gmp", out, [xi = x.impl(), oi = out.impl(), arg = std::move(arg)] {
      if (!xi->requires_grad) return;
      auto& gx = xi->ensure_grad();
      for (std::size_t p = 0; p < arg.size(); ++p) gx[arg[p]] += oi->grad[p];
    });
  }
  return out;
}

Tensor mlp2(Graph& g, const Tensor& x, const Tensor& w1, const Tensor& w2) {
  const Dims& d = x.dims();
  if (d.h != 1 || d.w != 1) throw ShapeError("mlp2: input must be (n, c, 1, 1), got " + to_string(d));
  if (w2.dims().n != d.c || w2.dims().c != w1.dims().n) {
    throw ShapeError(fmt::format("mlp2: w1 {} and w2 {} do not map {} channels back to themselves",
                                 to_string(w1.dims()), to_string(w2.dims()), d.c));
  }
  const Tensor hidden = relu(g, conv_pointwise(g, x, w1, Tensor()));
  return conv_pointwise(g, hidden, w2, Tensor());
}

Tensor concat_channels(Graph& g, const Tensor& a, const Tensor& b) {
  const Dims& da = a.dims();
  const Dims& db = b.dims();
  if (da.n != db.n || da.h != db.h || da.w != db.w) {
    throw ShapeError(fmt::format("concat_channels: {} vs {}", to_string(da), to_string(db)));
  }
  const std::size_t hw = da.plane();
  const std::size_t c = da.c + db.c;
  Tensor out(Dims{da.n, c, da.h, da.w});
  auto o = out.data();
  for (std::size_t n = 0; n < da.n; ++n) {
    std::copy_n(a.data().data() + n * da.c * hw, da.c * hw, o.data() + n * c * hw);
    std::copy_n(b.data().data() + n * db.c * hw, db.c * hw, o.data() + (n * c + da.c) * hw);
  }
  if (g.tracks({&a, &b})) {
    g.record("concat_channels", out, [ai = a.impl(), bi = b.impl(), oi = out.impl()] {
      const Dims& da = ai->dims;
      const Dims& db = bi->dims;
      const std::size_t hw = da.plane();
      const std::size_t c = da.c + db.c;
      const auto& go = oi->grad;
      for (std::size_t n = 0; n < da.n; ++n) {
        if (ai->requires_grad) {
          auto& ga = ai->ensure_grad();
          for (std::size_t i = 0; i < da.c * hw; ++i) ga[n * da.c * hw + i] += go[n * c * hw + i];
        }
        if (bi->requires_grad) {
          auto& gb = bi->ensure_grad();
          for (std::size_t i = 0; i < db.c * hw; ++i) gb[n * db.c * hw + i] += go[(n * c + da.c) * hw + i];
        }
      }
    });
  }
  return out;
}

Tensor slice_channels(Graph& g, const Tensor& x, std::size_t begin, std::size_t count) {
  const Dims& d = x.dims();
  if (begin + count > d.c) {
    throw ShapeError(fmt::format("slice_channels: [{}, {}) outside {} channels", begin, begin + count, d.c));
  }
  const std::size_t hw = d.plane();
  Tensor out(Dims{d.n, count, d.h, d.w});
  for (std::size_t n = 0; n < d.n; ++n) {
    std::copy_n(x.data().data() + (n * d.c + begin) * hw, count * hw, out.data().data() + n * count * hw);
  }
  if (g.tracks({&x})) {
    g.record("slice_channels", out, [xi = x.impl(), oi = out.impl(), begin, count] {
      if (!xi->requires_grad) return;
      const Dims& d = xi->dims;
      const std::size_t hw = d.plane();
      auto& gx = xi->ensure_grad();
      for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t i = 0; i < count * hw; ++i) gx[(n * d.c + begin) * hw + i] += oi->grad[n * count * hw + i];
      }
    });
  }
  return out;
}

Tensor expand_spatial(Graph& g, const Tensor& x, std::size_t h, std::size_t w) {
  const Dims& d = x.dims();
  if (d.h != 1 || d.w != 1) throw ShapeError("expand_spatial: input must be (n, c, 1, 1), got " + to_string(d));
  Tensor out(Dims{d.n, d.c, h, w});
  const std::size_t hw = h * w;
  for (std::size_t p = 0; p < d.n * d.c; ++p) {
    std::fill_n(out.data().data() + p * hw, hw, x.data()[p]);
  }
  if (g.tracks({&x})) {
    g.record("expand_spatial", out, [xi = x.impl(), oi = out.impl(), hw] {
      if (!xi->requires_grad) return;
      auto& gx = xi->ensure_grad();
      for (std::size_t p = 0; p < gx.size(); ++p) {
        double s = 0.0;
        for (std::size_t i = 0; i < hw; ++i) s += oi->grad[p * hw + i];
        gx[p] += s;
      }
    });
  }
  return out;
}

Tensor expand_channels(Graph& g, const Tensor& x, std::size_t c) {
  const Dims& d = x.dims();
  if (d.c != 1) throw ShapeError("expand_channels: input must have one channel, got " + to_string(d));
  const std::size_t hw = d.plane();
  Tensor out(Dims{d.n, c, d.h, d.w});
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t k = 0; k < c; ++k) {
      std::copy_n(x.data().data() + n * hw, hw, out.data().data() + (n * c + k) * hw);
    }
  }
  if (g.tracks({&x})) {
    g.record("expand_channels", out, [xi = x.impl(), oi = out.impl(), c] {
      if (!xi->requires_grad) return;
      const std::size_t hw = xi->dims.plane();
      auto& gx = xi->ensure_grad();
      for (std::size_t n = 0; n < xi->dims.n; ++n) {
        for (std::size_t k = 0; k < c; ++k) {
          for (std::size_t i = 0; i < hw; ++i) gx[n * hw + i] += oi->grad[(n * c + k) * hw + i];
        }
      }
    });
  }
  return out;
}

Tensor sum(Graph& g, const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor out(Dims{1, 1, 1, 1}, s);
  if (g.tracks({&x})) {
    g.record("sum", out, [xi = x.impl(), oi = out.impl()] {
      if (!xi->requires_grad) return;
      auto& gx = xi->ensure_grad();
      const double go = oi->grad[0];
      for (double& v : gx) v += go;
    });
  }
  return out;
}

}  // namespace pel
