#pragma once

// Raw forward/backward kernels. All image tensors are NHWC, all feature
// tensors are [n, features]. Backward kernels accumulate into their outputs.

#include <cmath>
#include <cstddef>
#include <vector>

namespace lrnoise::kernels {

template <typename T>
void dense_forward(const T* x, const T* w, const T* b, T* y, std::size_t n, std::size_t in,
                   std::size_t out) {
  for (std::size_t i = 0; i < n; ++i) {
    T* yr = y + i * out;
    for (std::size_t j = 0; j < out; ++j) yr[j] = b[j];
    const T* xr = x + i * in;
    for (std::size_t k = 0; k < in; ++k) {
      const T xv = xr[k];
      const T* wr = w + k * out;
      for (std::size_t j = 0; j < out; ++j) yr[j] += xv * wr[j];
    }
  }
}

template <typename T>
void dense_backward(const T* x, const T* w, const T* g, T* dx, T* dw, T* db, std::size_t n,
                    std::size_t in, std::size_t out) {
  for (std::size_t i = 0; i < n; ++i) {
    const T* xr = x + i * in;
    const T* gr = g + i * out;
    T* dxr = dx + i * in;
    for (std::size_t j = 0; j < out; ++j) db[j] += gr[j];
    for (std::size_t k = 0; k < in; ++k) {
      const T* wr = w + k * out;
      T* dwr = dw + k * out;
      const T xv = xr[k];
      T acc = 0;
      for (std::size_t j = 0; j < out; ++j) {
        dwr[j] += xv * gr[j];
        acc += wr[j] * gr[j];
      }
      dxr[k] += acc;
    }
  }
}

struct ConvGeometry {
  std::size_t n, h, w, cin, cout, stride, oh, ow;
};

inline ConvGeometry conv_geometry(std::size_t n, std::size_t h, std::size_t w, std::size_t cin,
                                  std::size_t cout, std::size_t stride) {
  return {n, h, w, cin, cout, stride, (h - 1) / stride + 1, (w - 1) / stride + 1};
}

/// 3x3 convolution, zero padding 1, weights laid out [ky][kx][cin][cout].
template <typename T>
void conv3x3_forward(const T* x, const T* wt, const T* b, T* y, const ConvGeometry& g) {
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t oy = 0; oy < g.oh; ++oy)
      for (std::size_t ox = 0; ox < g.ow; ++ox) {
        T* yr = y + ((n * g.oh + oy) * g.ow + ox) * g.cout;
        for (std::size_t co = 0; co < g.cout; ++co) yr[co] = b[co];
        for (std::size_t ky = 0; ky < 3; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - 1;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - 1;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            const T* xr = x + ((n * g.h + iy) * g.w + ix) * g.cin;
            const T* wk = wt + (ky * 3 + kx) * g.cin * g.cout;
            for (std::size_t ci = 0; ci < g.cin; ++ci) {
              const T xv = xr[ci];
              const T* wr = wk + ci * g.cout;
              for (std::size_t co = 0; co < g.cout; ++co) yr[co] += xv * wr[co];
            }
          }
        }
      }
}

template <typename T>
void conv3x3_backward(const T* x, const T* wt, const T* gy, T* dx, T* dw, T* db,
                      const ConvGeometry& g) {
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t oy = 0; oy < g.oh; ++oy)
      for (std::size_t ox = 0; ox < g.ow; ++ox) {
        const T* gr = gy + ((n * g.oh + oy) * g.ow + ox) * g.cout;
        for (std::size_t co = 0; co < g.cout; ++co) db[co] += gr[co];
        for (std::size_t ky = 0; ky < 3; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - 1;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - 1;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            const std::size_t xoff = ((n * g.h + iy) * g.w + ix) * g.cin;
            const std::size_t woff = (ky * 3 + kx) * g.cin * g.cout;
            for (std::size_t ci = 0; ci < g.cin; ++ci) {
              const T xv = x[xoff + ci];
              const T* wr = wt + woff + ci * g.cout;
              T* dwr = dw + woff + ci * g.cout;
              T acc = 0;
              for (std::size_t co = 0; co < g.cout; ++co) {
                dwr[co] += xv * gr[co];
                acc += wr[co] * gr[co];
              }
              dx[xoff + ci] += acc;
            }
          }
        }
      }
}

/// Statistics of one batchnorm application, per channel.
template <typename T>
struct BatchNormCache {
  std::vector<T> mean, var, inv_std;
  std::vector<T> xhat;
};

/// Normalizes over every axis but the last. With `use_batch_stats` the
/// batch mean and biased variance are used, otherwise the running values.
template <typename T>
void batchnorm_forward(const T* x, T* y, std::size_t rows, std::size_t c, const T* gamma,
                       const T* beta, const T* running_mean, const T* running_var, T eps,
                       bool use_batch_stats, BatchNormCache<T>& cache) {
  cache.mean.assign(c, T{0});
  cache.var.assign(c, T{0});
  cache.inv_std.assign(c, T{0});
  cache.xhat.assign(rows * c, T{0});
  if (use_batch_stats) {
    std::vector<double> sum(c, 0.0), ss(c, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t k = 0; k < c; ++k) sum[k] += x[r * c + k];
    for (std::size_t k = 0; k < c; ++k) cache.mean[k] = static_cast<T>(sum[k] / rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t k = 0; k < c; ++k) {
        const double d = static_cast<double>(x[r * c + k]) - cache.mean[k];
        ss[k] += d * d;
      }
    for (std::size_t k = 0; k < c; ++k) cache.var[k] = static_cast<T>(ss[k] / rows);
  } else {
    for (std::size_t k = 0; k < c; ++k) {
      cache.mean[k] = running_mean[k];
      cache.var[k] = running_var[k];
    }
  }
  for (std::size_t k = 0; k < c; ++k) cache.inv_std[k] = T{1} / std::sqrt(cache.var[k] + eps);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < c; ++k) {
      const T xh = (x[r * c + k] - cache.mean[k]) * cache.inv_std[k];
      cache.xhat[r * c + k] = xh;
      y[r * c + k] = gamma[k] * xh + beta[k];
    }
}

template <typename T>
void batchnorm_backward(const T* gy, T* dx, T* dgamma, T* dbeta, std::size_t rows, std::size_t c,
                        const T* gamma, bool used_batch_stats, const BatchNormCache<T>& cache) {
  std::vector<T> sum_g(c, T{0}), sum_gx(c, T{0});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < c; ++k) {
      sum_g[k] += gy[r * c + k];
      sum_gx[k] += gy[r * c + k] * cache.xhat[r * c + k];
    }
  for (std::size_t k = 0; k < c; ++k) {
    dgamma[k] += sum_gx[k];
    dbeta[k] += sum_g[k];
  }
  const T m = static_cast<T>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < c; ++k) {
      const T scale = gamma[k] * cache.inv_std[k];
      if (used_batch_stats) {
        dx[r * c + k] += scale * (gy[r * c + k] - sum_g[k] / m -
                                  cache.xhat[r * c + k] * sum_gx[k] / m);
      } else {
        dx[r * c + k] += scale * gy[r * c + k];
      }
    }
}

/// Identity shortcut. When the source is spatially larger it is subsampled
/// by `stride`; missing channels are zero (split evenly before and after).
struct ShortcutGeometry {
  std::size_t n, sh, sw, sc;  // source
  std::size_t h, w, c;        // destination
  std::size_t stride, pad_lo;
};

template <typename T>
void shortcut_add(const T* src, T* dst, const ShortcutGeometry& g) {
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t y = 0; y < g.h; ++y)
      for (std::size_t x = 0; x < g.w; ++x) {
        const T* s = src + ((n * g.sh + y * g.stride) * g.sw + x * g.stride) * g.sc;
        T* d = dst + ((n * g.h + y) * g.w + x) * g.c + g.pad_lo;
        for (std::size_t k = 0; k < g.sc; ++k) d[k] += s[k];
      }
}

template <typename T>
void shortcut_backward(const T* gdst, T* gsrc, const ShortcutGeometry& g) {
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t y = 0; y < g.h; ++y)
      for (std::size_t x = 0; x < g.w; ++x) {
        T* s = gsrc + ((n * g.sh + y * g.stride) * g.sw + x * g.stride) * g.sc;
        const T* d = gdst + ((n * g.h + y) * g.w + x) * g.c + g.pad_lo;
        for (std::size_t k = 0; k < g.sc; ++k) s[k] += d[k];
      }
}

}  // namespace lrnoise::kernels
