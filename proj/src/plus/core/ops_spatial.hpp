#pragma once

#include <array>

#include "plus/core/ops.hpp"

// Volumetric primitives: 3-D cross-correlation (im2col + GEMM), adaptive mean
// pooling, and zero-padded window extraction. Layout is channel-major with x
// fastest: index(c, z, y, x) = ((c * Z + z) * Y + y) * X + x.

namespace plus::ops {

struct Conv3dDims {
  std::int64_t cin, iz, iy, ix;
  std::int64_t cout, kz, ky, kx;
  std::int64_t oz, oy, ox;
  std::int64_t stride, pad;
  std::int64_t patch() const { return cin * kz * ky * kx; }
  std::int64_t cells() const { return oz * oy * ox; }
};

inline Conv3dDims conv3d_dims(const Shape& xs, const Shape& ws, std::int64_t stride,
                              std::int64_t pad) {
  if (xs.size() != 4 || ws.size() != 5) {
    throw ShapeError("conv3d expects x[C,Z,Y,X] and w[Cout,Cin,kz,ky,kx], got " +
                     shape_str(xs) + " and " + shape_str(ws));
  }
  if (ws[1] != xs[0]) {
    throw ShapeError("conv3d channel mismatch: x " + shape_str(xs) + " vs w " + shape_str(ws));
  }
  Conv3dDims d{};
  d.cin = xs[0];
  d.iz = xs[1];
  d.iy = xs[2];
  d.ix = xs[3];
  d.cout = ws[0];
  d.kz = ws[2];
  d.ky = ws[3];
  d.kx = ws[4];
  d.stride = stride;
  d.pad = pad;
  const auto ext = [&](std::int64_t in, std::int64_t k) {
    const auto padded = in + 2 * pad;
    if (padded < k) {
      throw ShapeError("conv3d kernel " + std::to_string(k) + " larger than padded extent " +
                       std::to_string(padded));
    }
    return (padded - k) / stride + 1;
  };
  d.oz = ext(d.iz, d.kz);
  d.oy = ext(d.iy, d.ky);
  d.ox = ext(d.ix, d.kx);
  return d;
}

namespace detail {

// cols[patch x cells]; row r = (c, dz, dy, dx), column = output cell
template <typename T>
void im2col(const T* x, const Conv3dDims& d, T* cols) {
  const auto cells = d.cells();
  std::int64_t r = 0;
  for (std::int64_t c = 0; c < d.cin; ++c) {
    for (std::int64_t dz = 0; dz < d.kz; ++dz) {
      for (std::int64_t dy = 0; dy < d.ky; ++dy) {
        for (std::int64_t dx = 0; dx < d.kx; ++dx, ++r) {
          T* dst = cols + r * cells;
          for (std::int64_t z = 0; z < d.oz; ++z) {
            const auto zin = z * d.stride + dz - d.pad;
            for (std::int64_t y = 0; y < d.oy; ++y) {
              const auto yin = y * d.stride + dy - d.pad;
              T* row = dst + (z * d.oy + y) * d.ox;
              if (zin < 0 || zin >= d.iz || yin < 0 || yin >= d.iy) {
                std::memset(row, 0, d.ox * sizeof(T));
                continue;
              }
              const T* src = x + ((c * d.iz + zin) * d.iy + yin) * d.ix;
              if (d.stride == 1) {
                // valid output x range for this (dx): 0 <= x0 + dx - pad < ix
                const std::int64_t lo = std::max<std::int64_t>(0, d.pad - dx);
                const std::int64_t hi =
                    std::min<std::int64_t>(d.ox, d.ix + d.pad - dx);
                if (lo > 0) std::memset(row, 0, lo * sizeof(T));
                if (hi > lo)
                  std::memcpy(row + lo, src + lo + dx - d.pad, (hi - lo) * sizeof(T));
                if (hi < d.ox) std::memset(row + hi, 0, (d.ox - hi) * sizeof(T));
              } else {
                for (std::int64_t xo = 0; xo < d.ox; ++xo) {
                  const auto xin = xo * d.stride + dx - d.pad;
                  row[xo] = (xin >= 0 && xin < d.ix) ? src[xin] : T(0);
                }
              }
            }
          }
        }
      }
    }
  }
}

// scatter-add transpose of im2col
template <typename T>
void col2im(const T* cols, const Conv3dDims& d, T* gx) {
  const auto cells = d.cells();
  std::int64_t r = 0;
  for (std::int64_t c = 0; c < d.cin; ++c) {
    for (std::int64_t dz = 0; dz < d.kz; ++dz) {
      for (std::int64_t dy = 0; dy < d.ky; ++dy) {
        for (std::int64_t dx = 0; dx < d.kx; ++dx, ++r) {
          const T* src_row = cols + r * cells;
          for (std::int64_t z = 0; z < d.oz; ++z) {
            const auto zin = z * d.stride + dz - d.pad;
            if (zin < 0 || zin >= d.iz) continue;
            for (std::int64_t y = 0; y < d.oy; ++y) {
              const auto yin = y * d.stride + dy - d.pad;
              if (yin < 0 || yin >= d.iy) continue;
              const T* row = src_row + (z * d.oy + y) * d.ox;
              T* dst = gx + ((c * d.iz + zin) * d.iy + yin) * d.ix;
              for (std::int64_t xo = 0; xo < d.ox; ++xo) {
                const auto xin = xo * d.stride + dx - d.pad;
                if (xin >= 0 && xin < d.ix) dst[xin] += row[xo];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

// Cross-correlation of x[Cin,Z,Y,X] with w[Cout,Cin,kz,ky,kx] plus bias
// b[Cout]. The column matrix is recomputed in backward instead of saved.
template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 std::int64_t stride, std::int64_t pad) {
  const auto d = conv3d_dims(x.shape(), w.shape(), stride, pad);
  if (b.numel() != d.cout) {
    throw ShapeError("conv3d bias " + shape_str(b.shape()) + " does not match Cout " +
                     std::to_string(d.cout));
  }
  const auto cells = d.cells();
  std::vector<T> cols(d.patch() * cells);
  detail::im2col(x.ptr(), d, cols.data());
  auto out = detail::raw<T>({d.cout, d.oz, d.oy, d.ox});
  kern::active<T>().matmul_nn(w.ptr(), cols.data(), out.ptr_mut(), d.cout, d.patch(), cells);
  const auto* bp = b.ptr();
  auto* yp = out.ptr_mut();
  for (std::int64_t co = 0; co < d.cout; ++co) {
    const T bv = bp[co];
    T* row = yp + co * cells;
    for (std::int64_t i = 0; i < cells; ++i) row[i] += bv;
  }
  check_finite("conv3d", out);

  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ix = tp->node_of(x);
    const auto iw = tp->node_of(w);
    const auto ib = tp->node_of(b);
    if (ix >= 0 || iw >= 0 || ib >= 0) {
      Tensor<T> sx = x, sw = w;
      tp->add_node(
          "conv3d",
          [ix, iw, ib, sx, sw, d](Tape<T>& t, const Tensor<T>& gy) {
            const auto& K = kern::active<T>();
            const auto cells = d.cells();
            const auto* gyp = gy.ptr();
            if (iw >= 0 || ix >= 0) {
              std::vector<T> cols;
              if (iw >= 0) {
                cols.resize(d.patch() * cells);
                detail::im2col(sx.ptr(), d, cols.data());
                auto gw = detail::raw<T>(sw.shape());
                K.matmul_nt(gyp, cols.data(), gw.ptr_mut(), d.cout, cells, d.patch());
                t.accumulate(iw, gw);
              }
              if (ix >= 0) {
                std::vector<T> gcols(d.patch() * cells);
                K.matmul_tn(sw.ptr(), gyp, gcols.data(), d.patch(), d.cout, cells);
                auto gx = Tensor<T>::zeros(sx.shape());
                detail::col2im(gcols.data(), d, gx.ptr_mut());
                t.accumulate(ix, gx);
              }
            }
            if (ib >= 0) {
              auto gb = detail::raw<T>({d.cout});
              auto* gbp = gb.ptr_mut();
              for (std::int64_t co = 0; co < d.cout; ++co)
                gbp[co] = K.reduce_sum(gyp + co * cells, cells);
              t.accumulate(ib, gb);
            }
          },
          out);
    }
  }
  return out;
}

// Mean pooling of x[C,Z,Y,X] onto an output grid; partition i covers
// [floor(i*in/out), floor((i+1)*in/out)), so partitions tile the input.
template <typename T>
Tensor<T> adaptive_mean_pool3d(const Tensor<T>& x, std::array<std::int64_t, 3> grid) {
  if (x.ndim() != 4) throw ShapeError("adaptive_mean_pool3d expects [C,Z,Y,X], got " +
                                      shape_str(x.shape()));
  const auto C = x.dim(0);
  const std::array<std::int64_t, 3> in{x.dim(1), x.dim(2), x.dim(3)};
  for (int i = 0; i < 3; ++i) {
    if (grid[i] < 1 || grid[i] > in[i]) {
      throw ShapeError("pool grid extent " + std::to_string(grid[i]) +
                       " invalid for input extent " + std::to_string(in[i]));
    }
  }
  auto out = detail::raw<T>({C, grid[0], grid[1], grid[2]});
  const auto* xp = x.ptr();
  auto* yp = out.ptr_mut();
  const auto lo = [](std::int64_t i, std::int64_t n_in, std::int64_t n_out) {
    return i * n_in / n_out;
  };
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t z = 0; z < grid[0]; ++z) {
      const auto z0 = lo(z, in[0], grid[0]), z1 = lo(z + 1, in[0], grid[0]);
      for (std::int64_t y = 0; y < grid[1]; ++y) {
        const auto y0 = lo(y, in[1], grid[1]), y1 = lo(y + 1, in[1], grid[1]);
        for (std::int64_t xg = 0; xg < grid[2]; ++xg) {
          const auto x0 = lo(xg, in[2], grid[2]), x1 = lo(xg + 1, in[2], grid[2]);
          T acc = 0;
          for (std::int64_t zi = z0; zi < z1; ++zi)
            for (std::int64_t yi = y0; yi < y1; ++yi)
              acc += kern::active<T>().reduce_sum(
                  xp + ((c * in[0] + zi) * in[1] + yi) * in[2] + x0, x1 - x0);
          const auto count = (z1 - z0) * (y1 - y0) * (x1 - x0);
          yp[((c * grid[0] + z) * grid[1] + y) * grid[2] + xg] = acc / T(count);
        }
      }
    }
  }
  check_finite("adaptive_mean_pool3d", out);
  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ix = tp->node_of(x);
    if (ix >= 0) {
      tp->add_node(
          "adaptive_mean_pool3d",
          [ix, C, in, grid, lo](Tape<T>& t, const Tensor<T>& gy) {
            auto g = Tensor<T>::zeros({C, in[0], in[1], in[2]});
            auto* gp = g.ptr_mut();
            const auto* gyp = gy.ptr();
            for (std::int64_t c = 0; c < C; ++c) {
              for (std::int64_t z = 0; z < grid[0]; ++z) {
                const auto z0 = lo(z, in[0], grid[0]), z1 = lo(z + 1, in[0], grid[0]);
                for (std::int64_t y = 0; y < grid[1]; ++y) {
                  const auto y0 = lo(y, in[1], grid[1]), y1 = lo(y + 1, in[1], grid[1]);
                  for (std::int64_t xg = 0; xg < grid[2]; ++xg) {
                    const auto x0 = lo(xg, in[2], grid[2]), x1 = lo(xg + 1, in[2], grid[2]);
                    const auto count = (z1 - z0) * (y1 - y0) * (x1 - x0);
                    const T gv =
                        gyp[((c * grid[0] + z) * grid[1] + y) * grid[2] + xg] / T(count);
                    for (std::int64_t zi = z0; zi < z1; ++zi)
                      for (std::int64_t yi = y0; yi < y1; ++yi) {
                        T* row = gp + ((c * in[0] + zi) * in[1] + yi) * in[2];
                        for (std::int64_t xi = x0; xi < x1; ++xi) row[xi] += gv;
                      }
                  }
                }
              }
            }
            t.accumulate(ix, g);
          },
          out);
    }
  }
  return out;
}

// Fixed-size window copy out of x[C,Z,Y,X] starting at origin (may be
// negative / exceed bounds); out-of-range voxels are zero. Backward scatters.
template <typename T>
Tensor<T> crop3d(const Tensor<T>& x, std::array<std::int64_t, 3> origin,
                 std::array<std::int64_t, 3> extent) {
  if (x.ndim() != 4) throw ShapeError("crop3d expects [C,Z,Y,X], got " + shape_str(x.shape()));
  const auto C = x.dim(0);
  const std::array<std::int64_t, 3> in{x.dim(1), x.dim(2), x.dim(3)};
  auto out = Tensor<T>::zeros({C, extent[0], extent[1], extent[2]});
  const auto* xp = x.ptr();
  auto* yp = out.ptr_mut();
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t z = 0; z < extent[0]; ++z) {
      const auto zi = z + origin[0];
      if (zi < 0 || zi >= in[0]) continue;
      for (std::int64_t y = 0; y < extent[1]; ++y) {
        const auto yi = y + origin[1];
        if (yi < 0 || yi >= in[1]) continue;
        const auto xlo = std::max<std::int64_t>(0, -origin[2]);
        const auto xhi = std::min<std::int64_t>(extent[2], in[2] - origin[2]);
        if (xhi <= xlo) continue;
        std::memcpy(yp + ((c * extent[0] + z) * extent[1] + y) * extent[2] + xlo,
                    xp + ((c * in[0] + zi) * in[1] + yi) * in[2] + xlo + origin[2],
                    (xhi - xlo) * sizeof(T));
      }
    }
  }
  auto* tp = Tape<T>::active();
  if (tp) {
    const auto ix = tp->node_of(x);
    if (ix >= 0) {
      tp->add_node(
          "crop3d",
          [ix, C, in, origin, extent](Tape<T>& t, const Tensor<T>& gy) {
            auto g = Tensor<T>::zeros({C, in[0], in[1], in[2]});
            auto* gp = g.ptr_mut();
            const auto* gyp = gy.ptr();
            for (std::int64_t c = 0; c < C; ++c) {
              for (std::int64_t z = 0; z < extent[0]; ++z) {
                const auto zi = z + origin[0];
                if (zi < 0 || zi >= in[0]) continue;
                for (std::int64_t y = 0; y < extent[1]; ++y) {
                  const auto yi = y + origin[1];
                  if (yi < 0 || yi >= in[1]) continue;
                  const auto xlo = std::max<std::int64_t>(0, -origin[2]);
                  const auto xhi = std::min<std::int64_t>(extent[2], in[2] - origin[2]);
                  if (xhi <= xlo) continue;
                  std::memcpy(
                      gp + ((c * in[0] + zi) * in[1] + yi) * in[2] + xlo + origin[2],
                      gyp + ((c * extent[0] + z) * extent[1] + y) * extent[2] + xlo,
                      (xhi - xlo) * sizeof(T));
                }
              }
            }
            t.accumulate(ix, g);
          },
          out);
    }
  }
  return out;
}

}  // namespace plus::ops
