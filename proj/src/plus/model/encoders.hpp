#pragma once

#include <array>

#include "plus/nn/blocks.hpp"

namespace plus::model {

// Region encoders: a small residual 3-D CNN shared by the liver branch
// (mask-gated whole volume, downsampled to a fixed grid) and the lesion
// branch (fixed-size ROI). Four stages with channel widths w1/w2/w3/D;
// spatial reduction is x8 (stage 1 keeps resolution, stages 2-4 stride 2),
// so a liver grid of 64x64x32 yields an 8x8x4 feature map.

struct EncoderConfig {
  std::vector<std::int64_t> widths;  // 4 entries, last is the model dim

  static EncoderConfig with_dim(std::vector<std::int64_t> hidden, std::int64_t dim) {
    EncoderConfig c;
    c.widths = std::move(hidden);
    c.widths.push_back(dim);
    if (c.widths.size() != 4) throw ConfigError("encoder expects 3 hidden widths + dim");
    return c;
  }
};

inline std::int64_t conv_out_extent(std::int64_t in, std::int64_t stride) {
  // k=3, pad=1
  return (in + 2 - 3) / stride + 1;
}

inline std::array<std::int64_t, 3> encoder_map_dims(std::array<std::int64_t, 3> in) {
  std::array<std::int64_t, 3> out{};
  for (int i = 0; i < 3; ++i) {
    auto e = conv_out_extent(in[i], 1);
    e = conv_out_extent(e, 2);
    e = conv_out_extent(e, 2);
    e = conv_out_extent(e, 2);
    out[i] = e;
  }
  return out;
}

template <typename T>
void init_stage(nn::ParamSet<T>& ps, const std::string& name, std::int64_t cin,
                std::int64_t cout) {
  nn::init_conv3d(ps, name + ".c1", cin, cout, 3);
  nn::init_conv3d(ps, name + ".c2", cout, cout, 3);
  nn::init_conv3d(ps, name + ".sc", cin, cout, 1);
}

template <typename T>
Tensor<T> stage_forward(const nn::ParamSet<T>& ps, const std::string& name, const Tensor<T>& x,
                        std::int64_t stride) {
  auto h = ops::relu(nn::conv3d(ps, name + ".c1", x, stride, 1));
  auto main = nn::conv3d(ps, name + ".c2", h, 1, 1);
  auto sc = nn::conv3d(ps, name + ".sc", x, stride, 0);
  return ops::relu(ops::add(main, sc));
}

template <typename T>
void init_encoder(nn::ParamSet<T>& ps, const std::string& name, const EncoderConfig& cfg) {
  std::int64_t cin = 1;
  for (std::size_t s = 0; s < cfg.widths.size(); ++s) {
    init_stage(ps, name + ".s" + std::to_string(s + 1), cin, cfg.widths[s]);
    cin = cfg.widths[s];
  }
}

// x: gated volume [1, Z, Y, X] -> feature map [D, Z/8, Y/8, X/8]
template <typename T>
Tensor<T> encoder_forward(const nn::ParamSet<T>& ps, const std::string& name,
                          const Tensor<T>& x) {
  auto h = stage_forward(ps, name + ".s1", x, 1);
  h = stage_forward(ps, name + ".s2", h, 2);
  h = stage_forward(ps, name + ".s3", h, 2);
  h = stage_forward(ps, name + ".s4", h, 2);
  return h;
}

// feature map [D, a, b, c] -> tokens [a*b*c, D]
template <typename T>
Tensor<T> map_to_tokens(const Tensor<T>& map) {
  const auto d = map.dim(0);
  const auto cells = map.numel() / d;
  return ops::transpose(ops::reshape(map, {d, cells}));
}

}  // namespace plus::model
