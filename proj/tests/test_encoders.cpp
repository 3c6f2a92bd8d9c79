// Region encoders: mask gating locality, ROI extraction geometry, token
// counts, determinism, and the encoder gradient check.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "plus/core/grad_check.hpp"
#include "plus/model/encoders.hpp"
#include "plus/pipeline/forward.hpp"

using namespace plus;
using namespace plus::model;
namespace o = plus::ops;
using D = Tensor<double>;
using PS = nn::ParamSet<double>;
using plus::data::ByteVol;

namespace {

EncoderConfig micro_enc() { return EncoderConfig::with_dim({2, 3, 4}, 6); }

}  // namespace

TEST_CASE("mask gating oracles") {
  auto v = D::randn({1, 4, 4, 4}, 3);
  auto ones = D::ones({1, 4, 4, 4});
  auto gated = o::mul(v, ones);
  for (std::int64_t i = 0; i < v.numel(); ++i) CHECK(gated.data()[i] == v.data()[i]);

  auto zeros = D::zeros({1, 4, 4, 4});
  auto none = o::mul(v, zeros);
  for (auto x : none.data()) CHECK(x == 0.0);

  auto single = D::zeros({1, 4, 4, 4});
  single.ptr_mut()[21] = 1.0;
  auto one = o::mul(v, single);
  for (std::int64_t i = 0; i < v.numel(); ++i) {
    CHECK(one.data()[i] == (i == 21 ? v.data()[i] : 0.0));
  }
}

TEST_CASE("mask centroid hand case") {
  // voxels (2,2,2) and (4,2,2): centroid (3,2,2)
  auto m = ByteVol::zeros({8, 8, 8});
  m.v[m.index(2, 2, 2)] = 1;
  m.v[m.index(4, 2, 2)] = 1;
  const auto c = pipeline::mask_centroid(m);
  CHECK(c[0] == 3);
  CHECK(c[1] == 2);
  CHECK(c[2] == 2);
  CHECK_THROWS_AS(pipeline::mask_centroid(ByteVol::zeros({4, 4, 4})), ContractError);

  // floor tie-break: voxels at x=1 and x=2 -> centroid x=1
  auto m2 = ByteVol::zeros({8, 8, 8});
  m2.v[m2.index(1, 0, 0)] = 1;
  m2.v[m2.index(2, 0, 0)] = 1;
  CHECK(pipeline::mask_centroid(m2)[0] == 1);
}

TEST_CASE("roi extraction centers on the centroid and zero-pads") {
  auto vol = D::randn({1, 8, 8, 8}, 7);
  // centered lesion: centroid (4,4,4), roi 4x4x4 -> window [2,6)
  const std::array<std::int64_t, 3> roi{4, 4, 4};
  const std::array<std::int64_t, 3> centroid{4, 4, 4};
  const std::array<std::int64_t, 3> origin{centroid[2] - roi[0] / 2, centroid[1] - roi[1] / 2,
                                           centroid[0] - roi[2] / 2};
  auto cropped = o::crop3d(vol, origin, roi);
  // roi center voxel equals the volume voxel at the centroid
  CHECK(cropped.at({0, roi[0] / 2, roi[1] / 2, roi[2] / 2}) ==
        vol.at({0, centroid[2], centroid[1], centroid[0]}));

  // corner lesion: out-of-bounds region is exactly zero
  const std::array<std::int64_t, 3> corner_origin{-2, -2, -2};
  auto corner = o::crop3d(vol, corner_origin, roi);
  for (std::int64_t z = 0; z < 2; ++z)
    for (std::int64_t y = 0; y < 4; ++y)
      for (std::int64_t x = 0; x < 4; ++x) CHECK(corner.at({0, z, y, x}) == 0.0);
}

TEST_CASE("encoder output token counts") {
  PS ps(5);
  const auto enc = micro_enc();
  init_encoder(ps, "e", enc);
  // liver role: tokens = product of final map extents
  auto liver_in = D::randn({1, 8, 16, 16}, 10);
  auto map = encoder_forward(ps, "e", liver_in);
  const auto md = encoder_map_dims({8, 16, 16});
  CHECK(map.shape() == Shape{6, md[0], md[1], md[2]});
  auto tokens = map_to_tokens(map);
  CHECK(tokens.shape() == Shape{md[0] * md[1] * md[2], 6});

  // lesion role: adaptive pool to 2x2x1 -> 4 tokens
  auto lesion_map = encoder_forward(ps, "e", D::randn({1, 8, 16, 16}, 11));
  auto lesion_tokens = map_to_tokens(o::adaptive_mean_pool3d(lesion_map, {1, 2, 2}));
  CHECK(lesion_tokens.shape() == Shape{4, 6});
}

TEST_CASE("mask locality: voxels outside the mask never change tokens") {
  PS ps(7);
  const auto enc = micro_enc();
  init_encoder(ps, "e", enc);
  auto v1 = D::randn({1, 8, 16, 16}, 20);
  auto mask = D::zeros({1, 8, 16, 16});
  // mask an interior box
  for (std::int64_t z = 2; z < 6; ++z)
    for (std::int64_t y = 4; y < 12; ++y)
      for (std::int64_t x = 4; x < 12; ++x)
        mask.ptr_mut()[(z * 16 + y) * 16 + x] = 1.0;
  auto v2 = v1.clone();
  // perturb voxels outside the mask
  for (std::int64_t i = 0; i < v2.numel(); ++i) {
    if (mask.data()[i] == 0.0) v2.ptr_mut()[i] += 17.5;
  }
  auto t1 = encoder_forward(ps, "e", o::mul(v1, mask));
  auto t2 = encoder_forward(ps, "e", o::mul(v2, mask));
  for (std::int64_t i = 0; i < t1.numel(); ++i) CHECK(t1.data()[i] == t2.data()[i]);
}

TEST_CASE("all-zero input reproduces the bias-path response deterministically") {
  PS ps(9);
  init_encoder(ps, "e", micro_enc());
  auto z1 = encoder_forward(ps, "e", D::zeros({1, 8, 16, 16}));
  auto z2 = encoder_forward(ps, "e", D::zeros({1, 8, 16, 16}));
  for (std::int64_t i = 0; i < z1.numel(); ++i) CHECK(z1.data()[i] == z2.data()[i]);
}

TEST_CASE("fixed seed and input give bit-identical tokens across runs") {
  auto run = [] {
    PS ps(11);
    init_encoder(ps, "e", micro_enc());
    auto v = D::randn({1, 8, 16, 16}, 30);
    return encoder_forward(ps, "e", v).clone();
  };
  auto a = run();
  auto b = run();
  for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("encoder passes grad_check on micro inputs") {
  PS ps(13);
  init_encoder(ps, "e", EncoderConfig::with_dim({2, 2, 3}, 4));
  auto v = D::randn({1, 8, 8, 8}, 40, 0.0, 0.5);
  std::vector<D> params;
  for (auto& [name, t] : ps.items()) params.push_back(t);
  auto fn = [&](const std::vector<D>&) {
    auto map = encoder_forward(ps, "e", v);
    return o::reduce_sum_all(o::mul(map, map));
  };
  CHECK(grad_check<double>(fn, params, 1e-5) <= 1e-4);
}
