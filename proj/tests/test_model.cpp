#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "neid/losses.hpp"
#include "neid/model.hpp"
#include "neid/ops.hpp"
#include "neid/rng.hpp"
#include "oracles.hpp"

using namespace neid;

namespace {

ArchConfig tiny_arch(Variant v = Variant::full) {
  ArchConfig arch;
  arch.levels = 2;
  arch.base_channels = 4;
  arch.variant = v;
  return arch;
}

template <typename T>
double total_for(const Model<T>& model, const ParamMap<T>& params,
                 const Tensor<T>& x, const Tensor<T>& tle, const Tensor<T>& tdr,
                 const LossConfig& lcfg) {
  auto out = model.forward(params, x, Mode::train);
  return total_loss(out, tle, tdr, lcfg, model.config().has_dr()).total;
}

}  // namespace

TEST_CASE("init_params is seed-deterministic with zero biases") {
  Model<float> model(tiny_arch());
  Rng a(7), b(7);
  auto pa = model.init_params(a);
  auto pb = model.init_params(b);
  REQUIRE(pa.size() == pb.size());
  for (const auto& [name, t] : pa) {
    CHECK(t.data == pb.at(name).data);
    if (name.ends_with(".b")) {
      for (float v : t.data) CHECK(v == 0.0f);
    }
  }
}

TEST_CASE("init_params weight statistics match the declared Gaussian") {
  ArchConfig arch;
  arch.levels = 4;
  arch.base_channels = 32;
  Model<float> model(arch);
  Rng rng(123);
  auto params = model.init_params(rng);
  int checked = 0;
  for (const auto& [name, t] : params) {
    if (name.ends_with(".b") || t.size() < 10000) continue;
    double sum = 0.0, sq = 0.0;
    for (float v : t.data) {
      sum += v;
      sq += static_cast<double>(v) * v;
    }
    const double n = static_cast<double>(t.size());
    const double mean = sum / n;
    const double stddev = std::sqrt(sq / n - mean * mean);
    CHECK(std::abs(mean) <= 3.0 * 0.02 / std::sqrt(n));
    CHECK(stddev == doctest::Approx(0.02).epsilon(0.05));
    ++checked;
  }
  CHECK(checked >= 10);
}

TEST_CASE("encode produces the documented pyramid") {
  ArchConfig arch;  // defaults: levels 4, base 32
  Model<float> model(arch);
  Rng rng(5);
  auto params = model.init_params(rng);
  Tensor<float> x = oracle::random_tensor<float>(rng, 2, 3, 128, 128);
  auto enc = model.encode(params, x);
  REQUIRE(enc.skips.size() == 4);
  const int want_c[4] = {32, 64, 128, 256};
  const int want_s[4] = {128, 64, 32, 16};
  for (int i = 0; i < 4; ++i) {
    CHECK(enc.skips[i].n == 2);
    CHECK(enc.skips[i].c == want_c[i]);
    CHECK(enc.skips[i].h == want_s[i]);
    CHECK(enc.skips[i].w == want_s[i]);
  }
  CHECK(enc.bottleneck.n == 2);
  CHECK(enc.bottleneck.c == 256);
  CHECK(enc.bottleneck.h == 8);
  CHECK(enc.bottleneck.w == 8);
}

TEST_CASE("all-zero input yields all-zero encoder features at init") {
  Model<float> model(tiny_arch());
  Rng rng(6);
  auto params = model.init_params(rng);
  Tensor<float> x(1, 3, 16, 16);
  auto enc = model.encode(params, x);
  for (const auto& skip : enc.skips) {
    for (float v : skip.data) CHECK(v == 0.0f);
  }
  for (float v : enc.bottleneck.data) CHECK(v == 0.0f);
}

TEST_CASE("encode rejects non-divisible geometry") {
  Model<float> model(tiny_arch());
  Rng rng(6);
  auto params = model.init_params(rng);
  Tensor<float> bad(1, 3, 18, 16);
  CHECK_THROWS_AS(model.encode(params, bad), ShapeMismatch);
  Tensor<float> bad_c(1, 4, 16, 16);
  CHECK_THROWS_AS(model.encode(params, bad_c), ShapeMismatch);
}

TEST_CASE("pixel_shuffle mapping, inverse, and permutation property") {
  // channels [a, b, c, d] on a 1x1 map become [[a, b], [c, d]]
  Tensor<float> in(1, 4, 1, 1);
  in.data = {1.0f, 2.0f, 3.0f, 4.0f};
  Tensor<float> out = nn::pixel_shuffle(in, 2);
  REQUIRE(out.c == 1);
  REQUIRE(out.h == 2);
  CHECK(out.at(0, 0, 0, 0) == 1.0f);
  CHECK(out.at(0, 0, 0, 1) == 2.0f);
  CHECK(out.at(0, 0, 1, 0) == 3.0f);
  CHECK(out.at(0, 0, 1, 1) == 4.0f);

  Rng rng(8);
  Tensor<float> big = oracle::random_tensor<float>(rng, 3, 12, 5, 7);
  Tensor<float> shuffled = nn::pixel_shuffle(big, 2);
  CHECK(shuffled.n == 3);
  CHECK(shuffled.c == 3);
  CHECK(shuffled.h == 10);
  CHECK(shuffled.w == 14);

  // bijection: unshuffle inverts, and the value multiset is preserved
  Tensor<float> back = nn::pixel_unshuffle(shuffled, 2);
  CHECK(back.data == big.data);
  auto sorted_in = big.data;
  auto sorted_out = shuffled.data;
  std::sort(sorted_in.begin(), sorted_in.end());
  std::sort(sorted_out.begin(), sorted_out.end());
  CHECK(sorted_in == sorted_out);

  Tensor<float> bad(1, 5, 2, 2);
  CHECK_THROWS_AS(nn::pixel_shuffle(bad, 2), BadChannelCount);
}

TEST_CASE("forward shape contract and DR head removal at inference") {
  for (Variant v : {Variant::unet_baseline, Variant::le_only, Variant::le_dr,
                    Variant::full}) {
    Model<float> model(tiny_arch(v));
    Rng rng(9);
    auto params = model.init_params(rng);
    Tensor<float> x = oracle::random_tensor<float>(rng, 2, 3, 32, 32);

    auto train_out = model.forward(params, x, Mode::train);
    CHECK(train_out.le_image.n == 2);
    CHECK(train_out.le_image.c == 3);
    CHECK(train_out.le_image.h == 64);
    CHECK(train_out.le_image.w == 64);
    CHECK(train_out.dr_image.has_value() == (v == Variant::le_dr || v == Variant::full));
    if (train_out.dr_image) {
      CHECK(train_out.dr_image->h == 64);
      for (float val : train_out.dr_image->data) {
        CHECK(val > 0.0f);
        CHECK(val < 1.0f);
      }
    }
    for (float val : train_out.le_image.data) {
      CHECK(val > 0.0f);
      CHECK(val < 1.0f);
    }

    auto infer_out = model.forward(params, x, Mode::infer);
    CHECK_FALSE(infer_out.dr_image.has_value());
    CHECK(infer_out.le_image.h == 64);
    // the LE image itself is unchanged by dropping the DR head
    for (std::size_t i = 0; i < infer_out.le_image.data.size(); ++i) {
      CHECK(infer_out.le_image.data[i] == train_out.le_image.data[i]);
    }
  }
}

TEST_CASE("forward accepts any /2^levels geometry and doubles it") {
  Model<float> model(tiny_arch(Variant::le_only));
  Rng rng(10);
  auto params = model.init_params(rng);
  Tensor<float> x = oracle::random_tensor<float>(rng, 1, 3, 32, 48);
  auto out = model.forward(params, x, Mode::infer);
  CHECK(out.le_image.h == 64);
  CHECK(out.le_image.w == 96);
}

TEST_CASE("forward is bitwise deterministic") {
  Model<float> model(tiny_arch());
  Rng rng(11);
  auto params = model.init_params(rng);
  Tensor<float> x = oracle::random_tensor<float>(rng, 2, 3, 16, 16);
  auto a = model.forward(params, x, Mode::train);
  auto b = model.forward(params, x, Mode::train);
  CHECK(a.le_image.data == b.le_image.data);
  CHECK(a.dr_image->data == b.dr_image->data);
}

TEST_CASE("default-arch forward: 128 to 256 with the full variant") {
  ArchConfig arch;  // levels 4, base 32, full
  Model<float> model(arch);
  Rng rng(12);
  auto params = model.init_params(rng);
  Tensor<float> x = oracle::random_tensor<float>(rng, 1, 3, 128, 128);
  auto out = model.forward(params, x, Mode::infer);
  CHECK(out.le_image.h == 256);
  CHECK(out.le_image.w == 256);
  CHECK_FALSE(out.dr_image.has_value());
  CHECK_FALSE(out.dr_features.empty());  // FF still consumes the DR decoder
}

TEST_CASE("attention weights live in (0,1); saturated excitation passes the bottleneck through") {
  ArchConfig arch = tiny_arch();
  Model<float> model(arch);
  Rng rng(13);
  auto params = model.init_params(rng);
  Tensor<float> x = oracle::random_tensor<float>(rng, 2, 3, 16, 16);

  ForwardCache<float> cache;
  model.forward(params, x, Mode::train, &cache);
  for (float w : cache.ff_w.data) {
    CHECK(w > 0.0f);
    CHECK(w < 1.0f);
  }

  // force the excitation output to ~1: fused must collapse onto the bottleneck
  for (float& b : params.at("ff.fc2.b").data) b = 40.0f;
  Tensor<float> fused =
      model.ff_fuse(params, cache.pooled.back(), cache.dr.a2[0]);
  REQUIRE(fused.same_shape(cache.pooled.back()));
  for (std::size_t i = 0; i < fused.data.size(); ++i) {
    CHECK(std::abs(fused.data[i] - cache.pooled.back().data[i]) <= 1e-5f);
  }
}

TEST_CASE("parameter gradients match central finite differences on the tiny config") {
  Model<double> model(tiny_arch());
  Rng rng(1402);
  auto params = model.init_params(rng);
  // Well-scaled random parameters (weights and biases) keep every gradient
  // above the h = 1e-5 finite-difference resolution and spread the sigmoid
  // outputs across (0,1) so the hue term is well-conditioned.
  Rng prng(555);
  for (auto& [name, t] : params) {
    for (auto& v : t.data) v = prng.normal(0.0, 0.3);
  }
  Tensor<double> x = oracle::random_tensor<double>(rng, 1, 3, 16, 16, 0.1, 0.9);
  Tensor<double> tle = oracle::random_tensor<double>(rng, 1, 3, 32, 32);
  Tensor<double> tdr = oracle::random_tensor<double>(rng, 1, 3, 32, 32);
  LossConfig lcfg;  // delta 1, lambdas 0.1

  ForwardCache<double> cache;
  auto out = model.forward(params, x, Mode::train, &cache);
  Tensor<double> grad_le, grad_dr;
  total_loss(out, tle, tdr, lcfg, true, &grad_le, &grad_dr);
  auto grads = model.backward(params, cache, out, grad_le, &grad_dr);

  const double h = 1e-5;
  double max_err = 0.0;
  Rng pick(77);
  for (auto& [name, theta] : params) {
    auto& analytic = grads.at(name);
    const int checks = theta.size() < 4 ? static_cast<int>(theta.size()) : 4;
    for (int k = 0; k < checks; ++k) {
      const std::int64_t idx = pick.uniform_int(theta.size());
      const double saved = theta.data[idx];
      theta.data[idx] = saved + h;
      const double up = total_for(model, params, x, tle, tdr, lcfg);
      theta.data[idx] = saved - h;
      const double dn = total_for(model, params, x, tle, tdr, lcfg);
      theta.data[idx] = saved;
      const double fd = (up - dn) / (2.0 * h);
      max_err = std::max(max_err, oracle::rel_err(analytic.data[idx], fd));
    }
  }
  INFO("max relative error ", max_err);
  CHECK(max_err < 1e-3);
}

TEST_CASE("encoder gradients accumulate linearly from both branches") {
  Model<double> model(tiny_arch());
  Rng rng(15);
  auto params = model.init_params(rng);
  Rng prng(556);
  for (auto& [name, t] : params) {
    for (auto& v : t.data) v = prng.normal(0.0, 0.3);
  }
  Tensor<double> x = oracle::random_tensor<double>(rng, 1, 3, 16, 16, 0.1, 0.9);
  Tensor<double> tle = oracle::random_tensor<double>(rng, 1, 3, 32, 32);
  Tensor<double> tdr = oracle::random_tensor<double>(rng, 1, 3, 32, 32);
  LossConfig lcfg;

  ForwardCache<double> cache;
  auto out = model.forward(params, x, Mode::train, &cache);
  Tensor<double> grad_le, grad_dr;
  total_loss(out, tle, tdr, lcfg, true, &grad_le, &grad_dr);

  auto joint = model.backward(params, cache, out, grad_le, &grad_dr);
  Tensor<double> zero_le = Tensor<double>::zeros_like(grad_le);
  auto le_only = model.backward(params, cache, out, grad_le, nullptr);
  auto dr_only = model.backward(params, cache, out, zero_le, &grad_dr);

  for (const auto& [name, g] : joint) {
    if (name.rfind("enc.", 0) != 0) continue;
    const auto& a = le_only.at(name);
    const auto& b = dr_only.at(name);
    for (std::int64_t i = 0; i < g.size(); ++i) {
      CHECK(std::abs(g.data[i] - (a.data[i] + b.data[i])) <= 1e-10);
    }
  }
}

TEST_CASE("encoder parameter names appear exactly once in the schema") {
  Model<float> model(tiny_arch());
  std::map<std::string, int> counts;
  for (const auto& spec : model.param_schema()) counts[spec.name] += 1;
  for (const auto& [name, count] : counts) CHECK(count == 1);
}
