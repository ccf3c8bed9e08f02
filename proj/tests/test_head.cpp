#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bevfuse/head.hpp"
#include "bevfuse/ops.hpp"
#include "gradcheck.hpp"

using namespace bevfuse;
using namespace bevfuse::testutil;

namespace {
// independent binary cross-entropy with logits
double bce_oracle(std::span<const double> logits, std::span<const double> y) {
  double acc = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    double x = logits[i];
    double sp_pos = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    double sp_neg = -x > 0 ? -x + std::log1p(std::exp(x)) : std::log1p(std::exp(-x));
    acc += y[i] * sp_neg + (1 - y[i]) * sp_pos;
  }
  return acc / static_cast<double>(logits.size());
}
}  // namespace

TEST_CASE("focal loss hand values at p = 0.5") {
  Tensor logits = Tensor::zeros({1, 1, 1});
  Tensor target = Tensor::full({1, 1, 1}, 1.0);

  FocalConfig flat;
  flat.gamma = 0.0;
  CHECK(focal_loss(logits, target, flat).item() ==
        doctest::Approx(0.693147).epsilon(1e-6));

  FocalConfig focal;
  focal.gamma = 2.0;
  CHECK(focal_loss(logits, target, focal).item() ==
        doctest::Approx(0.173287).epsilon(1e-6));
}

TEST_CASE("focal loss vanishes monotonically as confidence grows") {
  FocalConfig cfg;
  Tensor target = Tensor::full({1, 1, 1}, 1.0);
  double prev = 1e300;
  for (double x : {0.0, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    double loss = focal_loss(Tensor::full({1, 1, 1}, x), target, cfg).item();
    CHECK(loss >= 0.0);
    CHECK(loss < prev);
    prev = loss;
  }
  CHECK(prev < 1e-5);
}

TEST_CASE("focal with gamma 0 and unit alpha equals binary cross-entropy") {
  Rng rng(81);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor logits = random_tensor({3, 4, 5}, rng, false, -4, 4);
    std::vector<double> y(60);
    for (auto& v : y) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    Tensor target = Tensor::from_vector({3, 4, 5}, y);
    FocalConfig cfg;
    cfg.gamma = 0.0;
    double ours = focal_loss(logits, target, cfg).item();
    double ref = bce_oracle(logits.values(), y);
    CHECK(std::abs(ours - ref) < 1e-9);
  }
}

TEST_CASE("per-class alpha weights scale their channels") {
  Tensor logits = Tensor::zeros({2, 1, 1});
  Tensor target = Tensor::from_vector({2, 1, 1}, {1.0, 1.0});
  FocalConfig cfg;
  cfg.gamma = 0.0;
  cfg.alpha = {1.0, 0.5};
  double loss = focal_loss(logits, target, cfg).item();
  CHECK(loss == doctest::Approx(0.5 * (0.693147 + 0.5 * 0.693147)).epsilon(1e-6));
  cfg.alpha = {1.0};
  CHECK_THROWS_AS(focal_loss(logits, target, cfg), ConfigError);
}

TEST_CASE("focal loss shape mismatch raises") {
  FocalConfig cfg;
  CHECK_THROWS_AS(
      focal_loss(Tensor::zeros({2, 2, 2}), Tensor::zeros({2, 2, 3}), cfg),
      ShapeMismatch);
}

TEST_CASE("focal loss gradients certify against central differences") {
  Rng rng(82);
  FocalConfig cfg;
  cfg.gamma = 2.0;
  cfg.alpha = {0.9, 0.6};
  std::vector<double> y(2 * 3 * 3);
  for (auto& v : y) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  Tensor target = Tensor::from_vector({2, 3, 3}, y);
  std::vector<Tensor> inputs = {random_tensor({2, 3, 3}, rng, true, -3, 3)};
  double err = grad_check(
      [&](auto& t) { return focal_loss(t[0], target, cfg); }, inputs, rng);
  CHECK(err < 1e-4);
}

TEST_CASE("cross entropy agrees with a direct computation") {
  Tensor logits = Tensor::from_vector({2, 1, 2}, {1.0, 0.0, -1.0, 2.0});
  Tensor target = Tensor::from_vector({2, 1, 2}, {1, 0, 0, 1});
  double l0 = -std::log(std::exp(1.0) / (std::exp(1.0) + std::exp(-1.0)));
  double l1 = -std::log(std::exp(2.0) / (std::exp(0.0) + std::exp(2.0)));
  CHECK(cross_entropy_loss(logits, target).item() ==
        doctest::Approx(0.5 * (l0 + l1)).epsilon(1e-9));
}

TEST_CASE("predict_classes basics") {
  Tensor onehot = Tensor::from_vector({3, 1, 2}, {0, 0, 1, 0, 0, 1});
  auto cls = predict_classes(onehot);
  CHECK(cls[0] == 1);
  CHECK(cls[1] == 2);

  Tensor uniform = Tensor::full({4, 2, 2}, 0.25);
  for (int c : predict_classes(uniform)) CHECK(c == 0);

  Rng rng(83);
  Tensor logits = random_tensor({5, 3, 3}, rng, false);
  auto base = predict_classes(logits);
  Tensor shifted = add(logits, Tensor::full({1, 3, 3}, 7.5));
  CHECK(predict_classes(shifted) == base);
}

TEST_CASE("iou set arithmetic") {
  // identical maps
  std::vector<int> a = {0, 1, 1, 2};
  auto same = iou_multiclass(a, a, 3);
  for (int c = 0; c < 3; ++c) CHECK(same.per_class[static_cast<size_t>(c)] == 1.0);
  CHECK(same.mean_iou == 1.0);

  // disjoint single-class masks
  std::vector<int> p = {1, 1, 0, 0};
  std::vector<int> g = {0, 0, 1, 1};
  auto disj = iou_multiclass(p, g, 2);
  CHECK(disj.per_class[0] == 0.0);
  CHECK(disj.per_class[1] == 0.0);

  // pred {A,B}, gt {B,C} for class 1 -> 1/3
  std::vector<int> p2 = {1, 1, 0};
  std::vector<int> g2 = {0, 1, 1};
  auto third = iou_multiclass(p2, g2, 2);
  CHECK(third.per_class[1] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("iou excludes classes absent from both sides") {
  std::vector<int> p = {0, 0, 1, 1};
  std::vector<int> g = {0, 1, 1, 1};
  auto r = iou_multiclass(p, g, 4);
  CHECK(r.present[0]);
  CHECK(r.present[1]);
  CHECK_FALSE(r.present[2]);
  CHECK_FALSE(r.present[3]);
  CHECK(std::isnan(r.per_class[2]));
  CHECK(r.present_count == 2);
  double expect = 0.5 * (r.per_class[0] + r.per_class[1]);
  CHECK(r.mean_iou == doctest::Approx(expect));
}

TEST_CASE("iou is symmetric and bounded") {
  Rng rng(84);
  std::vector<int> p(50), g(50);
  for (auto& v : p) v = static_cast<int>(rng.uniform_int(0, 3));
  for (auto& v : g) v = static_cast<int>(rng.uniform_int(0, 3));
  auto ab = iou_multiclass(p, g, 4);
  auto ba = iou_multiclass(g, p, 4);
  CHECK(ab.mean_iou == doctest::Approx(ba.mean_iou));
  for (int c = 0; c < 4; ++c) {
    if (!ab.present[static_cast<size_t>(c)]) continue;
    CHECK(ab.per_class[static_cast<size_t>(c)] >= 0.0);
    CHECK(ab.per_class[static_cast<size_t>(c)] <= 1.0);
    CHECK(ab.per_class[static_cast<size_t>(c)] ==
          doctest::Approx(ba.per_class[static_cast<size_t>(c)]));
  }
  CHECK_THROWS_AS(iou_multiclass(std::span<const int>(p.data(), 10),
                                 std::span<const int>(g.data(), 9), 4),
                  ShapeMismatch);
}

TEST_CASE("decoder reaches the paper output geometry from 25x25 queries") {
  ParamStore params;
  Rng rng(85);
  Decoder dec(128, 5, params, rng, "dec");
  Tensor m_bev = random_tensor({128, 25, 25}, rng, false);
  Tensor logits = dec.decode(m_bev, 200, 200);
  CHECK(logits.shape() == Shape{5, 200, 200});
}

TEST_CASE("decoder output spatial shape is independent of values") {
  ParamStore params;
  Rng rng(86);
  Decoder dec(16, 3, params, rng, "dec");
  Tensor a = dec.decode(random_tensor({16, 13, 13}, rng, false), 100, 100);
  Tensor b = dec.decode(Tensor::zeros({16, 13, 13}), 100, 100);
  CHECK(a.shape() == b.shape());
  CHECK(a.shape() == Shape{3, 100, 100});
}

TEST_CASE("constant queries through a zero final projection give constant logits") {
  ParamStore params;
  Rng rng(87);
  Decoder dec(8, 4, params, rng, "dec");
  for (auto& e : params.entries())
    if (e.name.find("final") != std::string::npos)
      for (auto& v : e.tensor.values()) v = 0.0;
  Tensor logits = dec.decode(Tensor::full({8, 4, 4}, 0.3), 16, 16);
  for (double v : logits.values()) CHECK(v == 0.0);
}

TEST_CASE("decoder gradient reaches the latent map") {
  ParamStore params;
  Rng rng(88);
  Decoder dec(8, 2, params, rng, "dec");
  Tensor m_bev = random_tensor({8, 4, 4}, rng, true);
  Tensor logits = dec.decode(m_bev, 16, 16);
  backward(mean(mul(logits, logits)));
  REQUIRE(m_bev.has_grad());
  double norm = 0;
  for (double gv : m_bev.grad()) norm += gv * gv;
  CHECK(norm > 0.0);
}
