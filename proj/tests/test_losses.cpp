#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "psim/fd.hpp"
#include "psim/losses.hpp"
#include "psim/nn.hpp"
#include "psim/rng.hpp"

using namespace psim;

namespace {

// Real-class probability of a 1-logit discriminator head: sigmoid via a
// 2-way softmax against a zero logit.
Value sigmoid_prob(Graph& g, Value z_col) {
  const Tensor& z = g.value(z_col);
  Value zeros = g.leaf(Tensor({z.dim(0), 1}), false);
  return g.slice_col(g.softmax2(g.concat_cols(z_col, zeros)), 0);
}

Network identity_comparator(int image_size) {
  PresetOptions opt;
  opt.image_size = image_size;
  opt.scale = 0.125;
  return build(preset_specs(opt).at("comparator_tiny"), InitScheme::kGlorotUniform, 77);
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("loss_img values") {
  Tensor a({2});
  a[0] = 1.0;
  a[1] = 1.0;
  Tensor b({2});
  CHECK(loss_img_se(a, a) == 0.0);
  CHECK(loss_img_se(a, b) == doctest::Approx(2.0).epsilon(1e-12));  // single sample vector

  // batched: mean over batch of per-sample sums
  Tensor g2({2, 2});
  g2[0] = 1.0;
  g2[1] = 1.0;
  g2[2] = 3.0;
  g2[3] = 0.0;
  Tensor t2({2, 2});
  t2[2] = 1.0;
  CHECK(loss_img_se(g2, t2) == doctest::Approx((2.0 + 4.0) / 2.0));
}

TEST_CASE("loss_img gradient is 2(gen-target)") {
  RngStream rng(401);
  Tensor gen = Tensor::gaussian({2, 3}, rng);
  Tensor target = Tensor::gaussian({2, 3}, rng);
  Graph g;
  Value gv = g.leaf(gen, true);
  g.backward(loss_img_se(g, gv, g.leaf(target)));
  const Tensor& gx = g.grad(gv);
  for (int64_t i = 0; i < gen.numel(); ++i)
    CHECK(gx[i] == doctest::Approx(2.0 * (gen[i] - target[i]) / 2.0));  // batch of 2

  auto rep = fd_check({gen}, [&](Graph& h, const std::vector<Value>& in) {
    return loss_img_se(h, in[0], h.leaf(target));
  });
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("loss_img_l1 gradient away from ties") {
  RngStream rng(402);
  Tensor gen = Tensor::gaussian({2, 3}, rng);
  Tensor target = Tensor::gaussian({2, 3}, rng);  // gaussian draws never tie exactly
  auto rep = fd_check({gen}, [&](Graph& h, const std::vector<Value>& in) {
    return loss_img_l1(h, in[0], h.leaf(target));
  });
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("loss_feat is zero on identical inputs and matches a two-pass oracle") {
  Network comp = identity_comparator(16);
  comp.trainable = false;
  RngStream rng(403);
  Tensor img = Tensor::gaussian({2, 3, 16, 16}, rng);
  Tensor other = Tensor::gaussian({2, 3, 16, 16}, rng);

  Graph g;
  Value same = loss_feat(g, g.leaf(img), g.leaf(img), comp, "conv2");
  CHECK(g.value(same).item() == 0.0);

  Value lf = loss_feat(g, g.leaf(img), g.leaf(other), comp, "conv2");

  // independent two-pass recomputation
  Graph h;
  const Tensor fa = h.value(comparator_features(comp, h, h.leaf(img), "conv2"));
  const Tensor fb = h.value(comparator_features(comp, h, h.leaf(other), "conv2"));
  double want = 0.0;
  for (int64_t i = 0; i < fa.numel(); ++i) want += (fa[i] - fb[i]) * (fa[i] - fb[i]);
  want /= fa.dim(0);
  CHECK(g.value(lf).item() == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("identity-tap loss_feat equals loss_img") {
  Network comp = identity_comparator(16);
  RngStream rng(404);
  Tensor a = Tensor::gaussian({3, 3, 16, 16}, rng);
  Tensor b = Tensor::gaussian({3, 3, 16, 16}, rng);
  Graph g;
  Value li = loss_img_se(g, g.leaf(a), g.leaf(b));
  Value lf = loss_feat(g, g.leaf(a), g.leaf(b), comp, "input");
  CHECK(g.value(lf).item() == g.value(li).item());  // identical reduction order
}

TEST_CASE("loss_feat detaches the target branch") {
  Network comp = identity_comparator(16);
  comp.trainable = false;
  RngStream rng(405);
  Tensor a = Tensor::gaussian({1, 3, 16, 16}, rng);
  Tensor b = Tensor::gaussian({1, 3, 16, 16}, rng);
  Graph g;
  Value gv = g.leaf(a, true);
  Value tv = g.leaf(b, true);
  g.backward(loss_feat(g, gv, tv, comp, "input"));
  CHECK(g.has_grad(gv));
  CHECK(!g.has_grad(tv));
}

TEST_CASE("adversarial loss analytic values") {
  Tensor half = Tensor::scalar(0.5);
  CHECK(loss_discr(half, half) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

  Tensor one = Tensor::scalar(1.0);
  CHECK(loss_adv(one) == 0.0);

  Tensor near_one = Tensor::scalar(1.0 - 1e-12);
  Tensor near_zero = Tensor::scalar(1e-12);
  CHECK(loss_discr(near_one, near_zero) == doctest::Approx(0.0).epsilon(1e-9));

  // batch mean
  Tensor r({2});
  r[0] = 0.5;
  r[1] = 0.5;
  CHECK(loss_discr(r, r) == doctest::Approx(2.0 * std::log(2.0)));
}

TEST_CASE("strict mode rejects degenerate probabilities, train mode clamps") {
  Graph g;
  Tensor zero = Tensor::scalar(0.0);
  Tensor one = Tensor::scalar(1.0);
  CHECK_THROWS_AS(loss_adv(g, g.leaf(zero), LogMode::kStrict), std::domain_error);
  CHECK_THROWS_AS(loss_discr(g, g.leaf(zero), g.leaf(Tensor::scalar(0.5)), LogMode::kStrict),
                  std::domain_error);
  CHECK_THROWS_AS(loss_discr(g, g.leaf(Tensor::scalar(0.5)), g.leaf(one), LogMode::kStrict),
                  std::domain_error);

  Graph h;
  const double huge = -std::log(1e-12);
  CHECK(h.value(loss_adv(h, h.leaf(zero), LogMode::kTrain)).item() == doctest::Approx(huge));
  CHECK(h.value(loss_discr(h, h.leaf(zero), h.leaf(one), LogMode::kTrain)).item() ==
        doctest::Approx(2.0 * huge));
}

TEST_CASE("adversarial gradients match finite differences") {
  Tensor probs({3});
  probs[0] = 0.3;
  probs[1] = 0.6;
  probs[2] = 0.9;
  Tensor fakes({3});
  fakes[0] = 0.2;
  fakes[1] = 0.5;
  fakes[2] = 0.8;
  auto rep = fd_check({probs, fakes}, [](Graph& g, const std::vector<Value>& in) {
    return loss_discr(g, in[0], in[1]);
  });
  CHECK(rep.max_rel_err < 1e-6);
  rep = fd_check({fakes}, [](Graph& g, const std::vector<Value>& in) {
    return loss_adv(g, in[0]);
  });
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("composite loss") {
  Graph g;
  Value f = g.leaf(Tensor::scalar(1.0));
  Value a = g.leaf(Tensor::scalar(1.0));
  Value i = g.leaf(Tensor::scalar(1.0));

  CHECK(g.value(composite_loss(g, {1, 0, 0}, f, Value{}, Value{})).item() == 1.0);
  CHECK(g.value(composite_loss(g, {0, 0, 1}, Value{}, Value{}, i)).item() == 1.0);
  CHECK(g.value(composite_loss(g, {2, 3, 4}, f, a, i)).item() == doctest::Approx(9.0));

  // linear in each weight
  Value t1 = composite_loss(g, {2, 3, 4}, f, a, i);
  Value t2 = composite_loss(g, {4, 3, 4}, f, a, i);
  CHECK(g.value(t2).item() - g.value(t1).item() == doctest::Approx(2.0));

  CHECK_THROWS_AS(composite_loss(g, {0, 0, 0}, f, a, i), std::invalid_argument);
  CHECK_THROWS_AS(composite_loss(g, {-1, 0, 1}, f, a, i), std::invalid_argument);
  CHECK_THROWS_AS(composite_loss(g, {1, 1, 1}, f, Value{}, i), std::invalid_argument);
}

TEST_CASE("reparameterize") {
  Graph g;
  Tensor mu = Tensor::full({1, 2}, 1.0);
  Tensor sigma = Tensor::full({1, 2}, 2.0);
  Tensor eps = Tensor::full({1, 2}, 0.5);
  CHECK(g.value(reparameterize(g, g.leaf(mu), g.leaf(sigma), g.leaf(eps)))[0] == 2.0);

  Tensor eps0({1, 2});
  CHECK(g.value(reparameterize(g, g.leaf(mu), g.leaf(sigma), g.leaf(eps0)))[0] == 1.0);
  Tensor sig0({1, 2});
  CHECK(g.value(reparameterize(g, g.leaf(mu), g.leaf(sig0), g.leaf(eps)))[0] == 1.0);
}

TEST_CASE("reparameterized sample carries gradients to mu and sigma") {
  RngStream rng(406);
  Tensor mu = Tensor::gaussian({1, 2}, rng);
  Tensor sigma({1, 2});
  sigma[0] = 0.7;
  sigma[1] = 1.3;
  Tensor eps = Tensor::gaussian({1, 2}, rng);
  Tensor lw = Tensor::gaussian({1, 2}, rng);
  auto rep = fd_check({mu, sigma}, [&](Graph& g, const std::vector<Value>& in) {
    Value z = reparameterize(g, in[0], in[1], g.leaf(eps));
    return g.sum(g.mul(g.square(z), g.leaf(lw)));
  });
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("kl loss analytic values") {
  Tensor mu0({1, 1});
  Tensor sig1 = Tensor::full({1, 1}, 1.0);
  CHECK(kl_loss(mu0, sig1) == doctest::Approx(0.5).epsilon(1e-12));

  Tensor mu1 = Tensor::full({1, 1}, 1.0);
  CHECK(kl_loss(mu1, sig1) == doctest::Approx(1.0).epsilon(1e-12));

  // batch of 2 identical samples keeps the per-sample value
  Tensor mu2 = Tensor::full({2, 1}, 1.0);
  Tensor sig2 = Tensor::full({2, 1}, 1.0);
  CHECK(kl_loss(mu2, sig2) == doctest::Approx(1.0));

  CHECK_THROWS_AS(kl_loss(mu0, Tensor({1, 1})), std::domain_error);
  Tensor sneg = Tensor::full({1, 1}, -1.0);
  CHECK_THROWS_AS(kl_loss(mu0, sneg), std::domain_error);
}

TEST_CASE("kl gradient vs finite differences") {
  RngStream rng(407);
  Tensor mu = Tensor::gaussian({2, 3}, rng);
  Tensor sigma({2, 3});
  for (int64_t i = 0; i < sigma.numel(); ++i) sigma[i] = 0.4 + rng.next_double();
  auto rep = fd_check({mu, sigma}, [](Graph& g, const std::vector<Value>& in) {
    return kl_loss(g, in[0], in[1]);
  });
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("kl is minimized at mu=0 sigma=1") {
  Tensor mu0({1, 3});
  Tensor sig1 = Tensor::full({1, 3}, 1.0);
  const double base = kl_loss(mu0, sig1);
  RngStream rng(408);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor mu = Tensor::gaussian({1, 3}, rng, 0.0, 0.3);
    Tensor sig({1, 3});
    for (int64_t i = 0; i < 3; ++i) sig[i] = 1.0 + 0.3 * rng.next_gaussian();
    bool valid = true;
    for (int64_t i = 0; i < 3; ++i) valid = valid && sig[i] > 0.0;
    if (!valid) continue;
    CHECK(kl_loss(mu, sig1) >= base);
    CHECK(kl_loss(mu0, sig) >= base);
  }
}

TEST_CASE("composite gradient on a 4-parameter toy gan matches fd") {
  // G(x) = wg x + bg; D(h) = sigmoid(wd h + bd). Composite with identity
  // comparator reduces feat to img; all three terms active.
  RngStream rng(409);
  Tensor wg = Tensor::gaussian({1, 1}, rng);
  Tensor bg = Tensor::gaussian({1}, rng);
  Tensor wd = Tensor::gaussian({1, 1}, rng);
  Tensor bd = Tensor::gaussian({1}, rng);
  Tensor x = Tensor::gaussian({4, 1}, rng);
  Tensor y = Tensor::gaussian({4, 1}, rng);

  auto build_loss = [&](Graph& g, const std::vector<Value>& p) {
    Value gen = g.fc(g.leaf(x), p[0], p[1]);
    Value d_fake = sigmoid_prob(g, g.fc(gen, p[2], p[3]));
    Value feat = loss_img_se(g, gen, g.leaf(y));  // identity comparator
    Value adv = loss_adv(g, d_fake, LogMode::kTrain);
    Value img = loss_img_se(g, gen, g.leaf(y));
    return composite_loss(g, {0.7, 0.2, 1.1}, feat, adv, img);
  };
  auto rep = fd_check({wg, bg, wd, bd}, build_loss);
  CHECK(rep.max_rel_err < 1e-4);
}

}  // TEST_SUITE
