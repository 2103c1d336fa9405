#include "psim/losses.hpp"

#include <stdexcept>

namespace psim {

namespace {

int batch_of(const Tensor& t) { return t.rank() >= 2 ? t.dim(0) : 1; }

// Sum within samples, mean over the batch: total sum / N.
Value reduce_batch(Graph& g, Value per_element, int n) {
  return g.mul_scalar(g.sum(per_element), 1.0 / n);
}

Value safe_log(Graph& g, Value x, LogMode mode) {
  return mode == LogMode::kStrict ? g.log(x) : g.log_clamped(x, 1e-12);
}

}  // namespace

void LossWeights::validate() const {
  if (lambda_feat < 0.0 || lambda_adv < 0.0 || lambda_img < 0.0)
    throw std::invalid_argument("loss weights must be nonnegative");
  if (lambda_feat == 0.0 && lambda_adv == 0.0 && lambda_img == 0.0)
    throw std::invalid_argument("at least one loss weight must be positive");
}

Value loss_img_se(Graph& g, Value gen, Value target) {
  const int n = batch_of(g.value(gen));
  return reduce_batch(g, g.square(g.sub(gen, target)), n);
}

Value loss_img_l1(Graph& g, Value gen, Value target) {
  const int n = batch_of(g.value(gen));
  return reduce_batch(g, g.abs(g.sub(gen, target)), n);
}

Value loss_feat(Graph& g, Value gen_img, Value target_img, const Network& comp,
                const std::string& tap) {
  Value fg = comparator_features(comp, g, gen_img, tap);
  Value ft = g.detach(comparator_features(comp, g, target_img, tap));
  const int n = batch_of(g.value(fg));
  return reduce_batch(g, g.square(g.sub(fg, ft)), n);
}

Value loss_discr(Graph& g, Value d_real, Value d_fake, LogMode mode) {
  const Tensor& r = g.value(d_real);
  if (!g.value(d_fake).same_shape(r))
    throw std::invalid_argument("loss_discr: probability shapes differ: " + shape_str(r.shape) +
                                " vs " + shape_str(g.value(d_fake).shape));
  const int n = r.rank() >= 1 ? r.dim(0) : 1;
  Value real_term = safe_log(g, d_real, mode);
  Value fake_term = safe_log(g, g.add_scalar(g.neg(d_fake), 1.0), mode);
  return g.neg(reduce_batch(g, g.add(real_term, fake_term), n));
}

Value loss_adv(Graph& g, Value d_fake, LogMode mode) {
  const Tensor& f = g.value(d_fake);
  const int n = f.rank() >= 1 ? f.dim(0) : 1;
  return g.neg(reduce_batch(g, safe_log(g, d_fake, mode), n));
}

Value composite_loss(Graph& g, const LossWeights& w, Value feat, Value adv, Value img) {
  w.validate();
  Value total{};
  auto accumulate = [&](double lambda, Value term, const char* name) {
    if (lambda == 0.0) return;
    if (!term.valid())
      throw std::invalid_argument(std::string("composite_loss: ") + name +
                                  " weight is positive but the term is missing");
    Value scaled = g.mul_scalar(term, lambda);
    total = total.valid() ? g.add(total, scaled) : scaled;
  };
  accumulate(w.lambda_feat, feat, "feat");
  accumulate(w.lambda_adv, adv, "adv");
  accumulate(w.lambda_img, img, "img");
  return total;
}

Value reparameterize(Graph& g, Value mu, Value sigma, Value eps) {
  return g.add(mu, g.mul(sigma, eps));
}

Value kl_loss(Graph& g, Value mu, Value sigma) {
  const Tensor& s = g.value(sigma);
  if (!g.value(mu).same_shape(s))
    throw std::invalid_argument("kl_loss: mu and sigma shapes differ: " +
                                shape_str(g.value(mu).shape) + " vs " + shape_str(s.shape));
  for (int64_t i = 0; i < s.numel(); ++i)
    if (s[i] <= 0.0) throw std::domain_error("kl_loss: sigma must be positive, got " + std::to_string(s[i]));
  const int n = batch_of(s);
  Value sq_mu = g.square(mu);
  Value sq_sigma = g.square(sigma);
  Value log_var = g.log(sq_sigma);
  Value body = g.sub(g.add(sq_mu, sq_sigma), log_var);
  return g.mul_scalar(g.sum(body), 0.5 / n);
}

double loss_img_se(const Tensor& gen, const Tensor& target) {
  Graph g;
  return g.value(loss_img_se(g, g.leaf(gen), g.leaf(target))).item();
}

double loss_discr(const Tensor& d_real, const Tensor& d_fake) {
  Graph g;
  return g.value(loss_discr(g, g.leaf(d_real), g.leaf(d_fake))).item();
}

double loss_adv(const Tensor& d_fake) {
  Graph g;
  return g.value(loss_adv(g, g.leaf(d_fake))).item();
}

double kl_loss(const Tensor& mu, const Tensor& sigma) {
  Graph g;
  return g.value(kl_loss(g, g.leaf(mu), g.leaf(sigma))).item();
}

}  // namespace psim
