#include "psim/optim.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace psim {

void adam_step(std::map<std::string, Tensor>& params,
               const std::map<std::string, Tensor>& grads, AdamState& state) {
  // Validate everything first so a bad gradient leaves no parameter touched.
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end())
      throw std::invalid_argument("adam_step: gradient for unknown parameter '" + name + "'");
    if (!g.same_shape(it->second))
      throw std::invalid_argument("adam_step: gradient shape " + shape_str(g.shape) +
                                  " does not match parameter '" + name + "' " +
                                  shape_str(it->second.shape));
    for (int64_t i = 0; i < g.numel(); ++i)
      if (!std::isfinite(g[i])) {
        std::ostringstream os;
        os << "adam_step: non-finite gradient (" << g[i] << ") in parameter '" << name
           << "' at element " << i << "; step aborted";
        throw std::runtime_error(os.str());
      }
  }

  const AdamConfig& c = state.cfg;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    AdamSlot& slot = state.slots[name];
    if (!slot.m.same_shape(p)) slot.m = Tensor(p.shape);
    if (!slot.v.same_shape(p)) slot.v = Tensor(p.shape);
    for (int64_t i = 0; i < p.numel(); ++i) {
      slot.m[i] = c.beta1 * slot.m[i] + (1.0 - c.beta1) * g[i];
      slot.v[i] = c.beta2 * slot.v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = slot.m[i] / bc1;
      const double v_hat = slot.v[i] / bc2;
      p[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps_hat);
    }
  }
}

std::map<std::string, Tensor> collect_grads(
    const Graph& g, const std::vector<std::pair<std::string, Value>>& params) {
  std::map<std::string, Tensor> out;
  for (const auto& [name, v] : params)
    if (g.has_grad(v)) out.emplace(name, g.grad(v));
  return out;
}

GateDecision gate_discriminator(double loss_discr, double loss_adv, double threshold) {
  GateDecision d;
  if (loss_adv <= 0.0) {
    d.warning = true;  // ratio undefined; keep the discriminator learning
    return d;
  }
  d.ratio = loss_discr / loss_adv;
  d.update = !(d.ratio < threshold);
  return d;
}

DivergenceError::DivergenceError(const LossReport& r)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "training diverged: total loss " << r.total << " (feat " << r.feat << ", adv "
           << r.adv << ", img " << r.img << ", kl " << r.kl << ")";
        return os.str();
      }()),
      report(r) {}

namespace {

// Temporarily marks networks non-trainable; restores on scope exit.
class FreezeScope {
 public:
  void freeze(Network& n) {
    saved_.emplace_back(&n, n.trainable);
    n.trainable = false;
  }
  ~FreezeScope() {
    for (auto& [n, t] : saved_) n->trainable = t;
  }

 private:
  std::vector<std::pair<Network*, bool>> saved_;
};

// Probability of the "real" class: column 0 of the two-way softmax head.
Value real_prob(Graph& g, Value discr_out) { return g.slice_col(discr_out, 0); }

void apply_part_updates(Graph& g, TrainState& state, const std::vector<PartForward>& parts) {
  for (const auto& pf : parts) {
    auto it = state.gen_parts.find(pf.role);
    if (it == state.gen_parts.end())
      throw std::invalid_argument("train_step: generator forward names unknown part '" + pf.role +
                                  "'");
    adam_step(it->second.net.params, collect_grads(g, pf.params), it->second.opt);
  }
}

}  // namespace

LossReport train_step(TrainState& state, const Tensor& x, const Tensor& y,
                      const GeneratorForward& gen_forward, const TrainStepOptions& opt) {
  opt.weights.validate();
  const bool use_feat = opt.weights.lambda_feat > 0.0;
  const bool use_adv = opt.weights.lambda_adv > 0.0;
  const bool use_img = opt.weights.lambda_img > 0.0;
  if (use_feat && opt.comparator == nullptr)
    throw std::invalid_argument("train_step: lambda_feat > 0 requires a comparator");
  if (use_adv && !state.has_discr)
    throw std::invalid_argument("train_step: lambda_adv > 0 requires a discriminator");

  for (auto& [role, part] : state.gen_parts) part.net.mode = Network::Mode::kTrain;
  if (state.has_discr) state.discr.net.mode = Network::Mode::kTrain;

  LossReport report;

  // --- Discriminator update (first), on its own forward passes. ---
  if (use_adv) {
    Graph g;
    GenBuild fake;
    {
      FreezeScope freeze;
      for (auto& [role, part] : state.gen_parts) freeze.freeze(part.net);
      fake = gen_forward(g, state, x);
    }
    Value fake_img = g.detach(fake.image);
    Value side{};
    if (opt.side != nullptr) side = g.leaf(*opt.side);
    ForwardResult on_real = forward(state.discr.net, g, g.leaf(y), &state.dropout_rng, side);
    ForwardResult on_fake =
        forward(state.discr.net, g, fake_img, &state.dropout_rng, side, &on_real.params);
    Value p_real = real_prob(g, on_real.out);
    Value p_fake = real_prob(g, on_fake.out);
    Value l_discr = loss_discr(g, p_real, p_fake, opt.log_mode);
    Value l_adv_probe = loss_adv(g, p_fake, opt.log_mode);

    report.discr = g.value(l_discr).item();
    GateDecision gate =
        gate_discriminator(report.discr, g.value(l_adv_probe).item(), state.gate_threshold);
    report.gate_ratio = gate.ratio;
    report.gate_update = gate.update;
    report.gate_warning = gate.warning;
    state.discriminator_active = gate.update;

    if (gate.update) {
      g.backward(l_discr);
      adam_step(state.discr.net.params, collect_grads(g, on_real.params), state.discr.opt);
    }
  } else {
    report.gate_update = false;
    state.discriminator_active = false;
  }

  // --- Generator update, on fresh forward passes with a frozen discriminator. ---
  {
    Graph g;
    FreezeScope freeze;
    if (state.has_discr) freeze.freeze(state.discr.net);
    GenBuild gen = gen_forward(g, state, x);
    Value target = g.leaf(y);

    Value feat{}, adv{}, img{};
    if (use_feat) feat = loss_feat(g, gen.image, target, *opt.comparator, opt.tap);
    if (use_adv) {
      Value side{};
      if (opt.side != nullptr) side = g.leaf(*opt.side);
      ForwardResult on_fake = forward(state.discr.net, g, gen.image, &state.dropout_rng, side);
      adv = loss_adv(g, real_prob(g, on_fake.out), opt.log_mode);
    }
    if (use_img) {
      img = opt.l1_image ? loss_img_l1(g, gen.image, target) : loss_img_se(g, gen.image, target);
    }

    Value total = composite_loss(g, opt.weights, feat, adv, img);
    if (gen.extra_loss.valid() && gen.extra_weight != 0.0) {
      report.kl = g.value(gen.extra_loss).item();
      total = g.add(total, g.mul_scalar(gen.extra_loss, gen.extra_weight));
    }

    report.feat = use_feat ? g.value(feat).item() : 0.0;
    report.adv = use_adv ? g.value(adv).item() : 0.0;
    report.img = use_img ? g.value(img).item() : 0.0;
    report.total = g.value(total).item();
    if (!std::isfinite(report.total)) throw DivergenceError(report);

    g.backward(total);
    apply_part_updates(g, state, gen.parts);
  }

  state.iteration += 1;
  return report;
}

}  // namespace psim
