#include "stcseg/mask_fitter.hpp"

#include <cmath>

namespace stcseg {

namespace {

struct VariantName {
  LossVariant variant;
  std::string_view name;
};

constexpr VariantName kVariantNames[] = {
    {LossVariant::kBxDice, "bx_dice"},         {LossVariant::kBxDiceP, "bx_dicep"},
    {LossVariant::kBceBxDice, "bce_bx_dice"},  {LossVariant::kBceBxDiceP, "bce_bx_dicep"},
    {LossVariant::kBdBxDice, "bd_bx_dice"},    {LossVariant::kBdBxDiceP, "bd_bx_dicep"},
};

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double s = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    k[t + radius] = std::exp(-0.5 * t * t / (sigma * sigma));
    s += k[t + radius];
  }
  for (double& v : k) v /= s;
  return k;
}

}  // namespace

std::string_view to_string(LossVariant v) {
  for (const auto& e : kVariantNames) {
    if (e.variant == v) return e.name;
  }
  return "unknown";
}

LossVariant parse_loss_variant(std::string_view name) {
  for (const auto& e : kVariantNames) {
    if (e.name == name) return e.variant;
  }
  throw Error("unknown loss variant '" + std::string(name) + "'");
}

ObjectiveSpec objective_for(LossVariant v) {
  switch (v) {
    case LossVariant::kBxDice: return {PixelTerm::kNone, false};
    case LossVariant::kBxDiceP: return {PixelTerm::kNone, true};
    case LossVariant::kBceBxDice: return {PixelTerm::kBce, false};
    case LossVariant::kBceBxDiceP: return {PixelTerm::kBce, true};
    case LossVariant::kBdBxDice: return {PixelTerm::kBoundary, false};
    case LossVariant::kBdBxDiceP: return {PixelTerm::kBoundary, true};
  }
  return {};
}

void FitConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error("fit config: learning_rate must be finite and >= 0");
  }
  if (steps < 1) throw Error("fit config: steps must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("fit config: momentum must be in [0, 1)");
  if (!std::isfinite(init_logit)) throw Error("fit config: init_logit must be finite");
  if (!(coarse_sigma >= 0.0)) throw Error("fit config: coarse_sigma must be >= 0");
  signal.validate();
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw Error("iou: mask dimensions differ");
  }
  const auto av = a.values();
  const auto bv = b.values();
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t k = 0; k < av.size(); ++k) {
    inter += (av[k] & bv[k]);
    uni += (av[k] | bv[k]);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

ScalarGrid gaussian_blur(const ScalarGrid& g, double sigma) {
  if (sigma <= 0.0) return g;
  const auto k = gaussian_kernel(sigma);
  const long r = static_cast<long>(k.size() / 2);
  const long h = static_cast<long>(g.height());
  const long w = static_cast<long>(g.width());
  ScalarGrid tmp(g.height(), g.width());
  for (long i = 0; i < h; ++i) {
    for (long j = 0; j < w; ++j) {
      double s = 0.0;
      const long lo = std::max(-r, -j);
      const long hi = std::min(r, w - 1 - j);
      for (long t = lo; t <= hi; ++t) s += k[t + r] * g(i, j + t);
      tmp(i, j) = s;
    }
  }
  ScalarGrid out(g.height(), g.width());
  for (long i = 0; i < h; ++i) {
    const long lo = std::max(-r, -i);
    const long hi = std::min(r, h - 1 - i);
    for (long j = 0; j < w; ++j) {
      double s = 0.0;
      for (long t = lo; t <= hi; ++t) s += k[t + r] * tmp(i + t, j);
      out(i, j) = s;
    }
  }
  return out;
}

FitResult fit_to_label(const BinaryMask& label, const BBox& box, const FitConfig& cfg,
                       const BinaryMask* gt_mask) {
  cfg.validate();
  const std::size_t h = label.height();
  const std::size_t w = label.width();
  if (!box.valid() || !clamp_box(box, h, w).valid()) throw Error("fit: invalid box");
  if (gt_mask && (gt_mask->height() != h || gt_mask->width() != w)) {
    throw Error("fit: ground-truth mask dimensions differ");
  }
  const ObjectiveSpec spec = objective_for(cfg.loss_variant);
  const bool coarse = cfg.coarse_sigma > 0.0;

  ScalarGrid fine(h, w, cfg.init_logit);
  ScalarGrid coarse_params(h, w);
  ScalarGrid v_fine(h, w);
  ScalarGrid v_coarse(h, w);
  ScalarGrid logits = fine;
  GradGrid grad;

  FitResult result;
  result.loss_curve.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const LossBreakdown loss = evaluate_objective(logits, label, box, spec, &grad);
    if (!std::isfinite(loss.total)) throw Error("diverged");
    result.loss_curve.push_back(loss.total);

    auto vf = v_fine.values();
    auto f = fine.values();
    const auto gv = grad.values();
    for (std::size_t k = 0; k < f.size(); ++k) {
      vf[k] = cfg.momentum * vf[k] - cfg.learning_rate * gv[k];
      f[k] += vf[k];
    }
    if (coarse) {
      const ScalarGrid gc = gaussian_blur(grad, cfg.coarse_sigma);
      auto vc = v_coarse.values();
      auto c = coarse_params.values();
      const auto gcv = gc.values();
      for (std::size_t k = 0; k < c.size(); ++k) {
        vc[k] = cfg.momentum * vc[k] - cfg.learning_rate * gcv[k];
        c[k] += vc[k];
      }
      logits = gaussian_blur(coarse_params, cfg.coarse_sigma);
      auto l = logits.values();
      for (std::size_t k = 0; k < l.size(); ++k) l[k] += f[k];
    } else {
      logits = fine;
    }
    for (double z : logits.values()) {
      if (!std::isfinite(z)) throw Error("diverged");
    }
  }

  result.final_probs = sigmoid_map(logits);
  result.final_mask = threshold(result.final_probs, 0.5);
  result.pseudo_label = label;
  if (gt_mask) result.iou_vs_gt = iou(result.final_mask, *gt_mask);
  return result;
}

FitResult fit_mask(const ScalarGrid& depth, const VectorGrid& flow, const BBox& box,
                   const FitConfig& cfg, const BinaryMask* gt_mask) {
  cfg.validate();
  const BinaryMask label = generate_pseudo_label(depth, flow, cfg.signal, cfg.signal_source);
  return fit_to_label(label, box, cfg, gt_mask);
}

}  // namespace stcseg
