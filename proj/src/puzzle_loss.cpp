#include "stcseg/puzzle_loss.hpp"

#include <algorithm>
#include <cmath>

namespace stcseg {

namespace {

void check_same_dims(const ScalarGrid& a, const BinaryMask& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw Error("loss: prediction and label dimensions differ");
  }
}

void check_projection_pair(const ProjectionVector& p, const ProjectionVector& g) {
  if (p.size() != g.size() || p.empty()) {
    throw Error("dice: projections must have equal non-zero length");
  }
}

double sum_sq(const ProjectionVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// Loss value and d(loss)/d(p) for one projection pair.
double dice_with_grad(const ProjectionVector& p, const ProjectionVector& g, bool penalty,
                      std::vector<double>* dp) {
  check_projection_pair(p, g);
  const double gg = sum_sq(g);
  if (gg == 0.0) throw Error("empty ground-truth projection");
  double inter = 0.0;
  double denom = gg;
  for (std::size_t i = 0; i < p.size(); ++i) {
    inter += p[i] * g[i];
    denom += p[i] * p[i];
  }
  double loss = 1.0 - 2.0 * inter / denom;
  double excess = 0.0;
  if (penalty) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double e = std::max(p[i] - g[i], 0.0);
      excess += e * e;
    }
    loss += excess / gg;
  }
  if (dp) {
    dp->assign(p.size(), 0.0);
    const double d2 = denom * denom;
    for (std::size_t i = 0; i < p.size(); ++i) {
      double d = -2.0 * (g[i] * denom - 2.0 * inter * p[i]) / d2;
      if (penalty) d += 2.0 * std::max(p[i] - g[i], 0.0) / gg;
      (*dp)[i] = d;
    }
  }
  return loss;
}

ProjectionVector box_projection(std::size_t len, int lo, int hi) {
  ProjectionVector g(len, 0.0);
  for (int k = std::max(lo, 0); k < std::min<int>(hi, static_cast<int>(len)); ++k) g[k] = 1.0;
  return g;
}

}  // namespace

double boundary_loss(const ProbGrid& probs, const BinaryMask& label) {
  check_same_dims(probs, label);
  const auto p = probs.values();
  const auto m = label.values();
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (m[k]) s += std::log(std::clamp(p[k], kLogClamp, 1.0 - kLogClamp));
  }
  return -s / static_cast<double>(p.size());
}

double bce_loss(const ProbGrid& probs, const BinaryMask& label) {
  check_same_dims(probs, label);
  const auto p = probs.values();
  const auto m = label.values();
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double pc = std::clamp(p[k], kLogClamp, 1.0 - kLogClamp);
    s += m[k] ? std::log(pc) : std::log(1.0 - pc);
  }
  return -s / static_cast<double>(p.size());
}

double dice_prime(const ProjectionVector& p, const ProjectionVector& g) {
  return dice_with_grad(p, g, true, nullptr);
}

double position_penalty(const ProjectionVector& p, const ProjectionVector& g) {
  check_projection_pair(p, g);
  const double gg = sum_sq(g);
  if (gg == 0.0) throw Error("empty ground-truth projection");
  double excess = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double e = std::max(p[i] - g[i], 0.0);
    excess += e * e;
  }
  return excess / gg;
}

double dice_plain(const ProjectionVector& p, const ProjectionVector& g) {
  return dice_with_grad(p, g, false, nullptr);
}

std::pair<double, double> box_term(const ProbGrid& probs, const BBox& box) {
  const BinaryMask ind = box_indicator(box, probs.height(), probs.width());
  return {dice_prime(project_x(probs), project_x(ind)),
          dice_prime(project_y(probs), project_y(ind))};
}

LossBreakdown evaluate_objective(const LogitGrid& logits, const BinaryMask& label,
                                 const BBox& box, const ObjectiveSpec& spec, GradGrid* grad) {
  check_same_dims(logits, label);
  const std::size_t h = logits.height();
  const std::size_t w = logits.width();
  // Validates the box against the frame.
  (void)box_indicator(box, h, w);
  const BBox cb = clamp_box(box, h, w);

  const ProbGrid probs = sigmoid_map(logits);
  LossBreakdown out;
  switch (spec.pixel) {
    case PixelTerm::kNone:
      break;
    case PixelTerm::kBoundary:
      out.l_bd = boundary_loss(probs, label);
      break;
    case PixelTerm::kBce:
      out.l_bd = bce_loss(probs, label);
      break;
  }

  // Max projections with lowest-index argmax.
  ProjectionVector px(w), py(h);
  std::vector<std::size_t> arg_x(w, 0), arg_y(h, 0);
  for (std::size_t j = 0; j < w; ++j) px[j] = probs(0, j);
  for (std::size_t i = 0; i < h; ++i) py[i] = probs(i, 0);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double v = probs(i, j);
      if (v > px[j]) {
        px[j] = v;
        arg_x[j] = i;
      }
      if (v > py[i]) {
        py[i] = v;
        arg_y[i] = j;
      }
    }
  }
  const ProjectionVector gx = box_projection(w, cb.x1, cb.x2);
  const ProjectionVector gy = box_projection(h, cb.y1, cb.y2);
  std::vector<double> dpx, dpy;
  out.l_bx_x = dice_with_grad(px, gx, spec.position_penalty, grad ? &dpx : nullptr);
  out.l_bx_y = dice_with_grad(py, gy, spec.position_penalty, grad ? &dpy : nullptr);
  out.total = out.l_bd + out.l_bx_x + out.l_bx_y;

  if (grad) {
    *grad = GradGrid(h, w);
    const double inv_n = 1.0 / static_cast<double>(h * w);
    const auto p = probs.values();
    const auto m = label.values();
    auto gv = grad->values();
    // d(loss)/d(p) first, then chain through the sigmoid.
    if (spec.pixel != PixelTerm::kNone) {
      for (std::size_t k = 0; k < p.size(); ++k) {
        const bool clamped = p[k] < kLogClamp || p[k] > 1.0 - kLogClamp;
        if (clamped) continue;
        if (m[k]) {
          gv[k] = -inv_n / p[k];
        } else if (spec.pixel == PixelTerm::kBce) {
          gv[k] = inv_n / (1.0 - p[k]);
        }
      }
    }
    for (std::size_t j = 0; j < w; ++j) (*grad)(arg_x[j], j) += dpx[j];
    for (std::size_t i = 0; i < h; ++i) (*grad)(i, arg_y[i]) += dpy[i];
    for (std::size_t k = 0; k < p.size(); ++k) gv[k] *= p[k] * (1.0 - p[k]);
  }
  return out;
}

LossBreakdown puzzle_loss(const LogitGrid& logits, const BinaryMask& label, const BBox& box) {
  return evaluate_objective(logits, label, box, ObjectiveSpec{});
}

GradGrid puzzle_loss_grad(const LogitGrid& logits, const BinaryMask& label, const BBox& box) {
  GradGrid g;
  evaluate_objective(logits, label, box, ObjectiveSpec{}, &g);
  return g;
}

}  // namespace stcseg
