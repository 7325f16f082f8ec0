#pragma once

#include <utility>

#include "stcseg/grid.hpp"

namespace stcseg {

// Lower clamp applied to probabilities before taking logs.
inline constexpr double kLogClamp = 1e-7;

struct LossBreakdown {
  double l_bd = 0.0;    // pixel term (boundary term for the puzzle loss)
  double l_bx_x = 0.0;  // box term on the x projection
  double l_bx_y = 0.0;  // box term on the y projection
  double total = 0.0;
};

// Positive-only cross entropy against the pseudo-label:
//   -(1 / (h*w)) * sum_{m=1} log p
double boundary_loss(const ProbGrid& probs, const BinaryMask& label);

// Full binary cross entropy (positives and negatives), mean over pixels.
double bce_loss(const ProbGrid& probs, const BinaryMask& label);

// Dice loss with position penalty:
//   [1 - 2 sum(p g) / sum(p^2 + g^2)] + sum(max(p - g, 0)^2) / sum(g^2)
double dice_prime(const ProjectionVector& p, const ProjectionVector& g);

// The penalty part of dice_prime alone: sum(max(p - g, 0)^2) / sum(g^2).
double position_penalty(const ProjectionVector& p, const ProjectionVector& g);

// Standard dice loss 1 - 2 sum(p g) / sum(p^2 + g^2), without the penalty.
double dice_plain(const ProjectionVector& p, const ProjectionVector& g);

// (dice_prime on x projections, dice_prime on y projections).
std::pair<double, double> box_term(const ProbGrid& probs, const BBox& box);

// L_bd + L_bx evaluated on sigmoid(logits).
LossBreakdown puzzle_loss(const LogitGrid& logits, const BinaryMask& label, const BBox& box);

// Exact gradient of puzzle_loss with respect to every logit. The max
// projections route their subgradient to the lowest-index maximiser.
GradGrid puzzle_loss_grad(const LogitGrid& logits, const BinaryMask& label, const BBox& box);

// Generalised objective used by the ablation variants of the mask fitter.
enum class PixelTerm { kNone, kBoundary, kBce };

struct ObjectiveSpec {
  PixelTerm pixel = PixelTerm::kBoundary;
  bool position_penalty = true;
};

// Evaluates the objective and, when `grad` is non-null, writes d(total)/d(logit)
// into it (resized to the logit dims).
LossBreakdown evaluate_objective(const LogitGrid& logits, const BinaryMask& label,
                                 const BBox& box, const ObjectiveSpec& spec,
                                 GradGrid* grad = nullptr);

}  // namespace stcseg
