#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stcseg/grid.hpp"
#include "stcseg/puzzle_loss.hpp"
#include "stcseg/signal_gen.hpp"

namespace stcseg {

enum class LossVariant { kBxDice, kBxDiceP, kBceBxDice, kBceBxDiceP, kBdBxDice, kBdBxDiceP };

inline constexpr LossVariant kAllLossVariants[] = {
    LossVariant::kBxDice,    LossVariant::kBxDiceP,  LossVariant::kBceBxDice,
    LossVariant::kBceBxDiceP, LossVariant::kBdBxDice, LossVariant::kBdBxDiceP};

std::string_view to_string(LossVariant v);            // "bd_bx_dicep", ...
LossVariant parse_loss_variant(std::string_view name);  // throws Error on unknown names
ObjectiveSpec objective_for(LossVariant v);

// Gradient-descent stand-in for network training. The optimised logit field
// is the sum of a free per-pixel field and a Gaussian-smoothed coarse field;
// coarse_sigma = 0 leaves only the per-pixel field.
struct FitConfig {
  double learning_rate = 0.5;
  std::size_t steps = 500;
  double momentum = 0.9;
  double init_logit = 0.0;
  LossVariant loss_variant = LossVariant::kBdBxDiceP;
  double coarse_sigma = 4.0;
  SignalConfig signal;
  SignalSource signal_source = SignalSource::kFused;

  void validate() const;
};

struct FitResult {
  BinaryMask final_mask;  // probs > 0.5
  ProbGrid final_probs;
  BinaryMask pseudo_label;
  std::vector<double> loss_curve;  // one entry per step, evaluated before the update
  std::optional<double> iou_vs_gt;
};

// Intersection over union; 1 when both masks are empty.
double iou(const BinaryMask& a, const BinaryMask& b);

// Optimises the logit field against a given pseudo-label and box.
FitResult fit_to_label(const BinaryMask& label, const BBox& box, const FitConfig& cfg,
                       const BinaryMask* gt_mask = nullptr);

// Generates the pseudo-label from depth and flow, then fits.
FitResult fit_mask(const ScalarGrid& depth, const VectorGrid& flow, const BBox& box,
                   const FitConfig& cfg, const BinaryMask* gt_mask = nullptr);

// Zero-padded separable Gaussian blur truncated at 3 sigma. The kernel is
// symmetric, so the operator is its own adjoint.
ScalarGrid gaussian_blur(const ScalarGrid& g, double sigma);

}  // namespace stcseg
