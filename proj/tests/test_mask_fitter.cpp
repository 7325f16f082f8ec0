#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stcseg/mask_fitter.hpp"
#include "test_frames.hpp"

using namespace stcseg;

namespace {

BinaryMask filled(std::size_t h, std::size_t w, const BBox& b) { return box_indicator(b, h, w); }

double dot(const ScalarGrid& a, const ScalarGrid& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a.values()[k] * b.values()[k];
  return s;
}

}  // namespace

TEST(Iou, Examples) {
  EXPECT_DOUBLE_EQ(iou(BinaryMask(4, 4), BinaryMask(4, 4)), 1.0);
  const BinaryMask a = filled(4, 4, {0, 0, 2, 2});
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, filled(4, 4, {2, 2, 4, 4})), 0.0);
  // 4 and 4 pixels overlapping in 2: 2 / 6.
  EXPECT_DOUBLE_EQ(iou(a, filled(4, 4, {1, 0, 3, 2})), 2.0 / 6.0);
  EXPECT_THROW(iou(a, BinaryMask(4, 5)), Error);
}

TEST(GaussianBlur, SelfAdjoint) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 1.0);
  ScalarGrid x(17, 23), y(17, 23);
  for (double& v : x.values()) v = n(rng);
  for (double& v : y.values()) v = n(rng);
  for (double sigma : {0.7, 2.0, 4.0}) {
    EXPECT_NEAR(dot(gaussian_blur(x, sigma), y), dot(x, gaussian_blur(y, sigma)), 1e-10);
  }
}

TEST(GaussianBlur, PreservesInteriorConstant) {
  const ScalarGrid b = gaussian_blur(ScalarGrid(40, 40, 2.0), 2.0);
  EXPECT_NEAR(b(20, 20), 2.0, 1e-9);
  EXPECT_LT(b(0, 0), 2.0);
}

TEST(FitToLabel, ZeroLearningRateKeepsUniformHalf) {
  FitConfig cfg;
  cfg.steps = 1;
  cfg.learning_rate = 0.0;
  const BinaryMask label = filled(16, 16, {4, 4, 8, 8});
  const FitResult r = fit_to_label(label, {2, 2, 12, 12}, cfg);
  for (double p : r.final_probs.values()) EXPECT_DOUBLE_EQ(p, 0.5);
  ASSERT_EQ(r.loss_curve.size(), 1u);
  EXPECT_FALSE(r.iou_vs_gt.has_value());
}

TEST(FitToLabel, LossCurveHasOneEntryPerStepAndSettles) {
  FitConfig cfg;
  cfg.steps = 200;
  const testing_frames::SquareFrame f = testing_frames::square_frame();
  const FitResult r = fit_mask(f.depth, f.flow, f.square, cfg);
  ASSERT_EQ(r.loss_curve.size(), 200u);
  EXPECT_LT(r.loss_curve.back(), r.loss_curve.front());
  // Momentum may overshoot early; the tail must have stopped climbing.
  const double tail_start = r.loss_curve[180];
  for (std::size_t k = 181; k < 200; ++k) EXPECT_LE(r.loss_curve[k], tail_start + 1e-6);
}

// Object exactly filling its box on a 96x96 frame.
TEST(FitMask, CleanSquareIsRecovered) {
  const BBox box{24, 24, 64, 64};
  ScalarGrid depth(96, 96, 5.0);
  VectorGrid flow(96, 96, 2);
  for (int i = box.y1; i < box.y2; ++i) {
    for (int j = box.x1; j < box.x2; ++j) {
      depth(i, j) = 3.0;
      flow(i, j, 0) = 3.0;
    }
  }
  const BinaryMask gt = filled(96, 96, box);
  const FitResult r = fit_mask(depth, flow, box, FitConfig{}, &gt);
  ASSERT_TRUE(r.iou_vs_gt.has_value());
  EXPECT_GE(*r.iou_vs_gt, 0.95);
  EXPECT_DOUBLE_EQ(*r.iou_vs_gt, iou(r.final_mask, gt));
  EXPECT_TRUE(r.pseudo_label.any());
}

TEST(FitMask, Deterministic) {
  const testing_frames::SquareFrame f = testing_frames::square_frame();
  FitConfig cfg;
  cfg.steps = 50;
  const FitResult a = fit_mask(f.depth, f.flow, f.square, cfg);
  const FitResult b = fit_mask(f.depth, f.flow, f.square, cfg);
  EXPECT_EQ(a.final_probs, b.final_probs);
  EXPECT_EQ(a.loss_curve, b.loss_curve);
}

TEST(FitMask, InvalidBoxIsAnError) {
  const testing_frames::SquareFrame f = testing_frames::square_frame();
  EXPECT_THROW(fit_mask(f.depth, f.flow, {5, 5, 5, 9}, FitConfig{}), Error);
  EXPECT_THROW(fit_mask(f.depth, f.flow, {40, 40, 50, 50}, FitConfig{}), Error);
  // A box reaching past the frame is clamped to it.
  FitConfig cfg;
  cfg.steps = 5;
  EXPECT_NO_THROW(fit_mask(f.depth, f.flow, {20, 20, 40, 30}, cfg));
}

TEST(FitConfig, Validation) {
  FitConfig c;
  c.steps = 0;
  EXPECT_THROW(c.validate(), Error);
  c = FitConfig{};
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = FitConfig{};
  c.coarse_sigma = -1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(LossVariant, NamesRoundTrip) {
  for (LossVariant v : kAllLossVariants) EXPECT_EQ(parse_loss_variant(to_string(v)), v);
  EXPECT_EQ(to_string(LossVariant::kBdBxDiceP), "bd_bx_dicep");
  EXPECT_THROW(parse_loss_variant("dice"), Error);
}
