#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "stcseg/puzzle_loss.hpp"
#include "naive_loss.hpp"

using namespace stcseg;

namespace {

naive::Instance random_instance(std::uint64_t seed, int h, int w) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 2.0);
  std::bernoulli_distribution b(0.3);
  naive::Instance inst;
  inst.h = h;
  inst.w = w;
  inst.logits.assign(h * w, 0.0);
  inst.label.assign(h * w, 0);
  for (double& z : inst.logits) z = n(rng);
  for (int& m : inst.label) m = b(rng);
  std::uniform_int_distribution<int> ux(0, w - 1), uy(0, h - 1);
  inst.x1 = ux(rng);
  inst.y1 = uy(rng);
  inst.x2 = std::uniform_int_distribution<int>(inst.x1 + 1, w)(rng);
  inst.y2 = std::uniform_int_distribution<int>(inst.y1 + 1, h)(rng);
  return inst;
}

LogitGrid to_logits(const naive::Instance& in) {
  return LogitGrid(in.h, in.w, in.logits);
}

BinaryMask to_label(const naive::Instance& in) {
  BinaryMask m(in.h, in.w);
  for (int i = 0; i < in.h; ++i) {
    for (int j = 0; j < in.w; ++j) m.set(i, j, in.label[i * in.w + j] != 0);
  }
  return m;
}

BBox to_box(const naive::Instance& in) { return {in.x1, in.y1, in.x2, in.y2}; }

// Redraws until every row and column maximum leads by at least `gap` in
// probability, so a 1e-4 logit step never changes an argmax.
naive::Instance tie_free_instance(std::uint64_t seed, int h, int w, double gap) {
  for (std::uint64_t k = 0;; ++k) {
    naive::Instance inst = random_instance(seed * 1000 + k, h, w);
    if (naive::min_argmax_gap(inst) >= gap) return inst;
  }
}

}  // namespace

TEST(BoundaryLoss, Examples) {
  ProbGrid ones(3, 3, 1.0);
  BinaryMask label(3, 3);
  label.set(1, 1, true);
  EXPECT_NEAR(boundary_loss(ones, label), 0.0, 1e-6);
  EXPECT_EQ(boundary_loss(ProbGrid(3, 3, 0.2), BinaryMask(3, 3)), 0.0);

  BinaryMask one(2, 2);
  one.set(0, 1, true);
  EXPECT_NEAR(boundary_loss(ProbGrid(2, 2, 0.5), one), -0.25 * std::log(0.5), 1e-15);
  EXPECT_NEAR(boundary_loss(ProbGrid(2, 2, 0.5), one), 0.173287, 1e-6);
  EXPECT_THROW(boundary_loss(ProbGrid(2, 3), one), Error);
}

TEST(BoundaryLoss, NonIncreasingInPositiveProbabilities) {
  BinaryMask label(1, 3);
  label.set(0, 1, true);
  double prev = INFINITY;
  for (double p = 0.0; p <= 1.0; p += 0.05) {
    const double l = boundary_loss(ProbGrid(1, 3, {0.3, p, 0.3}), label);
    EXPECT_LE(l, prev);
    prev = l;
  }
}

TEST(DicePrime, Examples) {
  EXPECT_EQ(dice_prime({1, 0, 1}, {1, 0, 1}), 0.0);
  EXPECT_EQ(dice_prime({0, 0, 0}, {0, 1, 1}), 1.0);
  EXPECT_NEAR(dice_prime({0.5, 0.5}, {1, 0}), 1.0 - 1.0 / 1.5 + 0.25, 1e-15);
  EXPECT_NEAR(dice_prime({0.5, 0.5}, {1, 0}), 0.583333, 1e-6);
}

TEST(DicePrime, EmptyGroundTruthProjection) {
  try {
    dice_prime({0.5, 0.5}, {0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "empty ground-truth projection");
  }
}

TEST(DicePrime, NonNegativeAndZeroOnlyForEquality) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    ProjectionVector p(6), g(6);
    for (int k = 0; k < 6; ++k) {
      p[k] = u(rng);
      g[k] = u(rng) < 0.5 ? 1.0 : 0.0;
    }
    g[t % 6] = 1.0;
    EXPECT_GE(dice_prime(p, g), 0.0);
    EXPECT_GT(dice_prime(p, g), 0.0);
    EXPECT_EQ(dice_prime(g, g), 0.0);
  }
}

TEST(DicePrime, ExcessIsPenalised) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    ProjectionVector p(5), g(5), clipped(5);
    for (int k = 0; k < 5; ++k) {
      g[k] = u(rng) < 0.5 ? 1.0 : 0.0;
      p[k] = u(rng);
    }
    g[0] = 1.0;
    g[4] = 0.0;
    p[4] = 0.2 + 0.8 * u(rng);  // strict excess on index 4
    for (int k = 0; k < 5; ++k) clipped[k] = std::min(p[k], g[k]);
    EXPECT_GT(dice_prime(p, g), dice_prime(clipped, g));
  }
}

TEST(PositionPenalty, ZeroWithinTruthPositiveWithExcessExhaustive) {
  for (int n = 1; n <= 8; ++n) {
    for (int gb = 1; gb < (1 << n); ++gb) {
      ProjectionVector g(n);
      for (int k = 0; k < n; ++k) g[k] = (gb >> k) & 1;
      for (int pb = 0; pb < (1 << n); ++pb) {
        ProjectionVector p(n);
        for (int k = 0; k < n; ++k) p[k] = (pb >> k) & 1;
        const double pen = position_penalty(p, g);
        if ((pb & ~gb) == 0) {
          ASSERT_EQ(pen, 0.0);
          ASSERT_EQ(dice_prime(p, g), dice_plain(p, g));
        } else {
          ASSERT_GT(pen, 0.0);
          ASSERT_GT(dice_prime(p, g), dice_plain(p, g));
        }
      }
    }
  }
}

TEST(BoxTerm, Examples) {
  const ProbGrid box(5, 6, 0.0);
  ProbGrid exact = box;
  for (int i = 1; i < 4; ++i) {
    for (int j = 2; j < 5; ++j) exact(i, j) = 1.0;
  }
  const auto [x0, y0] = box_term(exact, {2, 1, 5, 4});
  EXPECT_EQ(x0, 0.0);
  EXPECT_EQ(y0, 0.0);

  // All-ones prediction, box on the left half of the columns.
  const ProbGrid ones(4, 6, 1.0);
  const auto [lx, ly] = box_term(ones, {0, 0, 3, 4});
  EXPECT_GT(lx, 0.0);
  EXPECT_GT(position_penalty(project_x(ones), {1, 1, 1, 0, 0, 0}), 0.0);
  EXPECT_EQ(ly, 0.0);

  // A box strictly inside b: no penalty, dice terms positive.
  ProbGrid inner(6, 6, 0.0);
  for (int i = 2; i < 4; ++i) {
    for (int j = 2; j < 4; ++j) inner(i, j) = 1.0;
  }
  const BBox b{1, 1, 5, 5};
  const BinaryMask ind = box_indicator(b, 6, 6);
  EXPECT_EQ(position_penalty(project_x(inner), project_x(ind)), 0.0);
  EXPECT_EQ(position_penalty(project_y(inner), project_y(ind)), 0.0);
  const auto [ix, iy] = box_term(inner, b);
  EXPECT_GT(ix, 0.0);
  EXPECT_GT(iy, 0.0);
  EXPECT_NEAR(ix, 1.0 - 4.0 / 6.0, 1e-15);
}

TEST(PuzzleLoss, SaturatedPerfectSolution) {
  const BBox b{2, 1, 6, 5};
  LogitGrid z(7, 8, -30.0);
  BinaryMask label(7, 8);
  for (int i = 1; i < 5; ++i) {
    for (int j = 2; j < 6; ++j) {
      z(i, j) = 30.0;
      if (i > 1 && i < 4 && j > 2 && j < 5) label.set(i, j, true);
    }
  }
  const LossBreakdown l = puzzle_loss(z, label, b);
  EXPECT_LT(l.total, 1e-6);
  const GradGrid g = puzzle_loss_grad(z, label, b);
  for (double v : g.values()) EXPECT_LT(std::abs(v), 1e-6);
}

TEST(PuzzleLoss, EmptyLabelLeavesBoxTermOnly) {
  const naive::Instance inst = random_instance(3, 6, 7);
  const LogitGrid z = to_logits(inst);
  const BinaryMask empty(6, 7);
  const LossBreakdown l = puzzle_loss(z, empty, to_box(inst));
  EXPECT_EQ(l.l_bd, 0.0);
  const auto [bx, by] = box_term(sigmoid_map(z), to_box(inst));
  EXPECT_EQ(l.l_bx_x, bx);
  EXPECT_EQ(l.l_bx_y, by);
  EXPECT_EQ(l.total, l.l_bd + l.l_bx_x + l.l_bx_y);
}

TEST(PuzzleLoss, MatchesNaiveOracle) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const naive::Instance inst = random_instance(seed, 8, 8);
    const LossBreakdown l = puzzle_loss(to_logits(inst), to_label(inst), to_box(inst));
    const naive::Terms t = naive::puzzle_loss(inst);
    EXPECT_NEAR(l.l_bd, t.bd, 1e-12);
    EXPECT_NEAR(l.l_bx_x, t.bx_x, 1e-12);
    EXPECT_NEAR(l.l_bx_y, t.bx_y, 1e-12);
    EXPECT_NEAR(l.total, t.bd + t.bx_x + t.bx_y, 1e-12);
  }
}

TEST(PuzzleLossGrad, HandChainRuleAtNonArgmaxPixel) {
  LogitGrid z(4, 4, 2.0);
  z(1, 1) = 0.0;
  BinaryMask label(4, 4);
  label.set(1, 1, true);
  const GradGrid g = puzzle_loss_grad(z, label, {0, 0, 2, 2});
  EXPECT_NEAR(g(1, 1), -(1.0 / 16.0) * (1.0 - 0.5), 1e-15);
}

TEST(PuzzleLossGrad, MatchesCentralDifferences) {
  const double step = 1e-4;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const naive::Instance inst = tie_free_instance(seed, 16, 16, 1e-2);
    const GradGrid g = puzzle_loss_grad(to_logits(inst), to_label(inst), to_box(inst));
    naive::Instance probe = inst;
    for (int k = 0; k < 256; ++k) {
      probe.logits[k] = inst.logits[k] + step;
      const naive::Terms up = naive::puzzle_loss(probe);
      probe.logits[k] = inst.logits[k] - step;
      const naive::Terms down = naive::puzzle_loss(probe);
      probe.logits[k] = inst.logits[k];
      const double fd = (up.bd + up.bx_x + up.bx_y - down.bd - down.bx_x - down.bx_y) / (2 * step);
      const double a = g.values()[k];
      worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}));
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(PuzzleLossGrad, TiesGoToTheLowestIndex) {
  // Uniform logits: every pixel ties, so only row 0 and column 0 carry the
  // projection subgradient.
  const LogitGrid z(4, 5, 0.0);
  const BinaryMask empty(4, 5);
  const GradGrid g = puzzle_loss_grad(z, empty, {1, 1, 3, 3});
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      if (i != 0 && j != 0) {
        EXPECT_EQ(g(i, j), 0.0) << i << "," << j;
      }
    }
  }
  EXPECT_NE(g(0, 1), 0.0);
  EXPECT_NE(g(1, 0), 0.0);
}

TEST(PuzzleLoss, LocalityForNegativeNonArgmaxPixels) {
  const naive::Instance inst = tie_free_instance(77, 10, 10, 1e-2);
  const LogitGrid z = to_logits(inst);
  const BinaryMask label = to_label(inst);
  const BBox b = to_box(inst);
  const double base = puzzle_loss(z, label, b).total;
  const ProjectionVector px = project_x(sigmoid_map(z));
  const ProjectionVector py = project_y(sigmoid_map(z));
  int tried = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 10; ++j) {
      const double p = sigmoid(z(i, j));
      if (label(i, j) || p == px[j] || p == py[i]) continue;
      LogitGrid moved = z;
      moved(i, j) -= 3.0;  // lowering never creates a new maximum
      EXPECT_EQ(puzzle_loss(moved, label, b).total, base);
      ++tried;
    }
  }
  EXPECT_GT(tried, 10);
}

TEST(PuzzleLoss, ClampedPixelsGetZeroGradientFromTheLog) {
  LogitGrid z(3, 3, 1.0);
  z(2, 2) = -40.0;  // probability below the clamp
  BinaryMask label(3, 3);
  label.set(2, 2, true);
  const GradGrid g = puzzle_loss_grad(z, label, {0, 0, 3, 3});
  EXPECT_EQ(g(2, 2), 0.0);
  EXPECT_NEAR(puzzle_loss(z, label, {0, 0, 3, 3}).l_bd, -std::log(kLogClamp) / 9.0, 1e-12);
}
