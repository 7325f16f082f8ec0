#include "stcseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "stcseg/puzzle_loss.hpp"
#include "stcseg/scene_sim.hpp"

namespace stcseg {

namespace {

constexpr double kMinArgmaxGap = 1e-2;

// Smallest gap between the largest and second largest value over every row
// and column.
double min_argmax_gap(const ScalarGrid& p) {
  double gap = INFINITY;
  auto scan = [&gap](const std::vector<double>& v) {
    if (v.size() < 2) return;
    double a = -INFINITY;
    double b = -INFINITY;
    for (double x : v) {
      if (x > a) {
        b = a;
        a = x;
      } else if (x > b) {
        b = x;
      }
    }
    gap = std::min(gap, a - b);
  };
  for (std::size_t i = 0; i < p.height(); ++i) {
    std::vector<double> row(p.width());
    for (std::size_t j = 0; j < p.width(); ++j) row[j] = p(i, j);
    scan(row);
  }
  for (std::size_t j = 0; j < p.width(); ++j) {
    std::vector<double> col(p.height());
    for (std::size_t i = 0; i < p.height(); ++i) col[i] = p(i, j);
    scan(col);
  }
  return gap;
}

}  // namespace

GradcheckInstance random_gradcheck_instance(std::uint64_t seed, std::size_t h, std::size_t w) {
  if (h < 1 || w < 1) throw Error("gradcheck: size must be at least 1x1");
  SplitMix64 rng(seed);
  GradcheckInstance inst;
  inst.logits = LogitGrid(h, w);
  do {
    for (double& z : inst.logits.values()) z = 2.0 * rng.gaussian();
  } while (min_argmax_gap(sigmoid_map(inst.logits)) < kMinArgmaxGap);

  inst.label = BinaryMask(h, w);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) inst.label.set(i, j, rng.uniform() < 0.3);
  }
  const int x1 = rng.uniform_int(0, static_cast<int>(w) - 1);
  const int y1 = rng.uniform_int(0, static_cast<int>(h) - 1);
  const int x2 = rng.uniform_int(x1 + 1, static_cast<int>(w));
  const int y2 = rng.uniform_int(y1 + 1, static_cast<int>(h));
  inst.box = {x1, y1, x2, y2};
  return inst;
}

GradcheckResult gradcheck(const GradcheckInstance& inst, double step) {
  const GradGrid analytic = puzzle_loss_grad(inst.logits, inst.label, inst.box);
  LogitGrid z = inst.logits;
  GradcheckResult r;
  for (std::size_t i = 0; i < z.height(); ++i) {
    for (std::size_t j = 0; j < z.width(); ++j) {
      const double z0 = z(i, j);
      z(i, j) = z0 + step;
      const double up = puzzle_loss(z, inst.label, inst.box).total;
      z(i, j) = z0 - step;
      const double down = puzzle_loss(z, inst.label, inst.box).total;
      z(i, j) = z0;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic(i, j);
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      r.max_rel_error = std::max(r.max_rel_error, std::abs(a - numeric) / denom);
      ++r.entries;
    }
  }
  return r;
}

}  // namespace stcseg
