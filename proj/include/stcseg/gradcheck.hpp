#pragma once

#include <cstddef>
#include <cstdint>

#include "stcseg/grid.hpp"

namespace stcseg {

struct GradcheckInstance {
  LogitGrid logits;
  BinaryMask label;
  BBox box;
};

// Seeded random puzzle-loss instance. Logits are redrawn until every row and
// column maximum of sigmoid(logits) leads the runner-up by a clear margin, so
// a finite-difference step cannot move an argmax.
GradcheckInstance random_gradcheck_instance(std::uint64_t seed, std::size_t h, std::size_t w);

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t entries = 0;
};

// Central differences of puzzle_loss against puzzle_loss_grad. Per entry the
// error is |a - n| / max(|a|, |n|, 1e-6).
GradcheckResult gradcheck(const GradcheckInstance& inst, double step = 1e-4);

}  // namespace stcseg
