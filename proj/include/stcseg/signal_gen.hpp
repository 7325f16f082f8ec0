#pragma once

#include <array>

#include "stcseg/grid.hpp"

namespace stcseg {

// Fixed (non-learned) contextual-salience transform: average pooling, a 3x3
// dilated neighbourhood comparison, and a residual exponential score.
struct SignalConfig {
  double r = 0.5;           // similarity factor
  double p_norm = 2.0;      // norm order for multi-channel differences
  std::size_t dilation = 2;
  // Row-major 3x3 kernel over offsets {-1,0,1}^2; entries must be 0 or 1.
  std::array<double, 9> kernel_weights{1, 1, 1, 1, 0, 1, 1, 1, 1};
  std::size_t pool_kernel = 4;
  std::size_t pool_stride = 4;
  double phi_s = 0.3;  // spatial (depth) threshold
  double phi_t = 0.4;  // temporal (flow) threshold

  void validate() const;
};

// Which thresholded signals feed the pseudo-label. kFused is the conjunction
// of both; the single-signal modes exist for ablations.
enum class SignalSource { kFused, kDepthOnly, kFlowOnly };

// S[i,j] = sum_k w_k * (exp(r * ||x[i+l*k1, j+l*k2] - x[i,j]||_p) - 1), with
// replicate padding. Expects an already pooled input.
SalienceGrid contextual_salience(const ScalarGrid& x, const SignalConfig& cfg);
SalienceGrid contextual_salience(const VectorGrid& x, const SignalConfig& cfg);

// M = (Ss > phi_s) AND (St > phi_t), at pooled resolution.
BinaryMask fuse_signals(const SalienceGrid& ss, const SalienceGrid& st, const SignalConfig& cfg);

// Full pipeline at frame resolution: pool, salience, fuse, nearest upsample.
BinaryMask generate_pseudo_label(const ScalarGrid& depth, const VectorGrid& flow,
                                 const SignalConfig& cfg = {},
                                 SignalSource source = SignalSource::kFused);

}  // namespace stcseg
