#pragma once

#include <Eigen/Dense>

#include "stcseg/grid.hpp"

namespace stcseg {

// Real-valued corner vector [x1, y1, x2, y2].
using Corners = Eigen::Vector4d;

Corners to_corners(const BBox& b);
double corner_diagonal(const Corners& c);

struct KalmanNoise {
  double process = 1e-2;      // process noise std, as a fraction of the box diagonal
  double measurement = 1e-1;  // measurement noise std, as a fraction of the box diagonal
};

// Constant-velocity filter over the two diagonal corners. State is
// [x1, y1, x2, y2, vx1, vy1, vx2, vy2]. The initial position variance equals
// the measurement variance and the initial velocity std equals the box
// diagonal, so in the zero-noise limit two observations give the prediction
// l + (l - l_prev) exactly.
class CornerKalman {
 public:
  using State = Eigen::Matrix<double, 8, 1>;
  using Cov = Eigen::Matrix<double, 8, 8>;

  CornerKalman() : CornerKalman(Corners::Zero(), KalmanNoise{}) {}
  CornerKalman(const Corners& first, const KalmanNoise& noise);

  // Advances one frame and returns the predicted corners.
  Corners predict();
  void update(const Corners& z);

  Corners position() const { return mean_.head<4>(); }
  Eigen::Vector4d velocity() const { return mean_.tail<4>(); }
  const State& mean() const { return mean_; }
  const Cov& covariance() const { return cov_; }

 private:
  KalmanNoise noise_;
  State mean_;
  Cov cov_;
};

}  // namespace stcseg
