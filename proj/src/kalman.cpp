#include "stcseg/kalman.hpp"

#include <algorithm>
#include <cmath>

namespace stcseg {

namespace {

using Mat84 = Eigen::Matrix<double, 8, 4>;
using Mat48 = Eigen::Matrix<double, 4, 8>;

Eigen::Matrix<double, 8, 8> transition() {
  Eigen::Matrix<double, 8, 8> f = Eigen::Matrix<double, 8, 8>::Identity();
  f.topRightCorner<4, 4>() = Eigen::Matrix4d::Identity();
  return f;
}

Mat48 observation() {
  Mat48 h = Mat48::Zero();
  h.leftCols<4>() = Eigen::Matrix4d::Identity();
  return h;
}

// Degenerate boxes still get a strictly positive noise scale.
double noise_scale(const Corners& c) { return std::max(corner_diagonal(c), 1.0); }

}  // namespace

Corners to_corners(const BBox& b) { return Corners(b.x1, b.y1, b.x2, b.y2); }

double corner_diagonal(const Corners& c) { return std::hypot(c[2] - c[0], c[3] - c[1]); }

CornerKalman::CornerKalman(const Corners& first, const KalmanNoise& noise) : noise_(noise) {
  mean_.setZero();
  mean_.head<4>() = first;
  const double d = noise_scale(first);
  const double r = noise_.measurement * d;
  cov_.setZero();
  cov_.topLeftCorner<4, 4>().diagonal().setConstant(r * r);
  cov_.bottomRightCorner<4, 4>().diagonal().setConstant(d * d);
}

Corners CornerKalman::predict() {
  static const Eigen::Matrix<double, 8, 8> f = transition();
  const double q = noise_.process * noise_scale(position());
  mean_ = f * mean_;
  cov_ = f * cov_ * f.transpose();
  cov_.diagonal().array() += q * q;
  cov_ = 0.5 * (cov_ + cov_.transpose());
  return position();
}

void CornerKalman::update(const Corners& z) {
  static const Mat48 h = observation();
  const double r = noise_.measurement * noise_scale(z);
  const Eigen::Matrix4d s = h * cov_ * h.transpose() + Eigen::Matrix4d::Identity() * (r * r);
  const Mat84 k = cov_ * h.transpose() * s.inverse();
  mean_ += k * (z - h * mean_);
  // Joseph form keeps the covariance symmetric positive semi-definite.
  const Eigen::Matrix<double, 8, 8> ikh = Eigen::Matrix<double, 8, 8>::Identity() - k * h;
  cov_ = ikh * cov_ * ikh.transpose() + k * (r * r) * k.transpose();
  cov_ = 0.5 * (cov_ + cov_.transpose());
}

}  // namespace stcseg
