#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stcseg/error.hpp"

namespace stcseg {

// Dense single-channel field stored row-major (depth, salience, logits,
// probabilities, gradients).
class ScalarGrid {
 public:
  ScalarGrid() = default;
  ScalarGrid(std::size_t height, std::size_t width, double fill = 0.0);
  ScalarGrid(std::size_t height, std::size_t width, std::vector<double> values);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return values_[i * width_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * width_ + j]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool operator==(const ScalarGrid&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

// Multi-channel field with channels interleaved per pixel (optical flow has
// two channels: dx, dy).
class VectorGrid {
 public:
  VectorGrid() = default;
  VectorGrid(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
  VectorGrid(std::size_t height, std::size_t width, std::size_t channels,
             std::vector<double> values);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }

  double& operator()(std::size_t i, std::size_t j, std::size_t c) {
    return values_[(i * width_ + j) * channels_ + c];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t c) const {
    return values_[(i * width_ + j) * channels_ + c];
  }
  std::span<const double> pixel(std::size_t i, std::size_t j) const {
    return std::span<const double>(values_).subspan((i * width_ + j) * channels_, channels_);
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool operator==(const VectorGrid&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> values_;
};

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(std::size_t height, std::size_t width, bool fill = false);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

  bool operator()(std::size_t i, std::size_t j) const { return values_[i * width_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v) { values_[i * width_ + j] = v ? 1 : 0; }

  std::size_t count() const;
  bool any() const { return count() > 0; }
  std::span<const std::uint8_t> values() const { return values_; }

  bool operator==(const BinaryMask&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> values_;
};

// Semantic aliases: same storage, different roles.
using LogitGrid = ScalarGrid;
using ProbGrid = ScalarGrid;
using SalienceGrid = ScalarGrid;
using GradGrid = ScalarGrid;
using ProjectionVector = std::vector<double>;

// Axis-aligned box with half-open pixel extent [x1, x2) x [y1, y2).
struct BBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }
  long area() const { return static_cast<long>(width()) * height(); }
  bool valid() const { return x1 < x2 && y1 < y2; }

  bool operator==(const BBox&) const = default;
};

// Clamps the box to [0, w] x [0, h]. The result may be degenerate when the
// box lies entirely outside the frame.
BBox clamp_box(const BBox& b, std::size_t h, std::size_t w);

ProbGrid sigmoid_map(const LogitGrid& logits);
double sigmoid(double z);

// Non-overlapping average pooling without padding. Requires kernel == stride
// and both spatial dims >= kernel; partial trailing blocks are dropped.
ScalarGrid avg_pool(const ScalarGrid& grid, std::size_t kernel, std::size_t stride);
VectorGrid avg_pool(const VectorGrid& grid, std::size_t kernel, std::size_t stride);

// Nearest-neighbour upsampling by an integer factor into an (h, w) frame.
// Pixels past the last full block (dropped during pooling) are left unset.
BinaryMask upsample_nearest(const BinaryMask& mask, std::size_t factor, std::size_t h,
                            std::size_t w);

// Max projections: project_x has one entry per column, project_y one per row.
ProjectionVector project_x(const ScalarGrid& m);
ProjectionVector project_y(const ScalarGrid& m);
ProjectionVector project_x(const BinaryMask& m);
ProjectionVector project_y(const BinaryMask& m);

BinaryMask box_indicator(const BBox& b, std::size_t h, std::size_t w);

// Tight bounding box of the set pixels; invalid (all zero) box for an empty mask.
BBox tight_box(const BinaryMask& m);

ScalarGrid to_scalar(const BinaryMask& m);
BinaryMask threshold(const ScalarGrid& g, double t);  // g > t

}  // namespace stcseg
