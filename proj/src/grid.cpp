#include "stcseg/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace stcseg {

namespace {

void check_dims(std::size_t h, std::size_t w) {
  if (h == 0 || w == 0) throw Error("grid dimensions must be >= 1");
}

void check_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error("grid contains non-finite value");
  }
}

// Shared pooling kernel over interleaved channels.
std::vector<double> pool_values(std::span<const double> in, std::size_t h, std::size_t w,
                                std::size_t c, std::size_t kernel, std::size_t stride,
                                std::size_t& out_h, std::size_t& out_w) {
  if (kernel == 0 || kernel != stride) {
    throw Error("avg_pool requires kernel == stride >= 1");
  }
  if (h < kernel || w < kernel) throw Error("grid too small");
  out_h = h / stride;
  out_w = w / stride;
  std::vector<double> out(out_h * out_w * c, 0.0);
  const double inv = 1.0 / static_cast<double>(kernel * kernel);
  for (std::size_t oi = 0; oi < out_h; ++oi) {
    for (std::size_t oj = 0; oj < out_w; ++oj) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (std::size_t di = 0; di < kernel; ++di) {
          for (std::size_t dj = 0; dj < kernel; ++dj) {
            s += in[((oi * stride + di) * w + (oj * stride + dj)) * c + ch];
          }
        }
        out[(oi * out_w + oj) * c + ch] = s * inv;
      }
    }
  }
  return out;
}

}  // namespace

ScalarGrid::ScalarGrid(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), values_(height * width, fill) {
  check_dims(height, width);
  if (!std::isfinite(fill)) throw Error("grid contains non-finite value");
}

ScalarGrid::ScalarGrid(std::size_t height, std::size_t width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  check_dims(height, width);
  if (values_.size() != height * width) {
    throw Error("expected " + std::to_string(height * width) + " values, got " +
                std::to_string(values_.size()));
  }
  check_finite(values_);
}

VectorGrid::VectorGrid(std::size_t height, std::size_t width, std::size_t channels,
                       double fill)
    : height_(height), width_(width), channels_(channels),
      values_(height * width * channels, fill) {
  check_dims(height, width);
  if (channels == 0) throw Error("grid must have at least one channel");
  if (!std::isfinite(fill)) throw Error("grid contains non-finite value");
}

VectorGrid::VectorGrid(std::size_t height, std::size_t width, std::size_t channels,
                       std::vector<double> values)
    : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
  check_dims(height, width);
  if (channels == 0) throw Error("grid must have at least one channel");
  if (values_.size() != height * width * channels) {
    throw Error("expected " + std::to_string(height * width * channels) + " values, got " +
                std::to_string(values_.size()));
  }
  check_finite(values_);
}

BinaryMask::BinaryMask(std::size_t height, std::size_t width, bool fill)
    : height_(height), width_(width), values_(height * width, fill ? 1 : 0) {
  check_dims(height, width);
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

BBox clamp_box(const BBox& b, std::size_t h, std::size_t w) {
  const int hi = static_cast<int>(h);
  const int wi = static_cast<int>(w);
  return BBox{std::clamp(b.x1, 0, wi), std::clamp(b.y1, 0, hi), std::clamp(b.x2, 0, wi),
              std::clamp(b.y2, 0, hi)};
}

double sigmoid(double z) {
  // Split by sign so exp never overflows.
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

ProbGrid sigmoid_map(const LogitGrid& logits) {
  ProbGrid out(logits.height(), logits.width());
  auto in = logits.values();
  auto o = out.values();
  for (std::size_t k = 0; k < in.size(); ++k) o[k] = sigmoid(in[k]);
  return out;
}

ScalarGrid avg_pool(const ScalarGrid& grid, std::size_t kernel, std::size_t stride) {
  std::size_t oh = 0;
  std::size_t ow = 0;
  auto v = pool_values(grid.values(), grid.height(), grid.width(), 1, kernel, stride, oh, ow);
  return ScalarGrid(oh, ow, std::move(v));
}

VectorGrid avg_pool(const VectorGrid& grid, std::size_t kernel, std::size_t stride) {
  std::size_t oh = 0;
  std::size_t ow = 0;
  auto v = pool_values(grid.values(), grid.height(), grid.width(), grid.channels(), kernel,
                       stride, oh, ow);
  return VectorGrid(oh, ow, grid.channels(), std::move(v));
}

BinaryMask upsample_nearest(const BinaryMask& mask, std::size_t factor, std::size_t h,
                            std::size_t w) {
  if (factor == 0) throw Error("upsample factor must be >= 1");
  BinaryMask out(h, w);
  const std::size_t rows = std::min(h, mask.height() * factor);
  const std::size_t cols = std::min(w, mask.width() * factor);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (mask(i / factor, j / factor)) out.set(i, j, true);
    }
  }
  return out;
}

ProjectionVector project_x(const ScalarGrid& m) {
  ProjectionVector out(m.width(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < m.height(); ++i) {
    for (std::size_t j = 0; j < m.width(); ++j) out[j] = std::max(out[j], m(i, j));
  }
  return out;
}

ProjectionVector project_y(const ScalarGrid& m) {
  ProjectionVector out(m.height(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < m.height(); ++i) {
    for (std::size_t j = 0; j < m.width(); ++j) out[i] = std::max(out[i], m(i, j));
  }
  return out;
}

ProjectionVector project_x(const BinaryMask& m) { return project_x(to_scalar(m)); }
ProjectionVector project_y(const BinaryMask& m) { return project_y(to_scalar(m)); }

BinaryMask box_indicator(const BBox& b, std::size_t h, std::size_t w) {
  if (!b.valid()) throw Error("invalid box: requires x1 < x2 and y1 < y2");
  const BBox c = clamp_box(b, h, w);
  if (!c.valid()) throw Error("box lies entirely outside the frame");
  BinaryMask out(h, w);
  for (int i = c.y1; i < c.y2; ++i) {
    for (int j = c.x1; j < c.x2; ++j) out.set(i, j, true);
  }
  return out;
}

BBox tight_box(const BinaryMask& m) {
  int x1 = static_cast<int>(m.width());
  int y1 = static_cast<int>(m.height());
  int x2 = 0;
  int y2 = 0;
  for (std::size_t i = 0; i < m.height(); ++i) {
    for (std::size_t j = 0; j < m.width(); ++j) {
      if (!m(i, j)) continue;
      x1 = std::min(x1, static_cast<int>(j));
      y1 = std::min(y1, static_cast<int>(i));
      x2 = std::max(x2, static_cast<int>(j) + 1);
      y2 = std::max(y2, static_cast<int>(i) + 1);
    }
  }
  if (x2 == 0) return BBox{};
  return BBox{x1, y1, x2, y2};
}

ScalarGrid to_scalar(const BinaryMask& m) {
  ScalarGrid out(m.height(), m.width());
  auto o = out.values();
  auto in = m.values();
  for (std::size_t k = 0; k < in.size(); ++k) o[k] = in[k];
  return out;
}

BinaryMask threshold(const ScalarGrid& g, double t) {
  BinaryMask out(g.height(), g.width());
  for (std::size_t i = 0; i < g.height(); ++i) {
    for (std::size_t j = 0; j < g.width(); ++j) out.set(i, j, g(i, j) > t);
  }
  return out;
}

}  // namespace stcseg
