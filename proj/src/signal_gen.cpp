#include "stcseg/signal_gen.hpp"

#include <algorithm>
#include <cmath>

namespace stcseg {

void SignalConfig::validate() const {
  if (!(r > 0.0)) throw Error("signal config: r must be > 0");
  if (!(p_norm >= 1.0)) throw Error("signal config: p_norm must be >= 1");
  if (dilation < 1) throw Error("signal config: dilation must be >= 1");
  for (double w : kernel_weights) {
    if (w != 0.0 && w != 1.0) throw Error("signal config: kernel weights must be 0 or 1");
  }
  if (pool_kernel < 1 || pool_kernel != pool_stride) {
    throw Error("signal config: pool_kernel must equal pool_stride and be >= 1");
  }
  if (phi_s < 0.0 || phi_t < 0.0) throw Error("signal config: thresholds must be >= 0");
}

namespace {

double norm_p(std::span<const double> a, std::span<const double> b, double p) {
  if (a.size() == 1) return std::abs(a[0] - b[0]);
  if (p == 2.0) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    return std::sqrt(s);
  }
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) s += std::pow(std::abs(a[c] - b[c]), p);
  return std::pow(s, 1.0 / p);
}

SalienceGrid salience_impl(const VectorGrid& x, const SignalConfig& cfg) {
  cfg.validate();
  const std::size_t h = x.height();
  const std::size_t w = x.width();
  const std::size_t need = 2 * cfg.dilation + 1;
  if (h < need || w < need) throw Error("grid too small for dilation");

  const long lam = static_cast<long>(cfg.dilation);
  const long hi = static_cast<long>(h) - 1;
  const long wi = static_cast<long>(w) - 1;
  SalienceGrid s(h, w);
  for (long i = 0; i <= hi; ++i) {
    for (long j = 0; j <= wi; ++j) {
      const auto centre = x.pixel(i, j);
      double acc = 0.0;
      for (long k1 = -1; k1 <= 1; ++k1) {
        for (long k2 = -1; k2 <= 1; ++k2) {
          const double wk = cfg.kernel_weights[(k1 + 1) * 3 + (k2 + 1)];
          if (wk == 0.0) continue;
          const long ni = std::clamp(i + lam * k1, 0L, hi);
          const long nj = std::clamp(j + lam * k2, 0L, wi);
          const double d = norm_p(x.pixel(ni, nj), centre, cfg.p_norm);
          acc += wk * std::expm1(cfg.r * d);
        }
      }
      s(i, j) = acc;
    }
  }
  return s;
}

}  // namespace

SalienceGrid contextual_salience(const ScalarGrid& x, const SignalConfig& cfg) {
  return salience_impl(VectorGrid(x.height(), x.width(), 1,
                                  std::vector<double>(x.values().begin(), x.values().end())),
                       cfg);
}

SalienceGrid contextual_salience(const VectorGrid& x, const SignalConfig& cfg) {
  return salience_impl(x, cfg);
}

BinaryMask fuse_signals(const SalienceGrid& ss, const SalienceGrid& st, const SignalConfig& cfg) {
  if (ss.height() != st.height() || ss.width() != st.width()) {
    throw Error("fuse_signals: dimension mismatch");
  }
  BinaryMask m(ss.height(), ss.width());
  for (std::size_t i = 0; i < ss.height(); ++i) {
    for (std::size_t j = 0; j < ss.width(); ++j) {
      m.set(i, j, ss(i, j) > cfg.phi_s && st(i, j) > cfg.phi_t);
    }
  }
  return m;
}

BinaryMask generate_pseudo_label(const ScalarGrid& depth, const VectorGrid& flow,
                                 const SignalConfig& cfg, SignalSource source) {
  cfg.validate();
  if (depth.height() != flow.height() || depth.width() != flow.width()) {
    throw Error("pseudo-label: depth and flow dimensions differ");
  }
  const SalienceGrid ss =
      contextual_salience(avg_pool(depth, cfg.pool_kernel, cfg.pool_stride), cfg);
  const SalienceGrid st =
      contextual_salience(avg_pool(flow, cfg.pool_kernel, cfg.pool_stride), cfg);

  BinaryMask pooled(ss.height(), ss.width());
  switch (source) {
    case SignalSource::kFused:
      pooled = fuse_signals(ss, st, cfg);
      break;
    case SignalSource::kDepthOnly:
      pooled = threshold(ss, cfg.phi_s);
      break;
    case SignalSource::kFlowOnly:
      pooled = threshold(st, cfg.phi_t);
      break;
  }
  return upsample_nearest(pooled, cfg.pool_stride, depth.height(), depth.width());
}

}  // namespace stcseg
