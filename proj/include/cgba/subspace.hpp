#ifndef CGBA_SUBSPACE_HPP
#define CGBA_SUBSPACE_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <tuple>
#include <vector>

#include <fftw3.h>
#include <Eigen/Core>

#include "cgba/errors.hpp"
#include "cgba/geometry.hpp"
#include "cgba/oracle.hpp"

namespace cgba {

/// Where Gaussian probes are drawn: the full input space, or the
/// low-frequency DCT block of a (channels, height, width) image.
struct SubspaceConfig {
  enum class Mode { kFullSpace, kFrequencyDct };
  Mode mode = Mode::kFullSpace;
  Eigen::Index dims = 0;  // full-space dimension; ignored for DCT (derived from the image shape)
  int channels = 1;
  int height = 0;
  int width = 0;
  double factor = 4.0;
  double sigma = 0.0002;

  static SubspaceConfig full(Eigen::Index n, double sigma = 0.0002) {
    SubspaceConfig c;
    c.dims = n;
    c.sigma = sigma;
    return c;
  }
  static SubspaceConfig dct(int channels, int height, int width, double factor, double sigma = 0.0002) {
    SubspaceConfig c;
    c.mode = Mode::kFrequencyDct;
    c.channels = channels;
    c.height = height;
    c.width = width;
    c.factor = factor;
    c.sigma = sigma;
    c.dims = static_cast<Eigen::Index>(channels) * height * width;
    return c;
  }

  int block_height() const { return static_cast<int>(std::floor(height / factor)); }
  int block_width() const { return static_cast<int>(std::floor(width / factor)); }

  void validate() const {
    if (!(sigma > 0.0)) throw InvalidConfig("sigma must be > 0");
    if (mode == Mode::kFullSpace) {
      if (dims < 1) throw InvalidConfig("full-space sampling needs dims >= 1");
      return;
    }
    if (channels < 1 || height < 1 || width < 1) throw InvalidConfig("DCT sampling needs a positive image shape");
    if (!(factor > 1.0)) throw InvalidConfig("DCT reduction factor must be > 1");
    if (block_height() < 1 || block_width() < 1) throw InvalidConfig("DCT block is empty: factor too large for image");
  }
};

struct ProbeBatch {
  std::vector<Eigen::VectorXd> probes;
  std::vector<int> signs;
};

namespace dct {

namespace detail {

/// FFTW planning is not thread-safe; plans are built once per shape under a
/// lock and executed through the thread-safe new-array interface.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(int height, int width, fftw_r2r_kind kind) {
    std::lock_guard lock(mu_);
    const auto key = std::make_tuple(height, width, static_cast<int>(kind));
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<double> in(static_cast<size_t>(height) * width), out(in.size());
    fftw_plan plan = fftw_plan_r2r_2d(height, width, in.data(), out.data(), kind, kind,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mu_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

inline double inverse_scale(int k, int n) { return k == 0 ? std::sqrt(1.0 / n) : 1.0 / std::sqrt(2.0 * n); }
inline double forward_scale(int k, int n) { return k == 0 ? std::sqrt(1.0 / (4.0 * n)) : std::sqrt(1.0 / (2.0 * n)); }

}  // namespace detail

/// Orthonormal 2-D DCT-II of one row-major height x width plane.
inline std::vector<double> forward(const std::vector<double>& plane, int height, int width) {
  std::vector<double> in = plane, out(plane.size());
  fftw_execute_r2r(detail::PlanCache::instance().get(height, width, FFTW_REDFT10), in.data(), out.data());
  for (int u = 0; u < height; ++u)
    for (int v = 0; v < width; ++v)
      out[u * width + v] *= detail::forward_scale(u, height) * detail::forward_scale(v, width);
  return out;
}

/// Orthonormal 2-D DCT-III (the inverse of forward()).
inline std::vector<double> inverse(const std::vector<double>& coeffs, int height, int width) {
  std::vector<double> in(coeffs.size()), out(coeffs.size());
  for (int u = 0; u < height; ++u)
    for (int v = 0; v < width; ++v)
      in[u * width + v] = coeffs[u * width + v] * detail::inverse_scale(u, height) * detail::inverse_scale(v, width);
  fftw_execute_r2r(detail::PlanCache::instance().get(height, width, FFTW_REDFT01), in.data(), out.data());
  return out;
}

}  // namespace dct

/// Draws n_t i.i.d. probes. Bit-identical for a fixed (cfg, n_t, seed).
inline ProbeBatch sample_probes(const SubspaceConfig& cfg, int n_t, std::uint64_t seed) {
  if (n_t < 1) throw InvalidConfig("probe count must be >= 1");
  cfg.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x9e3779b9u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, cfg.sigma);

  ProbeBatch batch;
  batch.probes.reserve(n_t);
  if (cfg.mode == SubspaceConfig::Mode::kFullSpace) {
    for (int i = 0; i < n_t; ++i) {
      Eigen::VectorXd z(cfg.dims);
      for (Eigen::Index k = 0; k < cfg.dims; ++k) z[k] = gauss(rng);
      batch.probes.push_back(std::move(z));
    }
    return batch;
  }

  const int h = cfg.height, w = cfg.width, bh = cfg.block_height(), bw = cfg.block_width();
  const size_t plane = static_cast<size_t>(h) * w;
  for (int i = 0; i < n_t; ++i) {
    Eigen::VectorXd z(cfg.dims);
    for (int c = 0; c < cfg.channels; ++c) {
      std::vector<double> coeffs(plane, 0.0);
      for (int u = 0; u < bh; ++u)
        for (int v = 0; v < bw; ++v) coeffs[u * w + v] = gauss(rng);
      const std::vector<double> pixels = dct::inverse(coeffs, h, w);
      for (size_t k = 0; k < plane; ++k) z[static_cast<Eigen::Index>(c * plane + k)] = pixels[k];
    }
    batch.probes.push_back(std::move(z));
  }
  return batch;
}

/// Sign-weighted probe average at a boundary point. Queries phi once per
/// probe, fills batch.signs, and reduces in index order.
inline Direction estimate_normal(const Point& boundary_point, ProbeBatch& batch, const Phi& phi) {
  if (batch.probes.empty()) throw InvalidInput("empty probe batch");
  batch.signs.assign(batch.probes.size(), 0);
  for (size_t i = 0; i < batch.probes.size(); ++i) batch.signs[i] = phi(boundary_point + batch.probes[i]);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(boundary_point.size());
  for (size_t i = 0; i < batch.probes.size(); ++i) sum += static_cast<double>(batch.signs[i]) * batch.probes[i];
  try {
    return unit(sum);
  } catch (const ZeroVector&) {
    throw DegenerateEstimate();
  }
}

/// N_t = round(n0 * sqrt(t)), at least 1.
inline int query_schedule(int n0, int t) {
  if (n0 < 1 || t < 1) throw InvalidConfig("query schedule needs n0 >= 1 and t >= 1");
  return std::max(1, static_cast<int>(std::lround(n0 * std::sqrt(static_cast<double>(t)))));
}

}  // namespace cgba

#endif  // CGBA_SUBSPACE_HPP
