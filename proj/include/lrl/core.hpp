#pragma once

// Shared numerics for the long-range lattice lab: fuzzy norms, log-corrected
// power kernels, radial shell statistics and exponent fits, and the global
// model-parameter record used by every other header.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lrl {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kHalfPi = 1.57079632679489661923;

enum class Model { RandomWalk, SAW, Percolation };

inline const char* model_name(Model m) {
  switch (m) {
    case Model::RandomWalk: return "rw";
    case Model::SAW: return "saw";
    case Model::Percolation: return "percolation";
  }
  return "?";
}

// Global parameter record: dimension, long-range exponent alpha, spread-out
// scale L, and which model the run is about.
struct ModelParams {
  int d = 1;
  double alpha = 1.0;
  double L = 1.0;
  Model model = Model::RandomWalk;

  void validate() const {
    if (d < 1) throw std::invalid_argument("ModelParams: d must be >= 1");
    if (!(alpha > 0)) throw std::invalid_argument("ModelParams: alpha must be > 0");
    if (!(L >= 1)) throw std::invalid_argument("ModelParams: L must be >= 1");
  }

  // alpha^2-wedge: every crossover formula below uses min(alpha, 2).
  double effective_alpha() const { return std::min(alpha, 2.0); }

  // Upper critical dimension: (alpha^2) x 2 for SAW, x 3 for percolation.
  double d_c() const {
    switch (model) {
      case Model::SAW: return 2.0 * effective_alpha();
      case Model::Percolation: return 3.0 * effective_alpha();
      case Model::RandomWalk:
        throw std::domain_error("d_c() is undefined for the plain random walk");
    }
    return 0;
  }
};

// <x>_r = (pi/2) * max(|x|, r), r >= 1.  Keeps power kernels finite at the
// origin; <x>_r >= pi*r/2 always.
inline double fuzzy_norm_scalar(double xnorm, double r) {
  if (!(r >= 1.0)) throw std::invalid_argument("fuzzy_norm: r must be >= 1");
  return kHalfPi * std::max(std::abs(xnorm), r);
}

template <class T>
inline double euclid_norm(std::span<const T> x) {
  double s = 0;
  for (T c : x) s += double(c) * double(c);
  return std::sqrt(s);
}

template <class T>
inline double fuzzy_norm(std::span<const T> x, double r) {
  return fuzzy_norm_scalar(euclid_norm(x), r);
}

inline double fuzzy_norm(std::initializer_list<double> x, double r) {
  return fuzzy_norm(std::span<const double>(x.begin(), x.size()), r);
}

// x |-> <x>_L^{-a1} / (log <x/L>_1)^{a2}.  Since <x/L>_1 >= pi/2 > 1 the log
// is strictly positive, so the kernel is finite everywhere including x = o.
struct LogPowerKernel {
  double a1 = 0;
  double a2 = 0;
  double L = 1;

  double at_radius(double xnorm) const {
    const double v = fuzzy_norm_scalar(xnorm, L);
    double k = std::pow(v, -a1);
    if (a2 != 0) {
      const double lg = std::log(fuzzy_norm_scalar(xnorm / L, 1.0));
      k /= std::pow(lg, a2);
    }
    return k;
  }
  template <class T>
  double operator()(std::span<const T> x) const { return at_radius(euclid_norm(x)); }
};

// Deterministic pairwise (tree) summation; independent of thread count and
// used for every reduction that feeds a reported constant.
inline double pairwise_sum(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v.subspan(0, h)) + pairwise_sum(v.subspan(h));
}

// ---------------------------------------------------------------------------
// Radial shell statistics

struct ShellStats {
  double radius = 0;    // weighted mean |x| of the samples in the shell
  double mean = 0;
  double stderr_ = 0;
  double count = 0;     // total weight (lattice-point multiplicity)
};

// Bins samples by Euclidean |x|.  Shells of the given width up to |x| = 64,
// geometric shells with ratio 1.05 beyond; outer shells of a box only have
// partial coverage, which is why fits downstream weight by count.
class RadialAccumulator {
 public:
  explicit RadialAccumulator(double shell_width = 1.0) : width_(shell_width) {
    if (!(shell_width > 0)) throw std::invalid_argument("shell_width must be > 0");
    inner_ = std::size_t(std::ceil(64.0 / width_));
  }

  void add(double radius, double value, double weight = 1.0) {
    if (radius < 0) throw std::invalid_argument("negative radius");
    Bin& b = bins_[index_of(radius)];
    b.w += weight;
    b.wr += weight * radius;
    b.wv += weight * value;
    b.wv2 += weight * value * value;
  }

  bool empty() const { return bins_.empty(); }

  std::vector<ShellStats> profile() const {
    std::vector<ShellStats> out;
    out.reserve(bins_.size());
    for (const auto& [idx, b] : bins_) {
      if (b.w <= 0) continue;
      ShellStats s;
      s.radius = b.wr / b.w;
      s.mean = b.wv / b.w;
      s.count = b.w;
      const double var = std::max(0.0, b.wv2 / b.w - s.mean * s.mean);
      s.stderr_ = b.w > 1 ? std::sqrt(var / b.w) : 0.0;
      out.push_back(s);
    }
    return out;
  }

 private:
  struct Bin { double w = 0, wr = 0, wv = 0, wv2 = 0; };

  std::size_t index_of(double r) const {
    if (r < 64.0) return std::size_t(r / width_);
    // geometric continuation, ratio 1.05
    const double g = std::log(r / 64.0) / std::log(1.05);
    return inner_ + std::size_t(g);
  }

  double width_;
  std::size_t inner_;
  std::map<std::size_t, Bin> bins_;
};

template <class Field>
std::vector<ShellStats> radial_profile(const Field& field, double shell_width) {
  RadialAccumulator acc(shell_width);
  field.for_each_site([&](double radius, double value, double weight) {
    acc.add(radius, value, weight);
  });
  if (acc.empty()) throw std::invalid_argument("radial_profile: empty field");
  return acc.profile();
}

// Overload for an explicit (vector, value) list.
inline std::vector<ShellStats> radial_profile(
    const std::vector<std::pair<std::vector<int>, double>>& field, double shell_width) {
  if (field.empty()) throw std::invalid_argument("radial_profile: empty field");
  RadialAccumulator acc(shell_width);
  for (const auto& [x, v] : field)
    acc.add(euclid_norm(std::span<const int>(x.data(), x.size())), v, 1.0);
  return acc.profile();
}

// ---------------------------------------------------------------------------
// Log-log exponent fits

struct ScalingFit {
  double exponent = 0;        // decay s, reported positive for decaying data
  double amplitude = 0;       // A in A r^{-s} (or A r^{-s}/log r)
  double error_exponent = 0;  // fitted epsilon of the correction term
  bool error_exponent_valid = false;
  double r_min = 0, r_max = 0;
  double residual_rms = 0;    // rms of log-space residuals
  bool use_log_correction = false;
};

// Weighted least squares of log(mean) against log(r); with_log fits
// A r^{-s} / log r instead (the log term carries no free coefficient, so the
// model stays linear).  Weights are shell counts.
inline ScalingFit fit_power_law(const std::vector<ShellStats>& profile,
                                double r_min, double r_max, bool with_log) {
  std::vector<const ShellStats*> sel;
  for (const auto& s : profile)
    if (s.radius >= r_min && s.radius <= r_max) sel.push_back(&s);
  if (sel.size() < 8)
    throw std::invalid_argument("fit_power_law: need at least 8 shells in window");
  for (const auto* s : sel)
    if (!(s->mean > 0))
      throw std::domain_error("fit_power_law: non-positive shell mean in window");

  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto* s : sel) {
    const double w = s->count;
    const double x = std::log(s->radius);
    double y = std::log(s->mean);
    if (with_log) y += std::log(std::log(std::max(s->radius, 1.0000001)));
    sw += w; sx += w * x; sy += w * y; sxx += w * x * x; sxy += w * x * y;
  }
  const double det = sw * sxx - sx * sx;
  if (det == 0) throw std::runtime_error("fit_power_law: degenerate design");
  const double slope = (sw * sxy - sx * sy) / det;
  const double inter = (sy * sxx - sx * sxy) / det;

  ScalingFit fit;
  fit.exponent = -slope;
  fit.amplitude = std::exp(inter);
  fit.r_min = r_min;
  fit.r_max = r_max;
  fit.use_log_correction = with_log;

  double ss = 0;
  std::vector<double> rel;   // relative residual per shell
  std::vector<double> logr;
  for (const auto* s : sel) {
    const double x = std::log(s->radius);
    double y = std::log(s->mean);
    if (with_log) y += std::log(std::log(std::max(s->radius, 1.0000001)));
    const double res = y - (inter + slope * x);
    ss += s->count * res * res;
    rel.push_back(std::expm1(res));
    logr.push_back(x);
  }
  fit.residual_rms = std::sqrt(ss / sw);

  // Best-effort epsilon of the correction term: slope of log|rel residual|
  // against log r, accepted only when |rel| trends monotonically.
  int down = 0, up = 0;
  for (std::size_t i = 1; i < rel.size(); ++i) {
    if (std::abs(rel[i]) < std::abs(rel[i - 1])) ++down; else ++up;
  }
  const std::size_t steps = rel.size() - 1;
  if (steps >= 4 && (down >= int(0.8 * steps) || up >= int(0.8 * steps))) {
    double tw = 0, tx = 0, ty = 0, txx = 0, txy = 0;
    for (std::size_t i = 0; i < rel.size(); ++i) {
      if (std::abs(rel[i]) < 1e-300) continue;
      const double y = std::log(std::abs(rel[i]));
      tw += 1; tx += logr[i]; ty += y; txx += logr[i] * logr[i]; txy += logr[i] * y;
    }
    const double tdet = tw * txx - tx * tx;
    if (tdet != 0 && tw >= 4) {
      fit.error_exponent = -(tw * txy - tx * ty) / tdet;
      fit.error_exponent_valid = true;
    }
  }
  if (!fit.error_exponent_valid) fit.error_exponent = std::nan("");
  return fit;
}

}  // namespace lrl
