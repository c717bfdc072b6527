#pragma once

// Certificates for the (D1)-(D3) properties of a step distribution and the
// v_alpha extraction.  Everything reports measured constants; the paper's
// O(.) constants are existential, so the checks are falsification-oriented.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "lrl/stepdist.hpp"

namespace lrl {

struct VAlphaResult {
  double v = 0;
  double v_axis = 0, v_diag = 0;
  double spread = 0;  // |axis - diag| / v
  bool isotropy_checked = false;
  bool converged = false;
};

namespace detail {

// extrapolate f_j = v + C k_j^e on a geometric grid (k decreasing, ratio rho)
inline double power_extrapolate(const std::vector<double>& f, double rho, bool* ok) {
  const std::size_t n = f.size();
  if (n < 4) { if (ok) *ok = false; return f.empty() ? 0.0 : f.back(); }
  // correction exponent from the last few difference ratios
  std::vector<double> es;
  for (std::size_t j = n >= 6 ? n - 6 : 0; j + 2 < n; ++j) {
    const double d1 = f[j] - f[j + 1];
    const double d2 = f[j + 1] - f[j + 2];
    if (d1 == 0 || d2 == 0 || d1 * d2 <= 0) continue;
    const double e = std::log(d1 / d2) / std::log(1.0 / rho);
    if (e > 0.05 && e < 4.0) es.push_back(e);
  }
  if (es.empty()) {
    // differences already at noise level: the last value is the limit
    const double rel = std::abs(f[n - 1] - f[n - 2]) / std::max(1e-300, std::abs(f[n - 1]));
    if (ok) *ok = rel < 1e-3;
    return f[n - 1];
  }
  double e = 0;
  for (double x : es) e += x;
  e /= double(es.size());
  const double r = std::pow(rho, e);
  const double v = (f[n - 1] - r * f[n - 2]) / (1.0 - r);
  if (ok) *ok = true;
  return v;
}

// alpha = 2: f_j = v + b u_j + c u_j^2 with u = 1/log(1/k); intercept
inline double logcorr_extrapolate(const std::vector<double>& f, const std::vector<double>& u,
                                  bool* ok) {
  const std::size_t n = f.size();
  if (n < 5) { if (ok) *ok = false; return f.empty() ? 0.0 : f.back(); }
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, t0 = 0, t1 = 0, t2 = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double x = u[j], y = f[j];
    s0 += 1; s1 += x; s2 += x * x; s3 += x * x * x; s4 += x * x * x * x;
    t0 += y; t1 += x * y; t2 += x * x * y;
  }
  // solve the 3x3 normal equations by Cramer
  const double det = s0 * (s2 * s4 - s3 * s3) - s1 * (s1 * s4 - s3 * s2) +
                     s2 * (s1 * s3 - s2 * s2);
  if (std::abs(det) < 1e-30) { if (ok) *ok = false; return f.back(); }
  const double v = (t0 * (s2 * s4 - s3 * s3) - s1 * (t1 * s4 - s3 * t2) +
                    s2 * (t1 * s3 - s2 * t2)) / det;
  if (ok) *ok = true;
  return v;
}

}  // namespace detail

// v_alpha = lim (1 - D-hat(k)) / |k|^{a}  (a = alpha^2-wedge, alpha != 2)
//         = lim (1 - D-hat(k)) / (|k|^2 log(1/|k|))   (alpha = 2),
// extrapolated over a geometric |k| ladder along the axis, cross-checked
// along the (1,1)/sqrt2 diagonal when d >= 2.
inline VAlphaResult estimate_v_alpha_full(const StepDistribution& D) {
  const ModelParams& P = D.params();
  const double a = P.effective_alpha();
  const bool is2 = std::abs(P.alpha - 2.0) < 1e-12;
  const double rho = std::pow(2.0, -0.5);

  // power profile beyond the analytic-marginal dimensions: alpha > 2 laws
  // are finite-variance after truncation, so v is the exact second-moment
  // limit of the support-conditioned law
  if (D.kind() == DistKind::PowerLawProfile && P.d > 3) {
    if (!(P.alpha > 2.0))
      throw std::runtime_error("estimate_v_alpha: power profile with d > 3 needs alpha > 2");
    VAlphaResult res;
    res.v = res.v_axis = res.v_diag =
        D.sigma2() / (2.0 * P.d) / (1.0 - D.tail_mass());
    res.converged = true;
    return res;
  }

  double k_hi = 0.25 / P.L;
  double k_lo;
  if (D.kind() == DistKind::CompoundZeta)
    k_lo = std::max(1e-5, 1e-4 / P.L);
  else
    k_lo = 1e-3 / P.L;
  if (!(k_lo < k_hi / 4))
    throw std::runtime_error("estimate_v_alpha: no usable small-k window");

  auto ladder = [&](KDir dir, bool* ok) {
    std::vector<double> f, u;
    for (double k = k_hi; k >= k_lo; k *= rho) {
      const double gap = D.gap_dir(k, dir);
      if (is2) {
        f.push_back(gap / (k * k * std::log(1.0 / k)));
        u.push_back(1.0 / std::log(1.0 / k));
      } else {
        f.push_back(gap / std::pow(k, a));
      }
    }
    return is2 ? detail::logcorr_extrapolate(f, u, ok) : detail::power_extrapolate(f, rho, ok);
  };

  VAlphaResult res;
  bool ok_axis = false, ok_diag = true;
  res.v_axis = ladder(KDir::Axis, &ok_axis);
  res.v = res.v_diag = res.v_axis;
  if (P.d >= 2) {
    try {
      res.v_diag = ladder(KDir::Diag2, &ok_diag);
      res.isotropy_checked = true;
      res.v = 0.5 * (res.v_axis + res.v_diag);
      res.spread = std::abs(res.v_axis - res.v_diag) / std::max(1e-300, std::abs(res.v));
    } catch (const std::exception&) {
      // diagonal evaluator unavailable (power profile d = 3): axis only
    }
  }
  res.converged = ok_axis && ok_diag && res.v > 0 && res.spread < 0.05;
  return res;
}

inline double estimate_v_alpha(const StepDistribution& D) {
  VAlphaResult r = estimate_v_alpha_full(D);
  if (!r.converged)
    throw std::runtime_error("estimate_v_alpha: extrapolation did not converge (spread " +
                             std::to_string(r.spread) + ")");
  return r.v;
}

struct StepDistCertificate {
  // (D1)/(D2)
  double delta = 0;
  bool d1_ok = false;
  double asymp_const_lo = 0, asymp_const_hi = 0;
  double smallk_slope = 0;
  double smallk_window_lo = 0, smallk_window_hi = 0;
  double alpha2_variation = 0;
  bool d2_ok = false;
  std::vector<double> witness_k;
  // shared
  double v_alpha = std::nan("");
  double v_alpha_spread = std::nan("");
  double c_sandwich = 0;
  // (D3)
  std::vector<double> sup_prefactor_by_n, x_prefactor_by_n;
  double sup_prefactor = 0, x_prefactor = 0;
  double sup_drift = 1, x_drift = 1;  // c_{n_max} / c_{n_max/2}: 1 = settled
  bool d3_ok = false;
  // derivative bound (alpha > 2)
  double derivative_constant = std::nan("");
};

// k-space certificate: scans the momentum grid of the 2*resolution torus
// (where the folded transform equals the infinite-lattice D-hat exactly) for
// the Delta bounds, measures the (L|k|)^{a} envelope constants on |k| <= 1/L,
// and fits the small-k slope along the axis over the decade
// [window_lo, window_hi]/L.  At alpha = 2 the compensated ratio
// f/(k^2 log(1/(Lk))) carries the paper's O(1) offset, so its <5% flatness
// needs a lower decade than the alpha != 2 default.
inline StepDistCertificate certify_D1_D2(const StepDistribution& D, int k_grid_resolution,
                                         double window_lo = 1e-3, double window_hi = 1e-2) {
  if (k_grid_resolution < 8) throw std::invalid_argument("certify_D1_D2: resolution too small");
  const ModelParams& P = D.params();
  const double a = P.effective_alpha();
  const bool is2 = std::abs(P.alpha - 2.0) < 1e-12;

  StepDistCertificate cert;
  cert.c_sandwich = D.sandwich_c();

  const int M = 2 * k_grid_resolution;
  SymGrid dhat = D.folded_transform(M, /*conditioned=*/true);
  const double kstep = 2.0 * kPi / M;

  double max_f = -1e300, min_f_out = 1e300;
  std::vector<int> arg_max(std::size_t(P.d), 0), arg_min(std::size_t(P.d), 0);
  double lo_env = 1e300, hi_env = 0;
  dhat.for_each_reduced([&](const int* c, std::size_t i, double) {
    double k2 = 0;
    bool zero = true;
    for (int ax = 0; ax < P.d; ++ax) {
      const double k = kstep * c[ax];
      k2 += k * k;
      if (c[ax] != 0) zero = false;
    }
    if (zero) return;
    const double f = 1.0 - dhat.data()[i];
    const double kn = std::sqrt(k2);
    if (f > max_f) {
      max_f = f;
      for (int ax = 0; ax < P.d; ++ax) arg_max[std::size_t(ax)] = c[ax];
    }
    if (kn > 1.0 / P.L && f < min_f_out) {
      min_f_out = f;
      for (int ax = 0; ax < P.d; ++ax) arg_min[std::size_t(ax)] = c[ax];
    }
    if (kn <= 1.0 / P.L) {
      const double env = is2 ? std::pow(P.L * kn, 2.0) * std::log(kPi / (2.0 * P.L * kn))
                             : std::pow(P.L * kn, a);
      const double ratio = f / env;
      lo_env = std::min(lo_env, ratio);
      hi_env = std::max(hi_env, ratio);
    }
  });
  cert.delta = std::min(2.0 - max_f, min_f_out);
  cert.d1_ok = cert.delta > 0 && cert.delta < 1;
  if (!cert.d1_ok) {
    const auto& w = (2.0 - max_f <= min_f_out) ? arg_max : arg_min;
    for (int ax = 0; ax < P.d; ++ax) cert.witness_k.push_back(kstep * w[std::size_t(ax)]);
  }
  cert.asymp_const_lo = lo_env;
  cert.asymp_const_hi = hi_env;

  // small-k slope along the axis over a decade (scaled by 1/L)
  const double w_lo = window_lo / P.L, w_hi = window_hi / P.L;
  cert.smallk_window_lo = w_lo;
  cert.smallk_window_hi = w_hi;
  const int npts = 13;
  try {
    if (!is2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (int i = 0; i < npts; ++i) {
        const double k = w_lo * std::pow(w_hi / w_lo, double(i) / (npts - 1));
        const double f = D.gap_dir(k, KDir::Axis);
        const double X = std::log(k), Y = std::log(f);
        sx += X; sy += Y; sxx += X * X; sxy += X * Y;
      }
      cert.smallk_slope = (npts * sxy - sx * sy) / (npts * sxx - sx * sx);
      cert.d2_ok = std::abs(cert.smallk_slope - a) <= 0.05;
    } else {
      double lo = 1e300, hi = 0;
      for (int i = 0; i < npts; ++i) {
        const double k = w_lo * std::pow(w_hi / w_lo, double(i) / (npts - 1));
        const double f = D.gap_dir(k, KDir::Axis);
        const double g = f / (k * k * std::log(1.0 / (P.L * k)));
        lo = std::min(lo, g);
        hi = std::max(hi, g);
      }
      cert.alpha2_variation = hi / lo - 1.0;
      cert.smallk_slope = 2.0;
      cert.d2_ok = cert.alpha2_variation < 0.05;
    }
  } catch (const std::exception&) {
    cert.smallk_slope = std::nan("");
    cert.d2_ok = false;
  }

  try {
    VAlphaResult v = estimate_v_alpha_full(D);
    cert.v_alpha = v.v;
    cert.v_alpha_spread = v.spread;
  } catch (const std::exception&) {
    // reported as nan; certification of D1/D2 does not depend on it
  }
  return cert;
}

// (D3): for n = 1..n_max computes D^{*n} on the torus and measures the
// smallest valid prefactors of the sup bound and the pointwise <x> bound.
// d3_ok asserts no growth: the late-n prefactor max must not exceed the
// early-n max by more than 5%.  force_no_log drops the alpha=2 log factors
// (used to demonstrate that the log correction is real).
inline void certify_D3(const StepDistribution& D, int n_max, int torus_size,
                       StepDistCertificate& cert, bool force_no_log = false) {
  if (n_max < 4) throw std::invalid_argument("certify_D3: n_max >= 4");
  const ModelParams& P = D.params();
  const double a = P.effective_alpha();
  const bool is2 = !force_no_log && std::abs(P.alpha - 2.0) < 1e-12;
  const int d = P.d;

  SymGrid dhat = D.folded_mass(torus_size);
  const double in_mass = dhat.total();
  dhat.transform();

  cert.sup_prefactor_by_n.assign(std::size_t(n_max) + 1, 0.0);
  cert.x_prefactor_by_n.assign(std::size_t(n_max) + 1, 0.0);

  SymGrid work(P.d, torus_size);
  for (int n = 1; n <= n_max; ++n) {
    work = dhat;
    parallel_for(work.size(), [&](std::size_t i) {
      work.data()[i] = std::pow(work.data()[i], n);
    }, 1 << 15);
    work.transform();
    work.scale(1.0 / work.torus_volume());
    const double want = std::pow(in_mass, n);
    const double have = work.total();
    if (have > 0) work.scale(want / have);

    const double sup_env =
        std::pow(P.L, -double(d)) *
        (is2 ? std::pow(double(n) * std::log(kPi * n / 2.0), -double(d) / 2.0)
             : std::pow(double(n), -double(d) / a));
    double sup_v = 0, x_v = 0;
    work.for_each_reduced([&](const int* c, std::size_t i, double) {
      const double val = work.data()[i];
      if (val <= 0) return;
      double r2 = 0;
      for (int ax = 0; ax < d; ++ax) r2 += double(c[ax]) * double(c[ax]);
      const double r = std::sqrt(r2);
      sup_v = std::max(sup_v, val);
      const double envx = double(n) * std::pow(P.L, a) /
                          std::pow(fuzzy_norm_scalar(r, P.L), d + a) *
                          (is2 ? std::log(fuzzy_norm_scalar(r / P.L, 1.0)) : 1.0);
      x_v = std::max(x_v, val / envx);
    });
    cert.sup_prefactor_by_n[std::size_t(n)] = sup_v / sup_env;
    cert.x_prefactor_by_n[std::size_t(n)] = x_v;
  }
  double early_sup = 0, late_sup = 0, early_x = 0, late_x = 0;
  for (int n = 1; n <= n_max; ++n) {
    if (n <= n_max / 2) {
      early_sup = std::max(early_sup, cert.sup_prefactor_by_n[std::size_t(n)]);
      early_x = std::max(early_x, cert.x_prefactor_by_n[std::size_t(n)]);
    } else {
      late_sup = std::max(late_sup, cert.sup_prefactor_by_n[std::size_t(n)]);
      late_x = std::max(late_x, cert.x_prefactor_by_n[std::size_t(n)]);
    }
  }
  cert.sup_prefactor = std::max(early_sup, late_sup);
  cert.x_prefactor = std::max(early_x, late_x);
  cert.sup_drift = cert.sup_prefactor_by_n[std::size_t(n_max)] /
                   cert.sup_prefactor_by_n[std::size_t(n_max / 2)];
  cert.x_drift = cert.x_prefactor_by_n[std::size_t(n_max)] /
                 cert.x_prefactor_by_n[std::size_t(n_max / 2)];
  cert.d3_ok = late_sup <= 1.05 * early_sup && late_x <= 1.05 * early_x;
}

// (Dnxdiffbd), alpha > 2 only: smallest K with
// |D^n(x) - (D^n(x+y)+D^n(x-y))/2| <= n K L^{a} <y>_L^2 / <x>_L^{d+a+2}
// over the scanned (n, x, y) window with |y| <= |x|/3.
inline double certify_derivative_bound(const StepDistribution& D, int n_max) {
  const ModelParams& P = D.params();
  if (!(P.alpha > 2.0))
    throw std::domain_error("certify_derivative_bound: requires alpha > 2");
  const int d = P.d;
  const double a = P.effective_alpha();
  const int M = d <= 3 ? 128 : 64;

  SymGrid dhat = D.folded_mass(M);
  const double in_mass = dhat.total();
  dhat.transform();

  double K = 0;
  SymGrid work(d, M);
  std::vector<int> x(std::size_t(d), 0), xp(std::size_t(d), 0), xm(std::size_t(d), 0);
  for (int n = 1; n <= n_max; ++n) {
    work = dhat;
    for (auto& v : work.data()) v = std::pow(v, n);
    work.transform();
    work.scale(1.0 / work.torus_volume());
    const double have = work.total();
    if (have > 0) work.scale(std::pow(in_mass, n) / have);

    work.for_each_reduced([&](const int* c, std::size_t, double) {
      double r2 = 0;
      for (int ax = 0; ax < d; ++ax) r2 += double(c[ax]) * double(c[ax]);
      const double r = std::sqrt(r2);
      if (r < 3.0 || r > M / 4) return;
      for (int ax = 0; ax < d; ++ax) x[std::size_t(ax)] = c[ax];
      const double fx = work.at(std::span<const int>(x.data(), x.size()));
      // axis and (1,1) diagonal offsets, geometric sizes up to |x|/3
      for (int j = 1; 3 * j <= int(r); j *= 2) {
        for (int mode = 0; mode < d + 1; ++mode) {
          double y2 = 0;
          for (int ax = 0; ax < d; ++ax) {
            int yc = 0;
            if (mode < d) yc = ax == mode ? j : 0;
            else yc = (ax < 2) ? j : 0;
            xp[std::size_t(ax)] = x[std::size_t(ax)] + yc;
            xm[std::size_t(ax)] = x[std::size_t(ax)] - yc;
            y2 += double(yc) * yc;
          }
          const double ynorm = std::sqrt(y2);
          if (3.0 * ynorm > r || ynorm == 0) continue;
          const double avg = 0.5 * (work.at(std::span<const int>(xp.data(), xp.size())) +
                                    work.at(std::span<const int>(xm.data(), xm.size())));
          const double lhs = std::abs(fx - avg);
          const double rhs = double(n) * std::pow(P.L, a) *
                             std::pow(fuzzy_norm_scalar(ynorm, P.L), 2.0) /
                             std::pow(fuzzy_norm_scalar(r, P.L), d + a + 2.0);
          if (rhs > 0) K = std::max(K, lhs / rhs);
        }
      }
    });
  }
  return K;
}

}  // namespace lrl
