#pragma once

// Self-avoiding walk machinery: exact enumeration of the weighted two-point
// coefficients c_n(x), susceptibility series with a ratio-test critical
// point, the implicit lace inversion Pi-hat = G-hat / (1 + p D-hat G-hat),
// and the decay/positivity checks on Pi.  Enumeration keeps supports small
// (the long-range character lives in unequal step weights), so everything
// here is exact up to floating point.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrl/core.hpp"
#include "lrl/fft.hpp"
#include "lrl/stepdist.hpp"

namespace lrl {

inline int lace_ell(Model m) {
  switch (m) {
    case Model::SAW: return 3;
    case Model::Percolation: return 2;
    case Model::RandomWalk: break;
  }
  throw std::domain_error("lace_ell: defined for SAW and percolation");
}

// dense box [-reach, reach]^d
class BoxField {
 public:
  BoxField() = default;
  BoxField(int d, int reach) : d_(d), reach_(reach), side_(2 * reach + 1) {
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) total *= std::size_t(side_);
    v_.assign(total, 0.0);
  }
  int dim() const { return d_; }
  int reach() const { return reach_; }
  std::size_t size() const { return v_.size(); }
  std::vector<double>& data() { return v_; }
  const std::vector<double>& data() const { return v_; }
  std::size_t index(std::span<const int> x) const {
    std::size_t idx = 0;
    for (int i = 0; i < d_; ++i) {
      const int c = x[std::size_t(i)] + reach_;
      idx = idx * std::size_t(side_) + std::size_t(c);
    }
    return idx;
  }
  double& at(std::span<const int> x) { return v_[index(x)]; }
  double at(std::span<const int> x) const { return v_[index(x)]; }
  template <class Fn>
  void for_each(Fn&& fn) const {  // fn(coords span, value)
    std::vector<int> x(std::size_t(d_), -reach_);
    for (std::size_t i = 0; i < v_.size(); ++i) {
      fn(std::span<const int>(x.data(), x.size()), v_[i]);
      for (int ax = d_ - 1; ax >= 0; --ax) {
        if (++x[std::size_t(ax)] <= reach_) break;
        x[std::size_t(ax)] = -reach_;
      }
    }
  }

 private:
  int d_ = 0, reach_ = 0, side_ = 0;
  std::vector<double> v_;
};

struct WalkEnumeration {
  ModelParams params;
  int n_max = 0;
  int reach = 0;
  std::vector<BoxField> coeffs;       // c_n(x), n = 0..n_max
  std::vector<double> coeff_totals;   // C_n = sum_x c_n(x)
};

// exact DFS over the step support with self-avoidance; weights multiply the
// step masses.  The zero-step walk contributes delta_{o,x}.
inline WalkEnumeration enumerate_saw(const StepDistribution& D, int n_max, int box_radius) {
  const ModelParams& P = D.params();
  const int d = P.d;
  if (n_max < 0) throw std::invalid_argument("enumerate_saw: n_max >= 0");

  // step list
  std::vector<std::vector<int>> steps;
  std::vector<double> wts;
  D.for_each_table_entry([&](std::span<const int> x, double w) {
    bool origin = true;
    for (int c : x)
      if (c != 0) origin = false;
    if (!origin) {
      steps.push_back(std::vector<int>(x.begin(), x.end()));
      wts.push_back(w);
    }
  });
  double budget = 1;
  for (int n = 0; n < n_max; ++n) {
    budget *= double(steps.size());
    if (budget > 4.0e9)
      throw std::invalid_argument("enumerate_saw: budget exceeded at n_max = " +
                                  std::to_string(n_max) + " (support " +
                                  std::to_string(steps.size()) + ")");
  }
  const int reach = std::min(box_radius, n_max * D.support_radius());

  WalkEnumeration we;
  we.params = P;
  we.n_max = n_max;
  we.reach = reach;
  we.coeffs.assign(std::size_t(n_max) + 1, BoxField(d, reach));
  {
    std::vector<int> o(std::size_t(d), 0);
    we.coeffs[0].at(std::span<const int>(o.data(), o.size())) = 1.0;  // zero-step delta
  }
  if (n_max == 0) {
    we.coeff_totals = {1.0};
    return we;
  }

  // one DFS per first step, merged in step order
  std::vector<std::vector<BoxField>> partial(steps.size());
  parallel_for(steps.size(), [&](std::size_t first) {
    std::vector<BoxField> local(std::size_t(n_max) + 1, BoxField(d, reach));
    std::vector<std::vector<int>> path(std::size_t(n_max) + 1, std::vector<int>(std::size_t(d), 0));
    // path[0] = origin; place the first step (self-avoidance vs o is free:
    // steps are nonzero).  Paths may leave the box and return; only the
    // accumulation is box-guarded, so every stored c_n(x) is exact.
    for (int i = 0; i < d; ++i) path[1][std::size_t(i)] = steps[first][std::size_t(i)];
    std::function<void(int, double)> dfs = [&](int n, double weight) {
      bool ok = true;
      for (int i = 0; i < d; ++i)
        if (std::abs(path[std::size_t(n)][std::size_t(i)]) > reach) ok = false;
      if (ok)
        local[std::size_t(n)].at(
            std::span<const int>(path[std::size_t(n)].data(), std::size_t(d))) += weight;
      if (n == n_max) return;
      for (std::size_t s = 0; s < steps.size(); ++s) {
        auto& next = path[std::size_t(n) + 1];
        for (int i = 0; i < d; ++i)
          next[std::size_t(i)] = path[std::size_t(n)][std::size_t(i)] + steps[s][std::size_t(i)];
        bool revisit = false;
        for (int m = 0; m <= n && !revisit; ++m) {
          bool same = true;
          for (int i = 0; i < d; ++i)
            if (path[std::size_t(m)][std::size_t(i)] != next[std::size_t(i)]) same = false;
          if (same) revisit = true;
        }
        if (revisit) continue;
        dfs(n + 1, weight * wts[s]);
      }
    };
    dfs(1, wts[first]);
    partial[first] = std::move(local);
  }, 1);

  for (std::size_t s = 0; s < steps.size(); ++s)
    for (int n = 1; n <= n_max; ++n)
      for (std::size_t i = 0; i < we.coeffs[std::size_t(n)].size(); ++i)
        we.coeffs[std::size_t(n)].data()[i] += partial[s][std::size_t(n)].data()[i];

  we.coeff_totals.assign(std::size_t(n_max) + 1, 0.0);
  for (int n = 0; n <= n_max; ++n)
    for (double v : we.coeffs[std::size_t(n)].data())
      we.coeff_totals[std::size_t(n)] += v;
  return we;
}

// G_p(x) = sum_n p^n c_n(x), assembled on an even-symmetric torus
inline SymGrid saw_two_point(const WalkEnumeration& we, double p, int torus_size) {
  if (torus_size / 2 < we.reach)
    throw std::invalid_argument("saw_two_point: torus too small for the enumeration reach");
  SymGrid G(we.params.d, torus_size);
  for (int n = 0; n <= we.n_max; ++n) {
    const double pn = std::pow(p, n);
    we.coeffs[std::size_t(n)].for_each([&](std::span<const int> x, double v) {
      if (v == 0) return;
      G.at(x) += pn * v;
    });
  }
  return G;
}

struct SusceptibilityResult {
  double chi = 0;
  double tail_estimate = 0;
  double p_c_estimate = 0;  // extrapolated ratio test
  std::vector<double> ratios;
};

inline SusceptibilityResult susceptibility_series(const WalkEnumeration& we, double p) {
  SusceptibilityResult res;
  for (std::size_t n = 1; n < we.coeff_totals.size(); ++n)
    res.ratios.push_back(we.coeff_totals[n] / we.coeff_totals[n - 1]);
  // ratio-test critical point: extrapolate r_n = C_n/C_{n-1} linearly in 1/n
  if (res.ratios.size() >= 3) {
    const std::size_t k = res.ratios.size();
    const double r1 = res.ratios[k - 1], r2 = res.ratios[k - 2];
    const double n1 = double(k), n2 = double(k - 1);
    const double slope = (r1 - r2) / (1.0 / n1 - 1.0 / n2);
    res.p_c_estimate = 1.0 / (r1 - slope / n1);
  } else {
    res.p_c_estimate = 1.0 / res.ratios.back();
  }
  const double rho = p * res.ratios.back();
  if (rho >= 1.0)
    throw std::domain_error("susceptibility_series: p beyond the convergence estimate");
  double chi = 0;
  for (std::size_t n = 0; n < we.coeff_totals.size(); ++n)
    chi += std::pow(p, double(n)) * we.coeff_totals[n];
  res.tail_estimate = std::pow(p, double(we.n_max)) * we.coeff_totals.back() * rho / (1.0 - rho);
  res.chi = chi;
  return res;
}

// ---------------------------------------------------------------------------
// implicit lace inversion

struct PiFunction {
  ModelParams params;
  double p = 0;
  int ell = 3;
  SymGrid values;            // Pi_p(x)
  double pi_hat0 = 0;        // Pi-hat(0)
  double reconstruction_error = 0;  // max |G - (Pi + Pi * pD * G)| over the torus
};

// Pi-hat = G-hat / (1 + p D-hat G-hat); the forward recursion is rebuilt in
// x-space as the plumbing check
inline PiFunction invert_lace(const SymGrid& G, const StepDistribution& D, double p) {
  PiFunction pi;
  pi.params = D.params();
  pi.p = p;
  pi.ell = lace_ell(D.params().model);

  SymGrid Ghat = G;
  Ghat.transform();
  SymGrid Dhat = D.folded_transform(G.side(), false);
  // denominator check (subcritical validity)
  for (std::size_t i = 0; i < Ghat.size(); ++i) {
    if (Ghat.data()[i] <= 0)
      throw std::domain_error("invert_lace: G-hat must be positive (subcritical)");
    if (1.0 + p * Dhat.data()[i] * Ghat.data()[i] == 0)
      throw std::domain_error("invert_lace: vanishing denominator");
  }
  SymGrid Pihat(G.dim(), G.side());
  for (std::size_t i = 0; i < Pihat.size(); ++i)
    Pihat.data()[i] = Ghat.data()[i] / (1.0 + p * Dhat.data()[i] * Ghat.data()[i]);
  pi.pi_hat0 = Pihat.data()[0];

  pi.values = Pihat;
  pi.values.transform();
  pi.values.scale(1.0 / pi.values.torus_volume());

  // forward reconstruction in x-space: G ?= Pi + Pi * (pD) * G
  SymGrid Dmass = D.folded_mass(G.side());
  SymGrid conv = convolve(pi.values, convolve(Dmass, G));
  double worst = 0;
  for (std::size_t i = 0; i < G.size(); ++i) {
    const double rhs = pi.values.data()[i] + p * conv.data()[i];
    worst = std::max(worst, std::abs(G.data()[i] - rhs));
  }
  pi.reconstruction_error = worst;
  return pi;
}

// decay of |Pi - delta| against the target exponent ell (d - alpha^2-wedge)
struct PiBoundResult {
  ScalingFit fit;
  double target_exponent = 0;      // ell * (d - a)
  double prefactor_lambda2 = 0;    // max |Pi - delta| <x>^{ell(d-a)} (log^ell) / lambda^2
  std::vector<ShellStats> profile;
};

inline PiBoundResult verify_pi_bound(const PiFunction& pi, double lambda, double r_max) {
  const ModelParams& P = pi.params;
  const double a = P.effective_alpha();
  const bool is2 = std::abs(P.alpha - 2.0) < 1e-12;
  PiBoundResult res;
  res.target_exponent = double(pi.ell) * (P.d - a);

  RadialAccumulator acc(1.0);
  double pref = 0;
  pi.values.for_each_reduced([&](const int* c, std::size_t i, double w) {
    double r2 = 0;
    for (int ax = 0; ax < P.d; ++ax) r2 += double(c[ax]) * double(c[ax]);
    const double r = std::sqrt(r2);
    if (r < 1.0 || r > r_max) return;
    const double dev = std::abs(pi.values.data()[i]);  // x != o, so Pi - delta = Pi
    acc.add(r, dev, w);
    double env = std::pow(fuzzy_norm_scalar(r, P.L), -res.target_exponent);
    if (is2) env /= std::pow(std::log(fuzzy_norm_scalar(r / P.L, 1.0)), double(pi.ell));
    pref = std::max(pref, dev / env);
  });
  res.profile = acc.profile();
  // drop empty/zero shells for the fit
  std::vector<ShellStats> fit_prof;
  for (const auto& s : res.profile)
    if (s.mean > 0) fit_prof.push_back(s);
  if (fit_prof.size() >= 8) {
    res.fit = fit_power_law(fit_prof, 1.0, r_max, false);
  } else if (fit_prof.size() >= 3) {
    // short-reach enumerations: log-log slope through first/last shells
    const auto& a0 = fit_prof.front();
    const auto& a1 = fit_prof.back();
    res.fit.exponent = -(std::log(a1.mean) - std::log(a0.mean)) /
                       (std::log(a1.radius) - std::log(a0.radius));
    res.fit.amplitude = a0.mean * std::pow(a0.radius, res.fit.exponent);
    res.fit.r_min = a0.radius;
    res.fit.r_max = a1.radius;
  } else {
    throw std::runtime_error("verify_pi_bound: too few usable shells");
  }
  res.prefactor_lambda2 = pref / (lambda * lambda);
  return res;
}

// (Pi * D)(x) / D(x): positivity of the one-step reweighting for alpha <= 2,
// or the documented obstruction (ratio growing with |x|) for alpha > 2
struct PositivityResult {
  double min_ratio = 0;
  std::vector<int> argmin;
  std::vector<std::pair<double, double>> ratio_by_radius;  // (r, max ratio at r)
  SymGrid normalized;  // (Pi * D) / Pi-hat(0)
};

inline PositivityResult verify_positivity(const PiFunction& pi, const StepDistribution& D) {
  const ModelParams& P = pi.params;
  SymGrid Dmass = D.folded_mass(pi.values.side());
  SymGrid conv = convolve(pi.values, Dmass);
  PositivityResult res;
  res.argmin.assign(std::size_t(P.d), 0);
  res.min_ratio = 1e300;
  std::map<long long, double> by_r2;
  conv.for_each_reduced([&](const int* c, std::size_t i, double) {
    std::vector<int> x(c, c + P.d);
    const double dm = Dmass.at(std::span<const int>(x.data(), x.size()));
    if (dm <= 0) return;
    const double ratio = conv.data()[i] / dm;
    if (ratio < res.min_ratio) {
      res.min_ratio = ratio;
      res.argmin = x;
    }
    long long r2 = 0;
    for (int ax = 0; ax < P.d; ++ax) r2 += (long long)c[ax] * c[ax];
    auto it = by_r2.find(r2);
    if (it == by_r2.end() || ratio > it->second) by_r2[r2] = ratio;
  });
  for (const auto& [r2, ratio] : by_r2)
    res.ratio_by_radius.push_back({std::sqrt(double(r2)), ratio});
  res.normalized = conv;
  res.normalized.scale(1.0 / pi.pi_hat0);
  return res;
}

}  // namespace lrl
