#pragma once

// Small special-function kit: Riemann zeta partial sums and tails
// (Euler-Maclaurin), upper incomplete gamma for the zeta-weighted
// convolution tails, exponential integral E1, and the oscillatory cosine
// tail integral of a power law.  Everything double precision, checked
// against brute-force sums in the test suite.

#include <cmath>
#include <stdexcept>

namespace lrl {

// zeta(s), s > 1, by Euler-Maclaurin on the tail beyond N.
inline double riemann_zeta(double s, int N = 64) {
  double sum = 0;
  for (int n = 1; n <= N; ++n) sum += std::pow(double(n), -s);
  const double Nd = N;
  double tail = std::pow(Nd, 1 - s) / (s - 1) - 0.5 * std::pow(Nd, -s);
  tail += s / 12.0 * std::pow(Nd, -s - 1);
  tail -= s * (s + 1) * (s + 2) / 720.0 * std::pow(Nd, -s - 3);
  return sum + tail;
}

// sum_{t > T} t^{-s}, s > 1
inline double zeta_tail(double s, double T) {
  if (T < 64) {
    double extra = 0;
    for (int t = int(T) + 1; t <= 64; ++t) extra += std::pow(double(t), -s);
    return extra + zeta_tail(s, 64);
  }
  double tail = std::pow(T, 1 - s) / (s - 1) - 0.5 * std::pow(T, -s);
  tail += s / 12.0 * std::pow(T, -s - 1);
  tail -= s * (s + 1) * (s + 2) / 720.0 * std::pow(T, -s - 3);
  return tail;
}

// Exponential integral E1(z), z > 0
inline double expint_e1(double z) {
  if (!(z > 0)) throw std::domain_error("expint_e1: z must be > 0");
  if (z <= 1.0) {
    // series: E1 = -gamma - ln z + sum (-1)^{k+1} z^k / (k k!)
    const double euler = 0.57721566490153286061;
    double sum = 0, term = 1;
    for (int k = 1; k < 40; ++k) {
      term *= -z / k;
      sum -= term / k;
      if (std::abs(term / k) < 1e-18) break;
    }
    return -euler - std::log(z) + sum;
  }
  // Lentz continued fraction: E1 = e^-z / (z + 1/(1 + 1/(z + 2/(1 + ...))))
  double b = z + 1.0, c = 1e308, d = 1.0 / b, h = d;
  for (int i = 1; i <= 200; ++i) {
    const double a = -double(i) * double(i);
    b += 2.0;
    d = 1.0 / (a * d + b);
    c = b + a / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-z);
}

// Upper incomplete gamma  Gamma(s, z) = int_z^inf u^{s-1} e^-u du,  z > 0,
// for real s <= 1 (the range the zeta-convolution tails need).
inline double upper_gamma(double s, double z) {
  if (!(z > 0)) throw std::domain_error("upper_gamma: z must be > 0");
  if (std::abs(s) < 1e-12) return expint_e1(z);
  if (s <= -0.999999) {
    // climb with Gamma(s,z) = (Gamma(s+1,z) - z^s e^-z) / s
    return (upper_gamma(s + 1.0, z) - std::pow(z, s) * std::exp(-z)) / s;
  }
  if (z > 30.0) {
    // continued fraction (Lentz), excellent for large z
    double b = z + 1.0 - s, c = 1e308, d = 1.0 / b, h = d;
    for (int i = 1; i <= 300; ++i) {
      const double a = -double(i) * (double(i) - s);
      b += 2.0;
      d = 1.0 / (a * d + b);
      c = b + a / c;
      const double del = c * d;
      h *= del;
      if (std::abs(del - 1.0) < 1e-16) break;
    }
    return h * std::exp(-z + s * std::log(z));
  }
  // Gamma(s) - lower gamma series
  double gs;
  if (s > 0) {
    gs = std::tgamma(s);
  } else {
    gs = std::tgamma(s + 1.0) / s;  // Gamma(s) = Gamma(s+1)/s, s in (-1,0)
  }
  double term = 1.0 / s, sum = term;
  for (int k = 1; k < 300; ++k) {
    term *= z / (s + k);
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  const double lower = sum * std::exp(-z + s * std::log(z));
  return gs - lower;
}

// sum_{t = T}^{inf} t^{-s} e^{-eps t}  (s > 0, eps >= 0) by midpoint integral
// plus Euler-Maclaurin corrections; used for zeta-weight tails under a
// geometric damping.
inline double damped_zeta_tail_from(double s, double eps, double T) {
  if (eps <= 0) return std::pow(T, -s) + zeta_tail(s, T);
  auto g = [&](double t) { return std::pow(t, -s) * std::exp(-eps * t); };
  // int_T^inf t^-s e^-eps t dt = eps^{s-1} Gamma(1-s, eps T)
  const double integral = std::pow(eps, s - 1.0) * upper_gamma(1.0 - s, eps * T);
  const double gp = -(s / T + eps) * g(T);  // g'(T)
  return integral + 0.5 * g(T) - gp / 12.0;
}

// Xi_a(w) = int_w^inf u^{-1-a} cos u du  (a > 0), by resolved quadrature up
// to W and an integration-by-parts asymptotic series beyond.  The stretch
// below u = 2 is integrated in log u (the integrand is a bare power there);
// the oscillatory stretch uses pi/16-resolved panels.
inline double cosine_power_tail(double a, double w) {
  if (!(w > 0)) throw std::domain_error("cosine_power_tail: w must be > 0");
  const double s = 1.0 + a;
  const double W = std::max(w, 40.0);
  auto f = [&](double u) { return std::pow(u, -s) * std::cos(u); };
  double quad = 0;
  const double knee = 2.0;
  if (w < knee) {
    // Simpson in v = log u, du = u dv
    const int n2 = 800;
    const double h = std::log(knee / w) / n2;
    double acc = f(w) * w + f(knee) * knee;
    for (int i = 1; i < n2; ++i) {
      const double u = w * std::exp(h * i);
      acc += f(u) * u * (i % 2 ? 4.0 : 2.0);
    }
    quad += acc * h / 3.0;
  }
  const double lo = std::max(w, knee);
  if (lo < W) {
    const int n = std::max(16, int(std::ceil((W - lo) / (3.14159265358979324 / 16))));
    const int n2 = n + (n % 2);
    const double h = (W - lo) / n2;
    double acc = f(lo) + f(W);
    for (int i = 1; i < n2; ++i) acc += f(lo + h * i) * (i % 2 ? 4.0 : 2.0);
    quad += acc * h / 3.0;
  }
  // beyond W: Re[ e^{iW} W^{-s} ( -i )^{-1} sum_j prod(s..s+j-1)/(iW)^j ] ...
  // standard IBP series: int_W^inf u^-s e^{iu} du = i e^{iW} W^-s *
  //   sum_{j>=0} (-1)^j (s)_j (i/W)^j ... keep 6 terms.
  double re = 0, im = 0;
  {
    // accumulate c_j = (s)_j / W^j with alternating i powers
    double coef = 1.0;
    double rr = 0, ri = 0;
    // term_j = coef * i^{j+1} * (-1)^j / W^j ; assemble via rotation
    double cr = 0, ci = 1;  // i^{1}
    for (int j = 0; j < 6; ++j) {
      rr += coef * cr;
      ri += coef * ci;
      coef *= (s + j) / W;
      // multiply by -i each step: (cr,ci) -> (ci, -cr)
      const double t = cr;
      cr = ci;
      ci = -t;
    }
    const double ws = std::pow(W, -s);
    const double cw = std::cos(W), sw = std::sin(W);
    // e^{iW} (rr + i ri): real part
    re = ws * (cw * rr - sw * ri);
    im = ws * (cw * ri + sw * rr);
    (void)im;
  }
  return quad + re;
}

// int_w^inf u^{-1-a} Phi_d(u) du where Phi_d is the spherical average of a
// plane wave: J_0 (d = 2), sin(u)/u (d = 3), 2 J_1(u)/u (d = 4).  Resolved
// composite Simpson; the integrand envelope beyond W is below 1e-10 of the
// head for every use here.
inline double oscillatory_power_tail(int d, double a, double w) {
  if (!(w > 0)) throw std::domain_error("oscillatory_power_tail: w must be > 0");
  auto phi = [&](double u) {
    switch (d) {
      case 2: return std::cyl_bessel_j(0.0, u);
      case 3: return std::sin(u) / u;
      case 4: return 2.0 * std::cyl_bessel_j(1.0, u) / u;
      default: throw std::domain_error("oscillatory_power_tail: d in {2,3,4}");
    }
  };
  const double s = 1.0 + a;
  auto f = [&](double u) { return std::pow(u, -s) * phi(u); };
  double acc = 0;
  // log-spaced panels below the first oscillation scale
  const double knee = 2.0;
  if (w < knee) {
    const int n2 = 600;
    const double h = std::log(knee / w) / n2;
    double sum = f(w) * w + f(knee) * knee;
    for (int i = 1; i < n2; ++i) {
      const double u = w * std::exp(h * i);
      sum += f(u) * u * (i % 2 ? 4.0 : 2.0);
    }
    acc += sum * h / 3.0;
  }
  const double lo = std::max(w, knee);
  const double W = std::max(lo * 1.0001, 3000.0);
  {
    const int n = std::max(32, int(std::ceil((W - lo) / 0.2)));
    const int n2 = n + (n % 2);
    const double h = (W - lo) / n2;
    double sum = f(lo) + f(W);
    for (int i = 1; i < n2; ++i) sum += f(lo + h * i) * (i % 2 ? 4.0 : 2.0);
    acc += sum * h / 3.0;
  }
  return acc;
}

}  // namespace lrl
