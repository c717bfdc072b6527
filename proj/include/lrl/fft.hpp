#pragma once

// FFT substrate.  Two grid types:
//  - SymGrid: a real field on the M-torus that is even in every coordinate,
//    stored on the reduced domain [0, M/2]^d.  REDFT00 along each axis is
//    exactly the full torus DFT of the even extension, so convolutions and
//    resolvents of symmetric step laws run in 1/2^d memory.
//  - TorusField: dense real field on the full torus (percolation, SAW).
// Plans are cached (FFTW_ESTIMATE | FFTW_UNALIGNED) and reused via the
// new-array execute interface; planning is serialized behind a mutex.

#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

#include "lrl/core.hpp"
#include "lrl/parallel.hpp"

namespace lrl {

namespace detail {

inline std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

struct PlanKey {
  std::vector<int> dims;
  int kind;  // 0 = r2r REDFT00, +1/-1 = complex DFT sign
  bool operator<(const PlanKey& o) const {
    if (kind != o.kind) return kind < o.kind;
    return dims < o.dims;
  }
};

inline fftw_plan get_plan_r2r(const std::vector<int>& dims, double* buf) {
  static std::map<PlanKey, fftw_plan> cache;
  std::lock_guard<std::mutex> lk(fftw_mutex());
  PlanKey key{dims, 0};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<fftw_r2r_kind> kinds(dims.size(), FFTW_REDFT00);
  fftw_plan p = fftw_plan_r2r(int(dims.size()), dims.data(), buf, buf, kinds.data(),
                              FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p) throw std::runtime_error("fftw_plan_r2r failed");
  cache.emplace(key, p);
  return p;
}

inline fftw_plan get_plan_dft(const std::vector<int>& dims, fftw_complex* buf, int sign) {
  static std::map<PlanKey, fftw_plan> cache;
  std::lock_guard<std::mutex> lk(fftw_mutex());
  PlanKey key{dims, sign};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  fftw_plan p = fftw_plan_dft(int(dims.size()), dims.data(), buf, buf, sign,
                              FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!p) throw std::runtime_error("fftw_plan_dft failed");
  cache.emplace(key, p);
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------

class SymGrid {
 public:
  SymGrid() = default;
  SymGrid(int d, int side) : d_(d), M_(side), n_(side / 2 + 1) {
    if (d < 1 || d > 7) throw std::invalid_argument("SymGrid: d out of range");
    if (side < 2 || side % 2 != 0)
      throw std::invalid_argument("SymGrid: side must be even and >= 2");
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) total *= std::size_t(n_);
    v_.assign(total, 0.0);
    stride_.assign(d, 1);
    for (int i = d - 2; i >= 0; --i) stride_[i] = stride_[i + 1] * n_;
  }

  int dim() const { return d_; }
  int side() const { return M_; }
  int reduced() const { return n_; }
  std::size_t size() const { return v_.size(); }
  std::vector<double>& data() { return v_; }
  const std::vector<double>& data() const { return v_; }

  int fold(long long x) const {
    long long m = x % M_;
    if (m < 0) m += M_;
    if (m > M_ / 2) m = M_ - m;
    return int(m);
  }

  std::size_t index_reduced(std::span<const int> c) const {
    std::size_t idx = 0;
    for (int i = 0; i < d_; ++i) idx += std::size_t(c[i]) * stride_[i];
    return idx;
  }

  double& at(std::span<const int> x) {
    std::size_t idx = 0;
    for (int i = 0; i < d_; ++i) idx += std::size_t(fold(x[i])) * stride_[i];
    return v_[idx];
  }
  double at(std::span<const int> x) const { return const_cast<SymGrid*>(this)->at(x); }

  double at_reduced(std::span<const int> c) const { return v_[index_reduced(c)]; }

  // decode flat index into reduced coordinates
  void coords_of(std::size_t idx, int* c) const {
    for (int i = 0; i < d_; ++i) {
      c[i] = int(idx / stride_[i]);
      idx %= stride_[i];
    }
  }

  // multiplicity of a reduced point in the full torus (2 per free axis)
  double weight_of(const int* c) const {
    double w = 1;
    for (int i = 0; i < d_; ++i)
      if (c[i] != 0 && c[i] != M_ / 2) w *= 2;
    return w;
  }

  // Unnormalized torus DFT of the even extension (REDFT00 per axis).
  // Applying twice multiplies the field by M^d.
  void transform() {
    std::vector<int> dims(std::size_t(d_), n_);
    fftw_plan p = detail::get_plan_r2r(dims, v_.data());
    fftw_execute_r2r(p, v_.data(), v_.data());
  }

  void scale(double f) {
    parallel_for(v_.size(), [&](std::size_t i) { v_[i] *= f; }, 1 << 15);
  }

  double torus_volume() const {
    double t = 1;
    for (int i = 0; i < d_; ++i) t *= M_;
    return t;
  }

  // deterministic full-torus sum (reduced points weighted by multiplicity)
  double total() const {
    return parallel_reduce(v_.size(), [&](std::size_t i) {
      int cc[8];
      coords_of(i, cc);
      return v_[i] * weight_of(cc);
    });
  }

  // visit every reduced site: fn(reduced coords, flat index, multiplicity)
  template <class Fn>
  void for_each_reduced(Fn&& fn) const {
    std::vector<int> c(std::size_t(d_), 0);
    for (std::size_t i = 0; i < v_.size(); ++i) {
      fn(c.data(), i, weight_of(c.data()));
      for (int ax = d_ - 1; ax >= 0; --ax) {
        if (++c[ax] < n_) break;
        c[ax] = 0;
      }
    }
  }

  // radial_profile adaptor: radius from reduced coords, weight = multiplicity
  template <class Fn>
  void for_each_site(Fn&& fn) const {
    for_each_reduced([&](const int* c, std::size_t i, double w) {
      double r2 = 0;
      for (int ax = 0; ax < d_; ++ax) r2 += double(c[ax]) * double(c[ax]);
      fn(std::sqrt(r2), v_[i], w);
    });
  }

 private:
  int d_ = 0, M_ = 0, n_ = 0;
  std::vector<double> v_;
  std::vector<std::size_t> stride_;
};

// pointwise torus convolution c = a * b (both even-symmetric, same grid)
inline SymGrid convolve(const SymGrid& a, const SymGrid& b) {
  if (a.dim() != b.dim() || a.side() != b.side())
    throw std::invalid_argument("convolve: grid mismatch");
  SymGrid fa = a, fb = b;
  fa.transform();
  fb.transform();
  auto& va = fa.data();
  const auto& vb = fb.data();
  parallel_for(va.size(), [&](std::size_t i) { va[i] *= vb[i]; }, 1 << 15);
  fa.transform();
  fa.scale(1.0 / fa.torus_volume());
  return fa;
}

// ---------------------------------------------------------------------------

class TorusField {
 public:
  TorusField() = default;
  TorusField(int d, int side) : d_(d), M_(side) {
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) total *= std::size_t(side);
    v_.assign(total, 0.0);
    stride_.assign(d, 1);
    for (int i = d - 2; i >= 0; --i) stride_[i] = stride_[i + 1] * side;
  }

  int dim() const { return d_; }
  int side() const { return M_; }
  std::size_t size() const { return v_.size(); }
  std::vector<double>& data() { return v_; }
  const std::vector<double>& data() const { return v_; }

  std::size_t index(std::span<const int> x) const {
    std::size_t idx = 0;
    for (int i = 0; i < d_; ++i) {
      long long m = (long long)x[i] % M_;
      if (m < 0) m += M_;
      idx += std::size_t(m) * stride_[i];
    }
    return idx;
  }
  double& at(std::span<const int> x) { return v_[index(x)]; }
  double at(std::span<const int> x) const { return v_[index(x)]; }

  // signed coordinate in [-M/2, M/2) of component i for flat index
  int signed_coord(std::size_t idx, int i) const {
    int c = int((idx / stride_[i]) % std::size_t(M_));
    return c >= (M_ + 1) / 2 ? c - M_ : c;
  }

  double total() const {
    return parallel_reduce(v_.size(), [&](std::size_t i) { return v_[i]; });
  }

  template <class Fn>
  void for_each_site(Fn&& fn) const {  // fn(radius, value, weight)
    for (std::size_t i = 0; i < v_.size(); ++i) {
      double r2 = 0;
      for (int ax = 0; ax < d_; ++ax) {
        const double c = signed_coord(i, ax);
        r2 += c * c;
      }
      fn(std::sqrt(r2), v_[i], 1.0);
    }
  }

  std::vector<std::complex<double>> fourier() const {
    std::vector<std::complex<double>> a(v_.begin(), v_.end());
    fft_inplace(a, +1);
    return a;
  }

  void fft_inplace(std::vector<std::complex<double>>& a, int sign) const {
    std::vector<int> dims(std::size_t(d_), M_);
    fftw_plan p = detail::get_plan_dft(dims, reinterpret_cast<fftw_complex*>(a.data()), sign);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(a.data()),
                     reinterpret_cast<fftw_complex*>(a.data()));
  }

 private:
  int d_ = 0, M_ = 0;
  std::vector<double> v_;
  std::vector<std::size_t> stride_;
};

inline TorusField convolve(const TorusField& a, const TorusField& b) {
  if (a.dim() != b.dim() || a.side() != b.side())
    throw std::invalid_argument("convolve: grid mismatch");
  auto fa = a.fourier();
  auto fb = b.fourier();
  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
  TorusField out(a.dim(), a.side());
  out.fft_inplace(fa, -1);
  const double inv = 1.0 / double(fa.size());
  for (std::size_t i = 0; i < fa.size(); ++i) out.data()[i] = fa[i].real() * inv;
  return out;
}

// ---------------------------------------------------------------------------
// Values of an even field on the corner box [0, x_max]^d; the cheap carrier
// for dealiased Green tables and shell statistics.

class CornerBox {
 public:
  CornerBox() = default;
  CornerBox(int d, int x_max) : d_(d), n_(x_max + 1) {
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) total *= std::size_t(n_);
    v_.assign(total, 0.0);
    stride_.assign(d, 1);
    for (int i = d - 2; i >= 0; --i) stride_[i] = stride_[i + 1] * n_;
  }

  int dim() const { return d_; }
  int x_max() const { return n_ - 1; }
  std::size_t size() const { return v_.size(); }
  std::vector<double>& data() { return v_; }
  const std::vector<double>& data() const { return v_; }

  double& at(std::span<const int> x) {
    std::size_t idx = 0;
    for (int i = 0; i < d_; ++i) {
      const int c = x[i] < 0 ? -x[i] : x[i];
      if (c >= n_) throw std::out_of_range("CornerBox::at");
      idx += std::size_t(c) * stride_[i];
    }
    return v_[idx];
  }
  double at(std::span<const int> x) const { return const_cast<CornerBox*>(this)->at(x); }

  // fn(coords pointer, flat index, multiplicity = 2^{# nonzero coords})
  template <class Fn>
  void for_each(Fn&& fn) const {
    std::vector<int> c(std::size_t(d_), 0);
    for (std::size_t i = 0; i < v_.size(); ++i) {
      double w = 1;
      for (int ax = 0; ax < d_; ++ax)
        if (c[ax] != 0) w *= 2;
      fn(c.data(), i, w);
      for (int ax = d_ - 1; ax >= 0; --ax) {
        if (++c[ax] < n_) break;
        c[ax] = 0;
      }
    }
  }

  template <class Fn>
  void for_each_site(Fn&& fn) const {  // radial_profile adaptor
    for_each([&](const int* c, std::size_t i, double w) {
      double r2 = 0;
      for (int ax = 0; ax < d_; ++ax) r2 += double(c[ax]) * double(c[ax]);
      fn(std::sqrt(r2), v_[i], w);
    });
  }

  // extract from a symmetric field
  static CornerBox from(const SymGrid& g, int x_max) {
    if (x_max > g.side() / 2) throw std::invalid_argument("CornerBox: x_max > M/2");
    CornerBox out(g.dim(), x_max);
    std::vector<int> c(std::size_t(g.dim()));
    out.for_each([&](const int* cc, std::size_t i, double) {
      for (int ax = 0; ax < g.dim(); ++ax) c[std::size_t(ax)] = cc[ax];
      out.v_[i] = g.at_reduced(c);
    });
    return out;
  }

 private:
  int d_ = 0, n_ = 0;
  std::vector<double> v_;
  std::vector<std::size_t> stride_;
};

}  // namespace lrl
