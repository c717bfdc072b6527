#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "lrl/fft.hpp"

using namespace lrl;

TEST_SUITE_BEGIN("fft");

// brute-force DFT of the even extension of a SymGrid
static double brute_dft(const SymGrid& g, const std::vector<int>& k) {
  const int d = g.dim(), M = g.side();
  std::vector<int> x(std::size_t(d), 0);
  double acc = 0;
  for (;;) {
    double phase = 0;
    for (int i = 0; i < d; ++i) phase += 2.0 * kPi * k[std::size_t(i)] * x[std::size_t(i)] / M;
    acc += g.at(std::span<const int>(x.data(), x.size())) * std::cos(phase);
    int ax = d - 1;
    for (; ax >= 0; --ax) {
      if (++x[std::size_t(ax)] < M) break;
      x[std::size_t(ax)] = 0;
    }
    if (ax < 0) break;
  }
  return acc;
}

TEST_CASE("SymGrid transform equals brute-force torus DFT") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int d : {1, 2, 3}) {
    SymGrid g(d, 8);
    for (auto& v : g.data()) v = U(gen);
    SymGrid f = g;
    f.transform();
    std::vector<int> k(std::size_t(d), 0);
    std::mt19937_64 kg(5);
    for (int trial = 0; trial < 10; ++trial) {
      for (auto& c : k) c = int(kg() % 8);
      CHECK(f.at(std::span<const int>(k.data(), k.size())) ==
            doctest::Approx(brute_dft(g, k)).epsilon(1e-10));
    }
  }
}

TEST_CASE("SymGrid double transform is M^d") {
  SymGrid g(2, 16);
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> U(-1, 1);
  for (auto& v : g.data()) v = U(gen);
  SymGrid h = g;
  h.transform();
  h.transform();
  h.scale(1.0 / h.torus_volume());
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(h.data()[i] == doctest::Approx(g.data()[i]).epsilon(1e-12));
}

TEST_CASE("SymGrid total counts multiplicities") {
  SymGrid g(2, 6);
  // delta at origin: total 1; constant 1 everywhere: total M^d
  std::vector<int> o{0, 0};
  g.at(std::span<const int>(o.data(), 2)) = 1.0;
  CHECK(g.total() == doctest::Approx(1.0));
  for (auto& v : g.data()) v = 1.0;
  CHECK(g.total() == doctest::Approx(36.0));
}

TEST_CASE("symmetric convolution matches dense-torus convolution") {
  const int d = 2, M = 12;
  SymGrid a(d, M), b(d, M);
  TorusField fa(d, M), fb(d, M);
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> U(0, 1);
  // even random fields: assign on the reduced domain, replicate densely
  for (auto& v : a.data()) v = U(gen);
  for (auto& v : b.data()) v = U(gen);
  std::vector<int> x(2);
  for (x[0] = 0; x[0] < M; ++x[0])
    for (x[1] = 0; x[1] < M; ++x[1]) {
      std::span<const int> sx(x.data(), 2);
      fa.at(sx) = a.at(sx);
      fb.at(sx) = b.at(sx);
    }
  SymGrid cs = convolve(a, b);
  TorusField cf = convolve(fa, fb);
  for (x[0] = 0; x[0] < M; ++x[0])
    for (x[1] = 0; x[1] < M; ++x[1]) {
      std::span<const int> sx(x.data(), 2);
      CHECK(cs.at(sx) == doctest::Approx(cf.at(sx)).epsilon(1e-10));
    }
}

TEST_CASE("dense convolution against direct double loop") {
  const int M = 16;
  TorusField a(1, M), b(1, M);
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> U(0, 1);
  for (auto& v : a.data()) v = U(gen);
  for (auto& v : b.data()) v = U(gen);
  TorusField c = convolve(a, b);
  for (int x = 0; x < M; ++x) {
    double s = 0;
    for (int y = 0; y < M; ++y) s += a.data()[std::size_t(y)] * b.data()[std::size_t((x - y + M) % M)];
    CHECK(c.data()[std::size_t(x)] == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("CornerBox extraction and weights") {
  SymGrid g(2, 8);
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> U(0, 1);
  for (auto& v : g.data()) v = U(gen);
  CornerBox cb = CornerBox::from(g, 3);
  std::vector<int> x{2, -3};
  CHECK(cb.at(std::span<const int>(x.data(), 2)) ==
        doctest::Approx(g.at(std::span<const int>(x.data(), 2))));
  // weights: sum over corner box of w equals number of sites in [-3,3]^2
  double tot = 0;
  cb.for_each([&](const int*, std::size_t, double w) { tot += w; });
  CHECK(tot == doctest::Approx(49.0));
}

TEST_SUITE_END();
