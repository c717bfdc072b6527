#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <vector>

#include "lrl/perc.hpp"

using namespace lrl;

TEST_SUITE_BEGIN("perc");

static StepDistribution perc_dist(int d, double alpha, double L, int R) {
  ModelParams P{d, alpha, L, Model::Percolation};
  return StepDistribution::power_profile(P, R);
}

TEST_CASE("p = 0: no bonds, all singletons, chi = 1, G = delta shell") {
  auto D = perc_dist(2, 0.5, 1.0, 16);
  BondModel B(D, 16);
  PercConfig cfg = sample_config(B, 0.0, 42);
  CHECK(cfg.bonds.empty());
  ClusterLabeling lab(B, cfg);
  CHECK_FALSE(lab.wraps_any());
  CHECK(lab.cluster_size(0) == 1);
  auto est = estimate_two_point(B, 0.0, 4, 7);
  CHECK(est.chi == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(est.G[0] == doctest::Approx(1.0).epsilon(1e-12));  // shell 0
  for (std::size_t i = 1; i < est.G.size(); ++i) CHECK(est.G[i] == 0.0);
}

TEST_CASE("all nearest-neighbor bonds: one wrapping cluster") {
  auto D = perc_dist(2, 0.5, 1.0, 8);
  const int M = 8;
  BondModel B(D, M);
  PercConfig cfg;
  cfg.side = M;
  // residues e1 and e2
  int e1[2] = {1, 0}, e2[2] = {0, 1};
  const std::uint32_t r1 = std::uint32_t(B.encode(e1));
  const std::uint32_t r2 = std::uint32_t(B.encode(e2));
  for (std::uint32_t s = 0; s < B.sites(); ++s) {
    cfg.bonds.push_back({s, r1});
    cfg.bonds.push_back({s, r2});
  }
  ClusterLabeling lab(B, cfg);
  CHECK(lab.cluster_size(0) == B.sites());
  CHECK(lab.wraps(0));
  CHECK(lab.wraps(1));
}

TEST_CASE("same seed gives identical configurations") {
  auto D = perc_dist(2, 0.5, 2.0, 32);
  BondModel B(D, 32);
  PercConfig a = sample_config(B, 0.8, 12345);
  PercConfig b = sample_config(B, 0.8, 12345);
  REQUIRE(a.bonds.size() == b.bonds.size());
  for (std::size_t i = 0; i < a.bonds.size(); ++i) {
    CHECK(a.bonds[i].first == b.bonds[i].first);
    CHECK(a.bonds[i].second == b.bonds[i].second);
  }
  PercConfig c = sample_config(B, 0.8, 54321);
  CHECK(a.bonds != c.bonds);
}

TEST_CASE("monotone coupling: raising p only adds bonds") {
  auto D = perc_dist(2, 0.5, 2.0, 32);
  BondModel B(D, 32);
  PercConfig lo = sample_config(B, 0.4, 999);
  PercConfig hi = sample_config(B, 0.9, 999);
  CHECK(hi.bonds.size() >= lo.bonds.size());
  std::set<std::pair<std::uint32_t, std::uint32_t>> hi_set(hi.bonds.begin(), hi.bonds.end());
  for (const auto& b : lo.bonds) CHECK(hi_set.count(b) == 1);
}

TEST_CASE("expected bond count matches the binomial mean over seeds") {
  auto D = perc_dist(2, 1.5, 2.0, 32);
  BondModel B(D, 16);
  const double p = 0.7;
  const double mean_expected = B.expected_bonds(p);
  const int n_seeds = 100;
  double acc = 0, acc2 = 0;
  for (int s = 0; s < n_seeds; ++s) {
    PercConfig cfg = sample_config(B, p, 1000 + std::uint64_t(s));
    acc += double(cfg.bonds.size());
    acc2 += double(cfg.bonds.size()) * double(cfg.bonds.size());
  }
  const double mean = acc / n_seeds;
  const double sd = std::sqrt(std::max(1.0, acc2 / n_seeds - mean * mean));
  CHECK(std::abs(mean - mean_expected) < 3.0 * sd / std::sqrt(double(n_seeds)) + 1.0);
}

TEST_CASE("cluster labeling equals brute-force BFS closure (M=4, d=2)") {
  auto D = perc_dist(2, 0.5, 1.0, 8);
  const int M = 4;
  BondModel B(D, M);
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    PercConfig cfg = sample_config(B, 1.2, seed);
    ClusterLabeling lab(B, cfg);
    // BFS oracle over the explicit bond adjacency
    const std::size_t n = B.sites();
    std::vector<std::vector<std::uint32_t>> adj(n);
    int u[2], x[2], y[2];
    for (const auto& [site, residue] : cfg.bonds) {
      B.signed_disp(residue, u);
      B.decode(site, x);
      y[0] = x[0] + u[0];
      y[1] = x[1] + u[1];
      const std::uint32_t other = std::uint32_t(B.encode(y));
      adj[site].push_back(other);
      adj[other].push_back(std::uint32_t(site));
    }
    std::vector<int> comp(n, -1);
    int ncomp = 0;
    for (std::size_t s = 0; s < n; ++s) {
      if (comp[s] >= 0) continue;
      std::queue<std::uint32_t> q;
      q.push(std::uint32_t(s));
      comp[s] = ncomp;
      while (!q.empty()) {
        const std::uint32_t cur = q.front();
        q.pop();
        for (std::uint32_t nb : adj[cur])
          if (comp[nb] < 0) {
            comp[nb] = ncomp;
            q.push(nb);
          }
      }
      ++ncomp;
    }
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        CHECK(lab.connected(std::uint32_t(a), std::uint32_t(b)) == (comp[a] == comp[b]));
  }
}

TEST_CASE("chi from cluster sizes equals chi from the G profile") {
  auto D = perc_dist(2, 0.5, 2.0, 32);
  BondModel B(D, 32);
  auto est = estimate_two_point(B, 0.5, 8, 77);
  CHECK_FALSE(est.pairs_subsampled);
  double from_G = 0;
  for (std::size_t i = 0; i < est.G.size(); ++i) from_G += est.G[i] * est.shell_sites[i];
  CHECK(from_G == doctest::Approx(est.chi).epsilon(1e-10));
  CHECK(est.chi >= 1.0);
}

TEST_CASE("susceptibility and wrapping probability increase with p") {
  auto D = perc_dist(2, 0.5, 2.0, 64);
  BondModel B(D, 32);
  double prev_chi = 0, prev_wrap = -1;
  for (double p : {0.2, 0.6, 1.0, 1.6}) {
    auto est = estimate_two_point(B, p, 24, 4242);
    CHECK(est.chi > prev_chi);
    CHECK(est.wrap_prob >= prev_wrap);
    prev_chi = est.chi;
    prev_wrap = est.wrap_prob;
  }
}

TEST_CASE("G monotone nonincreasing in shell radius within errors") {
  auto D = perc_dist(2, 0.5, 2.0, 64);
  BondModel B(D, 64);
  auto est = estimate_two_point(B, 0.8, 32, 31);
  for (std::size_t i = 2; i < est.G.size() && est.shell_r[i] < 16; ++i) {
    CHECK(est.G[i] <= est.G[i - 1] + 3.0 * (est.G_err[i] + est.G_err[i - 1]) + 1e-12);
  }
}

TEST_CASE("finite-size consistency: G at M and 2M agree for |x| <= M/4") {
  // deep enough in the subcritical phase that the correlation volume fits
  auto D = perc_dist(2, 0.5, 2.0, 128);
  BondModel B1(D, 64), B2(D, 128);
  auto e1 = estimate_two_point(B1, 0.45, 48, 5150);
  auto e2 = estimate_two_point(B2, 0.45, 48, 5151);
  for (std::size_t i = 0; i < e1.G.size(); ++i) {
    const double r = e1.shell_r[i];
    if (r < 1 || r > 16) continue;
    for (std::size_t j = 0; j < e2.G.size(); ++j) {
      if (std::abs(e2.shell_r[j] - r) < 1e-9) {
        const double tol = 4.0 * (e1.G_err[i] + e2.G_err[j]) + 0.03 * e1.G[i] + 1e-9;
        CHECK(std::abs(e1.G[i] - e2.G[j]) < tol);
      }
    }
  }
}

TEST_CASE("p_c estimation: crossing exists and is size-consistent") {
  auto D = perc_dist(2, 0.5, 2.0, 256);
  auto pc_small = estimate_pc(D, 32, 0.2, 3.0, 60, 2024, 5);
  CHECK(pc_small.p_c > 0.2);
  CHECK(pc_small.p_c < 3.0);
  CHECK(pc_small.ci_lo < pc_small.p_c);
  CHECK(pc_small.ci_hi > pc_small.p_c);
  // size-pair consistency: (M, 2M) vs (2M, 4M) crossings agree coarsely
  auto pc_large = estimate_pc(D, 64, 0.2, 3.0, 60, 2025, 5);
  CHECK(std::abs(pc_large.p_c - pc_small.p_c) <
        0.35 * std::max(pc_small.p_c, pc_large.p_c));
  // far below the bracket the wrap probability vanishes
  BondModel B(D, 64);
  CHECK(wrap_probability(B, 0.02, 40, 9) < 0.15);
}

TEST_CASE("bootstrap g: low end near or below 1, nondecreasing within errors") {
  auto D = perc_dist(2, 0.5, 4.0, 256);
  BondModel B(D, 64);
  // a plausible lambda from the Green side is an input here; use a synthetic
  // value so this unit test only exercises the estimator plumbing
  const double lambda = 0.5;
  auto curve = bootstrap_g(D, B, {0.1, 0.3, 0.6}, lambda, 24, 808);
  REQUIRE(curve.size() == 3);
  for (std::size_t i = 1; i < curve.size(); ++i)
    CHECK(curve[i].g >= curve[i - 1].g - 3.0 * (curve[i].g_err + curve[i - 1].g_err));
  CHECK(curve[0].g >= curve[0].p);  // g >= p by definition
}

TEST_SUITE_END();
