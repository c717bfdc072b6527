// lrlab: batch frontend for the long-range lattice lab.  JSON config in,
// CSV/JSON out; every run writes a manifest with the full parameter echo,
// seeds, timings and output digests.  Exit codes: 0 ok, 2 config error,
// 3 budget exceeded, 4 certification/verification failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "lrl/convbounds.hpp"
#include "lrl/green.hpp"
#include "lrl/io.hpp"
#include "lrl/parallel.hpp"
#include "lrl/perc.hpp"
#include "lrl/saw.hpp"
#include "lrl/stepdist.hpp"
#include "lrl/stepdist_certify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VerifyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int line_of_offset(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ":" + std::to_string(line_of_offset(text, e.byte)) +
                      ": JSON parse error: " + e.what());
  }
}

const json& need(const json& cfg, const std::string& key) {
  if (!cfg.contains(key)) throw ConfigError("config: missing required key '" + key + "'");
  return cfg.at(key);
}

double need_num(const json& cfg, const std::string& key) {
  const json& v = need(cfg, key);
  if (!v.is_number()) throw ConfigError("config: key '" + key + "' must be a number");
  return v.get<double>();
}

lrl::StepDistribution build_dist(const json& cfg, lrl::Model model) {
  lrl::ModelParams P;
  P.d = int(need_num(cfg, "d"));
  P.alpha = need_num(cfg, "alpha");
  P.L = need_num(cfg, "L");
  P.model = model;
  const std::string kind = need(cfg, "kind").get<std::string>();
  const int R = int(need_num(cfg, "support_radius"));
  try {
    if (kind == "power") return lrl::StepDistribution::power_profile(P, R);
    if (kind == "compound_zeta")
      return lrl::StepDistribution::compound_zeta(P, R, (long long)cfg.value("t_max", 1.0e9));
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    if (what.find("budget") != std::string::npos) throw BudgetError(what);
    throw ConfigError(what);
  }
  throw ConfigError("config: kind must be 'power' or 'compound_zeta'");
}

std::string out_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// ---------------------------------------------------------------------------

int cmd_green(const json& cfg, const std::string& out, std::uint64_t seed, int threads) {
  (void)threads;
  const double r_min = need(cfg, "window").at(0).get<double>();
  const double r_max = need(cfg, "window").at(1).get<double>();
  const int M = int(need_num(cfg, "torus_size"));
  lrl::StepDistribution D = build_dist(cfg, lrl::Model::RandomWalk);
  const int x_max = int(cfg.value("x_max", std::ceil(r_max) + 2));
  if (x_max > M / 2 - 1) throw ConfigError("config: window exceeds torus_size/2");

  lrl::RunManifest man("green", cfg, seed);
  lrl::CornerBox S;
  try {
    S = lrl::green_dealiased_auto(D, M, x_max);
  } catch (const std::invalid_argument& e) {
    throw BudgetError(e.what());
  }
  man.stage_done("green_dealiased");
  lrl::TheoremSResult res = lrl::verify_theorem_S(D, S, r_min, r_max);
  lrl::LambdaResult lam = lrl::compute_lambda(D, S);
  man.stage_done("verify");

  const std::string green_csv = out_path(out, "green.csv");
  {
    lrl::CsvWriter w(green_csv);
    w.comment("manifest: manifest.json");
    json hdr = {{"d", D.params().d},
                {"alpha", D.params().alpha},
                {"L", D.params().L},
                {"kind", lrl::dist_kind_name(D.kind())},
                {"torus_size", M},
                {"q", 1.0}};
    w.comment(hdr.dump());
    std::vector<std::string> cols;
    for (int i = 0; i < D.params().d; ++i) cols.push_back("x" + std::to_string(i + 1));
    cols.push_back("r");
    cols.push_back("S1");
    cols.push_back("dealiased");
    w.header(cols);
    S.for_each([&](const int* c, std::size_t i, double) {
      std::vector<double> row;
      double r2 = 0;
      for (int ax = 0; ax < D.params().d; ++ax) {
        row.push_back(c[ax]);
        r2 += double(c[ax]) * c[ax];
      }
      row.push_back(std::sqrt(r2));
      row.push_back(S.data()[i]);
      row.push_back(1.0);
      w.row(row);
    });
  }
  man.add_output(green_csv);

  const std::string fit_json = out_path(out, "scaling_fit.json");
  {
    json jf;
    jf["exponent"] = res.deviation_fit.exponent;
    jf["amplitude"] = res.deviation_fit.amplitude;
    jf["error_exponent"] = res.deviation_fit.error_exponent;
    jf["error_exponent_valid"] = res.deviation_fit.error_exponent_valid;
    jf["residual_rms"] = res.deviation_fit.residual_rms;
    jf["window"] = {r_min, r_max};
    jf["use_log_correction"] = std::abs(D.params().alpha - 2.0) < 1e-12;
    jf["mean_ratio"] = res.mean_ratio;
    jf["min_shell"] = res.min_shell;
    jf["max_shell"] = res.max_shell;
    jf["v_alpha"] = res.v_alpha;
    jf["v_alpha_spread"] = res.v_alpha_spread;
    jf["gamma_alpha"] = res.gamma;
    jf["lambda"] = lam.lambda;
    jf["lambda_boundary_flagged"] = lam.boundary_flagged;
    jf["lambda_tail_monotone"] = lam.tail_monotone;
    std::ofstream o(fit_json);
    o << jf.dump(2) << "\n";
  }
  man.add_output(fit_json);

  const std::string ratio_dat = out_path(out, "ratio_vs_radius.dat");
  {
    std::ofstream o(ratio_dat);
    o << "# r ratio stderr count   (gnuplot: plot 'ratio_vs_radius.dat' u 1:2:3 w yerr)\n";
    for (const auto& s : res.ratio_profile)
      o << lrl::fmt17(s.radius) << " " << lrl::fmt17(s.mean) << " " << lrl::fmt17(s.stderr_)
        << " " << lrl::fmt17(s.count) << "\n";
  }
  man.add_output(ratio_dat);
  man.save(out_path(out, "manifest.json"));
  return 0;
}

int cmd_dist_certify(const json& cfg, const std::string& out, std::uint64_t seed, int) {
  lrl::StepDistribution D = build_dist(cfg, lrl::Model::RandomWalk);
  const int res = int(cfg.value("k_grid_resolution", 64.0));
  const int n_max = int(cfg.value("n_max", 16.0));
  const int M = int(cfg.value("torus_size", 64.0));
  double w_lo = 1e-3, w_hi = 1e-2;
  if (cfg.contains("slope_window")) {
    w_lo = cfg.at("slope_window").at(0).get<double>();
    w_hi = cfg.at("slope_window").at(1).get<double>();
  }
  lrl::RunManifest man("dist-certify", cfg, seed);
  lrl::StepDistCertificate cert = lrl::certify_D1_D2(D, res, w_lo, w_hi);
  man.stage_done("d1_d2");
  lrl::certify_D3(D, n_max, M, cert);
  man.stage_done("d3");
  if (D.params().alpha > 2.0) {
    cert.derivative_constant = lrl::certify_derivative_bound(D, std::min(n_max, 8));
    man.stage_done("derivative");
  }

  const std::string cert_json = out_path(out, "certificate.json");
  {
    json jc;
    jc["delta"] = cert.delta;
    jc["d1_ok"] = cert.d1_ok;
    jc["asymp_const_lo"] = cert.asymp_const_lo;
    jc["asymp_const_hi"] = cert.asymp_const_hi;
    jc["smallk_slope"] = cert.smallk_slope;
    jc["smallk_window"] = {cert.smallk_window_lo, cert.smallk_window_hi};
    jc["alpha2_variation"] = cert.alpha2_variation;
    jc["d2_ok"] = cert.d2_ok;
    jc["v_alpha"] = cert.v_alpha;
    jc["v_alpha_spread"] = cert.v_alpha_spread;
    jc["c_sandwich"] = D.sandwich_c();
    jc["tail_mass"] = D.tail_mass();
    jc["sup_prefactor"] = cert.sup_prefactor;
    jc["x_prefactor"] = cert.x_prefactor;
    jc["sup_prefactor_by_n"] = cert.sup_prefactor_by_n;
    jc["x_prefactor_by_n"] = cert.x_prefactor_by_n;
    jc["sup_drift"] = cert.sup_drift;
    jc["x_drift"] = cert.x_drift;
    jc["d3_ok"] = cert.d3_ok;
    if (!std::isnan(cert.derivative_constant))
      jc["derivative_constant"] = cert.derivative_constant;
    if (!cert.witness_k.empty()) jc["witness_k"] = cert.witness_k;
    std::ofstream o(cert_json);
    o << jc.dump(2) << "\n";
  }
  man.add_output(cert_json);

  const std::string dist_json = out_path(out, "distribution.json");
  const std::string dist_tab = out_path(out, "distribution.tab");
  if (D.has_table() && D.table_size() <= std::size_t(4e6)) {
    lrl::save_distribution(D, dist_json, dist_tab);
    man.add_output(dist_json);
    man.add_output(dist_tab);
  }
  man.save(out_path(out, "manifest.json"));
  if (!cert.d1_ok || !cert.d2_ok || !cert.d3_ok)
    throw VerifyError("certification failed (witness in certificate.json)");
  return 0;
}

int cmd_perc(const json& cfg, const std::string& out, std::uint64_t seed, int) {
  lrl::StepDistribution D = build_dist(cfg, lrl::Model::Percolation);
  const int side = int(need_num(cfg, "side"));
  const int n_samples = int(need_num(cfg, "n_samples"));
  const std::string mode = cfg.value("mode", "two_point");
  lrl::RunManifest man("perc", cfg, seed);

  const std::string perc_csv = out_path(out, "perc.csv");
  lrl::CsvWriter w(perc_csv);
  w.comment("manifest: manifest.json");
  w.header({"p", "side", "shell_r", "G_mean", "G_err", "chi", "chi_err", "wrap_prob"});

  json extra;
  if (mode == "two_point" || mode == "bootstrap_g") {
    std::vector<double> grid;
    if (cfg.contains("p_grid"))
      for (const auto& v : cfg.at("p_grid")) grid.push_back(v.get<double>());
    else
      grid.push_back(need_num(cfg, "p"));
    lrl::BondModel B(D, side);
    man.stage_done("bond_model");
    json jg = json::array();
    for (double p : grid) {
      auto est = lrl::estimate_two_point(B, p, n_samples, seed);
      for (std::size_t i = 0; i < est.G.size(); ++i)
        w.row({p, double(side), est.shell_r[i], est.G[i], est.G_err[i], est.chi,
               est.chi_err, est.wrap_prob});
      if (mode == "bootstrap_g") {
        const double lambda = need_num(cfg, "lambda");
        auto pts = lrl::bootstrap_g(D, B, {p}, lambda, n_samples, seed);
        jg.push_back({{"p", pts[0].p}, {"g", pts[0].g}, {"g_err", pts[0].g_err},
                      {"chi", pts[0].chi}});
      }
    }
    if (mode == "bootstrap_g") extra["bootstrap_g"] = jg;
    man.stage_done("two_point");
  } else if (mode == "pc") {
    const double p_lo = need(cfg, "p_bracket").at(0).get<double>();
    const double p_hi = need(cfg, "p_bracket").at(1).get<double>();
    lrl::PcEstimate pc;
    try {
      pc = lrl::estimate_pc(D, side, p_lo, p_hi, n_samples, seed,
                            int(cfg.value("refine_steps", 6.0)));
    } catch (const std::runtime_error& e) {
      throw VerifyError(e.what());
    }
    for (const auto& [p, wp] : pc.curve_M) w.row({p, double(side), 0, 0, 0, 0, 0, wp});
    for (const auto& [p, wp] : pc.curve_2M) w.row({p, double(2 * side), 0, 0, 0, 0, 0, wp});
    extra["p_c"] = pc.p_c;
    extra["ci"] = {pc.ci_lo, pc.ci_hi};
    man.stage_done("pc");
  } else {
    throw ConfigError("config: mode must be two_point | pc | bootstrap_g");
  }
  man.add_output(perc_csv);
  if (!extra.empty()) {
    const std::string rj = out_path(out, "result.json");
    std::ofstream o(rj);
    o << extra.dump(2) << "\n";
    man.add_output(rj);
  }
  man.save(out_path(out, "manifest.json"));
  return 0;
}

int cmd_saw(const json& cfg, const std::string& out, std::uint64_t seed, int) {
  lrl::StepDistribution D = build_dist(cfg, lrl::Model::SAW);
  const int n_max = int(need_num(cfg, "n_max"));
  const int box_radius = int(cfg.value("box_radius", double(n_max * D.support_radius())));
  const int M = int(cfg.value("torus_size", 32.0));
  const double pfrac = cfg.value("p_fraction", 0.5);
  lrl::RunManifest man("saw", cfg, seed);

  lrl::WalkEnumeration we;
  try {
    we = lrl::enumerate_saw(D, n_max, box_radius);
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    if (what.find("budget") != std::string::npos) throw BudgetError(what);
    throw ConfigError(what);
  }
  man.stage_done("enumeration");

  const std::string coeff_csv = out_path(out, "coeffs.csv");
  {
    lrl::CsvWriter w(coeff_csv);
    w.comment("manifest: manifest.json");
    std::vector<std::string> cols{"n"};
    for (int i = 0; i < D.params().d; ++i) cols.push_back("x" + std::to_string(i + 1));
    cols.push_back("c_n");
    w.header(cols);
    for (int n = 0; n <= we.n_max; ++n)
      we.coeffs[std::size_t(n)].for_each([&](std::span<const int> x, double v) {
        if (v == 0) return;
        std::vector<double> row{double(n)};
        for (int c : x) row.push_back(c);
        row.push_back(v);
        w.row(row);
      });
  }
  man.add_output(coeff_csv);

  auto sus = lrl::susceptibility_series(we, 0.0);
  const double p = pfrac * sus.p_c_estimate;
  auto sus_p = lrl::susceptibility_series(we, p);
  man.stage_done("susceptibility");

  json jr;
  jr["p_c_estimate"] = sus.p_c_estimate;
  jr["p"] = p;
  jr["chi"] = sus_p.chi;
  jr["chi_tail_estimate"] = sus_p.tail_estimate;
  try {
    lrl::SymGrid G = lrl::saw_two_point(we, p, M);
    lrl::PiFunction pi = lrl::invert_lace(G, D, p);
    man.stage_done("lace_inversion");
    const std::string pi_csv = out_path(out, "pi.csv");
    {
      lrl::CsvWriter w(pi_csv);
      w.comment("manifest: manifest.json");
      std::vector<std::string> cols;
      for (int i = 0; i < D.params().d; ++i) cols.push_back("x" + std::to_string(i + 1));
      cols.push_back("r");
      cols.push_back("Pi");
      w.header(cols);
      pi.values.for_each_reduced([&](const int* c, std::size_t i, double) {
        std::vector<double> row;
        double r2 = 0;
        for (int ax = 0; ax < D.params().d; ++ax) {
          row.push_back(c[ax]);
          r2 += double(c[ax]) * c[ax];
        }
        row.push_back(std::sqrt(r2));
        row.push_back(pi.values.data()[i]);
        w.row(row);
      });
    }
    man.add_output(pi_csv);
    jr["reconstruction_error"] = pi.reconstruction_error;
    jr["pi_hat0"] = pi.pi_hat0;
    const double lambda = cfg.value("lambda", 1.0);
    auto bound = lrl::verify_pi_bound(pi, lambda, double(we.reach) * 0.8);
    jr["pi_decay_exponent"] = bound.fit.exponent;
    jr["pi_target_exponent"] = bound.target_exponent;
    jr["pi_prefactor_lambda2"] = bound.prefactor_lambda2;
    auto pos = lrl::verify_positivity(pi, D);
    jr["min_ratio"] = pos.min_ratio;
  } catch (const std::domain_error& e) {
    jr["lace_inversion_error"] = e.what();
  }
  const std::string rj = out_path(out, "susceptibility.json");
  {
    std::ofstream o(rj);
    o << jr.dump(2) << "\n";
  }
  man.add_output(rj);
  man.save(out_path(out, "manifest.json"));
  return 0;
}

int cmd_convbounds(const json& cfg, const std::string& out, std::uint64_t seed, int) {
  const int d = int(need_num(cfg, "d"));
  std::vector<double> Ls;
  for (const auto& v : need(cfg, "L_samples")) Ls.push_back(v.get<double>());
  std::vector<double> xs;
  if (cfg.contains("x_samples")) {
    for (const auto& v : cfg.at("x_samples")) xs.push_back(v.get<double>());
  } else {
    const double lo = cfg.value("x_lo", 10.0), hi = cfg.value("x_hi", 1000.0);
    for (double x = lo; x <= hi; x *= 1.8) xs.push_back(std::floor(x));
  }
  lrl::RunManifest man("convbounds", cfg, seed);
  const std::string csv = out_path(out, "convbounds.csv");
  lrl::CsvWriter w(csv);
  w.comment("manifest: manifest.json");
  w.raw_row({"case", "d", "L", "x", "lhs", "rhs", "ratio"});
  for (const auto& tup : need(cfg, "tuples")) {
    const double a1 = tup.at(0).get<double>(), a2 = tup.at(1).get<double>();
    const double b1 = tup.at(2).get<double>(), b2 = tup.at(3).get<double>();
    try {
      auto mc = lrl::measured_constant(a1, a2, b1, b2, d, xs, Ls,
                                       cfg.value("radius_factor", 4.0));
      for (const auto& row : mc.rows) {
        const lrl::ConvCase c = lrl::classify(a1, a2, b1, b2, d, row.L);
        w.raw_row({lrl::conv_branch_name(c.branch), std::to_string(d), lrl::fmt17(row.L),
                   lrl::fmt17(row.xnorm), lrl::fmt17(row.lhs), lrl::fmt17(row.rhs),
                   lrl::fmt17(row.ratio)});
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("tuple rejected: ") + e.what());
    }
  }
  man.stage_done("grid");
  man.add_output(csv);
  man.save(out_path(out, "manifest.json"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"long-range lattice lab"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  int threads = 0;
  std::uint64_t seed = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config path")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads (0 = hardware)");
    sub->add_option("--seed", seed, "master seed");
  };

  CLI::App* green = app.add_subcommand("green", "Green-function crossover run");
  CLI::App* cert = app.add_subcommand("dist-certify", "step-distribution certificates");
  CLI::App* perc = app.add_subcommand("perc", "percolation Monte Carlo");
  CLI::App* saw = app.add_subcommand("saw", "self-avoiding walk enumeration + lace");
  CLI::App* conv = app.add_subcommand("convbounds", "convolution-bound verification");
  for (CLI::App* s : {green, cert, perc, saw, conv}) add_common(s);

  CLI11_PARSE(app, argc, argv);

  try {
    const json cfg = load_config(config_path);
    if (threads > 0) lrl::set_thread_count(threads);
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    if (green->parsed()) return cmd_green(cfg, out_dir, seed, threads);
    if (cert->parsed()) return cmd_dist_certify(cfg, out_dir, seed, threads);
    if (perc->parsed()) return cmd_perc(cfg, out_dir, seed, threads);
    if (saw->parsed()) return cmd_saw(cfg, out_dir, seed, threads);
    if (conv->parsed()) return cmd_convbounds(cfg, out_dir, seed, threads);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const BudgetError& e) {
    std::cerr << "budget exceeded: " << e.what() << "\n";
    return 3;
  } catch (const VerifyError& e) {
    std::cerr << "verification failure: " << e.what() << "\n";
    return 4;
  } catch (const std::bad_alloc&) {
    std::cerr << "budget exceeded: memory\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "verification failure: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
