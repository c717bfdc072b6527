#pragma once

// CSV/JSON output, run manifests, and step-distribution serialization.
// All floating output uses 17 significant digits so CSV bodies are
// byte-identical across reruns of the same manifest.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrl/stepdist.hpp"

namespace lrl {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)fnv1a(ss.str()));
  return buf;
}

// ---------------------------------------------------------------------------

class RunManifest {
 public:
  RunManifest(std::string command, nlohmann::json config, std::uint64_t seed)
      : t0_(std::chrono::steady_clock::now()) {
    j_["command"] = std::move(command);
    j_["config"] = std::move(config);
    j_["master_seed"] = seed;
    j_["version"] = "lrlab 0.1.0";
  }

  void stage_done(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    j_["stage_seconds"][name] =
        std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }

  void add_output(const std::string& path) { outputs_.push_back(path); }

  void save(const std::string& path) {
    j_["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    for (const auto& f : outputs_) {
      j_["outputs"].push_back({{"file", std::filesystem::path(f).filename().string()},
                               {"digest", file_digest(f)}});
    }
    std::ofstream out(path);
    out << j_.dump(2) << "\n";
  }

  nlohmann::json& json() { return j_; }

 private:
  nlohmann::json j_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path);
  }
  void comment(const std::string& line) { out_ << "# " << line << "\n"; }
  void header(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
    out_ << "\n";
  }
  void row(const std::vector<double>& vals) {
    for (std::size_t i = 0; i < vals.size(); ++i) out_ << (i ? "," : "") << fmt17(vals[i]);
    out_ << "\n";
  }
  void raw_row(const std::vector<std::string>& vals) {
    for (std::size_t i = 0; i < vals.size(); ++i) out_ << (i ? "," : "") << vals[i];
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// step-distribution serialization: JSON header + (x1..xd, D) text table

inline void save_distribution(const StepDistribution& D, const std::string& json_path,
                              const std::string& table_path) {
  nlohmann::json h;
  h["d"] = D.params().d;
  h["alpha"] = D.params().alpha;
  h["L"] = D.params().L;
  h["model"] = model_name(D.params().model);
  h["kind"] = dist_kind_name(D.kind());
  h["support_radius"] = D.support_radius();
  h["tail_mass"] = D.tail_mass();
  h["sigma2"] = D.sigma2();
  h["sandwich_c"] = D.sandwich_c();
  h["table"] = std::filesystem::path(table_path).filename().string();
  std::ofstream jh(json_path);
  jh << h.dump(2) << "\n";

  std::ofstream tb(table_path);
  D.for_each_table_entry([&](std::span<const int> x, double v) {
    for (int c : x) tb << c << " ";
    tb << fmt17(v) << "\n";
  });
}

inline StepDistribution load_distribution(const std::string& json_path,
                                          const std::string& table_path) {
  std::ifstream jh(json_path);
  if (!jh) throw std::runtime_error("cannot open " + json_path);
  nlohmann::json h = nlohmann::json::parse(jh);
  ModelParams P;
  P.d = h.at("d").get<int>();
  P.alpha = h.at("alpha").get<double>();
  P.L = h.at("L").get<double>();
  const std::string model = h.value("model", "rw");
  P.model = model == "saw" ? Model::SAW
            : model == "percolation" ? Model::Percolation
                                     : Model::RandomWalk;
  std::ifstream tb(table_path);
  if (!tb) throw std::runtime_error("cannot open " + table_path);
  std::vector<std::pair<std::vector<int>, double>> entries;
  std::string line;
  while (std::getline(tb, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<int> x(std::size_t(P.d));
    for (int i = 0; i < P.d; ++i) ls >> x[std::size_t(i)];
    double v;
    ls >> v;
    entries.push_back({std::move(x), v});
  }
  // the reloaded object carries the exact table values and recorded tail
  // (a Table-kind law; the header keeps the original kind string)
  return StepDistribution::from_serialized(P, entries, h.at("tail_mass").get<double>());
}

}  // namespace lrl
