#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "fracinv/errors.hpp"
#include "fracinv/experiment.hpp"
#include "fracinv/mittag_leffler.hpp"
#include "fracinv/parallel.hpp"

namespace fs = std::filesystem;
using namespace fracinv;

namespace {

struct Common {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool quiet = false;
  bool strict_warnings = false;
  std::string dataset;
};

ExperimentConfig load(const Common& o) {
  ExperimentConfig c = load_config(o.config);
  if (o.seed) c.stochastic.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  set_default_threads(c.threads);
  return c;
}

std::ofstream open_out(const Common& o, const std::string& name) {
  fs::create_directories(o.out);
  std::ofstream os(fs::path(o.out) / name);
  if (!os) throw IoError("cannot write " + (fs::path(o.out) / name).string());
  os.precision(17);
  return os;
}

std::string dataset_path(const Common& o) { return o.dataset.empty() ? (fs::path(o.out) / "dataset.bin").string() : o.dataset; }

int run_spectrum(const Common& o) {
  const auto c = load(o);
  auto os = open_out(o, "spectrum.csv");
  const auto t = cmd_spectrum(c, os);
  if (!o.quiet) std::cout << t.entries.size() << " distinct eigenvalues written\n";
  return kExitOk;
}

int run_forward(const Common& o) {
  const auto c = load(o);
  fs::create_directories(fs::path(dataset_path(o)).parent_path().empty() ? fs::path(".") : fs::path(dataset_path(o)).parent_path());
  const auto warnings = cmd_forward(c, dataset_path(o));
  for (const auto& w : warnings)
    if (!o.quiet) std::cerr << "warning: " << w << "\n";
  if (!o.quiet) std::cout << "dataset written to " << dataset_path(o) << "\n";
  return o.strict_warnings && !warnings.empty() ? kExitNumerical : kExitOk;
}

int run_invert(const Common& o) {
  const auto c = load(o);
  const auto r = cmd_invert(dataset_path(o), c, o.out);
  if (!o.quiet) {
    for (const auto& s : r.stages)
      std::cout << s.stage << ": " << (s.ok ? "ok" : "FAILED " + s.message) << "\n";
    if (r.alpha) std::cout << "alpha_hat = " << r.alpha->alpha_hat << "\n";
    if (r.beta) std::cout << "beta_hat = " << r.beta->beta_hat << "\n";
    std::cout << r.spectral.size() << " spectral data; report in " << (fs::path(o.out) / "report.json").string() << "\n";
  }
  if (o.strict_warnings && r.poles && !r.poles->warnings.empty()) return kExitNumerical;
  return r.ok() ? kExitOk : kExitNumerical;
}

int run_stochastic(const Common& o) {
  const auto c = load(o);
  const auto rep = cmd_stochastic(c);
  auto os = open_out(o, "stochastic.json");
  os << rep.dump(2) << "\n";
  bool pass = true;
  for (const auto& ch : rep.at("checks")) {
    pass = pass && ch.at("pass").get<bool>();
    if (!o.quiet) std::cout << ch.at("name").get<std::string>() << ": " << (ch.at("pass").get<bool>() ? "pass" : "FAIL") << "\n";
  }
  return pass ? kExitOk : kExitNumerical;
}

int run_ml_table(const Common& o, const std::vector<double>& as, const std::vector<double>& bs, int n, double radius) {
  std::vector<MLParams> params;
  for (double a : as)
    for (double b : bs) params.emplace_back(a, b);
  std::vector<cplx> zs;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      zs.emplace_back(-radius + 2.0 * radius * i / std::max(n - 1, 1), -radius + 2.0 * radius * k / std::max(n - 1, 1));
  auto os = open_out(o, "ml_table.csv");
  write_ml_table(os, params, zs);
  if (!o.quiet) std::cout << params.size() * zs.size() << " rows written\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractional source-to-solution experiments: forward data, inversion, stochastic ensembles"};
  app.require_subcommand(1);
  Common o;
  auto common = [&](CLI::App* s, bool needs_config) {
    auto* opt = s->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    if (needs_config) opt->required();
    s->add_option("--out", o.out, "output directory");
    s->add_option("--seed", o.seed, "override the stochastic seed");
    s->add_option("--threads", o.threads, "worker threads (0 = hardware)");
    s->add_flag("--quiet", o.quiet, "suppress progress output");
    s->add_flag("--strict-warnings", o.strict_warnings, "exit 2 when a run produced warnings");
  };
  auto* spectrum = app.add_subcommand("spectrum", "enumerate eigenvalues and multiplicities to spectrum.csv");
  common(spectrum, true);
  auto* forward = app.add_subcommand("forward", "generate a measurement dataset");
  common(forward, true);
  forward->add_option("--dataset", o.dataset, "dataset path (default OUT/dataset.bin)");
  auto* invert = app.add_subcommand("invert", "recover exponents and spectral data from a dataset");
  common(invert, true);
  invert->add_option("--dataset", o.dataset, "dataset path (default OUT/dataset.bin)");
  auto* stochastic = app.add_subcommand("stochastic", "run the Brownian-forced ensemble and its checks");
  common(stochastic, true);
  auto* ml = app.add_subcommand("ml-table", "tabulate Mittag-Leffler values to ml_table.csv");
  common(ml, false);
  std::vector<double> as{0.5, 0.8}, bs{1.0};
  int n = 11;
  double radius = 5.0;
  ml->add_option("--a", as, "orders a");
  ml->add_option("--b", bs, "second parameters b");
  ml->add_option("--grid", n, "points per axis of the square grid")->check(CLI::PositiveNumber);
  ml->add_option("--radius", radius, "half-width of the square grid")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }
  try {
    if (*spectrum) return run_spectrum(o);
    if (*forward) return run_forward(o);
    if (*invert) return run_invert(o);
    if (*stochastic) return run_stochastic(o);
    return run_ml_table(o, as, bs, n, radius);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}
