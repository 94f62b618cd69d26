// Desk-scale acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.

#include <CLI11.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "fracinv/errors.hpp"
#include "fracinv/experiment.hpp"
#include "fracinv/mittag_leffler.hpp"

using namespace fracinv;

namespace {

constexpr cplx I{0.0, 1.0};

// Criterion 1
constexpr double kExpTol = 1e-10;
constexpr double kErfcTol = 1e-8;
constexpr double kSectorTailTol = 1e-3;     // |E|(1+|z|) -> |1/Gamma(b-a)|
constexpr double kRemainderSlack = 1.01;    // y^2 |E - leading| <= slack |1/Gamma(1-2a)|
// Criterion 2
constexpr double kKernelLaplaceTol = 1e-4;
// Criterion 3
constexpr double kModalResidualTol = 1e-2;
constexpr double kIbpTol = 1e-4;
// Criterion 4
constexpr double kAlphaTol = 0.02;
// Criterion 5
constexpr double kMuTol = 1e-3;
constexpr double kResidueTol = 1e-3;
constexpr std::size_t kPoleCount = 10;
// Criterion 6
constexpr double kBetaTol = 0.05;
constexpr std::size_t kWeylPowers = 200;
// Criterion 7
constexpr double kWaveTol = 1e-3;
// Criterion 8
constexpr std::size_t kEnsemblePaths = 10000;
// Criterion 9
constexpr double kLambdaTol = 5e-3;
constexpr double kSeparation = 3.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(3);
  os << x;
  return os.str();
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::abs(b); }

ExperimentConfig load(const std::string& dir, const std::string& name) {
  return load_config((std::filesystem::path(dir) / name).string());
}

// --- 1 -------------------------------------------------------------------------

Outcome mittag_leffler() {
  double exp_err = 0.0, erfc_err = 0.0, tail_err = 0.0, rem = 0.0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      const cplx z = std::polar(0.5 + 4.5 * i / 9.0, 2.0 * kPi * j / 10.0);
      exp_err = std::max(exp_err, rel(ml_eval(1.0, 1.0, z), std::exp(z)));
    }
  for (int i = 0; i <= 120; ++i) {
    const double x = -3.0 + 6.0 * i / 120.0;
    erfc_err = std::max(erfc_err, rel(ml_eval(0.5, 1.0, x), std::exp(x * x) * std::erfc(-x)));
  }
  bool bounded = true;
  for (double a : {0.4, 0.6, 0.9}) {
    const SectorSpec sec = SectorSpec::midpoint(a);
    const double limit = std::abs(rgamma(1.0 - a));
    double tail = 0.0;
    for (int i = 0; i <= 70; ++i) {
      const double r = std::pow(10.0, -1.0 + 7.0 * i / 70.0);
      for (double ang : {sec.mu, 0.5 * (sec.mu + kPi), kPi}) {
        const double v = std::abs(ml_eval(a, 1.0, std::polar(r, ang))) * (1.0 + r);
        bounded = bounded && std::isfinite(v);
        if (r >= 1e6) tail = std::max(tail, v);
      }
    }
    tail_err = std::max(tail_err, std::abs(tail - limit) / limit);
    const SectorSpec iy(0.5 * (kPi * a / 2.0 + std::min(kPi * a, kPi / 2.0)), a);
    const double c2 = std::abs(rgamma(1.0 - 2.0 * a));
    for (int i = 0; i <= 16; ++i) {
      const double y = std::pow(10.0, 2.0 + 4.0 * i / 16.0);
      const cplx z(0.0, y);
      rem = std::max(rem, std::abs(ml_eval(a, 1.0, z) - ml_asymptotic_leading(a, z, iy)) * y * y / (c2 + 1e-300));
    }
  }
  return {exp_err <= kExpTol && erfc_err <= kErfcTol && bounded && tail_err <= kSectorTailTol && rem <= kRemainderSlack,
          "exp " + fmt(exp_err) + ", erfc " + fmt(erfc_err) + ", sector tail " + fmt(tail_err) +
              ", scaled remainder " + fmt(rem)};
}

// --- 2 -------------------------------------------------------------------------

cplx kernel_transform(double lambda, const ExponentPair& e, cplx s) {
  boost::math::quadrature::tanh_sinh<double> ts;
  boost::math::quadrature::exp_sinh<double> es;
  auto part = [&](bool imag) {
    auto f = [&](double t) {
      const cplx v = std::exp(-s * t) * kernel_K(lambda, e, t);
      return imag ? v.imag() : v.real();
    };
    return ts.integrate(f, 0.0, 1.0) + es.integrate(f, 1.0, std::numeric_limits<double>::infinity());
  };
  return {part(false), part(true)};
}

Outcome kernel_laplace() {
  const ExponentPair e(0.6, 0.4);
  double worst = 0.0;
  int n = 0;
  for (double lambda : {0.0, 1.0, 4.0, 20.0})
    for (cplx s : {cplx(1.0, 0.0), cplx(0.5, 0.5), cplx(2.0, -1.0), cplx(0.8, 2.0), cplx(3.0, 0.0)}) {
      const cplx expect = 1.0 / (I * std::pow(s, e.alpha) + std::pow(lambda, e.beta));
      worst = std::max(worst, rel(kernel_transform(lambda, e, s), expect));
      ++n;
    }
  return {worst <= kKernelLaplaceTol, std::to_string(n) + " pairs, worst relative error " + fmt(worst)};
}

// --- 3 -------------------------------------------------------------------------

Outcome forward() {
  const ExponentPair e(0.6, 0.4);
  const auto m = ModelManifold::torus(2, 32);
  const auto table = enumerate_spectrum(m, 100.0);
  // Caputo residual of the modal equation, before and after halving h.
  auto residual = [&](std::size_t intervals) {
    const TimeGrid g = TimeGrid::from_horizon(6.0, intervals);
    const auto f = sample_profile(SmoothBump{2.0}, g);
    double worst = 0.0;
    for (const auto& en : table.entries) {
      const auto u = solve_modal(en.lambda, e, f, g.h());
      const auto d = caputo_derivative(std::span<const cplx>(u), g.h(), e.alpha);
      const double mu = std::pow(en.lambda, e.beta);
      for (std::size_t k = 1; k < u.size(); ++k) worst = std::max(worst, std::abs(I * d[k] + mu * u[k] - f[k]));
    }
    return worst;
  };
  const double r1 = residual(300), r2 = residual(600);
  const double order_needed = std::pow(2.0, 1.0 - e.alpha);
  const TimeGrid g = TimeGrid::from_horizon(20.0, 1000);
  const auto f = sample_profile(SmoothBump{2.0}, g);
  double ibp = 0.0;
  for (const auto& en : table.entries) {
    const auto a = solve_modal(en.lambda, e, f, g.h());
    const auto b = solve_modal_ibp(en.lambda, e, f, g.h());
    double scale = 0.0, diff = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      scale = std::max(scale, std::abs(b[k]));
      diff = std::max(diff, std::abs(a[k] - b[k]));
    }
    ibp = std::max(ibp, diff / scale);
  }
  return {r1 <= kModalResidualTol && r1 / r2 >= order_needed && ibp <= kIbpTol,
          "residual " + fmt(r1) + " -> " + fmt(r2) + " (ratio " + fmt(r1 / r2) + ", need " + fmt(order_needed) +
              "), " + std::to_string(table.entries.size()) + " modes, ibp gap " + fmt(ibp)};
}

// --- 4 -------------------------------------------------------------------------

Outcome alpha_recovery(const std::string& dir) {
  auto c = load(dir, "t2_a060_b040.json");
  c.bump.reset();
  bool pass = true;
  std::string detail;
  for (double a : {0.5, 0.6, 0.8})
    for (double b : {0.4, 0.7}) {
      c.alpha = a;
      c.beta = b;
      const auto t0 = std::chrono::steady_clock::now();
      const double ah = recover_alpha(generate_measurements(c)).alpha_hat;
      const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      pass = pass && std::abs(ah - a) <= kAlphaTol && sec < 300.0;
      detail += (detail.empty() ? "" : ", ") + fmt(a) + "/" + fmt(b) + " -> " + std::to_string(ah);
    }
  return {pass, detail};
}

// --- 5 -------------------------------------------------------------------------

struct WorldRun {
  ExperimentConfig config;
  World world;
  InversionResult result;
};

WorldRun run_world(const ExperimentConfig& c) {
  WorldRun w{c, build_world(c), {}};
  w.result = run_inversion(generate_measurements(c), c.inversion, c.threads);
  return w;
}

Outcome poles_on(const WorldRun& w, const std::string& name) {
  const auto& data = w.result.poles ? w.result.poles->data : std::vector<SpectralDatum>{};
  std::size_t located = 0, residues = 0, ranks = 0, checked = 0;
  double worst_mu = 0.0;
  for (std::size_t e = 0; e < w.world.table.entries.size() && checked < kPoleCount; ++e) {
    const double lambda = w.world.table.entries[e].lambda;
    if (lambda == 0.0) continue;
    ++checked;
    const double mu = std::pow(lambda, *w.config.beta);
    const SpectralDatum* best = nullptr;
    for (const auto& d : data)
      if (!best || std::abs(d.mu - mu) < std::abs(best->mu - mu)) best = &d;
    const double err = best ? std::abs(best->mu - mu) / mu : 1.0;
    worst_mu = std::max(worst_mu, err);
    if (err > kMuTol) continue;
    ++located;
    const auto P = restricted_projector(w.world.basis, e, w.world.w1, w.world.w2);
    const double rerr = (best->residue - P.matrix.cast<cplx>()).cwiseAbs().maxCoeff() / P.matrix.cwiseAbs().maxCoeff();
    if (rerr <= kResidueTol) ++residues;
    if (best->multiplicity == int(w.world.table.entries[e].multiplicity())) ++ranks;
  }
  const bool pass = checked == kPoleCount && located == kPoleCount && residues == kPoleCount && ranks == kPoleCount;
  return {pass, name + ": located " + std::to_string(located) + "/" + std::to_string(checked) + ", residues " +
                    std::to_string(residues) + ", ranks " + std::to_string(ranks) + ", worst mu error " +
                    fmt(worst_mu)};
}

Outcome pole_recovery(const std::string& dir) {
  const auto a = poles_on(run_world(load(dir, "t1_a080_b070.json")), "T1");
  const auto b = poles_on(run_world(load(dir, "t2_a080_b070.json")), "T2");
  return {a.pass && b.pass, a.detail + "; " + b.detail};
}

// --- 6 -------------------------------------------------------------------------

std::string stage_failure(const InversionResult& r) {
  for (const auto& s : r.stages)
    if (!s.ok) return s.stage + " stage: " + s.message;
  return "";
}

Outcome beta_recovery(const std::string& dir) {
  const auto c = load(dir, "t2_a060_b040.json");
  const auto w = run_world(c);
  const std::size_t found = w.result.poles ? w.result.poles->data.size() : 0;
  if (!w.result.beta) return {false, std::to_string(found) + " powers recovered; " + stage_failure(w.result)};
  const double err = std::abs(w.result.beta->beta_hat - *c.beta);
  return {found >= kWeylPowers && err <= kBetaTol,
          std::to_string(found) + " powers, beta_hat " + std::to_string(w.result.beta->beta_hat)};
}

// --- 7 -------------------------------------------------------------------------

Outcome wave(const std::string& dir) {
  const auto c = load(dir, "t1_a080_b070.json");
  const auto w = run_world(c);
  if (!w.result.wave) return {false, "no replay from recovered data; " + stage_failure(w.result)};
  std::vector<WaveMode> truth;
  for (std::size_t e = 0; e < w.world.table.entries.size(); ++e)
    truth.push_back({w.world.table.entries[e].lambda, restricted_projector(w.world.basis, e, w.world.w1, w.world.w2).matrix});
  const auto& o = c.inversion;
  const TimeGrid g(o.wave_h, std::size_t(std::llround(o.wave_horizon / o.wave_h)) + 1);
  const auto ref = wave_replay(truth, pulse_shape(w.world.manifold, w.world.w1), sample_profile(SmoothBump{o.wave_T0}, g), g);
  const double err = (w.result.wave->field - ref.field).norm() / ref.field.norm();
  return {err <= kWaveTol, "relative L2 gap " + fmt(err)};
}

// --- 8 -------------------------------------------------------------------------

Outcome stochastic(const std::string& dir) {
  auto c = load(dir, "t2_a060_b040.json");
  c.stochastic.paths = kEnsemblePaths;
  c.stochastic.doubling = true;
  bool pass = true;
  std::string detail;
  for (const auto& ch : cmd_stochastic(c).at("checks")) {
    pass = pass && ch.at("pass").get<bool>();
    detail += (detail.empty() ? "" : ", ") + ch.at("name").get<std::string>() + (ch.at("pass").get<bool>() ? " ok" : " FAIL");
    if (ch.contains("ratio")) detail += " (ratio " + fmt(ch.at("ratio").get<double>()) + ")";
    if (ch.contains("max_rel_error")) detail += " (" + fmt(ch.at("max_rel_error").get<double>()) + ")";
  }
  auto z = c;
  z.stochastic.sigma_amplitude = 0.0;
  z.stochastic.doubling = false;
  for (const auto& ch : cmd_stochastic(z).at("checks"))
    if (ch.at("name") == "pathwise_degeneration") {
      pass = pass && ch.at("pass").get<bool>();
      detail += ", sigma=0 deviation " + fmt(ch.at("max_path_deviation").get<double>());
    }
  return {pass, detail};
}

// --- 9 -------------------------------------------------------------------------

Outcome uniqueness(const std::string& dir) {
  const auto base = load(dir, "t2_a060_b040.json");
  auto other = base;
  other.alpha = *base.alpha + 0.1;
  other.beta = *base.beta + 0.1;
  auto regrid = base;
  regrid.bump->h = 0.8 * base.bump->h;
  const auto A = run_world(base), B = run_world(other), A2 = run_world(regrid);
  auto ah = [](const WorldRun& w) { return w.result.alpha ? w.result.alpha->alpha_hat : std::nan(""); };
  const double da = std::abs(ah(A) - ah(B)), same_a = std::abs(ah(A) - ah(A2));
  std::string detail = "alpha gap " + fmt(da) + " (need > " + fmt(kSeparation * kAlphaTol) + "), regrid " + fmt(same_a);
  bool pass = da > kSeparation * kAlphaTol && same_a <= kAlphaTol;
  if (!A.result.beta || !B.result.beta || !A2.result.beta)
    return {false, detail + "; beta unavailable: " + stage_failure(A.result)};
  const double db = std::abs(A.result.beta->beta_hat - B.result.beta->beta_hat);
  const double same_b = std::abs(A.result.beta->beta_hat - A2.result.beta->beta_hat);
  pass = pass && db > kSeparation * kBetaTol && same_b <= kBetaTol;
  double same_l = 0.0;
  for (std::size_t k = 0; k < std::min(A.result.spectral.size(), A2.result.spectral.size()); ++k)
    same_l = std::max(same_l, std::abs(A.result.spectral[k].lambda - A2.result.spectral[k].lambda) / A.result.spectral[k].lambda);
  pass = pass && same_l <= kLambdaTol;
  return {pass, detail + ", beta gap " + fmt(db) + ", regrid beta " + fmt(same_b) + ", regrid lambda " + fmt(same_l)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-9"};
  std::vector<int> which;
  std::string dir = FRACINV_CONFIG_DIR;
  app.add_option("--criterion", which, "criteria to run (default all)")->check(CLI::Range(1, 9));
  app.add_option("--configs", dir, "directory holding the reference configs")->check(CLI::ExistingDirectory);
  CLI11_PARSE(app, argc, argv);
  if (which.empty()) which = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"Mittag-Leffler accuracy", mittag_leffler},
      {"kernel/Laplace consistency", kernel_laplace},
      {"forward correctness", forward},
      {"alpha recovery", [&] { return alpha_recovery(dir); }},
      {"pole/residue recovery", [&] { return pole_recovery(dir); }},
      {"beta recovery", [&] { return beta_recovery(dir); }},
      {"wave replay", [&] { return wave(dir); }},
      {"stochastic suite", [&] { return stochastic(dir); }},
      {"uniqueness surrogate", [&] { return uniqueness(dir); }},
  };
  bool all = true;
  for (int n : which) {
    const auto& [name, run] = criteria[std::size_t(n - 1)];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << n << " " << (o.pass ? "PASS" : "FAIL") << " [" << name << "] " << o.detail << " ("
              << fmt(sec) << " s)" << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
