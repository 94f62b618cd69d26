#include "fracinv/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fracinv/errors.hpp"

namespace fracinv {

using nlohmann::json;

namespace {

RegionBox box_from(const json& j, const char* name) {
  if (!j.is_object() || !j.contains("lo") || !j.contains("hi"))
    throw ValidationError(std::string("region '") + name + "' needs lo and hi");
  RegionBox b;
  const auto lo = j.at("lo").get<std::vector<double>>(), hi = j.at("hi").get<std::vector<double>>();
  if (lo.size() != hi.size() || lo.empty() || lo.size() > 3)
    throw ValidationError(std::string("region '") + name + "' bounds need 1 to 3 matching entries");
  for (std::size_t i = 0; i < lo.size(); ++i) {
    b.lo[i] = lo[i];
    b.hi[i] = hi[i];
  }
  return b;
}

json box_to(const RegionBox& b, int dim) {
  const std::size_t d = std::size_t(std::clamp(dim, 1, 3));
  return {{"lo", std::vector<double>(b.lo.begin(), b.lo.begin() + d)},
          {"hi", std::vector<double>(b.hi.begin(), b.hi.begin() + d)}};
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

std::size_t nodes_for(double horizon, double h) { return std::size_t(std::llround(horizon / h)) + 1; }

double alpha_slope_error(const AlphaFit& a) {
  std::vector<double> x;
  for (std::size_t i = a.window_start; i < a.horizons.size(); ++i) x.push_back(std::log(a.horizons[i]));
  const std::size_t n = x.size();
  if (n < 3) return 0.0;
  double mean = 0.0, sxx = 0.0;
  for (double v : x) mean += v / double(n);
  for (double v : x) sxx += (v - mean) * (v - mean);
  return a.fit.residual * std::sqrt(double(n) / double(n - 2)) / std::sqrt(sxx);
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  try {
    ExperimentConfig c;
    require(j.is_object(), "config must be a JSON object");
    require(j.contains("schema_version"), "config lacks schema_version");
    c.schema_version = j.at("schema_version").get<int>();
    if (j.contains("units")) {
      const auto& u = j.at("units");
      require(u.value("time", "dimensionless") == "dimensionless", "time unit must be 'dimensionless'");
      require(u.value("length", "radian") == "radian", "length unit must be 'radian'");
    }
    const auto& m = j.at("manifold");
    const auto kind = m.at("kind").get<std::string>();
    require(kind == "torus" || kind == "sphere", "manifold kind must be torus or sphere");
    c.manifold.kind = kind == "torus" ? ManifoldKind::torus : ManifoldKind::sphere;
    c.manifold.dim = kind == "torus" ? m.value("dim", 2) : 2;
    c.manifold.resolution = m.at("resolution").get<std::vector<int>>();
    if (j.contains("exponents")) {
      const auto& e = j.at("exponents");
      if (e.contains("alpha")) c.alpha = e.at("alpha").get<double>();
      if (e.contains("beta")) c.beta = e.at("beta").get<double>();
    }
    if (j.contains("regions")) {
      c.w1 = box_from(j.at("regions").at("w1"), "w1");
      c.w2 = box_from(j.at("regions").at("w2"), "w2");
    }
    c.lambda_max = j.at("lambda_max").get<double>();
    read(j, "modes", c.modes);
    if (j.contains("sources")) {
      const auto& s = j.at("sources");
      if (s.contains("pulse_ladder")) {
        PulseLadderConfig p;
        read(s.at("pulse_ladder"), "t0", p.t0);
        read(s.at("pulse_ladder"), "count", p.count);
        read(s.at("pulse_ladder"), "intervals", p.intervals);
        c.ladder = p;
      }
      if (s.contains("bump")) {
        BumpConfig b;
        read(s.at("bump"), "T0", b.T0);
        read(s.at("bump"), "h", b.h);
        read(s.at("bump"), "horizon", b.horizon);
        c.bump = b;
      }
    }
    if (j.contains("inversion")) {
      const auto& v = j.at("inversion");
      auto& o = c.inversion;
      read(v, "alpha_min_span", o.alpha_min_span);
      read(v, "rho_min", o.rho_min);
      read(v, "rho_max", o.rho_max);
      read(v, "radii", o.radii);
      read(v, "rays", o.rays);
      read(v, "max_arg_deg", o.max_arg_deg);
      read(v, "continuation_tolerance", o.continuation_tolerance);
      read(v, "max_degree", o.max_degree);
      read(v, "y_lo", o.y_lo);
      read(v, "y_hi", o.y_hi);
      read(v, "delta", o.delta);
      read(v, "prominence", o.prominence);
      read(v, "rank_threshold", o.rank_threshold);
      read(v, "wave_horizon", o.wave_horizon);
      read(v, "wave_h", o.wave_h);
      read(v, "wave_T0", o.wave_T0);
    }
    if (j.contains("stochastic")) {
      const auto& v = j.at("stochastic");
      auto& o = c.stochastic;
      read(v, "paths", o.paths);
      read(v, "seed", o.seed);
      read(v, "h", o.h);
      read(v, "horizon", o.horizon);
      read(v, "T0", o.T0);
      read(v, "sigma_amplitude", o.sigma_amplitude);
      read(v, "doubling", o.doubling);
    }
    read(j, "tail_tolerance", c.tail_tolerance);
    read(j, "threads", c.threads);
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config malformed: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ValidationError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json config_json(const ExperimentConfig& c) {
  json j = {{"schema_version", c.schema_version},
            {"units", {{"time", "dimensionless"}, {"length", "radian"}}},
            {"manifold",
             {{"kind", c.manifold.kind == ManifoldKind::torus ? "torus" : "sphere"},
              {"dim", c.manifold.dim},
              {"resolution", c.manifold.resolution}}},
            {"regions", {{"w1", box_to(c.w1, c.manifold.dim)}, {"w2", box_to(c.w2, c.manifold.dim)}}},
            {"lambda_max", c.lambda_max},
            {"tail_tolerance", c.tail_tolerance},
            {"threads", c.threads}};
  if (c.alpha || c.beta) {
    j["exponents"] = json::object();
    if (c.alpha) j["exponents"]["alpha"] = *c.alpha;
    if (c.beta) j["exponents"]["beta"] = *c.beta;
  }
  if (!c.modes.empty()) j["modes"] = c.modes;
  j["sources"] = json::object();
  if (c.ladder)
    j["sources"]["pulse_ladder"] = {{"t0", c.ladder->t0}, {"count", c.ladder->count}, {"intervals", c.ladder->intervals}};
  if (c.bump) j["sources"]["bump"] = {{"T0", c.bump->T0}, {"h", c.bump->h}, {"horizon", c.bump->horizon}};
  const auto& o = c.inversion;
  j["inversion"] = {{"alpha_min_span", o.alpha_min_span},
                    {"rho_min", o.rho_min},
                    {"rho_max", o.rho_max},
                    {"radii", o.radii},
                    {"rays", o.rays},
                    {"max_arg_deg", o.max_arg_deg},
                    {"continuation_tolerance", o.continuation_tolerance},
                    {"max_degree", o.max_degree},
                    {"y_lo", o.y_lo},
                    {"y_hi", o.y_hi},
                    {"delta", o.delta},
                    {"prominence", o.prominence},
                    {"rank_threshold", o.rank_threshold},
                    {"wave_horizon", o.wave_horizon},
                    {"wave_h", o.wave_h},
                    {"wave_T0", o.wave_T0}};
  const auto& s = c.stochastic;
  j["stochastic"] = {{"paths", s.paths}, {"seed", s.seed},   {"h", s.h},
                     {"horizon", s.horizon}, {"T0", s.T0},   {"sigma_amplitude", s.sigma_amplitude},
                     {"doubling", s.doubling}};
  return j;
}

void validate_config(const ExperimentConfig& c, RunMode mode) {
  require(c.schema_version == kConfigSchemaVersion, "unsupported config schema_version");
  if (c.manifold.kind == ManifoldKind::torus) {
    require(c.manifold.dim >= 1 && c.manifold.dim <= 3, "torus dimension must be 1, 2 or 3");
    require(c.manifold.resolution.size() == 1 && c.manifold.resolution[0] >= 4, "torus resolution is one count >= 4");
  } else {
    require(c.manifold.resolution.size() == 2 && c.manifold.resolution[0] >= 4 && c.manifold.resolution[1] >= 4,
            "sphere resolution is {n_theta, n_phi}, each >= 4");
  }
  require(c.lambda_max >= 0.0 && std::isfinite(c.lambda_max), "lambda_max must be non-negative");
  require(c.threads >= 0, "threads must be non-negative");
  if (mode == RunMode::spectrum) return;

  if (mode != RunMode::invert) {
    require(c.alpha && c.beta, "forward and stochastic runs need exponents alpha and beta");
    ExponentPair(*c.alpha, *c.beta, mode == RunMode::stochastic);
  }
  const ModelManifold m = c.manifold.build();
  const auto w1 = RegionPatch::from_box(m, c.w1), w2 = RegionPatch::from_box(m, c.w2);
  require(w1.size() > 0 && w2.size() > 0, "regions W1 and W2 must contain grid nodes");
  require(patches_disjoint(m, w1, w2, 0.0), "regions W1 and W2 must be disjoint");
  require(c.tail_tolerance > 0.0, "tail_tolerance must be positive");
  if (c.ladder) {
    require(c.ladder->t0 > 0.0 && c.ladder->count >= 0 && c.ladder->intervals >= 2, "pulse ladder needs t0 > 0, count >= 0, intervals >= 2");
  }
  if (c.bump) {
    require(c.bump->T0 > 0.0 && c.bump->h > 0.0 && c.bump->horizon >= c.bump->T0, "bump needs T0 > 0, h > 0, horizon >= T0");
  }
  const auto& o = c.inversion;
  require(o.rho_min > 0.0 && o.rho_max > o.rho_min && o.radii >= 2 && o.rays >= 2, "inversion frequency plan is invalid");
  require(o.max_arg_deg > 0.0 && o.max_arg_deg < 90.0, "max_arg_deg must lie in (0, 90)");
  require(o.y_hi > o.y_lo && o.y_lo > 0.0, "pole window needs 0 < y_lo < y_hi");
  require(o.wave_h > 0.0 && o.wave_horizon > o.wave_T0 && o.wave_T0 > 0.0, "wave check grid is invalid");
  if (mode == RunMode::stochastic) {
    const auto& s = c.stochastic;
    require(s.paths >= 1 && s.h > 0.0 && s.horizon > s.h && s.T0 > 0.0, "stochastic grid or path count is invalid");
  }
}

World build_world(const ExperimentConfig& c) {
  ModelManifold m = c.manifold.build();
  SpectrumTable t = enumerate_spectrum(m, c.lambda_max);
  if (!c.modes.empty()) {
    for (auto k : c.modes)
      if (k >= t.entries.size()) throw ValidationError("mode index beyond the truncated table");
    t = t.subset(c.modes);
  }
  SampledBasis b(m, t);
  RegionPatch w1 = RegionPatch::from_box(m, c.w1), w2 = RegionPatch::from_box(m, c.w2);
  return {std::move(m), std::move(t), std::move(b), std::move(w1), std::move(w2)};
}

std::vector<double> raw_shape(const ModelManifold& m, const RegionPatch& w1, int variant) {
  std::vector<double> xi;
  const double a = variant == 0 ? 1.7 : 2.9, b = variant == 0 ? 2.3 : 1.1;
  for (auto i : w1.nodes()) {
    const auto& x = m.node(i).x;
    xi.push_back(std::sin(a * x[0] + 0.3) + 0.6 * std::cos(b * x[1] - 0.5) + 0.25 * std::sin(1.3 * x[2]));
  }
  return xi;
}

std::vector<double> pulse_shape(const ModelManifold& m, const RegionPatch& w1) {
  auto xi = raw_shape(m, w1, 0);
  project_mean_zero(xi, w1);
  return xi;
}

MeasurementSet generate_measurements(const ExperimentConfig& c, std::vector<std::string>* warnings) {
  validate_config(c, RunMode::forward);
  const World w = build_world(c);
  const ExponentPair e(*c.alpha, *c.beta);
  FieldOptions opt;
  opt.store_modal = false;
  opt.tail_tolerance = c.tail_tolerance;
  opt.threads = c.threads;
  std::set<std::string> seen;
  auto note = [&](const FieldSolution& s) {
    for (const auto& m : s.warnings)
      if (warnings && seen.insert(m).second) warnings->push_back(m);
  };

  MeasurementSet ms{c.manifold, c.w1, c.w2, {}};
  if (c.ladder) {
    const auto xi = pulse_shape(w.manifold, w.w1);
    for (int j = 0; j < c.ladder->count; ++j) {
      const double t = c.ladder->t0 * std::pow(2.0, j);
      const TimeGrid g = TimeGrid::from_horizon(t, c.ladder->intervals);
      const TriangularPulse p{t};
      const TemporalResponses r(w.table, e, g, sample_profile(p, g), c.threads);
      const auto sol = assemble_field(r, xi, w.basis, w.w1, w.w2, opt);
      note(sol);
      ms.records.push_back({p, xi, g.h(), sol.on_w2});
    }
  }
  if (c.bump) {
    const TimeGrid g(c.bump->h, nodes_for(c.bump->horizon, c.bump->h));
    const SmoothBump p{c.bump->T0};
    const TemporalResponses r(w.table, e, g, sample_profile(p, g), c.threads);
    for (std::size_t i = 0; i < w.w1.size(); ++i) {
      std::vector<double> xi(w.w1.size(), 0.0);
      xi[i] = 1.0;
      const auto sol = assemble_field(r, xi, w.basis, w.w1, w.w2, opt);
      note(sol);
      ms.records.push_back({p, xi, g.h(), sol.on_w2});
    }
  }
  return ms;
}

bool InversionResult::ok() const {
  return std::all_of(stages.begin(), stages.end(), [](const StageStatus& s) { return s.ok; });
}

InversionResult run_inversion(const MeasurementSet& ms, const InversionConfig& o, int threads) {
  InversionResult r;
  auto stage = [&](const char* name, auto&& body) {
    try {
      body();
      r.stages.push_back({name, true, ""});
      return true;
    } catch (const std::exception& e) {
      r.stages.push_back({name, false, e.what()});
      return false;
    }
  };

  AlphaOptions ao;
  ao.min_span = o.alpha_min_span;
  if (!stage("alpha", [&] {
        r.alpha = recover_alpha(ms, ao);
        r.alpha_std_error = alpha_slope_error(*r.alpha);
      }))
    return r;
  const double a = r.alpha->alpha_hat;

  std::vector<LaplaceOperatorSample> samples;
  if (!stage("laplace", [&] {
        const auto s = sector_frequencies(a, o.rho_min, o.rho_max, o.radii, o.rays, o.max_arg_deg * kPi / 180.0);
        samples = assemble_H(ms, s, a, threads);
        r.samples = samples.size();
      }))
    return r;

  std::optional<RationalContinuation> rc;
  if (!stage("continuation", [&] {
        ContinuationOptions co;
        co.tolerance = o.continuation_tolerance;
        co.max_degree = o.max_degree;
        rc.emplace(samples, co);
        r.continuation_degree = rc->degree();
        r.continuation_fit_error = rc->fit_error();
        r.continuation_validation_error = rc->validation_error();
      }))
    return r;

  if (!stage("poles", [&] {
        PoleOptions po;
        po.y_lo = o.y_lo;
        po.y_hi = o.y_hi;
        po.delta = o.delta;
        po.prominence = o.prominence;
        po.rank_threshold = o.rank_threshold;
        r.poles = recover_poles([&](cplx z) { return (*rc)(z); }, po);
        for (const auto& d : r.poles->data)
          r.mu_alpha_error.push_back(d.mu * std::abs(std::log(d.mu)) * r.alpha_std_error / a);
        r.spectral = r.poles->data;
      }))
    return r;

  const int dim = ms.manifold.kind == ManifoldKind::torus ? ms.manifold.dim : 2;
  if (!stage("beta", [&] { r.beta = recover_beta(std::span<const SpectralDatum>(r.poles->data), dim); })) return r;
  stage("spectral", [&] { r.spectral = assemble_spectral_data(r.poles->data, r.beta->beta_hat); });

  stage("wave", [&] {
    const ModelManifold m = ms.manifold.build();
    const RegionPatch w1 = RegionPatch::from_box(m, ms.w1);
    const TimeGrid g(o.wave_h, nodes_for(o.wave_horizon, o.wave_h));
    const auto modes = wave_modes(r.spectral);
    r.wave = wave_replay(modes, pulse_shape(m, w1), sample_profile(SmoothBump{o.wave_T0}, g), g);
  });
  return r;
}

json report_json(const InversionResult& r) {
  json j = {{"schema_version", kReportSchemaVersion}};
  json stages = json::array();
  for (const auto& s : r.stages) stages.push_back({{"stage", s.stage}, {"ok", s.ok}, {"message", s.message}});
  j["stages"] = stages;
  if (r.alpha) {
    j["alpha"] = {{"alpha_hat", r.alpha->alpha_hat},
                  {"std_error", r.alpha_std_error},
                  {"slope", r.alpha->fit.slope},
                  {"intercept", r.alpha->fit.intercept},
                  {"log_residual_rms", r.alpha->fit.residual},
                  {"window_start", r.alpha->window_start},
                  {"horizons", r.alpha->horizons},
                  {"norms", r.alpha->norms}};
  }
  if (r.samples) {
    j["continuation"] = {{"samples", r.samples},
                         {"degree", r.continuation_degree},
                         {"fit_error", r.continuation_fit_error},
                         {"validation_error", r.continuation_validation_error}};
  }
  if (r.poles) {
    j["poles"] = {{"delta", r.poles->delta}, {"count", r.poles->data.size()}, {"warnings", r.poles->warnings}};
  }
  if (r.beta) {
    j["beta"] = {{"beta_hat", r.beta->beta_hat},
                 {"weyl_slope", r.beta->fit.slope},
                 {"points", r.beta->mu.size()},
                 {"fit_points", r.beta->fit.points},
                 {"log_residual_rms", r.beta->fit.residual}};
  }
  json table = json::array();
  for (std::size_t k = 0; k < r.spectral.size(); ++k) {
    const auto& d = r.spectral[k];
    std::vector<double> sv(d.singular_values.data(), d.singular_values.data() + d.singular_values.size());
    json row = {{"mu", d.mu},
                {"mu_error", d.mu_error},
                {"mu_alpha_error", k < r.mu_alpha_error.size() ? r.mu_alpha_error[k] : 0.0},
                {"residue_norm", d.residue.norm()},
                {"residue_error", d.residue_error},
                {"multiplicity", d.multiplicity},
                {"singular_values", sv}};
    if (r.beta) row["lambda"] = d.lambda;
    table.push_back(row);
  }
  j["spectral"] = table;
  if (r.wave) {
    j["wave"] = {{"nodes", r.wave->field.rows()},
                 {"max_abs", r.wave->field.size() ? r.wave->field.cwiseAbs().maxCoeff() : 0.0},
                 {"warnings", r.wave->warnings}};
  }
  return j;
}

SpectrumTable cmd_spectrum(const ExperimentConfig& c, std::ostream& csv) {
  validate_config(c, RunMode::spectrum);
  const SpectrumTable t = enumerate_spectrum(c.manifold.build(), c.lambda_max);
  write_spectrum_csv(csv, t);
  return t;
}

std::vector<std::string> cmd_forward(const ExperimentConfig& c, const std::string& dataset_path) {
  std::vector<std::string> warnings;
  const MeasurementSet ms = generate_measurements(c, &warnings);
  write_dataset(dataset_path, ms, SealedTruth{*c.alpha, *c.beta, c.lambda_max});
  return warnings;
}

InversionResult cmd_invert(const std::string& dataset_path, const ExperimentConfig& c, const std::string& out_dir) {
  validate_config(c, RunMode::spectrum);
  const MeasurementSet ms = read_dataset(dataset_path);
  InversionResult r = run_inversion(ms, c.inversion, c.threads);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "'");
  auto open = [&](const char* name) {
    std::ofstream os(std::filesystem::path(out_dir) / name);
    if (!os) throw IoError(std::string("cannot write ") + name);
    os.precision(17);
    return os;
  };
  {
    auto os = open("report.json");
    os << report_json(r).dump(2) << "\n";
  }
  {
    auto os = open("counting.csv");
    os << "mu,count\n";
    if (r.beta)
      for (std::size_t i = 0; i < r.beta->mu.size(); ++i) os << r.beta->mu[i] << "," << r.beta->count[i] << "\n";
  }
  {
    auto os = open("scan.csv");
    os << "y,norm\n";
    if (r.poles)
      for (std::size_t i = 0; i < r.poles->scan_y.size(); ++i)
        os << r.poles->scan_y[i] << "," << r.poles->scan_norm[i] << "\n";
  }
  return r;
}

json cmd_stochastic(const ExperimentConfig& c) {
  validate_config(c, RunMode::stochastic);
  const World w = build_world(c);
  const ExponentPair e(*c.alpha, *c.beta, true);
  const auto& sc = c.stochastic;
  const TimeGrid g(sc.h, nodes_for(sc.horizon, sc.h));
  const SmoothBump prof{sc.T0};
  const SourceSpec f{raw_shape(w.manifold, w.w1, 0), prof};
  auto sx = raw_shape(w.manifold, w.w1, 1);
  for (auto& v : sx) v *= sc.sigma_amplitude;
  const SourceSpec sig{sx, prof};
  const auto res = ensemble_solve(f, sig, w.basis, e, g, w.w1, sc.paths, sc.seed, c.threads);
  const double M = double(sc.paths);
  json checks = json::array();

  // Ito isometry per column at the final node.
  const auto cs = patch_coefficients(w.basis, w.w1, sig.xi);
  const Eigen::Index last = Eigen::Index(g.nodes() - 1);
  std::vector<double> expect(cs.size());
  double emax = 0.0;
  for (std::size_t col = 0; col < cs.size(); ++col) {
    const double lam = w.table.entries[w.basis.entry_of(col)].lambda;
    expect[col] = cs[col] * cs[col] * isometry_variance(lam, e, prof, g.horizon());
    emax = std::max(emax, expect[col]);
  }
  double iso = 0.0;
  const Eigen::MatrixXd var = res.stats.variance();
  for (std::size_t col = 0; col < cs.size(); ++col)
    if (expect[col] > 1e-2 * emax) iso = std::max(iso, std::abs(var(Eigen::Index(col), last) - expect[col]) / expect[col]);
  if (emax > 0.0) checks.push_back({{"name", "ito_isometry"}, {"max_rel_error", iso}, {"pass", iso <= 0.05}});

  // Mean equivalence: the mean error against its own standard error.
  double sup_err = 0.0, sup_se = 0.0;
  for (Eigen::Index t = 0; t < Eigen::Index(g.nodes()); ++t) {
    sup_err = std::max(sup_err, res.mean_error[std::size_t(t)]);
    sup_se = std::max(sup_se, std::sqrt(var.col(t).sum() / M));
  }
  json me = {{"name", "mean_equivalence"}, {"sup_error", sup_err}, {"sup_standard_error", sup_se}};
  me["pass"] = sc.sigma_amplitude == 0.0 ? sup_err == 0.0 : sup_err <= 5.0 * sup_se;
  if (sc.doubling) {
    const auto big = ensemble_solve(f, sig, w.basis, e, g, w.w1, 4 * sc.paths, sc.seed + 1, c.threads);
    const double e4 = *std::max_element(big.mean_error.begin(), big.mean_error.end());
    const double ratio = sup_err / e4;
    me["sup_error_4M"] = e4;
    me["ratio"] = ratio;
    me["pass"] = me["pass"].get<bool>() && ratio >= 1.0 && ratio <= 4.0;
  }
  checks.push_back(me);

  if (sc.sigma_amplitude == 0.0)
    checks.push_back({{"name", "pathwise_degeneration"},
                      {"max_path_deviation", res.max_path_deviation},
                      {"pass", res.max_path_deviation == 0.0}});

  // Energy against T0^{2 alpha - 1} (int ||f||^2 + sup ||sigma||^2).
  const auto E = res.stats.energy();
  const double supE = *std::max_element(E.begin(), E.end());
  const auto cf = patch_coefficients(w.basis, w.w1, f.xi);
  const auto a = sample_profile(prof, g);
  double fa = 0.0, sa = 0.0, nf = 0.0, ns = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    fa += g.h() * a[n] * a[n];
    sa = std::max(sa, a[n] * a[n]);
  }
  for (std::size_t col = 0; col < cf.size(); ++col) {
    nf += cf[col] * cf[col];
    ns += cs[col] * cs[col];
  }
  const double bound = std::pow(sc.T0, 2.0 * e.alpha - 1.0) * (nf * fa + ns * sa);
  const double Cfit = supE / bound, Cstar = energy_bound_constant(e.alpha);
  checks.push_back({{"name", "energy_bound"},
                    {"sup_energy", supE},
                    {"fitted_constant", Cfit},
                    {"analytic_constant", Cstar},
                    {"pass", std::isfinite(supE) && Cfit <= Cstar}});

  return {{"schema_version", kReportSchemaVersion},
          {"paths", sc.paths},
          {"seed", sc.seed},
          {"alpha", e.alpha},
          {"beta", e.beta},
          {"checks", checks}};
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return kExitValidation;
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  return kExitNumerical;
}

}  // namespace fracinv
