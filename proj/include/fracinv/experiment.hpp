#pragma once

#include <cstdint>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "fracinv/dataset.hpp"
#include "fracinv/inverse.hpp"
#include "fracinv/stochastic.hpp"

namespace fracinv {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

struct PulseLadderConfig {
  double t0 = 16384.0;
  int count = 6;
  std::size_t intervals = 300;  // per rung, h = t / intervals
};

struct BumpConfig {
  double T0 = 2.0;
  double h = 0.02;
  double horizon = 30.0;
};

struct InversionConfig {
  double alpha_min_span = 10.0;
  double rho_min = 0.2;  // |z| range of the sampled sector
  double rho_max = 6.0;
  int radii = 40;
  int rays = 11;
  double max_arg_deg = 85.0;
  double continuation_tolerance = 0.0;  // 0 estimates the noise floor from held-out samples
  int max_degree = 80;
  double y_lo = 0.5;
  double y_hi = 5.0;
  double delta = 0.0;
  double prominence = 2.0;
  double rank_threshold = kResidueRankThreshold;
  double wave_horizon = 20.0;
  double wave_h = 0.02;
  double wave_T0 = 4.0;
};

struct StochasticConfig {
  std::size_t paths = 10000;
  std::uint64_t seed = 1;
  double h = 0.02;
  double horizon = 2.0;
  double T0 = 1.0;
  double sigma_amplitude = 1.0;
  bool doubling = false;  // also run 4x the paths and report the error ratio
};

// Units are fixed: time is dimensionless, coordinates are radians.
struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  ManifoldSpec manifold;
  std::optional<double> alpha;
  std::optional<double> beta;
  RegionBox w1;
  RegionBox w2;
  double lambda_max = 0.0;
  std::vector<std::size_t> modes;  // empty keeps the whole table
  std::optional<PulseLadderConfig> ladder;
  std::optional<BumpConfig> bump;
  InversionConfig inversion;
  StochasticConfig stochastic;
  double tail_tolerance = 1e-6;
  int threads = 0;
};

enum class RunMode { spectrum, forward, invert, stochastic };

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_json(const ExperimentConfig& c);
// Throws ValidationError; forward and stochastic runs need the exponents,
// stochastic runs additionally alpha > 1/2.
void validate_config(const ExperimentConfig& c, RunMode mode);

// Manifold, truncated table, basis and patches described by a config.
struct World {
  ModelManifold manifold;
  SpectrumTable table;
  SampledBasis basis;
  RegionPatch w1;
  RegionPatch w2;
};
World build_world(const ExperimentConfig& c);

// Smooth test shapes on W1; the pulse shape is projected to mean zero and used
// by the ladder and the wave check.
std::vector<double> raw_shape(const ModelManifold& m, const RegionPatch& w1, int variant);
std::vector<double> pulse_shape(const ModelManifold& m, const RegionPatch& w1);

// Pulse ladder with the mean-zero shape, then one bump record per W1 node.
MeasurementSet generate_measurements(const ExperimentConfig& c, std::vector<std::string>* warnings = nullptr);

struct StageStatus {
  std::string stage;
  bool ok = true;
  std::string message;
};

struct InversionResult {
  std::optional<AlphaFit> alpha;
  double alpha_std_error = 0.0;
  std::size_t samples = 0;
  std::size_t continuation_degree = 0;
  double continuation_fit_error = 0.0;
  double continuation_validation_error = 0.0;
  std::optional<PoleRecovery> poles;
  std::vector<double> mu_alpha_error;  // first-order effect of the alpha error bar on each mu
  std::optional<BetaFit> beta;
  std::vector<SpectralDatum> spectral;
  std::optional<WaveReplay> wave;
  std::vector<StageStatus> stages;
  bool ok() const;
};

InversionResult run_inversion(const MeasurementSet& ms, const InversionConfig& opt, int threads = 0);
nlohmann::json report_json(const InversionResult& r);

// --- subcommands -------------------------------------------------------------

SpectrumTable cmd_spectrum(const ExperimentConfig& c, std::ostream& csv);
// Writes the dataset with the exponents in its sealed section; returns the warnings.
std::vector<std::string> cmd_forward(const ExperimentConfig& c, const std::string& dataset_path);
// Reads only the unsealed sections; writes report.json, counting.csv and scan.csv into out_dir.
InversionResult cmd_invert(const std::string& dataset_path, const ExperimentConfig& c, const std::string& out_dir);
nlohmann::json cmd_stochastic(const ExperimentConfig& c);

// Exit codes of the command line front end.
enum ExitCode { kExitOk = 0, kExitValidation = 1, kExitNumerical = 2, kExitIo = 3 };
int exit_code_for(const std::exception& e);

}  // namespace fracinv
