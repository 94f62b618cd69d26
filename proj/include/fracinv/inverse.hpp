#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fracinv/dataset.hpp"
#include "fracinv/manifold.hpp"

namespace fracinv {

// --- time order --------------------------------------------------------------

struct AlphaOptions {
  double min_span = 10.0;      // fit window covers at least this ratio of horizons
  double noise_floor = 1e-12;  // relative to ||xi|| t_max
};

struct AlphaFit {
  double alpha_hat = 0.0;
  PowerLawFit fit;
  std::vector<double> horizons;
  std::vector<double> norms;  // ||w(t)||_{L2(W2)}
  std::size_t window_start = 0;
};

// Slope of log ||w(t)|| against log t over the pulse ladder, alpha = 1 - slope.
AlphaFit recover_alpha(const MeasurementSet& ms, const AlphaOptions& opt = {});

// --- Laplace-domain operator -------------------------------------------------

struct LaplaceOperatorSample {
  cplx s;
  cplx z;               // s^alpha_hat, principal branch
  Eigen::MatrixXcd H;   // |W2| x |W1|, acting on nodal values
};

// Frequencies s = z^{1/alpha} for z on rays |arg z| <= alpha * max_arg_s, log-spaced radii.
std::vector<cplx> sector_frequencies(double alpha_hat, double rho_min, double rho_max,
                                     int radii, int rays, double max_arg_s = 85.0 * kPi / 180.0);

// H(s) xi = L u_{a xi}(s) / L a(s) from the bump records.
std::vector<LaplaceOperatorSample> assemble_H(const MeasurementSet& ms, std::span<const cplx> s_grid,
                                              double alpha_hat, int threads = 0);

using OperatorFunction = std::function<Eigen::MatrixXcd(cplx z)>;

struct ContinuationOptions {
  double tolerance = 0.0;  // relative fit error on the samples; 0 estimates it from a held-out split
  int max_degree = 80;
  int probes = 6;
  unsigned seed = 7;
};

// Rational continuation of z -> H(z) off the sampled sector: a barycentric
// approximant whose support points and weights are chosen greedily (AAA) on
// random scalar probes u^T H v and shared by all matrix entries.
class RationalContinuation {
 public:
  RationalContinuation(std::span<const LaplaceOperatorSample> samples, const ContinuationOptions& opt = {});
  Eigen::MatrixXcd operator()(cplx z) const;
  std::vector<cplx> poles() const;
  std::size_t degree() const { return support_.size(); }
  double fit_error() const { return fit_error_; }  // max relative Frobenius misfit on the samples
  double validation_error() const { return validation_error_; }  // best held-out misfit, 0 for a fixed tolerance

 private:
  std::vector<cplx> support_;
  std::vector<cplx> weights_;
  std::vector<Eigen::MatrixXcd> values_;
  double fit_error_ = 0.0;
  double validation_error_ = 0.0;
};

// --- poles and residues ------------------------------------------------------

struct SpectralDatum {
  double mu = 0.0;        // recovered lambda^beta
  double mu_error = 0.0;  // spread between the line fit and the polished pole
  Eigen::MatrixXcd residue;  // lim (mu + i z) H(z) at z = i mu
  double residue_error = 0.0;
  Eigen::VectorXd singular_values;
  int multiplicity = 0;
  double lambda = 0.0;  // mu^{1/beta_hat}, filled by assemble_spectral_data
};

inline constexpr double kResidueRankThreshold = 1e-3;

struct PoleOptions {
  double y_lo = 0.5;
  double y_hi = 5.0;
  double delta = 0.0;  // distance of the scan line from the imaginary axis; 0 selects it from a pre-scan
  double prominence = 2.0;  // peak over its higher neighbouring valley
  double min_residue = 1e-6;  // relative to the largest residue found
  double rank_threshold = kResidueRankThreshold;
};

struct PoleRecovery {
  std::vector<SpectralDatum> data;
  double delta = 0.0;
  std::vector<double> scan_y;
  std::vector<double> scan_norm;  // ||H(delta + i y)||_F
  std::vector<std::string> warnings;
};

PoleRecovery recover_poles(const OperatorFunction& H, const PoleOptions& opt = {});

// --- space order and spectral data --------------------------------------------

struct BetaFit {
  double beta_hat = 0.0;
  PowerLawFit fit;
  std::vector<double> mu;
  std::vector<double> count;  // N_mu(mu) with multiplicities
};

inline constexpr std::size_t kMinWeylPoints = 30;

BetaFit recover_beta(std::span<const double> mu, std::span<const int> multiplicity, int dim);
BetaFit recover_beta(std::span<const SpectralDatum> data, int dim);

std::vector<SpectralDatum> assemble_spectral_data(std::vector<SpectralDatum> data, double beta_hat);

// --- wave replay -------------------------------------------------------------

struct WaveMode {
  double lambda;
  Eigen::MatrixXd residue;  // |W2| x |W1|
};

struct WaveReplay {
  Eigen::MatrixXd field;  // time nodes x |W2|
  std::vector<std::string> warnings;
};

// Product-integration weights of sin(sqrt(lambda) t)/sqrt(lambda) (t for lambda = 0)
// against piecewise-linear data: out_n = sum_j w_{n-j} f_j.
std::vector<double> wave_weights(double lambda, double h, std::size_t n);

// Source f(x, t) = profile(t) xi(x) on W1.
WaveReplay wave_replay(std::span<const WaveMode> modes, std::span<const double> xi,
                       std::span<const double> profile, const TimeGrid& grid);

std::vector<WaveMode> wave_modes(std::span<const SpectralDatum> data);

}  // namespace fracinv
