#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fracinv/forward.hpp"
#include "fracinv/manifold.hpp"

namespace fracinv {

// Philox4x32-10 block function.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;
  static Counter block(Counter ctr, Key key);
};

// Standard normals addressed by (seed, stream, index); stream = path index.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
  double operator()(std::uint64_t index) const;
  // Fills out[i] = (*this)(first + i), one Philox block per pair.
  void fill(std::uint64_t first, std::span<double> out) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

// <e(xi), phi_col>_{L^2(M)} for nodal xi on W1, one entry per basis column.
std::vector<double> patch_coefficients(const SampledBasis& b, const RegionPatch& w1, std::span<const double> xi);

struct NoisePath {
  std::uint64_t seed = 0;
  std::uint64_t path = 0;
  double h = 0.0;
  std::vector<double> dB;  // dB[j] = B(t_{j+1}) - B(t_j), one per interval
};

NoisePath sample_brownian(const TimeGrid& g, std::uint64_t seed, std::uint64_t path = 0);

// Left-point weights of the stochastic convolution: u_n = sum_{j<n} c_{n-j} sigma_j dB_j.
// c_1 carries the exact moment of (t - tau)^{alpha-1} over the last interval.
std::vector<cplx> ito_weights(double lambda, const ExponentPair& e, double h, std::size_t n);

// Requires alpha > 1/2 and sigma[0] == 0.
std::vector<cplx> ito_modal(double lambda, const ExponentPair& e, std::span<const double> sigma,
                            const NoisePath& path);

// int_0^t (t - tau)^{2(alpha-1)} |E_{alpha,alpha}(i lambda^beta (t - tau)^alpha)|^2 sigma(tau)^2 dtau.
double isometry_variance(double lambda, const ExponentPair& e, const TemporalProfile& sigma, double t);

// sup_{y >= 0} |E_{alpha,alpha}(i y)|^2 / (2 alpha - 1): the constant C in
// sup_t E||u||^2 <= C T0^{2 alpha - 1} (int ||f||^2 + sup ||sigma||^2).
double energy_bound_constant(double alpha);

// Streaming mean and variance per basis column and time node.
struct EnsembleStats {
  std::size_t paths = 0;
  Eigen::MatrixXcd mean;  // columns x nodes
  Eigen::MatrixXd m2;     // sum of |u - mean|^2
  Eigen::MatrixXd variance() const;  // unbiased
  // E||u(t)||^2 = sum_k |mean_k|^2 + m2_k / paths.
  std::vector<double> energy() const;
  void add(const Eigen::MatrixXcd& u);
  void merge(const EnsembleStats& other);
};

struct EnsembleResult {
  EnsembleStats stats;
  Eigen::MatrixXcd deterministic;  // columns x nodes
  std::vector<double> mean_error;  // ||mean(t) - deterministic(t)||_{L^2(M)}
  double max_path_deviation = 0.0;  // max over paths of |u - deterministic| when sigma vanishes
};

// Paths run in fixed chunks reduced by a pairwise tree, so the statistics do not
// depend on the thread count.
EnsembleResult ensemble_solve(const SourceSpec& f, const SourceSpec& sigma, const SampledBasis& basis,
                              const ExponentPair& e, const TimeGrid& grid, const RegionPatch& w1,
                              std::size_t paths, std::uint64_t seed, int threads = 0);

inline constexpr std::size_t kPathChunk = 64;

// Gap between u and the right side of the Riemann-Liouville integral form,
// product trapezoid for the drift and left-point Ito sums for the noise.
std::vector<cplx> integral_equation_residual(std::span<const cplx> u, double lambda, const ExponentPair& e,
                                             std::span<const double> f, std::span<const double> sigma,
                                             const NoisePath& path);

}  // namespace fracinv
