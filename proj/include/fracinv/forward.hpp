#pragma once

#include <Eigen/Dense>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fracinv/manifold.hpp"
#include "fracinv/mittag_leffler.hpp"

namespace fracinv {

struct ExponentPair {
  double alpha;
  double beta;
  // `stochastic` additionally requires alpha > 1/2.
  ExponentPair(double alpha, double beta, bool stochastic = false);
};

class TimeGrid {
 public:
  TimeGrid(double h, std::size_t nodes);
  static TimeGrid from_horizon(double horizon, std::size_t intervals);
  double h() const { return h_; }
  std::size_t nodes() const { return nodes_; }
  double horizon() const { return h_ * double(nodes_ - 1); }
  double t(std::size_t n) const { return h_ * double(n); }

 private:
  double h_;
  std::size_t nodes_;
};

// g_t: rises on [0, t/3], falls back to zero on [t/3, 2t/3].
struct TriangularPulse {
  double t;
};
// exp(-1/(t (T0 - t))) on (0, T0).
struct SmoothBump {
  double T0;
};
struct SampledProfile {
  std::vector<double> values;
};
using TemporalProfile = std::variant<TriangularPulse, SmoothBump, SampledProfile>;

double profile_value(const TemporalProfile& p, double t);
std::vector<double> sample_profile(const TemporalProfile& p, const TimeGrid& g);
double profile_support_end(const TemporalProfile& p, const TimeGrid& g);
std::string profile_tag(const TemporalProfile& p);

struct SourceSpec {
  std::vector<double> xi;  // nodal values on W1
  TemporalProfile profile;
};

// xi <- xi - <xi, 1>_{W1} / |W1|, so that <e(xi), 1> = 0.
void project_mean_zero(std::span<double> xi, const RegionPatch& w1);

// --- modal solves ----------------------------------------------------------

std::vector<double> caputo_derivative(std::span<const double> u, double h, double alpha);
std::vector<cplx> caputo_derivative(std::span<const cplx> u, double h, double alpha);

cplx kernel_K(double lambda, const ExponentPair& e, double t);

// Product-integration weights of K against piecewise-linear data on a uniform grid:
// u_n = sum_{j=1..n} w_{n-j} f_j.
class ModalKernel {
 public:
  ModalKernel(double mu, double alpha, double h, std::size_t n);
  std::span<const cplx> weights() const { return w_; }
  std::vector<cplx> convolve(std::span<const cplx> f) const;
  std::vector<cplx> convolve(std::span<const double> f) const;
  // Corrected trapezoid replaces second differences of the primitive somewhere in
  // [kSwitch, kSwitchCap], depending on how fast the oscillating part of K decays.
  static constexpr std::size_t kSwitch = 128;
  static constexpr std::size_t kSwitchCap = 1024;

 private:
  double mu_;
  std::vector<cplx> w_;
};

std::vector<cplx> solve_modal(double lambda, const ExponentPair& e, std::span<const double> f, double h);
std::vector<cplx> solve_modal(double lambda, const ExponentPair& e, std::span<const cplx> f, double h);
// Integration-by-parts route for piecewise-linear f, built on E_{alpha,2} increments.
std::vector<cplx> solve_modal_ibp(double lambda, const ExponentPair& e, std::span<const double> f,
                                  double h);

// 1 + sup_y |E_{alpha,1}(i y)|, the constant in the uniform modal bound.
double modal_bound_constant(double alpha);

// --- field solves ----------------------------------------------------------

struct FieldOptions {
  bool store_modal = true;
  double tail_tolerance = 1e-6;
  int threads = 0;
};

struct FieldSolution {
  TimeGrid grid{1.0, 2};
  Eigen::MatrixXcd modal;  // basis columns x time nodes
  Eigen::MatrixXcd on_w2;  // time nodes x |W2|
  double tail_estimate = 0.0;  // relative to sup_t ||u(t)||
  std::vector<std::string> warnings;
};

// Temporal response r_e(t) = (K_e * f)(t) of every table entry to one profile f;
// shared by all sources that differ only in xi.
class TemporalResponses {
 public:
  TemporalResponses(const SpectrumTable& t, const ExponentPair& e, const TimeGrid& g,
                    std::span<const double> f, int threads = 0);
  const Eigen::MatrixXcd& values() const { return r_; }  // time nodes x entries
  const TimeGrid& grid() const { return grid_; }
  const std::vector<double>& profile() const { return f_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

 private:
  Eigen::MatrixXcd r_;
  TimeGrid grid_;
  std::vector<double> f_;
  double alpha_;
  double beta_;
};

FieldSolution assemble_field(const TemporalResponses& r, std::span<const double> xi,
                             const SampledBasis& basis, const RegionPatch& w1, const RegionPatch& w2,
                             const FieldOptions& opt = {});

FieldSolution solve_field(const SourceSpec& src, const SampledBasis& basis, const ExponentPair& e,
                          const TimeGrid& grid, const RegionPatch& w1, const RegionPatch& w2,
                          const FieldOptions& opt = {});

// --- Laplace transforms ----------------------------------------------------

struct LaplaceOptions {
  // Decay exponent q of the c t^{-q} tail model; estimated from the data when NaN.
  double tail_exponent = std::numeric_limits<double>::quiet_NaN();
  double tail_window = 0.2;  // trailing fraction of the record used for the fit
  bool use_tail = true;
};

struct LaplaceValue {
  cplx value;
  cplx tail;
  double tail_error = 0.0;
  bool tail_available = true;
};

// Piecewise-quadratic Filon quadrature of int_0^T e^{-st} u dt plus a fitted tail.
LaplaceValue laplace_transform(std::span<const cplx> series, double h, cplx s,
                               const LaplaceOptions& opt = {});
// The same transform as a linear functional of the samples when the tail exponent is fixed:
// laplace_transform(u).value == sum_n weights[n] u[n].
std::vector<cplx> laplace_weights(std::size_t n, double h, cplx s, double tail_exponent,
                                  double tail_window = 0.2);
// Tail modelled as a combination of t^{-q} over the given exponents.
std::vector<cplx> laplace_weights(std::size_t n, double h, cplx s, std::span<const double> tail_exponents,
                                  double tail_window = 0.2);
// Exact transform of the piecewise-linear interpolant over [0, T].
cplx laplace_transform_pl(std::span<const double> values, double h, cplx s);
// int_T^inf e^{-st} t^{-q} dt for |arg s| < pi/2.
cplx power_tail_integral(double q, double T, cplx s);

}  // namespace fracinv
