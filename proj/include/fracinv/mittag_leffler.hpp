#pragma once

#include <complex>
#include <iosfwd>
#include <span>
#include <string_view>
#include <utility>

namespace fracinv {

using cplx = std::complex<double>;
inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Lanczos (g = 7, 9 terms) with reflection below Re x = 1/2.
double gamma_fn(double x);
cplx gamma_fn(cplx x);
cplx log_gamma(cplx x);
// 1/Gamma, exactly zero at the poles and finite where Gamma overflows.
double rgamma(double x);

struct MLParams {
  double a;
  double b;
  MLParams(double a, double b);
  // Sector asymptotics need 0 < a < 2.
  void require_asymptotic_order() const;
};

struct SectorSpec {
  double mu;
  SectorSpec(double mu, double a);
  // Centre of the admissible interval (pi a / 2, min(pi, pi a)).
  static SectorSpec midpoint(double a);
  bool contains(cplx z) const;
};

enum class Regime { series, contour, asymptotic };
std::string_view to_string(Regime r);

struct MLOptions {
  double series_radius = 1.0;
  double asymptotic_radius = 50.0;
  int max_series_terms = 200;
  int max_asymptotic_terms = 80;
  double contour_tolerance = 1e-15;
  // When set, evaluations within crossover_band (relative) of a regime
  // boundary are repeated with the neighbouring regime.
  bool check_crossover = false;
  double crossover_band = 0.05;
  double crossover_tolerance = 1e-6;
};

struct MLValue {
  cplx value;
  Regime regime;
  bool accuracy_warning = false;
};

MLValue ml_evaluate(const MLParams& p, cplx z, const MLOptions& opt = {});
cplx ml_eval(const MLParams& p, cplx z);
inline cplx ml_eval(double a, double b, cplx z) { return ml_eval(MLParams(a, b), z); }

// Single-regime evaluators; callers own the choice of regime.
cplx ml_series(const MLParams& p, cplx z, int max_terms = 200);
cplx ml_contour(const MLParams& p, cplx z, double tolerance = 1e-15);

struct AsymptoticValue {
  cplx value;
  double error_estimate;
  int terms;
};
AsymptoticValue ml_asymptotic(const MLParams& p, cplx z, int max_terms = 80);

// -z^{-1} / Gamma(1 - a); requires z in the sector and |z| >= min_modulus.
cplx ml_asymptotic_leading(double a, cplx z, const SectorSpec& sector, double min_modulus = 1.0);

// (d/dz E_{a,1}(-xi z^a), -xi z^{a-1} E_{a,a}(-xi z^a)) for Re z > 0.
std::pair<cplx, cplx> ml_derivative_pair(cplx xi, double a, cplx z);

// CSV rows: a,b,re_z,im_z,re_E,im_E,regime
void write_ml_table(std::ostream& os, std::span<const MLParams> params, std::span<const cplx> zs,
                    const MLOptions& opt = {});

}  // namespace fracinv
