#include "fracinv/mittag_leffler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "fracinv/errors.hpp"

namespace fracinv {

namespace {

constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
constexpr double kLanczosG = 7.0;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * kPi);
const double kLogMachineEps = std::log(std::numeric_limits<double>::epsilon());

bool is_nonpositive_integer(double x) { return x <= 0.0 && x == std::floor(x); }

// log Gamma(x) for Re x >= 1/2.
template <class T>
T lanczos_log(T x) {
  x -= 1.0;
  T acc = kLanczos[0];
  for (int i = 1; i < 9; ++i) acc += kLanczos[i] / (x + double(i));
  const T t = x + kLanczosG + 0.5;
  return kHalfLog2Pi + (x + 0.5) * std::log(t) - t + std::log(acc);
}

}  // namespace

double gamma_fn(double x) {
  if (is_nonpositive_integer(x)) throw GammaPoleError("Gamma has a pole at " + std::to_string(x));
  if (x < 0.5) return kPi / (std::sin(kPi * x) * gamma_fn(1.0 - x));
  return std::exp(lanczos_log(x));
}

cplx gamma_fn(cplx x) {
  if (x.imag() == 0.0) return gamma_fn(x.real());
  if (x.real() < 0.5) return kPi / (std::sin(kPi * x) * gamma_fn(1.0 - x));
  return std::exp(lanczos_log(x));
}

cplx log_gamma(cplx x) {
  if (x.imag() == 0.0 && is_nonpositive_integer(x.real()))
    throw GammaPoleError("log Gamma has a pole at " + std::to_string(x.real()));
  if (x.real() < 0.5) return std::log(kPi) - std::log(std::sin(kPi * x)) - log_gamma(1.0 - x);
  return lanczos_log(x);
}

double rgamma(double x) {
  if (is_nonpositive_integer(x)) return 0.0;
  if (x == std::floor(x) && x <= 21.0) {
    double f = 1.0;
    for (int k = 2; k < int(x); ++k) f *= k;
    return 1.0 / f;
  }
  if (x < 0.5) return std::sin(kPi * x) * std::exp(lanczos_log(1.0 - x)) / kPi;
  return std::exp(-lanczos_log(x));
}

// ---------------------------------------------------------------------------

MLParams::MLParams(double a_, double b_) : a(a_), b(b_) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw ValidationError("Mittag-Leffler orders must satisfy a > 0, b > 0");
}

void MLParams::require_asymptotic_order() const {
  if (!(a < 2.0)) throw ValidationError("sector asymptotics need 0 < a < 2");
}

SectorSpec::SectorSpec(double mu_, double a) : mu(mu_) {
  const double lo = kPi * a / 2.0;
  const double hi = std::min(kPi, kPi * a);
  if (!(mu > lo && mu < hi)) throw SectorViolation("sector angle outside (pi a/2, min(pi, pi a))");
}

SectorSpec SectorSpec::midpoint(double a) {
  return SectorSpec(0.5 * (kPi * a / 2.0 + std::min(kPi, kPi * a)), a);
}

bool SectorSpec::contains(cplx z) const { return std::abs(std::arg(z)) >= mu; }

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::series: return "series";
    case Regime::contour: return "contour";
    case Regime::asymptotic: return "asymptotic";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

cplx ml_series(const MLParams& p, cplx z, int max_terms) {
  cplx sum = rgamma(p.b);
  cplx zk = 1.0;
  for (int k = 1; k < max_terms; ++k) {
    zk *= z;
    const cplx term = zk * rgamma(k * p.a + p.b);
    sum += term;
    // Gamma is not monotone below its minimum near 1.46, so only stop past it.
    if (k * p.a + p.b > 2.0 && std::abs(term) < 1e-16 * std::abs(sum)) break;
  }
  return sum;
}

namespace {

struct ContourParams {
  double mu = 0.0;
  double h = 0.0;
  double n = std::numeric_limits<double>::infinity();
};

// Optimal parabolic contour between two singularities (bounded region).
ContourParams optimal_bounded(double t, double phi_j, double phi_j1, double pj, double qj,
                              double log_epsilon) {
  constexpr double fac = 1.01;
  const double f_max = std::exp(log_epsilon - kLogMachineEps);
  const double sq_j = std::sqrt(phi_j);
  const double threshold = 2.0 * std::sqrt((log_epsilon - kLogMachineEps) / t);
  const double sq_j1 = std::min(std::sqrt(phi_j1), threshold - sq_j);

  double sq_bar_j = 0.0, sq_bar_j1 = 0.0, f_bar = 1.0;
  bool admissible = false;
  if (pj < 1e-14 && qj < 1e-14) {
    sq_bar_j = sq_j;
    sq_bar_j1 = sq_j1;
    admissible = true;
  } else if (pj < 1e-14) {
    sq_bar_j = sq_j;
    const double f_min = sq_j > 0.0 ? fac * std::pow(sq_j / (sq_j1 - sq_j), qj) : fac;
    if (f_min < f_max) {
      f_bar = f_min + f_min / f_max * (f_max - f_min);
      const double fq = std::pow(f_bar, -1.0 / qj);
      sq_bar_j1 = (2.0 * sq_j1 - fq * sq_j) / (2.0 + fq);
      admissible = true;
    }
  } else if (qj < 1e-14) {
    sq_bar_j1 = sq_j1;
    const double f_min = fac * std::pow(sq_j1 / (sq_j1 - sq_j), pj);
    if (f_min < f_max) {
      f_bar = f_min + f_min / f_max * (f_max - f_min);
      const double fp = std::pow(f_bar, -1.0 / pj);
      sq_bar_j = (2.0 * sq_j + fp * sq_j1) / (2.0 - fp);
      admissible = true;
    }
  } else {
    double f_min = fac * (sq_j + sq_j1) / std::pow(sq_j1 - sq_j, std::max(pj, qj));
    if (f_min < f_max) {
      f_min = std::max(f_min, 1.5);
      f_bar = f_min + f_min / f_max * (f_max - f_min);
      const double fp = std::pow(f_bar, -1.0 / pj);
      const double fq = std::pow(f_bar, -1.0 / qj);
      const double w = -phi_j1 * t / log_epsilon;
      const double den = 2.0 + w - (1.0 + w) * fp + fq;
      sq_bar_j = ((2.0 + w + fq) * sq_j + fp * sq_j1) / den;
      sq_bar_j1 = (-(1.0 + w) * fq * sq_j + (2.0 + w - (1.0 + w) * fp) * sq_j1) / den;
      admissible = true;
    }
  }
  ContourParams out;
  if (!admissible) return out;
  const double log_eps_bar = log_epsilon - std::log(f_bar);
  const double w = -sq_bar_j1 * sq_bar_j1 * t / log_eps_bar;
  const double root = ((1.0 + w) * sq_bar_j + sq_bar_j1) / (2.0 + w);
  out.mu = root * root;
  out.h = -2.0 * kPi / log_eps_bar * (sq_bar_j1 - sq_bar_j) / ((1.0 + w) * sq_bar_j + sq_bar_j1);
  out.n = std::ceil(std::sqrt(1.0 - log_eps_bar / t / out.mu) / out.h);
  if (!(out.h > 0.0) || !std::isfinite(out.n)) out = ContourParams{};
  return out;
}

// Optimal parabolic contour to the right of the last singularity.
ContourParams optimal_unbounded(double t, double phi_j, double pj, double log_epsilon) {
  const double sq_j = std::sqrt(phi_j);
  double phi_bar = phi_j > 0.0 ? phi_j * 1.01 : 0.01;
  double sq_bar = std::sqrt(phi_bar);
  constexpr double f_min = 1.0, f_max = 10.0, f_tar = 5.0;

  double n = 0.0, A = 0.0, sq_mu = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    const double phi_t = phi_bar * t;
    const double lept = log_epsilon / phi_t;
    n = std::ceil(phi_t / kPi * (1.0 - 1.5 * lept + std::sqrt(1.0 - 2.0 * lept)));
    A = kPi * n / phi_t;
    sq_mu = sq_bar * std::abs(4.0 - A) / std::abs(7.0 - std::sqrt(1.0 + 12.0 * A));
    const double f_bar = std::pow((sq_bar - sq_j) / sq_mu, -pj);
    if (pj < 1e-14 || (f_min < f_bar && f_bar < f_max)) break;
    sq_bar = std::pow(f_tar, -1.0 / pj) * sq_mu + sq_j;
    phi_bar = sq_bar * sq_bar;
  }
  ContourParams out;
  out.mu = sq_mu * sq_mu;
  out.h = (-3.0 * A - 2.0 + 2.0 * std::sqrt(1.0 + 12.0 * A)) / (4.0 - A) / n;
  out.n = n;

  const double threshold = (log_epsilon - kLogMachineEps) / t;
  if (out.mu > threshold) {
    const double Q = std::abs(pj) < 1e-14 ? 0.0 : std::pow(f_tar, -1.0 / pj) * std::sqrt(out.mu);
    const double pb = (Q + sq_j) * (Q + sq_j);
    if (pb < threshold) {
      const double w = std::sqrt(kLogMachineEps / (kLogMachineEps - log_epsilon));
      const double u = std::sqrt(-pb * t / kLogMachineEps);
      out.mu = threshold;
      out.n = std::ceil(w * log_epsilon / 2.0 / kPi / (u * w - 1.0));
      out.h = w / out.n;
    } else {
      out = ContourParams{};
    }
  }
  return out;
}

}  // namespace

cplx ml_contour(const MLParams& p, cplx z, double tolerance) {
  if (std::abs(z) < 1e-15) return rgamma(p.b);
  const double a = p.a, b = p.b;
  const double theta = std::arg(z);
  const double rz = std::pow(std::abs(z), 1.0 / a);
  const int kmin = int(std::ceil(-a / 2.0 - theta / (2.0 * kPi)));
  const int kmax = int(std::floor(a / 2.0 - theta / (2.0 * kPi)));

  // Singularities of s^{a-b}/(s^a - z), sorted by the parabola level (Re s + |s|)/2.
  std::vector<std::pair<double, cplx>> poles;
  for (int k = kmin; k <= kmax; ++k) {
    const cplx s = std::polar(rz, (theta + 2.0 * kPi * k) / a);
    const double phi = 0.5 * (s.real() + std::abs(s));
    if (phi > 1e-15) poles.emplace_back(phi, s);
  }
  std::sort(poles.begin(), poles.end(),
            [](const auto& l, const auto& r) { return l.first < r.first; });

  std::vector<double> phi{0.0};
  std::vector<cplx> sing{0.0};
  for (const auto& [ph, s] : poles) {
    phi.push_back(ph);
    sing.push_back(s);
  }
  const size_t n_sing = sing.size();
  std::vector<double> pstr(n_sing, 1.0), qstr(n_sing, 1.0);
  pstr[0] = std::max(0.0, -2.0 * (a - b + 1.0));
  qstr[n_sing - 1] = std::numeric_limits<double>::infinity();
  phi.push_back(std::numeric_limits<double>::infinity());

  constexpr double t = 1.0;
  double log_epsilon = std::log(tolerance);
  std::vector<size_t> regions;
  for (size_t j = 0; j < n_sing; ++j)
    if (phi[j] < (log_epsilon - kLogMachineEps) / t && phi[j] < phi[j + 1]) regions.push_back(j);
  if (regions.empty()) throw NumericalError("Mittag-Leffler contour: no admissible region");

  std::vector<ContourParams> cand(n_sing);
  size_t best = regions.front();
  for (int attempt = 0; attempt < 12; ++attempt) {
    for (size_t j : regions) {
      cand[j] = j + 1 < n_sing
                    ? optimal_bounded(t, phi[j], phi[j + 1], pstr[j], qstr[j], log_epsilon)
                    : optimal_unbounded(t, phi[j], pstr[j], log_epsilon);
    }
    best = regions.front();
    for (size_t j : regions)
      if (cand[j].n < cand[best].n) best = j;
    if (cand[best].n <= 200.0) break;
    log_epsilon += std::log(10.0);
  }
  const ContourParams& cp = cand[best];
  if (!std::isfinite(cp.n)) throw NumericalError("Mittag-Leffler contour: parameter search failed");

  const long N = long(cp.n);
  cplx integral = 0.0;
  for (long k = -N; k <= N; ++k) {
    const double u = cp.h * double(k);
    const cplx iu1(1.0, u);
    const cplx s = cp.mu * iu1 * iu1;
    const cplx ds(-2.0 * cp.mu * u, 2.0 * cp.mu);
    const cplx F = std::pow(s, a - b) / (std::pow(s, a) - z) * ds;
    integral += std::exp(s * t) * F;
  }
  integral *= cp.h / (2.0 * kPi * cplx(0.0, 1.0));

  cplx residues = 0.0;
  for (size_t j = best + 1; j < n_sing; ++j)
    residues += std::pow(sing[j], 1.0 - b) * std::exp(t * sing[j]) / a;

  cplx E = integral + residues;
  if (z.imag() == 0.0) E = E.real();
  return E;
}

AsymptoticValue ml_asymptotic(const MLParams& p, cplx z, int max_terms) {
  p.require_asymptotic_order();
  const double a = p.a, b = p.b;
  const double theta = std::arg(z);
  const double rz = std::pow(std::abs(z), 1.0 / a);
  const int kmin = int(std::ceil(-a / 2.0 - theta / (2.0 * kPi)));
  const int kmax = int(std::floor(a / 2.0 - theta / (2.0 * kPi)));

  cplx expo = 0.0;
  for (int k = kmin; k <= kmax; ++k) {
    const cplx s = std::polar(rz, (theta + 2.0 * kPi * k) / a);
    expo += std::pow(s, 1.0 - b) * std::exp(s) / a;
  }

  // Algebraic tail, truncated where the terms stop decreasing.
  const cplx zinv = 1.0 / z;
  cplx zj = 1.0, alg = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  double err = -1.0;
  int used = 0;
  for (int j = 1; j <= max_terms + 3; ++j) {
    zj *= zinv;
    const double rg = rgamma(b - a * j);
    if (rg == 0.0) continue;
    const double mag = std::abs(zj) * std::abs(rg);
    if (j > max_terms || mag > prev) {
      err = mag;
      break;
    }
    alg -= zj * rg;
    prev = mag;
    used = j;
    if (mag <= 1e-17 * std::abs(expo + alg)) {
      err = mag;
      break;
    }
  }
  if (err < 0.0) err = prev == std::numeric_limits<double>::infinity() ? 0.0 : prev;
  return {expo + alg, err, used};
}

MLValue ml_evaluate(const MLParams& p, cplx z, const MLOptions& opt) {
  const double r = std::abs(z);
  MLValue out{};
  auto asym_or_contour = [&](MLValue& v) {
    if (p.a < 2.0) {
      const auto as = ml_asymptotic(p, z, opt.max_asymptotic_terms);
      if (as.error_estimate <= 1e-14 * std::abs(as.value) && std::isfinite(std::abs(as.value))) {
        v.value = as.value;
        v.regime = Regime::asymptotic;
        return;
      }
    }
    v.value = ml_contour(p, z, opt.contour_tolerance);
    v.regime = Regime::contour;
  };

  if (r <= opt.series_radius) {
    out.value = ml_series(p, z, opt.max_series_terms);
    out.regime = Regime::series;
  } else if (r >= opt.asymptotic_radius) {
    asym_or_contour(out);
  } else {
    out.value = ml_contour(p, z, opt.contour_tolerance);
    out.regime = Regime::contour;
  }

  if (opt.check_crossover) {
    auto disagree = [&](cplx u, cplx v) {
      return std::abs(u - v) > opt.crossover_tolerance * std::max(std::abs(u), 1e-300);
    };
    if (std::abs(r - opt.series_radius) <= opt.crossover_band * opt.series_radius) {
      const cplx s = ml_series(p, z, opt.max_series_terms);
      const cplx c = ml_contour(p, z, opt.contour_tolerance);
      out.accuracy_warning = out.accuracy_warning || disagree(s, c);
    }
    if (p.a < 2.0 && std::abs(r - opt.asymptotic_radius) <= opt.crossover_band * opt.asymptotic_radius) {
      const cplx s = ml_asymptotic(p, z, opt.max_asymptotic_terms).value;
      const cplx c = ml_contour(p, z, opt.contour_tolerance);
      out.accuracy_warning = out.accuracy_warning || disagree(s, c);
    }
  }
  return out;
}

cplx ml_eval(const MLParams& p, cplx z) { return ml_evaluate(p, z).value; }

cplx ml_asymptotic_leading(double a, cplx z, const SectorSpec& sector, double min_modulus) {
  MLParams(a, 1.0).require_asymptotic_order();
  if (!sector.contains(z)) throw SectorViolation("argument outside the asymptotic sector");
  if (std::abs(z) < min_modulus) throw SectorViolation("argument below the asymptotic threshold");
  return -1.0 / z * rgamma(1.0 - a);
}

std::pair<cplx, cplx> ml_derivative_pair(cplx xi, double a, cplx z) {
  if (!(z.real() > 0.0)) throw ValidationError("derivative pair needs Re z > 0");
  const MLParams p1(a, 1.0), pa(a, a);
  const cplx za = std::pow(z, a);
  const cplx x = -xi * za;
  const cplx closed = -xi * std::pow(z, a - 1.0) * ml_eval(pa, x);
  if (xi == 0.0) return {0.0, closed};

  cplx deriv = 0.0;
  if (std::abs(x) <= 1.0) {
    // d/dz sum_k x^k / Gamma(ak+1) term by term: (1/z) sum_{k>=1} ak x^k / Gamma(ak+1).
    cplx xk = 1.0;
    for (int k = 1; k < 200; ++k) {
      xk *= x;
      const cplx term = xk * (a * k) * rgamma(a * k + 1.0);
      deriv += term;
      if (a * k > 2.0 && std::abs(term) < 1e-17 * std::abs(deriv)) break;
    }
    deriv /= z;
  } else {
    // Cauchy integral on a circle clear of the branch cut, shrunk to the growth scale of G.
    const double kappa = std::pow(std::abs(xi), 1.0 / a);
    const double rad = std::min(0.5 * std::abs(z), 1.0 / kappa);
    constexpr int M = 64;
    for (int m = 0; m < M; ++m) {
      const cplx e = std::polar(1.0, 2.0 * kPi * m / M);
      deriv += ml_eval(p1, -xi * std::pow(z + rad * e, a)) / e;
    }
    deriv /= double(M) * rad;
  }
  return {deriv, closed};
}

void write_ml_table(std::ostream& os, std::span<const MLParams> params, std::span<const cplx> zs,
                    const MLOptions& opt) {
  os << "a,b,re_z,im_z,re_E,im_E,regime\n";
  os.precision(17);
  for (const auto& p : params)
    for (const cplx z : zs) {
      const MLValue v = ml_evaluate(p, z, opt);
      os << p.a << ',' << p.b << ',' << z.real() << ',' << z.imag() << ',' << v.value.real() << ','
         << v.value.imag() << ',' << to_string(v.regime) << '\n';
    }
}

}  // namespace fracinv
