#include "fracinv/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include "fracinv/errors.hpp"
#include "fracinv/parallel.hpp"
#include "fracinv/quadrature.hpp"

namespace fracinv {

namespace {

constexpr cplx kI{0.0, 1.0};

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw OutOfRange("alpha must lie in (0, 1)");
}

template <class T>
void require_zero_start(std::span<const T> f, const char* what) {
  if (!f.empty() && std::abs(f[0]) != 0.0)
    throw NonzeroInitialValue(std::string(what) + " must vanish at t = 0");
}

template <class T>
std::vector<T> l1_caputo(std::span<const T> u, double h, double alpha) {
  require_alpha(alpha);
  if (!(h > 0.0)) throw OutOfRange("time step must be positive");
  require_zero_start(u, "Caputo input");
  const std::size_t n = u.size();
  std::vector<double> b(n);
  for (std::size_t m = 0; m < n; ++m)
    b[m] = std::pow(double(m + 1), 1.0 - alpha) - std::pow(double(m), 1.0 - alpha);
  const double scale = std::pow(h, -alpha) / gamma_fn(2.0 - alpha);
  std::vector<T> d(n, T{});
  for (std::size_t k = 1; k < n; ++k) {
    T acc{};
    for (std::size_t j = 0; j < k; ++j) acc += b[k - 1 - j] * (u[j + 1] - u[j]);
    d[k] = scale * acc;
  }
  return d;
}

// Nonzero index range [lo, hi] of f, or lo > hi when f vanishes.
template <class T>
std::pair<std::size_t, std::size_t> support(std::span<const T> f) {
  std::size_t lo = f.size(), hi = 0;
  for (std::size_t j = 0; j < f.size(); ++j)
    if (std::abs(f[j]) != 0.0) {
      lo = std::min(lo, j);
      hi = j;
    }
  return {lo, hi};
}

template <class T>
std::vector<cplx> convolve_impl(std::span<const cplx> w, std::span<const T> f) {
  require_zero_start(f, "modal source");
  if (w.size() + 1 < f.size()) throw ShapeMismatch("kernel shorter than source");
  std::vector<cplx> u(f.size(), cplx{});
  const auto [lo, hi] = support(f);
  if (lo > hi) return u;
  for (std::size_t n = lo; n < f.size(); ++n) {
    cplx acc{};
    const std::size_t top = std::min(n, hi);
    for (std::size_t j = lo; j <= top; ++j) acc += w[n - j] * f[j];
    u[n] = acc;
  }
  return u;
}

double bump(double T0, double t) {
  if (t <= 0.0 || t >= T0) return 0.0;
  return std::exp(-1.0 / (t * (T0 - t)));
}

// m_k(z) = int_0^1 e^{-z y} y^k dy for k = 0, 1, 2.
std::array<cplx, 3> unit_moments(cplx z) {
  std::array<cplx, 3> m{};
  if (std::abs(z) < 1.0) {
    cplx term = 1.0;  // (-z)^n / n!
    for (int n = 0; n < 30; ++n) {
      for (int k = 0; k < 3; ++k) m[k] += term / double(n + k + 1);
      term *= -z / double(n + 1);
    }
    return m;
  }
  const cplx ez = std::exp(-z);
  m[0] = (1.0 - ez) / z;
  for (int k = 1; k < 3; ++k) m[k] = (double(k) * m[k - 1] - ez) / z;
  return m;
}

// int_0^H e^{-s x} x^k dx.
std::array<cplx, 3> moments(cplx s, double H) {
  auto m = unit_moments(s * H);
  m[0] *= H;
  m[1] *= H * H;
  m[2] *= H * H * H;
  return m;
}

template <class T>
cplx filon_sum(std::span<const T> u, double h, cplx s) {
  const std::size_t n = u.size();
  if (n < 2) return 0.0;
  const std::size_t panels = (n - 1) / 2;
  const auto M2 = moments(s, 2.0 * h);
  cplx ef = 1.0, acc = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const std::size_t j = 2 * p;
    const cplx u0 = u[j], u1 = u[j + 1], u2 = u[j + 2];
    const cplx a = (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * h);
    const cplx b = (u0 - 2.0 * u1 + u2) / (2.0 * h * h);
    acc += ef * (u0 * M2[0] + a * M2[1] + b * M2[2]);
    ef = std::exp(-s * (2.0 * h * double(p + 1)));
  }
  if ((n - 1) % 2 == 1) {
    const std::size_t j = n - 2;
    const auto M1 = moments(s, h);
    const cplx u0 = u[j], u1 = u[j + 1];
    acc += std::exp(-s * h * double(j)) * (u0 * M1[0] + (u1 - u0) / h * M1[1]);
  }
  return acc;
}

}  // namespace

ExponentPair::ExponentPair(double a, double b, bool stochastic) : alpha(a), beta(b) {
  require_alpha(a);
  if (!(b > 0.0 && b < 1.0)) throw OutOfRange("beta must lie in (0, 1)");
  if (stochastic && !(a > 0.5)) throw OutOfRange("stochastic problems need alpha > 1/2");
}

TimeGrid::TimeGrid(double h, std::size_t nodes) : h_(h), nodes_(nodes) {
  if (!(h > 0.0) || !std::isfinite(h)) throw OutOfRange("time step must be positive");
  if (nodes < 2) throw OutOfRange("time grid needs at least two nodes");
}

TimeGrid TimeGrid::from_horizon(double horizon, std::size_t intervals) {
  if (intervals == 0) throw OutOfRange("time grid needs at least one interval");
  return TimeGrid(horizon / double(intervals), intervals + 1);
}

double profile_value(const TemporalProfile& p, double t) {
  if (const auto* g = std::get_if<TriangularPulse>(&p)) {
    const double a = g->t / 3.0;
    if (t <= 0.0 || t >= 2.0 * a) return 0.0;
    return t <= a ? t : 2.0 * a - t;
  }
  if (const auto* b = std::get_if<SmoothBump>(&p)) return bump(b->T0, t);
  throw ValidationError("sampled profiles have no continuous-time value");
}

std::vector<double> sample_profile(const TemporalProfile& p, const TimeGrid& g) {
  if (const auto* s = std::get_if<SampledProfile>(&p)) {
    if (s->values.size() != g.nodes()) throw ShapeMismatch("sampled profile length differs from grid");
    return s->values;
  }
  if (const auto* g3 = std::get_if<TriangularPulse>(&p); g3 && !(g3->t > 0.0))
    throw OutOfRange("pulse parameter must be positive");
  if (const auto* b = std::get_if<SmoothBump>(&p); b && !(b->T0 > 0.0))
    throw OutOfRange("bump support must be positive");
  std::vector<double> f(g.nodes());
  for (std::size_t n = 0; n < f.size(); ++n) f[n] = profile_value(p, g.t(n));
  return f;
}

double profile_support_end(const TemporalProfile& p, const TimeGrid& g) {
  if (const auto* t = std::get_if<TriangularPulse>(&p)) return 2.0 * t->t / 3.0;
  if (const auto* b = std::get_if<SmoothBump>(&p)) return b->T0;
  const auto& v = std::get<SampledProfile>(p).values;
  const auto [lo, hi] = support(std::span<const double>(v));
  return lo > hi ? 0.0 : g.t(std::min(hi + 1, g.nodes() - 1));
}

std::string profile_tag(const TemporalProfile& p) {
  std::ostringstream os;
  os.precision(17);
  if (const auto* t = std::get_if<TriangularPulse>(&p))
    os << "pulse:" << t->t;
  else if (const auto* b = std::get_if<SmoothBump>(&p))
    os << "bump:" << b->T0;
  else
    os << "samples";
  return os.str();
}

void project_mean_zero(std::span<double> xi, const RegionPatch& w1) {
  if (xi.size() != w1.size()) throw ShapeMismatch("xi length differs from W1 node count");
  double mean = 0.0;
  for (std::size_t i = 0; i < xi.size(); ++i) mean += w1.weights()[i] * xi[i];
  mean /= w1.measure();
  for (double& v : xi) v -= mean;
}

std::vector<double> caputo_derivative(std::span<const double> u, double h, double alpha) {
  return l1_caputo(u, h, alpha);
}
std::vector<cplx> caputo_derivative(std::span<const cplx> u, double h, double alpha) {
  return l1_caputo(u, h, alpha);
}

cplx kernel_K(double lambda, const ExponentPair& e, double t) {
  if (!(t > 0.0)) throw OutOfRange("kernel needs t > 0");
  if (lambda < 0.0) throw OutOfRange("eigenvalue must be non-negative");
  const double mu = std::pow(lambda, e.beta);
  const double ta = std::pow(t, e.alpha);
  return -kI * (ta / t) * ml_eval(e.alpha, e.alpha, kI * mu * ta);
}

ModalKernel::ModalKernel(double mu, double alpha, double h, std::size_t n) : mu_(mu) {
  require_alpha(alpha);
  if (!(h > 0.0)) throw OutOfRange("time step must be positive");
  if (mu < 0.0) throw OutOfRange("modal frequency must be non-negative");
  w_.assign(n, cplx{});
  if (n == 0) return;
  const MLParams p2(alpha, alpha + 2.0), p0(alpha, alpha);
  auto psi = [&](double t) -> cplx {
    if (t == 0.0) return 0.0;
    const double ta = std::pow(t, alpha);
    return -kI * ta * t * ml_eval(p2, kI * mu * ta);
  };
  auto kern = [&](double t) -> cplx {
    const double ta = std::pow(t, alpha);
    return -kI * (ta / t) * ml_eval(p0, kI * mu * ta);
  };
  // The oscillating residue part of K decays like exp(Re s* t), s* = mu^{1/alpha} e^{i pi/(2 alpha)};
  // the trapezoid only takes over once it has died out. Past ~1000 steps second differences
  // of the primitive lose too many digits to cancellation.
  std::size_t sw = kSwitch;
  if (mu > 0.0) {
    const double decay = -std::pow(mu, 1.0 / alpha) * std::cos(kPi / (2.0 * alpha)) * h;
    const double steps = decay > 0.0 ? 14.0 / decay : 1e9;
    sw = std::size_t(std::clamp(steps, double(kSwitch), double(kSwitchCap)));
  }
  const std::size_t near = std::min(n, sw);
  std::vector<cplx> P(near + 1);
  for (std::size_t m = 0; m <= near; ++m) P[m] = psi(h * double(m));
  w_[0] = P[1] / h;
  for (std::size_t m = 1; m < near; ++m) w_[m] = (P[m + 1] - 2.0 * P[m] + P[m - 1]) / h;
  if (n > sw) {
    std::vector<cplx> K(n + 2);
    for (std::size_t m = sw - 1; m <= n; ++m) K[m] = kern(h * double(m));
    for (std::size_t m = sw; m < n; ++m)
      w_[m] = h * (K[m] + (K[m + 1] - 2.0 * K[m] + K[m - 1]) / 12.0);
  }
}

std::vector<cplx> ModalKernel::convolve(std::span<const cplx> f) const {
  return convolve_impl(std::span<const cplx>(w_), f);
}
std::vector<cplx> ModalKernel::convolve(std::span<const double> f) const {
  return convolve_impl(std::span<const cplx>(w_), f);
}

std::vector<cplx> solve_modal(double lambda, const ExponentPair& e, std::span<const double> f, double h) {
  if (lambda < 0.0) throw OutOfRange("eigenvalue must be non-negative");
  return ModalKernel(std::pow(lambda, e.beta), e.alpha, h, f.size()).convolve(f);
}

std::vector<cplx> solve_modal(double lambda, const ExponentPair& e, std::span<const cplx> f, double h) {
  if (lambda < 0.0) throw OutOfRange("eigenvalue must be non-negative");
  return ModalKernel(std::pow(lambda, e.beta), e.alpha, h, f.size()).convolve(f);
}

std::vector<cplx> solve_modal_ibp(double lambda, const ExponentPair& e, std::span<const double> f,
                                  double h) {
  if (lambda < 0.0) throw OutOfRange("eigenvalue must be non-negative");
  if (!(h > 0.0)) throw OutOfRange("time step must be positive");
  require_zero_start(f, "modal source");
  const std::size_t n = f.size();
  const double a = e.alpha;
  std::vector<cplx> u(n, cplx{});
  const auto [lo, hi] = support(f);
  if (lo > hi) return u;
  if (lambda == 0.0) {
    // Riemann-Liouville integral of the interpolant: u = -i I^alpha f.
    const double c = std::pow(h, a) / (a * (a + 1.0)) / gamma_fn(a);
    auto p = [&](std::size_t m) { return std::pow(double(m), a + 1.0); };
    for (std::size_t k = lo; k < n; ++k) {
      double acc = 0.0;
      for (std::size_t j = lo; j <= std::min(k, hi); ++j) {
        const std::size_t m = k - j;
        acc += f[j] * (m == 0 ? 1.0 : p(m + 1) - 2.0 * p(m) + p(m - 1));
      }
      u[k] = -kI * c * acc;
    }
    return u;
  }
  const double mu = std::pow(lambda, e.beta);
  const MLParams p2(a, 2.0);
  std::vector<cplx> q(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double s = h * double(m);
    q[m] = m == 0 ? cplx{} : s * ml_eval(p2, kI * mu * std::pow(s, a));
  }
  // Slopes s_j on [t_j, t_{j+1}] are nonzero only for j in [lo - 1, hi].
  const std::size_t jlo = lo - 1, jhi = std::min(hi, n - 2);
  for (std::size_t k = 1; k < n; ++k) {
    cplx acc{};
    for (std::size_t j = jlo; j <= std::min(jhi, k - 1); ++j) {
      const double slope = (f[j + 1] - f[j]) / h;
      acc += slope * (q[k - j] - q[k - j - 1]);
    }
    u[k] = (f[k] - acc) / mu;
  }
  return u;
}

double modal_bound_constant(double alpha) {
  require_alpha(alpha);
  static std::mutex mtx;
  static std::map<double, double> cache;
  {
    std::lock_guard lock(mtx);
    if (auto it = cache.find(alpha); it != cache.end()) return it->second;
  }
  const MLParams p(alpha, 1.0);
  double sup = 1.0;
  for (int k = 0; k <= 400; ++k) {
    const double y = std::pow(10.0, -3.0 + 7.0 * k / 400.0);
    sup = std::max(sup, std::abs(ml_eval(p, kI * y)));
  }
  const double c = 1.0 + sup;
  std::lock_guard lock(mtx);
  cache[alpha] = c;
  return c;
}

TemporalResponses::TemporalResponses(const SpectrumTable& t, const ExponentPair& e, const TimeGrid& g,
                                     std::span<const double> f, int threads)
    : grid_(g), f_(f.begin(), f.end()), alpha_(e.alpha), beta_(e.beta) {
  if (f.size() != g.nodes()) throw ShapeMismatch("profile length differs from grid");
  require_zero_start(f, "temporal profile");
  r_.resize(Eigen::Index(g.nodes()), Eigen::Index(t.entries.size()));
  parallel_for(
      t.entries.size(),
      [&](std::size_t k) {
        const auto u = solve_modal(t.entries[k].lambda, e, f, g.h());
        for (std::size_t n = 0; n < u.size(); ++n) r_(Eigen::Index(n), Eigen::Index(k)) = u[n];
      },
      threads);
}

FieldSolution assemble_field(const TemporalResponses& r, std::span<const double> xi,
                             const SampledBasis& basis, const RegionPatch& w1, const RegionPatch& w2,
                             const FieldOptions& opt) {
  if (xi.size() != w1.size()) throw ShapeMismatch("xi length differs from W1 node count");
  const auto& table = basis.table();
  if (std::size_t(r.values().cols()) != table.entries.size())
    throw ShapeMismatch("responses computed for a different spectrum table");
  const auto& phi = basis.values();
  const std::size_t cols = basis.columns(), ne = table.entries.size();

  // Coefficients c_col = <e(xi), phi_col> and their images on W2 per entry.
  Eigen::VectorXd c = Eigen::VectorXd::Zero(Eigen::Index(cols));
  double xi_norm2 = 0.0;
  for (std::size_t i = 0; i < w1.size(); ++i) {
    const double wx = w1.weights()[i] * xi[i];
    xi_norm2 += wx * xi[i];
    c += wx * phi.row(Eigen::Index(w1.nodes()[i])).transpose();
  }
  Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(Eigen::Index(ne), Eigen::Index(w2.size()));
  std::vector<double> entry_energy(ne, 0.0);
  for (std::size_t col = 0; col < cols; ++col) {
    const std::size_t k = basis.entry_of(col);
    entry_energy[k] += c(Eigen::Index(col)) * c(Eigen::Index(col));
    for (std::size_t j = 0; j < w2.size(); ++j)
      G(Eigen::Index(k), Eigen::Index(j)) +=
          c(Eigen::Index(col)) * phi(Eigen::Index(w2.nodes()[j]), Eigen::Index(col));
  }

  FieldSolution out;
  out.grid = r.grid();
  out.on_w2 = r.values() * G;
  if (opt.store_modal) {
    out.modal.resize(Eigen::Index(cols), Eigen::Index(out.grid.nodes()));
    for (std::size_t col = 0; col < cols; ++col)
      out.modal.row(Eigen::Index(col)) =
          c(Eigen::Index(col)) * r.values().col(Eigen::Index(basis.entry_of(col))).transpose();
  }

  // Energy of e(xi) outside the table bounds the truncated modes by lambda_max^{-beta} each.
  double captured = 0.0;
  for (double v : entry_energy) captured += v;
  const double remainder = std::max(0.0, xi_norm2 - captured);
  double sup_u = 0.0;
  for (Eigen::Index n = 0; n < r.values().rows(); ++n) {
    double s = 0.0;
    for (std::size_t k = 0; k < ne; ++k) s += std::norm(r.values()(n, Eigen::Index(k))) * entry_energy[k];
    sup_u = std::max(sup_u, std::sqrt(s));
  }
  const auto& f = r.profile();
  const double h = out.grid.h();
  double df2 = 0.0;
  double t0 = 0.0;
  for (std::size_t n = 0; n + 1 < f.size(); ++n) {
    const double d = (f[n + 1] - f[n]) / h;
    df2 += d * d * h;
    if (f[n + 1] != 0.0) t0 = out.grid.t(n + 2 < f.size() ? n + 2 : n + 1);
  }
  const double scale = remainder <= 1e-24 * std::max(xi_norm2, 1e-300) ? 0.0 : std::sqrt(remainder);
  if (scale == 0.0) {
    out.tail_estimate = 0.0;
  } else {
    const double denom = std::pow(table.lambda_max, r.beta());
    const double abs_tail = denom > 0.0 ? modal_bound_constant(r.alpha()) * std::sqrt(t0 * df2) * scale / denom
                                        : std::numeric_limits<double>::infinity();
    out.tail_estimate = sup_u > 0.0 ? abs_tail / sup_u : std::numeric_limits<double>::infinity();
  }
  if (out.tail_estimate > opt.tail_tolerance) {
    std::ostringstream os;
    os << "truncation tail estimate " << out.tail_estimate << " exceeds tolerance " << opt.tail_tolerance;
    out.warnings.push_back(os.str());
  }
  return out;
}

FieldSolution solve_field(const SourceSpec& src, const SampledBasis& basis, const ExponentPair& e,
                          const TimeGrid& grid, const RegionPatch& w1, const RegionPatch& w2,
                          const FieldOptions& opt) {
  if (patches_disjoint(basis.manifold(), w1, w2, 0.0) == false)
    throw ValidationError("source and receiver patches overlap");
  const auto f = sample_profile(src.profile, grid);
  const TemporalResponses r(basis.table(), e, grid, f, opt.threads);
  return assemble_field(r, src.xi, basis, w1, w2, opt);
}

cplx power_tail_integral(double q, double T, cplx s) {
  if (!(s.real() > 0.0)) throw OutOfRange("tail integral needs Re s > 0");
  if (!(T > 0.0)) throw OutOfRange("tail integral needs T > 0");
  static const QuadratureRule lag = gauss_laguerre(40);
  const double r = std::abs(s), th = std::arg(s);
  const cplx rot = std::exp(cplx(0.0, -th));
  cplx acc{};
  for (std::size_t i = 0; i < lag.nodes.size(); ++i)
    acc += lag.weights[i] * std::pow(T + lag.nodes[i] / r * rot, -q);
  return std::exp(-s * T) * rot / r * acc;
}

LaplaceValue laplace_transform(std::span<const cplx> series, double h, cplx s, const LaplaceOptions& opt) {
  if (!(s.real() > 0.0)) throw OutOfRange("Laplace transform needs Re s > 0");
  if (!(h > 0.0)) throw OutOfRange("time step must be positive");
  if (series.size() < 3) throw ShapeMismatch("series too short for the transform");
  LaplaceValue out;
  out.value = filon_sum(series, h, s);
  out.tail = 0.0;
  if (!opt.use_tail) {
    out.tail_available = false;
    return out;
  }
  const std::size_t n = series.size();
  const double T = h * double(n - 1);
  const std::size_t width = std::max<std::size_t>(3, std::size_t(opt.tail_window * double(n - 1)));
  const std::size_t first = n - std::min(width, n - 1);
  std::vector<double> lt, lu;
  bool all_zero = true;
  for (std::size_t j = first; j < n; ++j) {
    const double a = std::abs(series[j]);
    if (a > 0.0) {
      all_zero = false;
      lt.push_back(std::log(h * double(j)));
      lu.push_back(std::log(a));
    }
  }
  if (all_zero) return out;
  double q = opt.tail_exponent;
  if (std::isnan(q)) {
    if (lt.size() < 3) {
      out.tail_available = false;
      return out;
    }
    const double mt = std::accumulate(lt.begin(), lt.end(), 0.0) / double(lt.size());
    const double mu = std::accumulate(lu.begin(), lu.end(), 0.0) / double(lu.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lt.size(); ++i) {
      sxy += (lt[i] - mt) * (lu[i] - mu);
      sxx += (lt[i] - mt) * (lt[i] - mt);
    }
    q = -sxy / sxx;
  }
  // c = argmin sum |u_j - c t_j^{-q}|^2 over the window.
  cplx num{};
  double den = 0.0;
  for (std::size_t j = first; j < n; ++j) {
    const double b = std::pow(h * double(j), -q);
    num += series[j] * b;
    den += b * b;
  }
  const cplx c = num / den;
  double res = 0.0, ref = 0.0;
  for (std::size_t j = first; j < n; ++j) {
    res += std::norm(series[j] - c * std::pow(h * double(j), -q));
    ref += std::norm(series[j]);
  }
  out.tail = c * power_tail_integral(q, T, s);
  out.tail_error = std::abs(out.tail) * std::sqrt(res / std::max(ref, 1e-300));
  out.value += out.tail;
  return out;
}

namespace {

// Least-squares fit of sum_q c_q t^{-q} on the last tail_window of the record,
// integrated to infinity; linear in the samples, so it folds into the weights.
void add_tail_weights(std::vector<cplx>& w, double h, cplx s, std::span<const double> q, double tail_window) {
  const std::size_t n = w.size();
  const std::size_t width = std::max<std::size_t>(3 * q.size(), std::size_t(tail_window * double(n - 1)));
  const std::size_t first = n - std::min(width, n - 1);
  const double T = h * double(n - 1);
  const Eigen::Index rows = Eigen::Index(n - first), cols = Eigen::Index(q.size());
  Eigen::MatrixXd A(rows, cols);
  Eigen::VectorXcd g(cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    // Columns scaled to one at t = T.
    for (Eigen::Index r = 0; r < rows; ++r) A(r, c) = std::pow(h * double(first + std::size_t(r)) / T, -q[std::size_t(c)]);
    g(c) = power_tail_integral(q[std::size_t(c)], T, s) * std::pow(T, q[std::size_t(c)]);
  }
  const Eigen::MatrixXd pinv = A.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::VectorXcd t = pinv.transpose().cast<cplx>() * g;
  for (Eigen::Index r = 0; r < rows; ++r) w[first + std::size_t(r)] += t(r);
}

}  // namespace

std::vector<cplx> laplace_weights(std::size_t n, double h, cplx s, double tail_exponent,
                                  double tail_window) {
  if (!(s.real() > 0.0)) throw OutOfRange("Laplace transform needs Re s > 0");
  if (!(h > 0.0)) throw OutOfRange("time step must be positive");
  if (n < 3) throw ShapeMismatch("series too short for the transform");
  std::vector<cplx> w(n, cplx{});
  const auto M2 = moments(s, 2.0 * h);
  const cplx c0 = M2[0] - 1.5 * M2[1] / h + 0.5 * M2[2] / (h * h);
  const cplx c1 = 2.0 * M2[1] / h - M2[2] / (h * h);
  const cplx c2 = -0.5 * M2[1] / h + 0.5 * M2[2] / (h * h);
  for (std::size_t p = 0; p < (n - 1) / 2; ++p) {
    const std::size_t j = 2 * p;
    const cplx ef = std::exp(-s * (h * double(j)));
    w[j] += ef * c0;
    w[j + 1] += ef * c1;
    w[j + 2] += ef * c2;
  }
  if ((n - 1) % 2 == 1) {
    const std::size_t j = n - 2;
    const auto M1 = moments(s, h);
    const cplx ef = std::exp(-s * (h * double(j)));
    w[j] += ef * (M1[0] - M1[1] / h);
    w[j + 1] += ef * M1[1] / h;
  }
  if (std::isnan(tail_exponent)) return w;
  const double q[1] = {tail_exponent};
  add_tail_weights(w, h, s, q, tail_window);
  return w;
}

std::vector<cplx> laplace_weights(std::size_t n, double h, cplx s, std::span<const double> tail_exponents,
                                  double tail_window) {
  auto w = laplace_weights(n, h, s, std::numeric_limits<double>::quiet_NaN(), tail_window);
  if (!tail_exponents.empty()) add_tail_weights(w, h, s, tail_exponents, tail_window);
  return w;
}

cplx laplace_transform_pl(std::span<const double> values, double h, cplx s) {
  if (!(h > 0.0)) throw OutOfRange("time step must be positive");
  const auto M = moments(s, h);
  cplx acc{};
  for (std::size_t j = 0; j + 1 < values.size(); ++j) {
    const double u0 = values[j], u1 = values[j + 1];
    if (u0 == 0.0 && u1 == 0.0) continue;
    acc += std::exp(-s * h * double(j)) * (u0 * M[0] + (u1 - u0) / h * M[1]);
  }
  return acc;
}

}  // namespace fracinv
