#include "fracinv/stochastic.hpp"

#include <cmath>

#include "fracinv/errors.hpp"
#include "fracinv/parallel.hpp"
#include "fracinv/quadrature.hpp"

namespace fracinv {

namespace {

constexpr cplx kI{0.0, 1.0};

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = std::uint64_t(a) * b;
  hi = std::uint32_t(p >> 32);
  lo = std::uint32_t(p);
}

inline double unit_open(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t v = (std::uint64_t(hi) << 32 | lo) >> 11;
  return (double(v) + 0.5) * 0x1.0p-53;
}

void require_stochastic_order(const ExponentPair& e) {
  if (!(e.alpha > 0.5)) throw OrderViolation("stochastic problems need alpha > 1/2");
}

}  // namespace

std::vector<double> patch_coefficients(const SampledBasis& b, const RegionPatch& w1, std::span<const double> xi) {
  if (xi.size() != w1.size()) throw ShapeMismatch("xi length differs from |W1|");
  std::vector<double> c(b.columns(), 0.0);
  for (std::size_t col = 0; col < b.columns(); ++col)
    for (std::size_t i = 0; i < w1.size(); ++i)
      c[col] += w1.weights()[i] * xi[i] * b.values()(Eigen::Index(w1.nodes()[i]), Eigen::Index(col));
  return c;
}

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key[0] += W0;
      key[1] += W1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(M0, ctr[0], hi0, lo0);
    mulhilo(M1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

double NormalStream::operator()(std::uint64_t index) const {
  double out[2];
  fill(index & ~std::uint64_t(1), out);
  return out[index & 1];
}

void NormalStream::fill(std::uint64_t first, std::span<double> out) const {
  const Philox4x32::Key key{std::uint32_t(seed_), std::uint32_t(seed_ >> 32)};
  std::size_t i = 0;
  std::uint64_t idx = first;
  while (i < out.size()) {
    const std::uint64_t blk = idx >> 1;
    const auto x = Philox4x32::block(
        {std::uint32_t(blk), std::uint32_t(blk >> 32), std::uint32_t(stream_), std::uint32_t(stream_ >> 32)}, key);
    // Box-Muller on two 53-bit uniforms.
    const double u1 = unit_open(x[0], x[1]), u2 = unit_open(x[2], x[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double z[2] = {r * std::cos(2.0 * kPi * u2), r * std::sin(2.0 * kPi * u2)};
    for (std::uint64_t k = idx & 1; k < 2 && i < out.size(); ++k, ++idx) out[i++] = z[k];
  }
}

NoisePath sample_brownian(const TimeGrid& g, std::uint64_t seed, std::uint64_t path) {
  NoisePath p{seed, path, g.h(), std::vector<double>(g.nodes() - 1)};
  NormalStream(seed, path).fill(0, p.dB);
  const double s = std::sqrt(g.h());
  for (auto& x : p.dB) x *= s;
  return p;
}

std::vector<cplx> ito_weights(double lambda, const ExponentPair& e, double h, std::size_t n) {
  require_stochastic_order(e);
  std::vector<cplx> c(n, 0.0);
  if (n < 2) return c;
  const double mu = std::pow(lambda, e.beta);
  c[1] = -kI * std::pow(h, e.alpha - 1.0) / e.alpha * ml_eval(e.alpha, e.alpha, kI * mu * std::pow(h, e.alpha));
  for (std::size_t m = 2; m < n; ++m) c[m] = kernel_K(lambda, e, h * double(m));
  return c;
}

std::vector<cplx> ito_modal(double lambda, const ExponentPair& e, std::span<const double> sigma,
                            const NoisePath& path) {
  require_stochastic_order(e);
  const std::size_t n = path.dB.size() + 1;
  if (sigma.size() != n) throw ShapeMismatch("sigma length differs from the path grid");
  if (sigma[0] != 0.0) throw NonzeroInitialValue("sigma must vanish at t = 0");
  const auto c = ito_weights(lambda, e, path.h, n);
  std::vector<double> g(n - 1);
  for (std::size_t j = 0; j + 1 < n; ++j) g[j] = sigma[j] * path.dB[j];
  std::vector<cplx> u(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    cplx acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) acc += c[k - j] * g[j];
    u[k] = acc;
  }
  return u;
}

double isometry_variance(double lambda, const ExponentPair& e, const TemporalProfile& sigma, double t) {
  require_stochastic_order(e);
  if (!(t > 0.0)) return 0.0;
  // v = s^{2 alpha - 1} absorbs the integrable singularity at s = t - tau = 0.
  const double p = 2.0 * e.alpha - 1.0, mu = std::pow(lambda, e.beta);
  const double V = std::pow(t, p);
  const auto gl = gauss_legendre(20);
  constexpr int panels = 400;
  double acc = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double a = V * k / panels, b = V * (k + 1) / panels;
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      const double v = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[q];
      const double s = std::pow(v, 1.0 / p);
      const double sg = profile_value(sigma, t - s);
      const double E = std::abs(ml_eval(e.alpha, e.alpha, kI * mu * std::pow(s, e.alpha)));
      acc += 0.5 * (b - a) * gl.weights[q] * E * E * sg * sg;
    }
  }
  return acc / p;
}

double energy_bound_constant(double alpha) {
  if (!(alpha > 0.5 && alpha < 1.0)) throw OrderViolation("energy bound needs 1/2 < alpha < 1");
  double sup = rgamma(alpha);
  for (int k = 0; k <= 2000; ++k) {
    const double y = 1e-3 * std::pow(1e7, k / 2000.0);
    sup = std::max(sup, std::abs(ml_eval(alpha, alpha, cplx(0.0, y))));
  }
  return sup * sup / (2.0 * alpha - 1.0);
}

Eigen::MatrixXd EnsembleStats::variance() const {
  if (paths < 2) return Eigen::MatrixXd::Zero(m2.rows(), m2.cols());
  return m2 / double(paths - 1);
}

std::vector<double> EnsembleStats::energy() const {
  std::vector<double> out(std::size_t(mean.cols()), 0.0);
  if (paths == 0) return out;
  for (Eigen::Index n = 0; n < mean.cols(); ++n)
    out[std::size_t(n)] = mean.col(n).squaredNorm() + m2.col(n).sum() / double(paths);
  return out;
}

void EnsembleStats::add(const Eigen::MatrixXcd& u) {
  if (paths == 0) {
    mean = Eigen::MatrixXcd::Zero(u.rows(), u.cols());
    m2 = Eigen::MatrixXd::Zero(u.rows(), u.cols());
  }
  ++paths;
  const Eigen::MatrixXcd d = u - mean;
  mean += d / double(paths);
  m2 += (d.array() * (u - mean).array().conjugate()).real().matrix();
}

void EnsembleStats::merge(const EnsembleStats& o) {
  if (o.paths == 0) return;
  if (paths == 0) {
    *this = o;
    return;
  }
  const double na = double(paths), nb = double(o.paths), n = na + nb;
  const Eigen::MatrixXcd d = o.mean - mean;
  mean += d * (nb / n);
  m2 += o.m2 + d.cwiseAbs2() * (na * nb / n);
  paths += o.paths;
}

EnsembleResult ensemble_solve(const SourceSpec& f, const SourceSpec& sigma, const SampledBasis& basis,
                              const ExponentPair& e, const TimeGrid& grid, const RegionPatch& w1,
                              std::size_t paths, std::uint64_t seed, int threads) {
  require_stochastic_order(e);
  if (paths == 0) throw ValidationError("ensemble needs at least one path");
  const auto& table = basis.table();
  const auto cf = patch_coefficients(basis, w1, f.xi), cs = patch_coefficients(basis, w1, sigma.xi);
  const auto a = sample_profile(f.profile, grid), s = sample_profile(sigma.profile, grid);
  if (s[0] != 0.0) throw NonzeroInitialValue("sigma must vanish at t = 0");
  const Eigen::Index cols = Eigen::Index(basis.columns()), n = Eigen::Index(grid.nodes());

  EnsembleResult out;
  out.deterministic = Eigen::MatrixXcd::Zero(cols, n);
  std::vector<std::vector<cplx>> weights(table.entries.size());
  for (std::size_t k = 0; k < table.entries.size(); ++k) {
    const auto ud = solve_modal(table.entries[k].lambda, e, a, grid.h());
    for (Eigen::Index col = 0; col < cols; ++col)
      if (basis.entry_of(std::size_t(col)) == k)
        for (Eigen::Index t = 0; t < n; ++t) out.deterministic(col, t) = cf[std::size_t(col)] * ud[std::size_t(t)];
    weights[k] = ito_weights(table.entries[k].lambda, e, grid.h(), grid.nodes());
  }

  const std::size_t chunks = (paths + kPathChunk - 1) / kPathChunk;
  std::vector<EnsembleStats> part(chunks);
  std::vector<double> dev(chunks, 0.0);
  parallel_for(
      chunks,
      [&](std::size_t c) {
        Eigen::MatrixXcd u(cols, n);
        std::vector<cplx> conv(static_cast<std::size_t>(n));
        std::vector<double> g(std::size_t(n - 1));
        for (std::size_t p = c * kPathChunk; p < std::min(paths, (c + 1) * kPathChunk); ++p) {
          const NoisePath path = sample_brownian(grid, seed, p);
          for (std::size_t j = 0; j < g.size(); ++j) g[j] = s[j] * path.dB[j];
          u = out.deterministic;
          for (std::size_t k = 0; k < table.entries.size(); ++k) {
            const auto& w = weights[k];
            conv[0] = 0.0;
            for (std::size_t t = 1; t < std::size_t(n); ++t) {
              cplx acc = 0.0;
              for (std::size_t j = 0; j < t; ++j) acc += w[t - j] * g[j];
              conv[t] = acc;
            }
            for (Eigen::Index col = 0; col < cols; ++col)
              if (basis.entry_of(std::size_t(col)) == k && cs[std::size_t(col)] != 0.0)
                for (Eigen::Index t = 0; t < n; ++t) u(col, t) += cs[std::size_t(col)] * conv[std::size_t(t)];
          }
          dev[c] = std::max(dev[c], (u - out.deterministic).cwiseAbs().maxCoeff());
          part[c].add(u);
        }
      },
      threads);
  // Pairwise tree over chunk statistics.
  for (std::size_t stride = 1; stride < chunks; stride *= 2)
    for (std::size_t i = 0; i + stride < chunks; i += 2 * stride) part[i].merge(part[i + stride]);
  out.stats = std::move(part[0]);
  for (double d : dev) out.max_path_deviation = std::max(out.max_path_deviation, d);
  for (Eigen::Index t = 0; t < n; ++t)
    out.mean_error.push_back((out.stats.mean.col(t) - out.deterministic.col(t)).norm());
  return out;
}

std::vector<cplx> integral_equation_residual(std::span<const cplx> u, double lambda, const ExponentPair& e,
                                             std::span<const double> f, std::span<const double> sigma,
                                             const NoisePath& path) {
  const std::size_t n = u.size();
  if (f.size() != n || sigma.size() != n || path.dB.size() + 1 != n)
    throw ShapeMismatch("residual inputs disagree in length");
  const double a = e.alpha, h = path.h, mu = std::pow(lambda, e.beta);
  std::vector<cplx> g(n);
  for (std::size_t j = 0; j < n; ++j) g[j] = kI * mu * u[j] - kI * f[j];
  // Product trapezoid for (1/Gamma(a)) int (t - tau)^{a-1} g dtau.
  std::vector<double> p(n + 1);
  for (std::size_t m = 0; m <= n; ++m) p[m] = std::pow(double(m), a + 1.0);
  const double cd = std::pow(h, a) * rgamma(a + 2.0);
  std::vector<double> kappa(n, 0.0);
  if (n > 1) kappa[1] = std::pow(h, a - 1.0) / a;
  for (std::size_t m = 2; m < n; ++m) kappa[m] = std::pow(h * double(m), a - 1.0);
  std::vector<cplx> r(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    const double kk = double(k);
    cplx drift = (p[k - 1] - (kk - 1.0 - a) * std::pow(kk, a)) * g[0] + g[k];
    for (std::size_t j = 1; j < k; ++j) drift += (p[k - j + 1] - 2.0 * p[k - j] + p[k - j - 1]) * g[j];
    cplx noise = 0.0;
    for (std::size_t j = 0; j < k; ++j) noise += kappa[k - j] * sigma[j] * path.dB[j];
    r[k] = u[k] - cd * drift - rgamma(a) * (-kI) * noise;
  }
  return r;
}

}  // namespace fracinv
