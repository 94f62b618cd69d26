#include "fracinv/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

#include "fracinv/errors.hpp"
#include "fracinv/forward.hpp"
#include "fracinv/parallel.hpp"

namespace fracinv {

namespace {

constexpr cplx kI{0.0, 1.0};

struct Patches {
  ModelManifold m;
  RegionPatch w1, w2;
};

Patches rebuild(const MeasurementSet& ms) {
  Patches p{ms.manifold.build(), {}, {}};
  p.w1 = RegionPatch::from_box(p.m, ms.w1);
  p.w2 = RegionPatch::from_box(p.m, ms.w2);
  return p;
}

double weighted_norm(const RegionPatch& w, const Eigen::RowVectorXcd& v) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < v.size(); ++j) s += w.weights()[std::size_t(j)] * std::norm(v(j));
  return std::sqrt(s);
}

// Indices of local maxima standing out by `prominence` over the higher of the
// two valleys separating them from taller neighbours (or the window edge).
std::vector<std::size_t> find_peaks(const std::vector<double>& g, double prominence) {
  std::vector<std::size_t> out;
  const std::size_t n = g.size();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(g[i] > g[i - 1] && g[i] >= g[i + 1])) continue;
    double left = g[i], right = g[i];
    for (std::size_t k = i; k-- > 0;) {
      if (g[k] > g[i]) break;
      left = std::min(left, g[k]);
    }
    for (std::size_t k = i + 1; k < n; ++k) {
      if (g[k] > g[i]) break;
      right = std::min(right, g[k]);
    }
    if (g[i] >= prominence * std::max(left, right)) out.push_back(i);
  }
  return out;
}

// Least-squares misfit of h(y) ~ c / (mu - y + i d) + b0 + b1 (y - y0) for fixed mu.
double varpro_misfit(const std::vector<double>& y, const std::vector<cplx>& h, double mu, double d,
                     double y0) {
  const Eigen::Index n = Eigen::Index(y.size());
  Eigen::MatrixXcd A(n, 3);
  Eigen::VectorXcd b(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    A(k, 0) = 1.0 / (mu - y[std::size_t(k)] + kI * d);
    A(k, 1) = 1.0;
    A(k, 2) = y[std::size_t(k)] - y0;
    b(k) = h[std::size_t(k)];
  }
  const Eigen::VectorXcd x = A.colPivHouseholderQr().solve(b);
  return (A * x - b).norm();
}

double refine_pole(const OperatorFunction& H, double y0, double d, const Eigen::VectorXcd& u,
                   const Eigen::VectorXcd& v) {
  std::vector<double> y;
  std::vector<cplx> h;
  for (int k = -12; k <= 12; ++k) {
    const double yk = y0 + 3.0 * d * k / 12.0;
    y.push_back(yk);
    h.push_back(u.dot(H(cplx(d, yk)) * v));
  }
  double a = y0 - d, b = y0 + d;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), e = a + g * (b - a);
  double fc = varpro_misfit(y, h, c, d, y0), fe = varpro_misfit(y, h, e, d, y0);
  for (int it = 0; it < 80 && b - a > 1e-14 * std::max(1.0, std::abs(y0)); ++it) {
    if (fc < fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - g * (b - a);
      fc = varpro_misfit(y, h, c, d, y0);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + g * (b - a);
      fe = varpro_misfit(y, h, e, d, y0);
    }
  }
  return 0.5 * (a + b);
}

// Secant iteration on 1/h(z) for h = u^* H v: converges to the pole of the
// scalar probe, which the VarPro estimate only brackets to within the background error.
cplx polish_pole(const OperatorFunction& H, cplx z0, double step, const Eigen::VectorXcd& u,
                 const Eigen::VectorXcd& v) {
  auto f = [&](cplx z) { return 1.0 / u.dot(H(z) * v); };
  cplx a = z0 + step, b = z0 - cplx(0.0, step);
  cplx fa = f(a), fb = f(b);
  for (int it = 0; it < 40; ++it) {
    if (fb == fa) break;
    const cplx c = b - fb * (b - a) / (fb - fa);
    a = b;
    fa = fb;
    b = c;
    fb = f(b);
    if (std::abs(b - a) < 1e-14 * std::max(1.0, std::abs(b)) || fb == 0.0) break;
  }
  return b;
}

struct Residue {
  Eigen::MatrixXcd value;
  double error;
  bool diverged;
};

// (mu + i z) H(z) = i (z - p) H(z) at z = p + d; Richardson in d -> 0 over halvings.
Residue extract_residue(const OperatorFunction& H, cplx p, double delta) {
  constexpr int L = 4;
  std::vector<std::vector<Eigen::MatrixXcd>> T(L);
  for (int i = 0; i < L; ++i) {
    const double d = delta / std::pow(2.0, i);
    T[i].push_back(kI * d * H(p + d));
    for (int j = 1; j <= i; ++j) {
      const double f = std::pow(2.0, j) - 1.0;
      T[i].push_back(T[i][j - 1] + (T[i][j - 1] - T[i - 1][j - 1]) / f);
    }
  }
  const Eigen::MatrixXcd& best = T[L - 1][L - 1];
  const double last = (best - T[L - 2][L - 2]).norm();
  const double prev = (T[L - 2][L - 2] - T[L - 3][L - 3]).norm();
  const bool diverged = last > prev && last > 1e-2 * best.norm();
  return {best, last, diverged};
}

}  // namespace

AlphaFit recover_alpha(const MeasurementSet& ms, const AlphaOptions& opt) {
  const Patches p = rebuild(ms);
  struct Rung {
    double t, norm, scale;
  };
  std::vector<Rung> rungs;
  for (const auto& r : ms.records) {
    if (!r.is_pulse()) continue;
    const double t = std::get<TriangularPulse>(r.profile).t;
    if (r.xi.size() != p.w1.size() || std::size_t(r.values.cols()) != p.w2.size())
      throw ShapeMismatch("pulse record does not match the patches");
    double mean = 0.0, mass = 0.0, xi2 = 0.0;
    for (std::size_t i = 0; i < r.xi.size(); ++i) {
      mean += p.w1.weights()[i] * r.xi[i];
      mass += p.w1.weights()[i] * std::abs(r.xi[i]);
      xi2 += p.w1.weights()[i] * r.xi[i] * r.xi[i];
    }
    if (std::abs(mean) > 1e-9 * mass) throw ValidationError("pulse records need a mean-zero xi");
    if (std::abs(r.grid().horizon() - t) > 1e-9 * t)
      throw ValidationError("pulse record must end at its own horizon t");
    rungs.push_back({t, weighted_norm(p.w2, r.values.row(r.values.rows() - 1)), std::sqrt(xi2) * t});
  }
  std::sort(rungs.begin(), rungs.end(), [](const Rung& a, const Rung& b) { return a.t < b.t; });
  if (rungs.size() < 3) throw WindowTooShort("alpha fit needs at least three pulse horizons");
  const double tmax = rungs.back().t;
  if (tmax / rungs.front().t < opt.min_span) throw WindowTooShort("pulse ladder spans less than the fit window");
  std::size_t i0 = 0;
  for (std::size_t i = 0; i < rungs.size(); ++i)
    if (tmax / rungs[i].t >= opt.min_span) i0 = i;
  if (rungs.size() - i0 < 3) throw WindowTooShort("fewer than three horizons in the fit window");

  AlphaFit out;
  out.window_start = i0;
  std::vector<double> t, nrm;
  for (std::size_t i = 0; i < rungs.size(); ++i) {
    out.horizons.push_back(rungs[i].t);
    out.norms.push_back(rungs[i].norm);
    if (i < i0) continue;
    if (!(rungs[i].norm > opt.noise_floor * rungs[i].scale))
      throw DegenerateSource("pulse response on W2 is below the noise floor");
    t.push_back(rungs[i].t);
    nrm.push_back(rungs[i].norm);
  }
  out.fit = fit_power_law(t, nrm);
  out.alpha_hat = 1.0 - out.fit.slope;
  if (!(out.alpha_hat > 0.0 && out.alpha_hat < 1.0))
    throw NumericalError("recovered time order falls outside (0, 1)");
  return out;
}

std::vector<cplx> sector_frequencies(double alpha_hat, double rho_min, double rho_max, int radii, int rays,
                                     double max_arg_s) {
  if (!(alpha_hat > 0.0 && alpha_hat < 1.0)) throw OutOfRange("alpha_hat must lie in (0, 1)");
  if (!(rho_min > 0.0 && rho_max > rho_min) || radii < 2 || rays < 2)
    throw OutOfRange("frequency plan needs 0 < rho_min < rho_max and at least two radii and rays");
  if (!(max_arg_s > 0.0 && max_arg_s < kPi / 2)) throw OutOfRange("max arg s must lie in (0, pi/2)");
  std::vector<cplx> s;
  for (int i = 0; i < radii; ++i) {
    const double rho = rho_min * std::pow(rho_max / rho_min, double(i) / (radii - 1));
    for (int k = 0; k < rays; ++k) {
      const double th = -max_arg_s + 2.0 * max_arg_s * k / (rays - 1);
      s.push_back(std::polar(std::pow(rho, 1.0 / alpha_hat), th));
    }
  }
  return s;
}

namespace {

// Randomized range finder: D ~= Q B with orthonormal Q, grown until the
// Frobenius residual is below rel_tol of |D|. Falls back to Q = D, B = I.
std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> compress_columns(const Eigen::MatrixXcd& D, double rel_tol) {
  const Eigen::Index n = D.rows(), c = D.cols();
  const double norm = D.norm();
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> gauss;
  for (Eigen::Index l = 32; 2 * l < std::min(n, c); l *= 2) {
    Eigen::MatrixXd omega(c, l);
    for (Eigen::Index i = 0; i < omega.size(); ++i) omega.data()[i] = gauss(rng);
    const Eigen::MatrixXcd Y = D * omega.cast<cplx>();
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(Y);
    Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(n, l);
    Eigen::MatrixXcd B = Q.adjoint() * D;
    if ((D - Q * B).norm() <= rel_tol * norm) return {std::move(Q), std::move(B)};
  }
  return {D, Eigen::MatrixXcd::Identity(c, c)};
}

}  // namespace

std::vector<LaplaceOperatorSample> assemble_H(const MeasurementSet& ms, std::span<const cplx> s_grid,
                                              double alpha_hat, int threads) {
  if (!(alpha_hat > 0.0 && alpha_hat < 1.0)) throw OutOfRange("alpha_hat must lie in (0, 1)");
  const Patches p = rebuild(ms);
  std::vector<const MeasurementRecord*> recs;
  for (const auto& r : ms.records)
    if (r.is_bump()) {
      if (r.xi.size() != p.w1.size() || std::size_t(r.values.cols()) != p.w2.size())
        throw ShapeMismatch("bump record does not match the patches");
      recs.push_back(&r);
    }
  const Eigen::Index n1 = Eigen::Index(p.w1.size());
  if (Eigen::Index(recs.size()) < n1) throw IllConditionedBasis("bump sources do not span the W1 samples");
  Eigen::MatrixXd Xi(n1, Eigen::Index(recs.size()));
  for (std::size_t r = 0; r < recs.size(); ++r)
    for (Eigen::Index i = 0; i < n1; ++i) Xi(i, Eigen::Index(r)) = recs[r]->xi[std::size_t(i)];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xi, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) > 1e-10 * sv(0))) throw IllConditionedBasis("bump sources do not span the W1 samples");
  // Right inverse of Xi: H = U Xi^+.
  const Eigen::MatrixXd pinv = svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();

  // Records sharing a time grid are stacked and compressed once: every record is
  // a combination of one temporal response per distinct eigenvalue, so the
  // stack has low numerical rank and each s costs n*rank instead of n*columns.
  struct Group {
    std::size_t n;
    double h;
    std::vector<std::size_t> members;
    Eigen::MatrixXcd Q, B;
  };
  std::vector<Group> groups;
  for (std::size_t r = 0; r < recs.size(); ++r) {
    const std::size_t n = std::size_t(recs[r]->values.rows());
    auto g = std::find_if(groups.begin(), groups.end(),
                          [&](const Group& x) { return x.n == n && x.h == recs[r]->h; });
    if (g == groups.end()) g = groups.insert(groups.end(), Group{n, recs[r]->h, {}, {}, {}});
    g->members.push_back(r);
  }
  const Eigen::Index m2 = Eigen::Index(p.w2.size());
  for (auto& g : groups) {
    Eigen::MatrixXcd D(Eigen::Index(g.n), m2 * Eigen::Index(g.members.size()));
    for (std::size_t j = 0; j < g.members.size(); ++j)
      D.middleCols(m2 * Eigen::Index(j), m2) = recs[g.members[j]]->values;
    std::tie(g.Q, g.B) = compress_columns(D, 1e-13);
  }
  std::vector<std::vector<double>> profiles(recs.size());
  for (std::size_t r = 0; r < recs.size(); ++r) profiles[r] = sample_profile(recs[r]->profile, recs[r]->grid());

  // Mean-carrying sources excite the zero mode, whose response decays like
  // t^{alpha-1} after the bump; the other modes decay like t^{-1-alpha}.
  const double tail[3] = {1.0 - alpha_hat, 2.0 - alpha_hat, 1.0 + alpha_hat};
  std::vector<LaplaceOperatorSample> out(s_grid.size());
  parallel_for(
      s_grid.size(),
      [&](std::size_t k) {
        const cplx s = s_grid[k];
        Eigen::MatrixXcd U(m2, Eigen::Index(recs.size()));
        for (const auto& g : groups) {
          const auto w = laplace_weights(g.n, g.h, s, tail);
          const Eigen::RowVectorXcd wq =
              Eigen::Map<const Eigen::RowVectorXcd>(w.data(), Eigen::Index(g.n)) * g.Q;
          const Eigen::RowVectorXcd lu = wq * g.B;
          for (std::size_t j = 0; j < g.members.size(); ++j) {
            const std::size_t r = g.members[j];
            const cplx La = laplace_transform_pl(profiles[r], g.h, s);
            U.col(Eigen::Index(r)) = lu.segment(m2 * Eigen::Index(j), m2).transpose() / La;
          }
        }
        out[k] = {s, std::pow(s, alpha_hat), U * pinv};
      },
      threads);
  return out;
}

RationalContinuation::RationalContinuation(std::span<const LaplaceOperatorSample> samples,
                                           const ContinuationOptions& opt) {
  const std::size_t m = samples.size();
  if (m < 4) throw ValidationError("continuation needs at least four samples");
  const Eigen::Index rows = samples[0].H.rows(), cols = samples[0].H.cols();
  const int P = std::max(opt.probes, 1);

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> nd;
  std::vector<Eigen::VectorXcd> us(P), vs(P);
  for (int q = 0; q < P; ++q) {
    us[q].resize(rows);
    vs[q].resize(cols);
    for (Eigen::Index i = 0; i < rows; ++i) us[q](i) = {nd(rng), nd(rng)};
    for (Eigen::Index i = 0; i < cols; ++i) vs[q](i) = {nd(rng), nd(rng)};
  }
  Eigen::MatrixXcd F(Eigen::Index(m), P);
  Eigen::VectorXcd Z{Eigen::Index(m)};
  std::vector<std::size_t> all(m);
  std::iota(all.begin(), all.end(), std::size_t(0));
  for (std::size_t i = 0; i < m; ++i) {
    if (samples[i].H.rows() != rows || samples[i].H.cols() != cols) throw ShapeMismatch("samples differ in shape");
    Z(Eigen::Index(i)) = samples[i].z;
    for (int q = 0; q < P; ++q) F(Eigen::Index(i), q) = us[q].dot(samples[i].H * vs[q]);
  }
  for (int q = 0; q < P; ++q) {
    const double s = F.col(q).cwiseAbs().maxCoeff();
    if (s > 0.0) F.col(q) /= s;
  }

  // Greedy AAA restricted to the sample indices in `fit`; `step` sees the
  // support and weights after every added support point.
  auto aaa = [&](const std::vector<std::size_t>& fit, double tol, int max_deg,
                 const std::function<void(const std::vector<std::size_t>&, const Eigen::VectorXcd&)>& step) {
    std::vector<bool> used(m, false);
    std::vector<std::size_t> S;
    Eigen::VectorXcd w;
    Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(Eigen::Index(m), P);
    for (int q = 0; q < P; ++q) R.col(q).setConstant(F.col(q).mean());
    max_deg = std::min<int>(max_deg, int(fit.size()) - 1);
    for (int it = 0; it < max_deg; ++it) {
      std::size_t jstar = 0;
      double err = -1.0;
      for (std::size_t i : fit) {
        if (used[i]) continue;
        const double e = (F.row(Eigen::Index(i)) - R.row(Eigen::Index(i))).cwiseAbs().maxCoeff();
        if (e > err) {
          err = e;
          jstar = i;
        }
      }
      if (!S.empty() && err <= tol) break;
      used[jstar] = true;
      S.push_back(jstar);
      std::vector<std::size_t> J;
      for (std::size_t i : fit)
        if (!used[i]) J.push_back(i);
      const Eigen::Index k = Eigen::Index(S.size()), nj = Eigen::Index(J.size());
      Eigen::MatrixXcd C(nj, k);
      for (Eigen::Index a = 0; a < nj; ++a)
        for (Eigen::Index b = 0; b < k; ++b) C(a, b) = 1.0 / (Z(Eigen::Index(J[a])) - Z(Eigen::Index(S[b])));
      Eigen::MatrixXcd A(nj * P, k);
      for (int q = 0; q < P; ++q)
        for (Eigen::Index a = 0; a < nj; ++a)
          for (Eigen::Index b = 0; b < k; ++b)
            A(q * nj + a, b) = (F(Eigen::Index(J[a]), q) - F(Eigen::Index(S[b]), q)) * C(a, b);
      // Smallest right singular vector through the triangular factor of the tall Loewner matrix.
      Eigen::MatrixXcd Rt;
      if (A.rows() > 2 * k) {
        Eigen::HouseholderQR<Eigen::MatrixXcd> qr(A);
        Rt = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
      } else {
        Rt = A;
      }
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Rt, Eigen::ComputeFullV);
      w = svd.matrixV().col(k - 1);
      for (int q = 0; q < P; ++q) {
        Eigen::VectorXcd fs(k);
        for (Eigen::Index b = 0; b < k; ++b) fs(b) = F(Eigen::Index(S[b]), q);
        const Eigen::VectorXcd N = C * (w.cwiseProduct(fs)), D = C * w;
        for (Eigen::Index a = 0; a < nj; ++a) R(Eigen::Index(J[a]), q) = N(a) / D(a);
        for (Eigen::Index b = 0; b < k; ++b) R(Eigen::Index(S[b]), q) = F(Eigen::Index(S[b]), q);
      }
      if (step) step(S, w);
    }
    return std::make_pair(S, w);
  };

  double tol = opt.tolerance;
  if (tol <= 0.0) {
    // Noise floor from a held-out split: fit every other sample, track the
    // misfit on the rest, and stop the full fit at the best held-out level.
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < m; ++i) (i % 2 == 0 ? train : test).push_back(i);
    double best = std::numeric_limits<double>::infinity();
    aaa(train, 0.0, opt.max_degree, [&](const std::vector<std::size_t>& S, const Eigen::VectorXcd& w) {
      double e = 0.0;
      for (std::size_t i : test) {
        for (int q = 0; q < P; ++q) {
          cplx num = 0.0, den = 0.0;
          for (std::size_t b = 0; b < S.size(); ++b) {
            const cplx c = w(Eigen::Index(b)) / (Z(Eigen::Index(i)) - Z(Eigen::Index(S[b])));
            num += c * F(Eigen::Index(S[b]), q);
            den += c;
          }
          e = std::max(e, std::abs(num / den - F(Eigen::Index(i), q)));
        }
      }
      best = std::min(best, e);
    });
    tol = std::max(best, 1e-14);
    validation_error_ = best;
  }
  const auto [S, w] = aaa(all, tol, opt.max_degree, {});
  for (std::size_t b = 0; b < S.size(); ++b) {
    support_.push_back(samples[S[b]].z);
    weights_.push_back(w(Eigen::Index(b)));
    values_.push_back(samples[S[b]].H);
  }
  double scale = 0.0;
  for (const auto& s : samples) scale = std::max(scale, s.H.norm());
  for (const auto& s : samples) fit_error_ = std::max(fit_error_, ((*this)(s.z) - s.H).norm() / scale);
}

Eigen::MatrixXcd RationalContinuation::operator()(cplx z) const {
  Eigen::MatrixXcd num = Eigen::MatrixXcd::Zero(values_[0].rows(), values_[0].cols());
  cplx den = 0.0;
  for (std::size_t k = 0; k < support_.size(); ++k) {
    if (z == support_[k]) return values_[k];
    const cplx c = weights_[k] / (z - support_[k]);
    num += c * values_[k];
    den += c;
  }
  return num / den;
}

std::vector<cplx> RationalContinuation::poles() const {
  // Zeros of sum w_k / (z - z_k): shift z_1 to the origin, multiply by z and
  // solve the resulting diagonal-plus-rank-one eigenproblem; drop the root at 0.
  const std::size_t k = support_.size();
  if (k < 2) return {};
  cplx W = 0.0;
  for (const auto& w : weights_) W += w;
  const Eigen::Index kk = Eigen::Index(k);
  Eigen::MatrixXcd M;
  Eigen::VectorXcd u(kk);
  for (std::size_t i = 0; i < k; ++i) u(Eigen::Index(i)) = -weights_[i] * (support_[i] - support_[0]) / W;
  M = u * Eigen::RowVectorXcd::Ones(kk);
  for (std::size_t i = 0; i < k; ++i) M(Eigen::Index(i), Eigen::Index(i)) += support_[i] - support_[0];
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M, false);
  std::vector<cplx> ev(es.eigenvalues().begin(), es.eigenvalues().end());
  auto drop = std::min_element(ev.begin(), ev.end(), [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
  ev.erase(drop);
  for (auto& e : ev) e += support_[0];
  return ev;
}

PoleRecovery recover_poles(const OperatorFunction& H, const PoleOptions& opt) {
  if (!(opt.y_hi > opt.y_lo)) throw OutOfRange("pole window must have y_hi > y_lo");
  auto scan = [&](double d, std::vector<double>& y, std::vector<double>& g) {
    y.clear();
    g.clear();
    const std::size_t n = std::size_t(std::ceil((opt.y_hi - opt.y_lo) / (0.25 * d))) + 1;
    for (std::size_t i = 0; i < n; ++i) {
      const double yi = opt.y_lo + (opt.y_hi - opt.y_lo) * double(i) / double(n - 1);
      y.push_back(yi);
      g.push_back(H(cplx(d, yi)).norm());
    }
  };
  PoleRecovery out;
  double delta = opt.delta;
  if (!(delta > 0.0)) {
    // Shrink the line distance until it is a tenth of the closest peak spacing and
    // the number of resolved peaks stops changing.
    double d = (opt.y_hi - opt.y_lo) / 40.0;
    std::ptrdiff_t prev = -1;
    for (int it = 0; it < 8; ++it) {
      std::vector<double> y, g;
      scan(d, y, g);
      const auto pk = find_peaks(g, opt.prominence);
      double gap = opt.y_hi - opt.y_lo;
      for (std::size_t i = 1; i < pk.size(); ++i) gap = std::min(gap, y[pk[i]] - y[pk[i - 1]]);
      if (std::ptrdiff_t(pk.size()) == prev && d <= gap / 10.0 * 1.0001) break;
      prev = std::ptrdiff_t(pk.size());
      d = std::min(0.5 * d, gap / 10.0);
    }
    delta = d;
  }
  out.delta = delta;
  scan(delta, out.scan_y, out.scan_norm);
  const auto peaks = find_peaks(out.scan_norm, opt.prominence);

  double biggest = 0.0;
  std::vector<SpectralDatum> found;
  for (std::size_t idx : peaks) {
    const double y0 = out.scan_y[idx];
    Eigen::JacobiSVD<Eigen::MatrixXcd> top(H(cplx(delta, y0)), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXcd u = top.matrixU().col(0), v = top.matrixV().col(0);
    const double mu1 = refine_pole(H, y0, delta, u, v);
    const double mu2 = refine_pole(H, mu1, 0.5 * delta, u, v);
    const cplx pole = polish_pole(H, cplx(0.0, mu2), 0.05 * delta, u, v);
    if (!(std::abs(pole - cplx(0.0, mu2)) < delta)) {
      std::ostringstream os;
      os << "pole polish near mu = " << mu2 << " left the peak; fitted value kept";
      out.warnings.push_back(os.str());
    }
    const cplx p = std::abs(pole - cplx(0.0, mu2)) < delta ? pole : cplx(0.0, mu2);
    const Residue res = extract_residue(H, p, delta);
    if (res.diverged) {
      std::ostringstream os;
      os << "residue extrapolation diverged near mu = " << mu2 << "; peak dropped";
      out.warnings.push_back(os.str());
      continue;
    }
    SpectralDatum d;
    d.mu = p.imag();
    d.mu_error = std::max(std::abs(p.imag() - mu2), std::abs(p.real()));
    d.residue = res.value;
    d.residue_error = res.error;
    Eigen::JacobiSVD<Eigen::MatrixXcd> rs(res.value);
    d.singular_values = rs.singularValues();
    biggest = std::max(biggest, d.singular_values.size() ? d.singular_values(0) : 0.0);
    found.push_back(std::move(d));
  }
  if (found.empty() && !peaks.empty())
    throw ExtrapolationDivergence("residue extrapolation diverged at every detected peak");
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.mu < b.mu; });
  for (auto& d : found) {
    if (d.singular_values.size() == 0 || d.singular_values(0) < opt.min_residue * biggest) continue;
    d.multiplicity = numerical_rank(d.singular_values, opt.rank_threshold);
    if (!out.data.empty() && d.mu - out.data.back().mu < 0.1 * delta) {
      out.warnings.push_back("duplicate pole estimate merged");
      if (d.singular_values(0) > out.data.back().singular_values(0)) out.data.back() = d;
      continue;
    }
    if (!out.data.empty() && d.mu - out.data.back().mu < 2.0 * delta) {
      std::ostringstream os;
      os << "poles at " << out.data.back().mu << " and " << d.mu << " are closer than the scan resolution";
      out.warnings.push_back(os.str());
    }
    out.data.push_back(std::move(d));
  }
  return out;
}

BetaFit recover_beta(std::span<const double> mu, std::span<const int> multiplicity, int dim) {
  if (mu.size() != multiplicity.size()) throw ShapeMismatch("mu and multiplicity lengths differ");
  if (dim < 1) throw OutOfRange("manifold dimension must be positive");
  std::vector<std::size_t> order(mu.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mu[a] < mu[b]; });
  BetaFit out;
  double n = 0.0;
  for (std::size_t i : order) {
    if (!(mu[i] > 0.0)) continue;
    n += multiplicity[i];
    out.mu.push_back(mu[i]);
    out.count.push_back(n);
  }
  if (out.mu.size() < kMinWeylPoints) {
    std::ostringstream os;
    os << "Weyl fit needs at least " << kMinWeylPoints << " eigenvalue powers, got " << out.mu.size();
    throw InsufficientSpectrum(os.str());
  }
  const std::size_t half = out.mu.size() / 2;
  out.fit = fit_power_law(std::span<const double>(out.mu).subspan(half),
                          std::span<const double>(out.count).subspan(half));
  out.beta_hat = double(dim) / (2.0 * out.fit.slope);
  return out;
}

BetaFit recover_beta(std::span<const SpectralDatum> data, int dim) {
  std::vector<double> mu;
  std::vector<int> m;
  for (const auto& d : data) {
    mu.push_back(d.mu);
    m.push_back(d.multiplicity);
  }
  return recover_beta(mu, m, dim);
}

std::vector<SpectralDatum> assemble_spectral_data(std::vector<SpectralDatum> data, double beta_hat) {
  if (!(beta_hat > 0.0)) throw OutOfRange("beta_hat must be positive");
  for (auto& d : data) d.lambda = std::pow(d.mu, 1.0 / beta_hat);
  std::sort(data.begin(), data.end(), [](const auto& a, const auto& b) { return a.mu < b.mu; });
  return data;
}

std::vector<double> wave_weights(double lambda, double h, std::size_t n) {
  if (lambda < 0.0) throw OutOfRange("eigenvalue must be non-negative");
  if (!(h > 0.0)) throw OutOfRange("time step must be positive");
  std::vector<double> w(n);
  if (n == 0) return w;
  if (lambda == 0.0) {
    w[0] = h * h / 6.0;
    for (std::size_t m = 1; m < n; ++m) w[m] = double(m) * h * h;
    return w;
  }
  const double om = std::sqrt(lambda), x = om * h;
  w[0] = x < 1e-2 ? h * h * (1.0 / 6.0 - x * x / 120.0 + x * x * x * x / 5040.0)
                  : (h - std::sin(x) / om) / (om * om * h);
  const double s2 = std::sin(0.5 * x);
  const double c = 4.0 * s2 * s2 / (om * om * om * h);
  for (std::size_t m = 1; m < n; ++m) w[m] = c * std::sin(x * double(m));
  return w;
}

WaveReplay wave_replay(std::span<const WaveMode> modes, std::span<const double> xi,
                       std::span<const double> profile, const TimeGrid& grid) {
  if (profile.size() != grid.nodes()) throw ShapeMismatch("wave profile length differs from grid");
  if (!profile.empty() && profile[0] != 0.0) throw NonzeroInitialValue("wave profile must vanish at t = 0");
  WaveReplay out;
  const Eigen::Map<const Eigen::VectorXd> x(xi.data(), Eigen::Index(xi.size()));
  const std::size_t n = grid.nodes();
  Eigen::Index rows = 0;
  double om_max = 0.0;
  for (const auto& md : modes) {
    if (md.residue.cols() != x.size()) throw ShapeMismatch("residue columns differ from xi length");
    rows = md.residue.rows();
    om_max = std::max(om_max, std::sqrt(std::max(md.lambda, 0.0)));
  }
  out.field = Eigen::MatrixXd::Zero(Eigen::Index(n), rows);
  for (const auto& md : modes) {
    const Eigen::VectorXd img = md.residue * x;
    const auto w = wave_weights(md.lambda, grid.h(), n);
    for (std::size_t k = 1; k < n; ++k) {
      double acc = 0.0;
      for (std::size_t j = 1; j <= k; ++j) acc += w[k - j] * profile[j];
      out.field.row(Eigen::Index(k)) += acc * img.transpose();
    }
  }
  // The replay can only represent frequencies up to the largest recovered sqrt(lambda).
  double peak = 0.0;
  for (int k = 0; k <= 64; ++k) {
    const double om = 2.0 * om_max * k / 64.0;
    peak = std::max(peak, std::abs(laplace_transform_pl(profile, grid.h(), cplx(0.0, om))));
  }
  const double edge = std::abs(laplace_transform_pl(profile, grid.h(), cplx(0.0, om_max)));
  if (modes.empty() || edge > 1e-3 * peak) {
    std::ostringstream os;
    os << "source bandwidth reaches the largest replayed frequency " << om_max;
    out.warnings.push_back(os.str());
  }
  return out;
}

std::vector<WaveMode> wave_modes(std::span<const SpectralDatum> data) {
  std::vector<WaveMode> out;
  for (const auto& d : data) out.push_back({d.lambda, d.residue.real()});
  return out;
}

}  // namespace fracinv
