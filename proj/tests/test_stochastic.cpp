#include <doctest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <random>

#include "fracinv/errors.hpp"
#include "fracinv/stochastic.hpp"
#include "mp_oracles.hpp"

using namespace fracinv;

namespace {

struct SmallWorld {
  ModelManifold m = ModelManifold::torus(1, 32);
  SpectrumTable table = enumerate_spectrum(m, 9.0);
  SampledBasis basis{m, table};
  RegionPatch w1;
  SmallWorld() {
    RegionBox b;
    b.hi = {1.2, 0.0, 0.0};
    w1 = RegionPatch::from_box(m, b);
  }
  std::vector<double> shape(double k) const {
    std::vector<double> xi;
    for (auto i : w1.nodes()) xi.push_back(std::cos(k * m.node(i).x[0]) + 0.5);
    return xi;
  }
};

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("philox known-answer vectors") {
  using C = Philox4x32::Counter;
  CHECK(Philox4x32::block({0, 0, 0, 0}, {0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("normal stream is addressable") {
  NormalStream s(11, 3);
  std::vector<double> v(9);
  s.fill(0, v);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == s(i));
  std::vector<double> w(4);
  s.fill(3, w);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i] == v[3 + i]);
}

TEST_CASE("sample_brownian examples") {
  const TimeGrid g(0.01, 101);
  const auto a = sample_brownian(g, 5, 2), b = sample_brownian(g, 5, 2), c = sample_brownian(g, 5, 3);
  CHECK(a.dB == b.dB);
  CHECK(a.dB != c.dB);
  CHECK(a.dB.size() == 100);

  // Pooled variance of 10^6 increments: standard error h sqrt(2 / (N - 1)).
  const TimeGrid big(0.01, 100001);
  double sum = 0.0, sq = 0.0;
  std::size_t cnt = 0;
  for (std::uint64_t p = 0; p < 10; ++p) {
    for (double x : sample_brownian(big, 17, p).dB) {
      sum += x;
      sq += x * x;
      ++cnt;
    }
  }
  const double mean = sum / double(cnt), var = (sq - cnt * mean * mean) / double(cnt - 1);
  CHECK(std::abs(var - 0.01) <= 3.0 * 0.01 * std::sqrt(2.0 / double(cnt - 1)));

  // B(T) ~ N(0, T): Kolmogorov-Smirnov at the 1% level.
  const TimeGrid tg(0.05, 21);
  std::vector<double> ends;
  for (std::uint64_t p = 0; p < 2000; ++p) {
    double B = 0.0;
    for (double x : sample_brownian(tg, 23, p).dB) B += x;
    ends.push_back(B);
  }
  std::sort(ends.begin(), ends.end());
  double D = 0.0;
  const double n = double(ends.size());
  for (std::size_t i = 0; i < ends.size(); ++i) {
    const double F = normal_cdf(ends[i] / std::sqrt(tg.horizon()));
    D = std::max({D, F - double(i) / n, double(i + 1) / n - F});
  }
  CHECK(D < 1.628 / std::sqrt(n));
}

TEST_CASE("ito_modal validation and zero deviation") {
  const TimeGrid g(0.01, 51);
  const auto path = sample_brownian(g, 1);
  CHECK_THROWS_AS(ito_modal(1.0, ExponentPair(0.4, 0.5), std::vector<double>(51, 0.0), path), OrderViolation);
  std::vector<double> bad(51, 1.0);
  CHECK_THROWS_AS(ito_modal(1.0, ExponentPair(0.8, 0.5), bad, path), NonzeroInitialValue);
  const auto u = ito_modal(1.0, ExponentPair(0.8, 0.5), std::vector<double>(51, 0.0), path);
  for (auto v : u) CHECK(v == cplx(0.0));
}

TEST_CASE("ito_modal mean and isometry over 10^4 paths") {
  const ExponentPair e(0.75, 0.5);
  const TimeGrid g(0.01, 101);
  const SmoothBump bump{1.0};
  const auto sig = sample_profile(bump, g);
  constexpr std::size_t M = 10000;
  EnsembleStats st;
  Eigen::ArrayXd sr = Eigen::ArrayXd::Zero(g.nodes()), si = sr, qr = sr, qi = sr;
  for (std::size_t p = 0; p < M; ++p) {
    const auto u = ito_modal(1.0, e, sig, sample_brownian(g, 99, p));
    const Eigen::Map<const Eigen::ArrayXcd> a(u.data(), Eigen::Index(u.size()));
    sr += a.real();
    si += a.imag();
    qr += a.real().square();
    qi += a.imag().square();
    st.add(a.matrix().transpose());
  }
  // Mean zero per node, real and imaginary parts separately.
  int outside = 0;
  for (Eigen::Index n = 1; n < st.mean.cols(); ++n) {
    const double mr = sr(n) / M, mi = si(n) / M;
    const double vr = (qr(n) - M * mr * mr) / (M - 1), vi = (qi(n) - M * mi * mi) / (M - 1);
    if (std::abs(mr) > 3.0 * std::sqrt(vr / M)) ++outside;
    if (std::abs(mi) > 3.0 * std::sqrt(vi / M)) ++outside;
  }
  CHECK(outside == 0);

  // Independent oracle: tanh-sinh over the singular kernel with a high-precision series for E.
  boost::math::quadrature::tanh_sinh<double> ts;
  const double T = g.horizon();
  const double ref = ts.integrate(
      [&](double tau) {
        const double s = T - tau;
        if (s <= 0.0) return 0.0;
        const double E = std::abs(oracle::ml_series_mp(0.75, 0.75, cplx(0.0, std::pow(s, 0.75))));
        const double sg = profile_value(bump, tau);
        return std::pow(s, -0.5) * E * E * sg * sg;
      },
      0.0, T);
  CHECK(isometry_variance(1.0, e, bump, T) == doctest::Approx(ref).epsilon(1e-8));
  const double var = st.variance()(0, st.mean.cols() - 1);
  CHECK(std::abs(var - ref) / ref < 0.05);
}

TEST_CASE("ensemble statistics merge like a single pass") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  EnsembleStats all, a, b;
  for (int i = 0; i < 300; ++i) {
    Eigen::MatrixXcd u(2, 3);
    for (auto& x : u.reshaped()) x = {nd(rng), 2.0 + nd(rng)};
    all.add(u);
    (i < 120 ? a : b).add(u);
  }
  a.merge(b);
  CHECK(a.paths == 300);
  CHECK((a.mean - all.mean).norm() < 1e-12);
  CHECK((a.m2 - all.m2).norm() < 1e-10 * all.m2.norm());
  CHECK((all.variance().array() >= 0.0).all());
}

TEST_CASE("ensemble_solve degenerates pathwise and is thread-independent") {
  SmallWorld w;
  const ExponentPair e(0.75, 0.5, true);
  const TimeGrid g(0.02, 76);
  const SourceSpec f{w.shape(1.0), SmoothBump{1.0}};
  const SourceSpec zero{std::vector<double>(w.w1.size(), 0.0), SmoothBump{1.0}};
  const auto r0 = ensemble_solve(f, zero, w.basis, e, g, w.w1, 100, 1, 4);
  CHECK(r0.max_path_deviation == 0.0);
  for (double x : r0.mean_error) CHECK(x == 0.0);

  const SourceSpec sig{w.shape(2.0), SmoothBump{1.0}};
  const auto r1 = ensemble_solve(f, sig, w.basis, e, g, w.w1, 300, 5, 1);
  const auto r4 = ensemble_solve(f, sig, w.basis, e, g, w.w1, 300, 5, 4);
  CHECK(r1.stats.mean == r4.stats.mean);
  CHECK(r1.stats.m2 == r4.stats.m2);
  CHECK(r1.max_path_deviation > 0.0);
  CHECK_THROWS_AS(ensemble_solve(f, sig, w.basis, ExponentPair(0.4, 0.5), g, w.w1, 10, 1), OrderViolation);
}

TEST_CASE("ensemble mean approaches the deterministic solution at the Monte Carlo rate") {
  SmallWorld w;
  const ExponentPair e(0.75, 0.5, true);
  const TimeGrid g(0.02, 76);
  const SourceSpec f{w.shape(1.0), SmoothBump{1.0}}, sig{w.shape(2.0), SmoothBump{1.0}};
  auto sup = [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); };
  const double e1 = sup(ensemble_solve(f, sig, w.basis, e, g, w.w1, 2500, 7).mean_error);
  const double e4 = sup(ensemble_solve(f, sig, w.basis, e, g, w.w1, 10000, 8).mean_error);
  const double ratio = e1 / e4;
  CHECK(ratio > 1.0);
  CHECK(ratio < 4.0);
}

TEST_CASE("energy stays under the bound with one fitted constant") {
  SmallWorld w;
  const ExponentPair e(0.75, 0.5, true);
  const double Cstar = energy_bound_constant(0.75);
  double C = 0.0;
  for (double T0 : {0.5, 1.0, 2.0}) {
    const TimeGrid g = TimeGrid::from_horizon(2.0 * T0, 100);
    const SourceSpec f{w.shape(1.0), SmoothBump{T0}}, sig{w.shape(2.0), SmoothBump{T0}};
    const auto r = ensemble_solve(f, sig, w.basis, e, g, w.w1, 2000, 3);
    const auto E = r.stats.energy();
    const double supE = *std::max_element(E.begin(), E.end());
    CHECK(std::isfinite(supE));
    // int ||f||^2 dt and sup ||sigma||^2 from the modal coefficients.
    double cf = 0.0, cs = 0.0;
    const auto a = sample_profile(f.profile, g);
    double fa = 0.0, sa = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
      fa += g.h() * a[n] * a[n];
      sa = std::max(sa, a[n] * a[n]);
    }
    for (std::size_t c = 0; c < w.basis.columns(); ++c) {
      double pf = 0.0, ps = 0.0;
      for (std::size_t i = 0; i < w.w1.size(); ++i) {
        const double phi = w.basis.values()(Eigen::Index(w.w1.nodes()[i]), Eigen::Index(c));
        pf += w.w1.weights()[i] * f.xi[i] * phi;
        ps += w.w1.weights()[i] * sig.xi[i] * phi;
      }
      cf += pf * pf;
      cs += ps * ps;
    }
    const double bound = std::pow(T0, 2.0 * 0.75 - 1.0) * (cf * fa + cs * sa);
    C = std::max(C, supE / bound);
  }
  CHECK(C > 0.0);
  CHECK(C <= Cstar);
}

TEST_CASE("integral_equation_residual") {
  const ExponentPair e(0.75, 0.5, true);
  const TimeGrid g(0.01, 101);
  const auto path = sample_brownian(g, 4);
  const std::vector<double> zero(g.nodes(), 0.0);
  const std::vector<cplx> uz(g.nodes(), 0.0);
  for (auto r : integral_equation_residual(uz, 2.0, e, zero, zero, path)) CHECK(r == cplx(0.0));

  // Deterministic refinement: the gap shrinks under grid halving.
  auto det_residual = [&](std::size_t intervals) {
    const TimeGrid gg = TimeGrid::from_horizon(1.0, intervals);
    const auto f = sample_profile(SmoothBump{1.0}, gg);
    const std::vector<double> z(gg.nodes(), 0.0);
    const auto u = solve_modal(2.0, e, f, gg.h());
    const auto r = integral_equation_residual(u, 2.0, e, f, z, sample_brownian(gg, 1));
    double m = 0.0;
    for (auto x : r) m = std::max(m, std::abs(x));
    return m;
  };
  const double r1 = det_residual(100), r2 = det_residual(200);
  CHECK(r2 < r1 / 1.5);
}

TEST_CASE("stochastic mean residual at M = 1000 stays within 3x the deterministic residual") {
  const ExponentPair e(0.75, 0.5, true);
  const TimeGrid g(0.01, 101);
  const std::vector<double> zero(g.nodes(), 0.0);
  const auto f = sample_profile(SmoothBump{1.0}, g), s = sample_profile(SmoothBump{1.0}, g);
  const auto ud = solve_modal(2.0, e, f, g.h());
  double r1 = 0.0;
  for (auto x : integral_equation_residual(ud, 2.0, e, f, zero, sample_brownian(g, 1))) r1 = std::max(r1, std::abs(x));
  std::vector<cplx> mean(g.nodes(), 0.0);
  constexpr std::size_t M = 1000;
  for (std::size_t p = 0; p < M; ++p) {
    const auto path_p = sample_brownian(g, 21, p);
    auto u = ito_modal(2.0, e, s, path_p);
    for (std::size_t n = 0; n < u.size(); ++n) u[n] += ud[n];
    const auto r = integral_equation_residual(u, 2.0, e, f, s, path_p);
    for (std::size_t n = 0; n < r.size(); ++n) mean[n] += r[n] / double(M);
  }
  double mr = 0.0;
  for (auto x : mean) mr = std::max(mr, std::abs(x));
  CHECK(mr < 3.0 * r1);
}
