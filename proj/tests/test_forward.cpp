#include <doctest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <random>

#include "fracinv/errors.hpp"
#include "fracinv/forward.hpp"

using namespace fracinv;

namespace {

constexpr cplx I{0.0, 1.0};

double max_abs_diff(std::span<const cplx> a, std::span<const cplx> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Complex integral over (a, inf), split into real and imaginary parts.
template <class F>
cplx integrate_half_line(F f, double a) {
  boost::math::quadrature::exp_sinh<double> q;
  const double re = q.integrate([&](double t) { return t > 700.0 ? 0.0 : f(t).real(); }, a,
                                std::numeric_limits<double>::infinity());
  const double im = q.integrate([&](double t) { return t > 700.0 ? 0.0 : f(t).imag(); }, a,
                                std::numeric_limits<double>::infinity());
  return {re, im};
}

struct FieldSetup {
  ModelManifold m = ModelManifold::torus(2, 32);
  SpectrumTable table = enumerate_spectrum(m, 20.0);
  SampledBasis basis{m, table};
  RegionPatch w1, w2;
  FieldSetup() {
    RegionBox b1, b2;
    b1.lo = {0.0, 0.0, 0.0};
    b1.hi = {1.5, 1.5, 0.0};
    b2.lo = {3.0, 3.0, 0.0};
    b2.hi = {4.5, 4.5, 0.0};
    w1 = RegionPatch::from_box(m, b1);
    w2 = RegionPatch::from_box(m, b2);
  }
  std::vector<double> random_xi(unsigned seed) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    std::vector<double> xi(w1.size());
    for (double& v : xi) v = n(rng);
    return xi;
  }
};

}  // namespace

TEST_CASE("caputo_derivative examples") {
  const TimeGrid g = TimeGrid::from_horizon(1.0, 1000);
  std::vector<double> lin(g.nodes()), sq(g.nodes()), zero(g.nodes(), 0.0);
  for (std::size_t n = 0; n < g.nodes(); ++n) {
    lin[n] = g.t(n);
    sq[n] = g.t(n) * g.t(n);
  }
  const auto d1 = caputo_derivative(lin, g.h(), 0.5);
  const auto d2 = caputo_derivative(sq, g.h(), 0.3);
  const auto d0 = caputo_derivative(zero, g.h(), 0.5);
  double e1 = 0.0, e2 = 0.0;
  for (std::size_t n = 1; n < g.nodes(); ++n) {
    const double t = g.t(n);
    e1 = std::max(e1, std::abs(d1[n] - std::pow(t, 0.5) / boost::math::tgamma(1.5)));
    e2 = std::max(e2, std::abs(d2[n] - 2.0 * std::pow(t, 1.7) / boost::math::tgamma(2.7)));
    CHECK(d0[n] == 0.0);
  }
  CHECK(e1 < 1e-12);  // L1 is exact on linear data
  CHECK(e2 < 2e-3);   // O(h^{2-alpha})
  lin[0] = 1.0;
  CHECK_THROWS_AS(caputo_derivative(lin, g.h(), 0.5), NonzeroInitialValue);
  CHECK_THROWS_AS(caputo_derivative(sq, g.h(), 1.0), OutOfRange);
}

TEST_CASE("caputo_derivative converges at order 2 - alpha") {
  auto err = [](std::size_t n) {
    const TimeGrid g = TimeGrid::from_horizon(1.0, n);
    std::vector<double> u(g.nodes());
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = g.t(k) * g.t(k);
    const auto d = caputo_derivative(u, g.h(), 0.4);
    return std::abs(d.back() - 2.0 / boost::math::tgamma(2.6));
  };
  const double rate = std::log2(err(200) / err(400));
  CHECK(rate > 1.5);
}

TEST_CASE("ExponentPair and TimeGrid validation") {
  CHECK_NOTHROW(ExponentPair(0.6, 0.4));
  CHECK_THROWS_AS(ExponentPair(0.0, 0.4), OutOfRange);
  CHECK_THROWS_AS(ExponentPair(0.6, 1.0), OutOfRange);
  CHECK_THROWS_AS(ExponentPair(0.4, 0.4, true), OutOfRange);
  CHECK_NOTHROW(ExponentPair(0.7, 0.4, true));
  CHECK_THROWS_AS(TimeGrid(0.0, 10), OutOfRange);
  CHECK_THROWS_AS(TimeGrid(0.1, 1), OutOfRange);
  const auto g = TimeGrid::from_horizon(2.0, 8);
  CHECK(g.nodes() == 9);
  CHECK(g.horizon() == doctest::Approx(2.0));
}

TEST_CASE("profiles") {
  const TemporalProfile pulse = TriangularPulse{3.0};
  CHECK(profile_value(pulse, 0.0) == 0.0);
  CHECK(profile_value(pulse, 0.5) == doctest::Approx(0.5));
  CHECK(profile_value(pulse, 1.0) == doctest::Approx(1.0));
  CHECK(profile_value(pulse, 1.5) == doctest::Approx(0.5));
  CHECK(profile_value(pulse, 2.0) == 0.0);
  CHECK(profile_value(pulse, 2.5) == 0.0);
  const TemporalProfile b = SmoothBump{2.0};
  CHECK(profile_value(b, 1.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(profile_value(b, 0.0) == 0.0);
  CHECK(profile_value(b, 2.0) == 0.0);
  const TimeGrid g(0.5, 9);
  CHECK(profile_support_end(pulse, g) == doctest::Approx(2.0));
  CHECK(profile_support_end(SampledProfile{{0, 1, 1, 0, 0, 0, 0, 0, 0}}, g) == doctest::Approx(1.5));
  CHECK_THROWS_AS(sample_profile(SampledProfile{{0, 1}}, g), ShapeMismatch);
  CHECK(profile_tag(pulse) == "pulse:3");
}

TEST_CASE("kernel_K examples") {
  const ExponentPair e(0.5, 0.5);
  const cplx k = kernel_K(0.0, e, 1.0);
  CHECK(std::abs(k - (-I / std::sqrt(M_PI))) < 1e-14);
  CHECK_THROWS_AS(kernel_K(1.0, e, 0.0), OutOfRange);

  // Laplace transform of the kernel against 1 / (i s^alpha + lambda^beta).
  const ExponentPair e2(0.6, 0.4);
  const double s = 3.0, lambda = 2.0;
  const cplx oracle = integrate_half_line([&](double t) { return std::exp(-s * t) * kernel_K(lambda, e2, t); }, 0.0);
  const cplx expected = 1.0 / (I * std::pow(s, 0.6) + std::pow(lambda, 0.4));
  CHECK(std::abs(oracle - expected) / std::abs(expected) < 1e-7);
}

TEST_CASE("kernel_K obeys the sector bound") {
  for (double alpha : {0.3, 0.6, 0.9}) {
    const ExponentPair e(alpha, 0.5);
    double worst = 0.0;
    for (double lambda : {0.5, 4.0, 100.0}) {
      const double mu = std::sqrt(lambda);
      for (int k = 0; k <= 120; ++k) {
        const double t = std::pow(10.0, -3.0 + 7.0 * k / 120.0);
        const double ta = std::pow(t, alpha);
        const double bound = ta / t * std::min(1.0, 1.0 / (mu * ta));
        worst = std::max(worst, std::abs(kernel_K(lambda, e, t)) / bound);
      }
    }
    CHECK(worst < 5.0);
  }
}

TEST_CASE("solve_modal examples") {
  const ExponentPair e(0.6, 0.4);
  const TimeGrid g = TimeGrid::from_horizon(1.0, 200);
  std::vector<double> zero(g.nodes(), 0.0), ramp(g.nodes());
  for (std::size_t n = 0; n < g.nodes(); ++n) ramp[n] = g.t(n);
  for (const cplx& v : solve_modal(3.0, e, zero, g.h())) CHECK(v == cplx{});

  // lambda = 0, f = tau: -i Gamma(2) / Gamma(2 + alpha) at t = 1.
  for (double alpha : {0.3, 0.6, 0.9}) {
    const ExponentPair ea(alpha, 0.4);
    const auto u = solve_modal(0.0, ea, ramp, g.h());
    const cplx expected = -I * boost::math::tgamma(2.0) / boost::math::tgamma(2.0 + alpha);
    CHECK(std::abs(u.back() - expected) < 1e-10);
    CHECK(u.front() == cplx{});
  }
  std::vector<double> bad = ramp;
  bad[0] = 0.1;
  CHECK_THROWS_AS(solve_modal(1.0, e, bad, g.h()), NonzeroInitialValue);
}

TEST_CASE("convolution and integration-by-parts forms agree") {
  const TimeGrid g = TimeGrid::from_horizon(20.0, 1000);
  const auto f = sample_profile(SmoothBump{2.0}, g);
  for (double alpha : {0.3, 0.6, 0.9}) {
    for (double beta : {0.4, 0.8}) {
      const ExponentPair e(alpha, beta);
      for (double lambda : {0.0, 1.0, 5.0, 40.0}) {
        const auto a = solve_modal(lambda, e, f, g.h());
        const auto b = solve_modal_ibp(lambda, e, f, g.h());
        double scale = 0.0;
        for (const cplx& v : b) scale = std::max(scale, std::abs(v));
        INFO(alpha, " ", beta, " ", lambda);
        CHECK(max_abs_diff(a, b) / scale < 1e-8);
      }
    }
  }
}

TEST_CASE("modal kernel weights switch smoothly") {
  // Past the switch the corrected trapezoid must match the primitive-based weights.
  const double alpha = 0.7, mu = 2.0, h = 0.01;
  const std::size_t n = 400;
  const ModalKernel k(mu, alpha, h, n);
  auto psi = [&](double t) {
    const double ta = std::pow(t, alpha);
    return -I * ta * t * ml_eval(alpha, alpha + 2.0, I * mu * ta);
  };
  for (std::size_t m : {ModalKernel::kSwitch, std::size_t(200), std::size_t(399)}) {
    const cplx exact = (psi(h * (m + 1)) - 2.0 * psi(h * m) + psi(h * (m - 1.0))) / h;
    CHECK(std::abs(k.weights()[m] - exact) / std::abs(exact) < 1e-7);
  }
}

TEST_CASE("uniform modal bound") {
  const TimeGrid g = TimeGrid::from_horizon(30.0, 1500);
  const double T0 = 2.0;
  const auto f = sample_profile(SmoothBump{T0}, g);
  double df2 = 0.0;
  for (std::size_t n = 0; n + 1 < f.size(); ++n) df2 += std::pow((f[n + 1] - f[n]) / g.h(), 2) * g.h();
  const double rhs = std::sqrt(T0 * df2);
  for (double alpha : {0.3, 0.6, 0.9}) {
    const ExponentPair e(alpha, 0.5);
    const double C = modal_bound_constant(alpha);
    double fitted = 0.0;
    for (double lambda : {1.0, 2.0, 5.0, 13.0, 50.0, 200.0}) {
      double sup = 0.0;
      for (const cplx& v : solve_modal(lambda, e, f, g.h())) sup = std::max(sup, std::abs(v));
      fitted = std::max(fitted, std::pow(lambda, 0.5) * sup / rhs);
    }
    CHECK(fitted <= C);
    CHECK(fitted > 0.0);
  }
}

TEST_CASE("solve_field: orthogonal source gives zero field") {
  FieldSetup s;
  auto xi = s.random_xi(1);
  // Remove the components along every listed eigenfunction restricted to W1.
  const auto& phi = s.basis.values();
  Eigen::MatrixXd A(s.w1.size(), phi.cols());
  Eigen::VectorXd x(s.w1.size());
  for (std::size_t i = 0; i < s.w1.size(); ++i) {
    const double sw = std::sqrt(s.w1.weights()[i]);
    A.row(Eigen::Index(i)) = sw * phi.row(Eigen::Index(s.w1.nodes()[i]));
    x(Eigen::Index(i)) = sw * xi[i];
  }
  // Q spans the column space even when A is rank deficient; project twice for round-off.
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(A.rows(), A.cols());
  Eigen::VectorXd r = x - Q * (Q.transpose() * x);
  r -= Q * (Q.transpose() * r);
  for (std::size_t i = 0; i < s.w1.size(); ++i) xi[i] = r(Eigen::Index(i)) / std::sqrt(s.w1.weights()[i]);

  const ExponentPair e(0.6, 0.4);
  const TimeGrid g = TimeGrid::from_horizon(10.0, 500);
  const auto sol = solve_field({xi, SmoothBump{2.0}}, s.basis, e, g, s.w1, s.w2);
  const auto ref = solve_field({s.random_xi(1), SmoothBump{2.0}}, s.basis, e, g, s.w1, s.w2);
  CHECK(sol.on_w2.cwiseAbs().maxCoeff() < 1e-12 * ref.on_w2.cwiseAbs().maxCoeff());
}

TEST_CASE("solve_field: single mode matches the modal formula") {
  FieldSetup s;
  const std::vector<std::size_t> keep{1};
  const auto sub = s.table.subset(keep);
  const SampledBasis b(s.m, sub);
  std::vector<double> xi(s.w1.size());
  for (std::size_t i = 0; i < xi.size(); ++i) xi[i] = b.values()(Eigen::Index(s.w1.nodes()[i]), 0);

  const ExponentPair e(0.6, 0.4);
  const TimeGrid g = TimeGrid::from_horizon(10.0, 500);
  const auto sol = solve_field({xi, SmoothBump{2.0}}, b, e, g, s.w1, s.w2);
  const auto f = sample_profile(SmoothBump{2.0}, g);
  const auto r = solve_modal(sub.entries[0].lambda, e, f, g.h());
  double err = 0.0, scale = 0.0;
  for (std::size_t j = 0; j < s.w2.size(); ++j) {
    double pj = 0.0;
    for (std::size_t col = 0; col < b.columns(); ++col) {
      double c = 0.0;
      for (std::size_t i = 0; i < s.w1.size(); ++i)
        c += s.w1.weights()[i] * xi[i] * b.values()(Eigen::Index(s.w1.nodes()[i]), Eigen::Index(col));
      pj += c * b.values()(Eigen::Index(s.w2.nodes()[j]), Eigen::Index(col));
    }
    for (std::size_t n = 0; n < g.nodes(); ++n) {
      err = std::max(err, std::abs(sol.on_w2(Eigen::Index(n), Eigen::Index(j)) - r[n] * pj));
      scale = std::max(scale, std::abs(r[n] * pj));
    }
  }
  CHECK(err < 1e-13 * scale);
}

TEST_CASE("solve_field: modal residual, zero start and grid convergence") {
  FieldSetup s;
  const ExponentPair e(0.6, 0.4);
  const auto xi = s.random_xi(7);
  auto residual = [&](std::size_t intervals) {
    const TimeGrid g = TimeGrid::from_horizon(6.0, intervals);
    const auto sol = solve_field({xi, SmoothBump{2.0}}, s.basis, e, g, s.w1, s.w2);
    CHECK(sol.on_w2.row(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(sol.modal.col(0).cwiseAbs().maxCoeff() == 0.0);
    const auto f = sample_profile(SmoothBump{2.0}, g);
    std::mt19937 rng(3);
    std::uniform_int_distribution<std::size_t> pick(0, s.basis.columns() - 1);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const std::size_t col = pick(rng);
      std::vector<cplx> u(g.nodes());
      for (std::size_t n = 0; n < u.size(); ++n) u[n] = sol.modal(Eigen::Index(col), Eigen::Index(n));
      const double mu = std::pow(s.table.entries[s.basis.entry_of(col)].lambda, e.beta);
      const auto d = caputo_derivative(std::span<const cplx>(u), g.h(), e.alpha);
      // f_k = <e(xi), phi_col> f(t).
      double ck = 0.0;
      for (std::size_t i = 0; i < s.w1.size(); ++i)
        ck += s.w1.weights()[i] * xi[i] * s.basis.values()(Eigen::Index(s.w1.nodes()[i]), Eigen::Index(col));
      for (std::size_t n = 1; n < u.size(); ++n)
        worst = std::max(worst, std::abs(I * d[n] + mu * u[n] - ck * f[n]) / std::abs(ck));
    }
    return worst;
  };
  const double r1 = residual(300), r2 = residual(600);
  CHECK(r1 < 1e-2);
  CHECK(r1 / r2 >= std::pow(2.0, 1.0 - e.alpha));
}

TEST_CASE("solve_field: linearity") {
  FieldSetup s;
  const ExponentPair e(0.7, 0.5);
  const TimeGrid g = TimeGrid::from_horizon(8.0, 400);
  const auto x1 = s.random_xi(11), x2 = s.random_xi(12);
  const double c = -2.5;
  std::vector<double> x3(x1.size());
  for (std::size_t i = 0; i < x1.size(); ++i) x3[i] = x1[i] + c * x2[i];
  const auto u1 = solve_field({x1, SmoothBump{2.0}}, s.basis, e, g, s.w1, s.w2);
  const auto u2 = solve_field({x2, SmoothBump{2.0}}, s.basis, e, g, s.w1, s.w2);
  const auto u3 = solve_field({x3, SmoothBump{2.0}}, s.basis, e, g, s.w1, s.w2);
  const Eigen::MatrixXcd diff = u3.on_w2 - u1.on_w2 - c * u2.on_w2;
  CHECK(diff.cwiseAbs().maxCoeff() < 1e-10 * u3.on_w2.cwiseAbs().maxCoeff());

  // Linearity in the temporal profile.
  const auto f1 = sample_profile(SmoothBump{2.0}, g), f2 = sample_profile(TriangularPulse{3.0}, g);
  std::vector<double> f3(f1.size());
  for (std::size_t n = 0; n < f1.size(); ++n) f3[n] = f1[n] + c * f2[n];
  const auto a = solve_modal(3.0, e, f1, g.h()), b = solve_modal(3.0, e, f2, g.h());
  const auto ab = solve_modal(3.0, e, f3, g.h());
  double err = 0.0, scale = 0.0;
  for (std::size_t n = 0; n < ab.size(); ++n) {
    err = std::max(err, std::abs(ab[n] - a[n] - c * b[n]));
    scale = std::max(scale, std::abs(ab[n]));
  }
  CHECK(err < 1e-10 * scale);
}

TEST_CASE("solve_field: threads give identical output") {
  FieldSetup s;
  const ExponentPair e(0.6, 0.4);
  const TimeGrid g = TimeGrid::from_horizon(5.0, 250);
  const auto xi = s.random_xi(5);
  FieldOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const auto a = solve_field({xi, SmoothBump{2.0}}, s.basis, e, g, s.w1, s.w2, one);
  const auto b = solve_field({xi, SmoothBump{2.0}}, s.basis, e, g, s.w1, s.w2, four);
  CHECK((a.on_w2 - b.on_w2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solve_field: truncation tail warning") {
  FieldSetup s;
  const ExponentPair e(0.6, 0.4);
  const TimeGrid g = TimeGrid::from_horizon(5.0, 250);
  FieldOptions strict, loose;
  strict.tail_tolerance = 1e-6;
  loose.tail_tolerance = 1e6;
  const auto xi = s.random_xi(9);
  const auto a = solve_field({xi, SmoothBump{2.0}}, s.basis, e, g, s.w1, s.w2, strict);
  const auto b = solve_field({xi, SmoothBump{2.0}}, s.basis, e, g, s.w1, s.w2, loose);
  CHECK(a.tail_estimate > 1e-6);  // nodal noise is far from band-limited
  CHECK(a.warnings.size() == 1);
  CHECK(b.warnings.empty());
  CHECK(a.tail_estimate == b.tail_estimate);
  RegionBox bad;
  bad.lo = {0.5, 0.5, 0.0};
  bad.hi = {2.0, 2.0, 0.0};
  const auto overlap = RegionPatch::from_box(s.m, bad);
  CHECK_THROWS_AS(solve_field({xi, SmoothBump{2.0}}, s.basis, e, g, s.w1, overlap), ValidationError);
}

TEST_CASE("laplace_transform examples") {
  const TimeGrid g = TimeGrid::from_horizon(60.0, 6000);
  std::vector<cplx> one(g.nodes(), 1.0), ex(g.nodes());
  for (std::size_t n = 0; n < g.nodes(); ++n) ex[n] = std::exp(-g.t(n));
  CHECK(std::abs(laplace_transform(one, g.h(), 2.0).value - 0.5) < 1e-12);
  CHECK(std::abs(laplace_transform(ex, g.h(), 1.0).value - 0.5) < 1e-9);
  // Odd interval count exercises the linear closing panel.
  std::vector<cplx> odd(ex.begin(), ex.end() - 1);
  CHECK(std::abs(laplace_transform(odd, g.h(), 1.0).value - 0.5) < 1e-9);
  CHECK_THROWS_AS(laplace_transform(one, g.h(), cplx(0.0, 1.0)), OutOfRange);
}

TEST_CASE("power_tail_integral against quadrature") {
  for (cplx s : {cplx(0.3, 0.0), cplx(0.3, 0.5), cplx(1.0, -2.0)}) {
    for (double q : {1.3, 1.9}) {
      const double T = 20.0;
      const cplx oracle = integrate_half_line([&](double t) { return std::exp(-s * t) * std::pow(t, -q); }, T);
      CHECK(std::abs(power_tail_integral(q, T, s) - oracle) < 1e-10 * std::abs(oracle));
    }
  }
}

TEST_CASE("Laplace transform of modal solutions divides out the symbol") {
  const ExponentPair e(0.6, 0.4);
  const TimeGrid g = TimeGrid::from_horizon(60.0, 6000);
  const auto a = sample_profile(SmoothBump{2.0}, g);
  LaplaceOptions opt;
  opt.tail_exponent = 1.0 + e.alpha;
  for (double lambda : {0.0, 2.0, 9.0}) {
    const auto u = solve_modal(lambda, e, a, g.h());
    for (cplx s : {cplx(1.0, 0.0), cplx(0.5, 0.5), cplx(0.3, -1.0)}) {
      const cplx La = laplace_transform_pl(a, g.h(), s);
      const cplx expected = La / (I * std::pow(s, e.alpha) + std::pow(lambda, e.beta));
      const auto got = laplace_transform(u, g.h(), s, opt);
      CHECK(std::abs(got.value - expected) < 1e-4 * std::abs(expected));
    }
  }
}

TEST_CASE("laplace_weights reproduce the transform") {
  const ExponentPair e(0.7, 0.5);
  const TimeGrid g = TimeGrid::from_horizon(30.0, 1501);
  const auto a = sample_profile(SmoothBump{2.0}, g);
  const auto u = solve_modal(4.0, e, a, g.h());
  LaplaceOptions opt;
  opt.tail_exponent = 1.7;
  for (cplx s : {cplx(0.4, 0.0), cplx(0.2, 2.0)}) {
    const auto w = laplace_weights(u.size(), g.h(), s, opt.tail_exponent);
    cplx acc{};
    for (std::size_t n = 0; n < u.size(); ++n) acc += w[n] * u[n];
    const cplx ref = laplace_transform(u, g.h(), s, opt).value;
    CHECK(std::abs(acc - ref) < 1e-12 * std::abs(ref));
  }
}
