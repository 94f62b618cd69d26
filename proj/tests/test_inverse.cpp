#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "fracinv/errors.hpp"
#include "fracinv/experiment.hpp"
#include "fracinv/inverse.hpp"

using namespace fracinv;

namespace {

constexpr cplx I{0.0, 1.0};

struct Pole {
  double mu;
  Eigen::MatrixXcd residue;
};

Eigen::MatrixXcd random_low_rank(int rows, int cols, int rank, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(rows, cols);
  for (int r = 0; r < rank; ++r) {
    Eigen::VectorXd a(rows), b(cols);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng);
    P += a * b.transpose();
  }
  return P.cast<cplx>();
}

OperatorFunction pole_sum(const std::vector<Pole>& poles) {
  return [poles](cplx z) {
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(poles[0].residue.rows(), poles[0].residue.cols());
    for (const auto& p : poles) H += p.residue / (p.mu + I * z);
    return H;
  };
}

// Samples of an analytic H on the sector reachable from Re s > 0.
std::vector<LaplaceOperatorSample> sector_samples(const OperatorFunction& H, double alpha, double rho_max) {
  std::vector<LaplaceOperatorSample> out;
  for (cplx s : sector_frequencies(alpha, 0.2, rho_max, 40, 11)) {
    const cplx z = std::pow(s, alpha);
    out.push_back({s, z, H(z)});
  }
  return out;
}

const SpectralDatum& nearest(const std::vector<SpectralDatum>& data, double mu) {
  REQUIRE(!data.empty());
  return *std::min_element(data.begin(), data.end(),
                           [&](const auto& a, const auto& b) { return std::abs(a.mu - mu) < std::abs(b.mu - mu); });
}

double rel_entry_error(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

ExperimentConfig torus_config(int dim, int resolution, double alpha, double beta, double lambda_max) {
  ExperimentConfig c;
  c.manifold.kind = ManifoldKind::torus;
  c.manifold.dim = dim;
  c.manifold.resolution = {resolution};
  c.alpha = alpha;
  c.beta = beta;
  c.lambda_max = lambda_max;
  for (int d = 0; d < dim; ++d) {
    c.w1.lo[std::size_t(d)] = 0.0;
    c.w1.hi[std::size_t(d)] = dim == 1 ? 1.2 : 1.6;
    c.w2.lo[std::size_t(d)] = dim == 1 ? 2.6 : 3.2;
    c.w2.hi[std::size_t(d)] = dim == 1 ? 3.8 : 4.8;
  }
  c.ladder = PulseLadderConfig{};
  c.bump = BumpConfig{2.0, 0.02, 60.0};
  return c;
}

// T^1 truncated to the eigenvalues {0, 1, 4}.
ExperimentConfig three_mode_config(double alpha, double beta) {
  auto c = torus_config(1, 32, alpha, beta, 4.0);
  c.modes = {0, 1, 2};
  c.inversion.y_hi = 3.0;
  return c;
}

}  // namespace

// --- recover_poles on analytic operators --------------------------------------

TEST_CASE("recover_poles locates analytic poles through the rational continuation") {
  std::mt19937_64 rng(11);
  const std::vector<std::vector<double>> cases{{1.3}, {1.0, 2.2}, {0.9, 1.7, 2.6}};
  for (const auto& mus : cases) {
    CAPTURE(mus.size());
    std::vector<Pole> poles;
    for (double mu : mus) poles.push_back({mu, random_low_rank(5, 4, 2, rng)});
    const auto H = pole_sum(poles);
    RationalContinuation rc(sector_samples(H, 0.8, 1.5 * mus.back() + 1.0));
    PoleOptions po;
    po.y_lo = 0.5;
    po.y_hi = mus.back() + 0.5;
    const auto rec = recover_poles(std::cref(rc), po);
    CHECK(rec.data.size() == mus.size());
    for (const auto& p : poles) {
      const auto& d = nearest(rec.data, p.mu);
      CHECK(std::abs(d.mu - p.mu) / p.mu < 1e-6);
      CHECK(rel_entry_error(d.residue, p.residue) < 1e-4);
      CHECK(d.multiplicity == 2);
    }
  }
}

TEST_CASE("recover_poles on the operator itself matches the continuation route") {
  std::mt19937_64 rng(12);
  const std::vector<Pole> poles{{1.0, random_low_rank(4, 4, 1, rng)}, {2.0, random_low_rank(4, 4, 3, rng)}};
  PoleOptions po;
  po.y_lo = 0.5;
  po.y_hi = 2.5;
  const auto rec = recover_poles(pole_sum(poles), po);
  REQUIRE(rec.data.size() == 2);
  CHECK(rec.data[0].mu == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(rec.data[1].mu == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(rec.data[0].multiplicity == 1);
  CHECK(rec.data[1].multiplicity == 3);
  CHECK(rel_entry_error(rec.data[1].residue, poles[1].residue) < 1e-6);
}

TEST_CASE("a window between eigenvalue powers yields no poles") {
  std::mt19937_64 rng(13);
  const std::vector<Pole> poles{{1.0, random_low_rank(4, 4, 2, rng)}, {3.0, random_low_rank(4, 4, 2, rng)}};
  PoleOptions po;
  po.y_lo = 1.6;
  po.y_hi = 2.4;
  po.delta = 0.05;
  CHECK(recover_poles(pole_sum(poles), po).data.empty());
}

TEST_CASE("residue ranks do not depend on the W1 source basis") {
  std::mt19937_64 rng(14);
  const std::vector<Pole> poles{{1.0, random_low_rank(5, 5, 1, rng)}, {1.8, random_low_rank(5, 5, 3, rng)}};
  PoleOptions po;
  po.y_lo = 0.5;
  po.y_hi = 2.3;
  std::vector<int> reference;
  for (int basis = 0; basis < 3; ++basis) {
    Eigen::MatrixXcd B = Eigen::MatrixXcd::Identity(5, 5);
    if (basis > 0) B = random_low_rank(5, 5, 5, rng);
    std::vector<Pole> changed = poles;
    for (auto& p : changed) p.residue = p.residue * B;
    const auto rec = recover_poles(pole_sum(changed), po);
    std::vector<int> ranks;
    for (const auto& d : rec.data) ranks.push_back(d.multiplicity);
    if (basis == 0)
      reference = ranks;
    else
      CHECK(ranks == reference);
  }
  CHECK(reference == std::vector<int>{1, 3});
}

TEST_CASE("recover_poles rejects an empty window") {
  PoleOptions po;
  po.y_lo = 2.0;
  po.y_hi = 1.0;
  CHECK_THROWS_AS(recover_poles([](cplx) { return Eigen::MatrixXcd::Identity(1, 1); }, po), OutOfRange);
}

// --- space order ----------------------------------------------------------------

TEST_CASE("recover_beta on torus eigenvalue powers") {
  const auto m = ModelManifold::torus(2, 64);
  const auto table = enumerate_spectrum(m, 1000.0);
  std::vector<double> lambda;
  std::vector<int> mult;
  for (const auto& e : table.entries)
    if (e.lambda > 0.0) {
      lambda.push_back(e.lambda);
      mult.push_back(int(e.multiplicity()));
    }
  REQUIRE(lambda.size() >= 200);

  SUBCASE("beta = 0.4 from 200 powers") {
    std::vector<double> mu;
    for (std::size_t i = 0; i < 200; ++i) mu.push_back(std::pow(lambda[i], 0.4));
    const auto fit = recover_beta(mu, std::span<const int>(mult).first(200), 2);
    CHECK(std::abs(fit.beta_hat - 0.4) <= 0.05);
  }
  SUBCASE("raw eigenvalues give the Weyl slope d/2") {
    const auto fit = recover_beta(lambda, mult, 2);
    CHECK(std::abs(fit.fit.slope - 1.0) <= 0.1);
  }
  SUBCASE("common scaling of mu leaves the slope unchanged") {
    std::vector<double> mu, scaled;
    for (double l : lambda) {
      mu.push_back(std::pow(l, 0.7));
      scaled.push_back(3.7 * std::pow(l, 0.7));
    }
    CHECK(std::abs(recover_beta(mu, mult, 2).fit.slope - recover_beta(scaled, mult, 2).fit.slope) < 1e-10);
  }
  SUBCASE("fewer than the minimum number of powers") {
    std::vector<double> mu(lambda.begin(), lambda.begin() + 10);
    CHECK_THROWS_AS(recover_beta(mu, std::span<const int>(mult).first(10), 2), InsufficientSpectrum);
  }
}

TEST_CASE("assemble_spectral_data inverts the power and sorts") {
  std::vector<SpectralDatum> d(2);
  d[0].mu = 2.0;
  d[1].mu = 1.0;
  const auto out = assemble_spectral_data(d, 0.5);
  REQUIRE(out.size() == 2);
  CHECK(out[0].lambda == doctest::Approx(1.0));
  CHECK(out[1].lambda == doctest::Approx(4.0));
  CHECK_THROWS_AS(assemble_spectral_data(d, 0.0), OutOfRange);
}

// --- wave replay -----------------------------------------------------------------

TEST_CASE("wave_weights integrate the sine kernel against piecewise-linear data") {
  const double h = 0.05;
  const std::size_t n = 81;
  for (double lambda : {0.0, 0.3, 4.0}) {
    CAPTURE(lambda);
    const auto w = wave_weights(lambda, h, n);
    // f = hat function at node j0; the quadrature must be exact for it.
    const std::size_t j0 = 10;
    const double om = std::sqrt(lambda);
    auto kernel = [&](double t) { return lambda == 0.0 ? t : std::sin(om * t) / om; };
    for (std::size_t k : {std::size_t(11), std::size_t(40), std::size_t(80)}) {
      const double t = h * double(k);
      auto hat = [&](double tau) { return std::max(0.0, 1.0 - std::abs(tau / h - double(j0))); };
      const double lo = h * double(j0 - 1), hi = std::min(t, h * double(j0 + 1));
      const double mid = h * double(j0);
      auto f = [&](double tau) { return kernel(t - tau) * hat(tau); };
      double exact = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, std::min(mid, hi));
      if (hi > mid) exact += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, mid, hi);
      CHECK(w[k - j0] == doctest::Approx(exact).epsilon(1e-10));
    }
  }
}

TEST_CASE("wave replay of a single unit mode follows sin(t - tau0)") {
  const TimeGrid g(0.002, 5001);
  const double tau0 = 1.0, width = 0.01;
  std::vector<double> profile(g.nodes());
  double mass = 0.0;
  for (std::size_t n = 0; n < g.nodes(); ++n) {
    profile[n] = std::max(0.0, 1.0 - std::abs(g.t(n) - tau0) / width);
    mass += profile[n] * g.h();
  }
  const std::vector<WaveMode> modes{{1.0, Eigen::MatrixXd::Ones(1, 1)}};
  const std::vector<double> xi{1.0};
  const auto r = wave_replay(modes, xi, profile, g);
  double err = 0.0;
  for (std::size_t n = 0; n < g.nodes(); ++n) {
    if (g.t(n) < tau0 + 2.0 * width) continue;
    err = std::max(err, std::abs(r.field(Eigen::Index(n), 0) - mass * std::sin(g.t(n) - tau0)));
  }
  CHECK(err < 1e-4 * mass);
}

TEST_CASE("a zero mode without a mean-carrying source leaves the replay unchanged") {
  const auto m = ModelManifold::torus(2, 24);
  const auto table = enumerate_spectrum(m, 5.0);
  const SampledBasis basis(m, table);
  RegionBox b1, b2;
  b1.hi = {1.6, 1.6, 0.0};
  b2.lo = {3.2, 3.2, 0.0};
  b2.hi = {4.8, 4.8, 0.0};
  const auto w1 = RegionPatch::from_box(m, b1), w2 = RegionPatch::from_box(m, b2);
  std::vector<WaveMode> with_zero, without_zero;
  for (std::size_t e = 0; e < table.entries.size(); ++e) {
    const WaveMode md{table.entries[e].lambda, restricted_projector(basis, e, w1, w2).matrix};
    with_zero.push_back(md);
    if (table.entries[e].lambda > 0.0) without_zero.push_back(md);
  }
  const auto xi = pulse_shape(m, w1);
  const TimeGrid g(0.02, 501);
  std::vector<double> profile(g.nodes());
  for (std::size_t n = 0; n < g.nodes(); ++n) profile[n] = profile_value(SmoothBump{4.0}, g.t(n));
  const auto a = wave_replay(with_zero, xi, profile, g);
  const auto b = wave_replay(without_zero, xi, profile, g);
  CHECK((a.field - b.field).norm() <= 1e-12 * b.field.norm());
}

// --- time order ---------------------------------------------------------------------

TEST_CASE("recover_alpha on the pulse ladder") {
  auto c = torus_config(2, 24, 0.6, 0.4, 100.0);
  c.bump.reset();
  const auto ms = generate_measurements(c);
  const auto fit = recover_alpha(ms);
  CHECK(std::abs(fit.alpha_hat - 0.6) <= 0.02);

  SUBCASE("scaling the source by 5 only shifts the intercept") {
    auto scaled = ms;
    for (auto& r : scaled.records) {
      for (double& x : r.xi) x *= 5.0;
      r.values *= 5.0;
    }
    CHECK(std::abs(recover_alpha(scaled).alpha_hat - fit.alpha_hat) < 1e-12);
  }
  SUBCASE("distinct time orders are told apart") {
    auto c5 = c, c7 = c;
    c5.alpha = 0.5;
    c7.alpha = 0.7;
    const double a5 = recover_alpha(generate_measurements(c5)).alpha_hat;
    const double a7 = recover_alpha(generate_measurements(c7)).alpha_hat;
    CHECK(std::abs(a5 - a7) > 0.1);
  }
  SUBCASE("a ladder shorter than the fit window") {
    auto short_ms = ms;
    short_ms.records.resize(2);
    CHECK_THROWS_AS(recover_alpha(short_ms), WindowTooShort);
  }
}

// --- Laplace-domain operator -----------------------------------------------------------

TEST_CASE("assemble_H of a single-mode world is one pole") {
  auto c = torus_config(1, 32, 0.7, 0.5, 4.0);
  c.modes = {2};  // lambda = 4, mu = 2
  c.ladder.reset();
  const auto ms = generate_measurements(c);
  const auto w = build_world(c);
  const Eigen::MatrixXcd R = restricted_projector(w.basis, 0, w.w1, w.w2).matrix.cast<cplx>();
  const std::vector<cplx> s{{0.5, 0.0}, {0.8, 1.5}, {2.0, -1.0}};
  const auto smp = assemble_H(ms, s, 0.7);
  for (const auto& x : smp) {
    const Eigen::MatrixXcd expect = R / (2.0 + I * x.z);
    CHECK((x.H - expect).norm() / expect.norm() < 1e-4);
  }
}

TEST_CASE("assemble_H matches the modal transfer function") {
  const auto c = three_mode_config(0.6, 0.5);
  const auto ms = generate_measurements(c);
  const auto w = build_world(c);
  const auto smp = assemble_H(ms, sector_frequencies(0.6, 0.2, 3.0, 8, 5), 0.6);
  for (const auto& x : smp) {
    Eigen::MatrixXcd expect = Eigen::MatrixXcd::Zero(x.H.rows(), x.H.cols());
    for (std::size_t e = 0; e < w.table.entries.size(); ++e)
      expect += restricted_projector(w.basis, e, w.w1, w.w2).matrix.cast<cplx>() /
                (std::sqrt(w.table.entries[e].lambda) + I * x.z);
    CAPTURE(x.s);
    CHECK((x.H - expect).norm() / expect.norm() < 1e-4);
  }

  SUBCASE("mean-zero sources see no zero mode") {
    const auto xi = pulse_shape(w.manifold, w.w1);
    const Eigen::Map<const Eigen::VectorXd> v(xi.data(), Eigen::Index(xi.size()));
    const Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(v.size());
    // z H(z) xi -> 0 as z -> 0 for mean-zero xi, but not for the constant.
    const auto small = assemble_H(ms, std::vector<cplx>{{0.002, 0.0}}, 0.6);
    const auto& x = small[0];
    const double mz = (x.z * x.H * v.cast<cplx>()).norm() / v.norm();
    const double mc = (x.z * x.H * ones).norm() / ones.norm();
    CHECK(mz < 1e-2 * mc);
  }
}

TEST_CASE("three-mode torus: recovered powers and residues") {
  const auto c = three_mode_config(0.6, 0.5);
  const auto ms = generate_measurements(c);
  const auto r = run_inversion(ms, c.inversion);
  REQUIRE(r.poles);
  REQUIRE(r.poles->data.size() == 2);
  const auto w = build_world(c);
  for (std::size_t k = 0; k < 2; ++k) {
    const double mu = double(k + 1);
    const auto& d = r.poles->data[k];
    CHECK(std::abs(d.mu - mu) / mu < 1e-3);
    CHECK(d.multiplicity == 2);
    const Eigen::MatrixXcd P = restricted_projector(w.basis, k + 1, w.w1, w.w2).matrix.cast<cplx>();
    CHECK(rel_entry_error(d.residue, P) < 1e-3);
  }
  // Too few powers for the Weyl fit; the stage reports it instead of guessing.
  CHECK_FALSE(r.ok());
  CHECK(std::any_of(r.stages.begin(), r.stages.end(), [](const auto& s) { return s.stage == "beta" && !s.ok; }));
}
