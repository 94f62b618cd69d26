#include "fracinv/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "fracinv/errors.hpp"
#include "fracinv/quadrature.hpp"

namespace fracinv {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double periodic_gap(double d) {
  d = std::fmod(std::abs(d), kTwoPi);
  return std::min(d, kTwoPi - d);
}

std::array<double, 3> unit_vector(const GridPoint& p) {
  const double st = std::sin(p.x[0]);
  return {st * std::cos(p.x[1]), st * std::sin(p.x[1]), std::cos(p.x[0])};
}

}  // namespace

ModelManifold ModelManifold::torus(int dim, int n) {
  if (dim < 1 || dim > 3) throw ValidationError("torus dimension must be 1, 2 or 3");
  if (n < 2) throw ValidationError("torus grid needs at least 2 nodes per axis");
  ModelManifold m;
  m.kind_ = ManifoldKind::torus;
  m.dim_ = dim;
  m.resolution_.assign(dim, n);
  const double h = kTwoPi / n;
  const double w = std::pow(h, dim);
  std::size_t total = 1;
  for (int d = 0; d < dim; ++d) total *= std::size_t(n);
  m.nodes_.resize(total);
  m.weights_.assign(total, w);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t r = i;
    for (int d = dim - 1; d >= 0; --d) {
      m.nodes_[i].x[d] = h * double(r % n);
      r /= n;
    }
  }
  return m;
}

ModelManifold ModelManifold::sphere(int n_theta, int n_phi) {
  if (n_theta < 1 || n_phi < 1) throw ValidationError("sphere grid needs positive resolution");
  ModelManifold m;
  m.kind_ = ManifoldKind::sphere;
  m.dim_ = 2;
  m.resolution_ = {n_theta, n_phi};
  const QuadratureRule gl = gauss_legendre(n_theta);
  const double dphi = kTwoPi / n_phi;
  for (int i = 0; i < n_theta; ++i)
    for (int j = 0; j < n_phi; ++j) {
      GridPoint p;
      p.x[0] = std::acos(gl.nodes[n_theta - 1 - i]);
      p.x[1] = dphi * j;
      m.nodes_.push_back(p);
      m.weights_.push_back(gl.weights[n_theta - 1 - i] * dphi);
    }
  return m;
}

double ModelManifold::quadrature_volume() const {
  double v = 0.0;
  for (double w : weights_) v += w;
  return v;
}

double ModelManifold::analytic_volume() const {
  return kind_ == ManifoldKind::sphere ? 2.0 * kTwoPi : std::pow(kTwoPi, dim_);
}

double ModelManifold::grid_spacing() const {
  return kind_ == ManifoldKind::sphere ? kTwoPi / 2.0 / resolution_[0] : kTwoPi / resolution_[0];
}

double ModelManifold::distance(const GridPoint& p, const GridPoint& q) const {
  if (kind_ == ManifoldKind::sphere) {
    const auto a = unit_vector(p), b = unit_vector(q);
    const double c = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    return std::acos(std::clamp(c, -1.0, 1.0));
  }
  double s = 0.0;
  for (int d = 0; d < dim_; ++d) {
    const double g = periodic_gap(p.x[d] - q.x[d]);
    s += g * g;
  }
  return std::sqrt(s);
}

std::string ModelManifold::name() const {
  return kind_ == ManifoldKind::sphere ? "S2" : "T" + std::to_string(dim_);
}

// ---------------------------------------------------------------------------

double real_spherical_harmonic(int l, int m, double theta, double phi) {
  const int am = std::abs(m);
  if (am > l) return 0.0;
  const double x = std::cos(theta), s = std::sin(theta);
  // Orthonormal associated Legendre values without the Condon-Shortley phase.
  double pmm = std::sqrt(1.0 / (2.0 * kTwoPi));
  for (int k = 1; k <= am; ++k) pmm *= std::sqrt((2.0 * k + 1.0) / (2.0 * k)) * s;
  double plm = pmm;
  if (l > am) {
    double prev = pmm;
    double cur = std::sqrt(2.0 * am + 3.0) * x * pmm;
    for (int k = am + 2; k <= l; ++k) {
      const double kk = k, mm = am;
      const double a = std::sqrt((4.0 * kk * kk - 1.0) / (kk * kk - mm * mm));
      const double b = std::sqrt(((kk - 1.0) * (kk - 1.0) - mm * mm) / (4.0 * (kk - 1.0) * (kk - 1.0) - 1.0));
      const double next = a * (x * cur - b * prev);
      prev = cur;
      cur = next;
    }
    plm = cur;
  }
  if (m == 0) return plm;
  return std::sqrt(2.0) * plm * (m > 0 ? std::cos(am * phi) : std::sin(am * phi));
}

double Eigenfunction::operator()(const GridPoint& p) const {
  if (kind == ManifoldKind::sphere) return real_spherical_harmonic(degree, order, p.x[0], p.x[1]);
  const double vol = std::pow(kTwoPi, dim);
  if (trig == 0) return 1.0 / std::sqrt(vol);
  double phase = 0.0;
  for (int d = 0; d < dim; ++d) phase += wave[d] * p.x[d];
  const double amp = std::sqrt(2.0 / vol);
  return trig == 1 ? amp * std::cos(phase) : amp * std::sin(phase);
}

std::size_t SpectrumTable::basis_size() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.functions.size();
  return n;
}

SpectrumTable SpectrumTable::subset(std::span<const std::size_t> keep) const {
  SpectrumTable t = *this;
  t.entries.clear();
  for (std::size_t k : keep) {
    if (k >= entries.size()) throw OutOfRange("spectrum entry index out of range");
    t.entries.push_back(entries[k]);
  }
  return t;
}

SpectrumTable enumerate_spectrum(const ModelManifold& m, double lambda_max) {
  if (!(lambda_max >= 0.0) || !std::isfinite(lambda_max))
    throw ValidationError("lambda_max must be finite and non-negative");
  SpectrumTable t;
  t.kind = m.kind();
  t.dim = m.dim();
  t.lambda_max = lambda_max;

  if (m.kind() == ManifoldKind::sphere) {
    int L = 0;
    while (double(L + 1) * double(L + 2) <= lambda_max) ++L;
    if (m.resolution()[0] < L + 1 || m.resolution()[1] < 2 * L + 1)
      throw ResolutionError("sphere grid cannot resolve degree " + std::to_string(L));
    for (int l = 0; l <= L; ++l) {
      SpectralEntry e;
      e.key = l;
      e.lambda = double(l) * double(l + 1);
      for (int mm = -l; mm <= l; ++mm) {
        Eigenfunction f;
        f.kind = ManifoldKind::sphere;
        f.dim = 2;
        f.degree = l;
        f.order = mm;
        e.functions.push_back(f);
      }
      t.entries.push_back(std::move(e));
    }
    return t;
  }

  const int d = m.dim();
  const int M = int(std::floor(std::sqrt(lambda_max) + 1e-12));
  std::map<long, SpectralEntry> groups;
  int max_component = 0;
  std::array<int, 3> v{};
  const int span = 2 * M + 1;
  long count = 1;
  for (int i = 0; i < d; ++i) count *= span;
  for (long idx = 0; idx < count; ++idx) {
    long r = idx;
    long norm2 = 0;
    for (int i = d - 1; i >= 0; --i) {
      v[i] = int(r % span) - M;
      r /= span;
      norm2 += long(v[i]) * v[i];
    }
    if (double(norm2) > lambda_max) continue;
    int first = 0;
    for (int i = 0; i < d; ++i)
      if (v[i] != 0) {
        first = v[i];
        break;
      }
    if (first < 0) continue;
    SpectralEntry& e = groups[norm2];
    e.key = norm2;
    e.lambda = double(norm2);
    Eigenfunction f;
    f.kind = ManifoldKind::torus;
    f.dim = d;
    f.wave = v;
    if (norm2 == 0) {
      e.functions.push_back(f);
      continue;
    }
    for (int i = 0; i < d; ++i) max_component = std::max(max_component, std::abs(v[i]));
    f.trig = 1;
    e.functions.push_back(f);
    f.trig = 2;
    e.functions.push_back(f);
  }
  if (m.resolution()[0] <= 2 * max_component)
    throw ResolutionError("torus grid with " + std::to_string(m.resolution()[0]) +
                          " nodes per axis cannot resolve wavenumber " + std::to_string(max_component));
  for (auto& [key, e] : groups) t.entries.push_back(std::move(e));
  return t;
}

// ---------------------------------------------------------------------------

SampledBasis::SampledBasis(const ModelManifold& m, const SpectrumTable& t) : manifold_(m), table_(t) {
  if (t.kind != m.kind() || t.dim != m.dim())
    throw ValidationError("spectrum table does not belong to this manifold");
  values_.resize(Eigen::Index(m.size()), Eigen::Index(t.basis_size()));
  Eigen::Index col = 0;
  for (std::size_t e = 0; e < t.entries.size(); ++e) {
    first_col_.push_back(std::size_t(col));
    for (const auto& f : t.entries[e].functions) {
      for (std::size_t i = 0; i < m.size(); ++i) values_(Eigen::Index(i), col) = f(m.node(i));
      entry_of_.push_back(e);
      ++col;
    }
  }
  first_col_.push_back(std::size_t(col));
}

// ---------------------------------------------------------------------------

RegionPatch RegionPatch::from_box(const ModelManifold& m, const RegionBox& box) {
  RegionPatch w;
  w.box_ = box;
  for (int d = 0; d < m.dim(); ++d)
    if (!(box.hi[d] > box.lo[d])) throw ValidationError("region box must have hi > lo on every axis");
  for (std::size_t i = 0; i < m.size(); ++i) {
    bool inside = true;
    for (int d = 0; d < m.dim() && inside; ++d) {
      double x = m.node(i).x[d];
      if (m.kind() == ManifoldKind::torus && x < box.lo[d]) x += kTwoPi;
      if (m.kind() == ManifoldKind::sphere && d == 1 && x < box.lo[d]) x += kTwoPi;
      inside = x >= box.lo[d] && x < box.hi[d];
    }
    if (inside) {
      w.nodes_.push_back(i);
      w.weights_.push_back(m.weights()[i]);
    }
  }
  if (w.nodes_.empty()) throw ValidationError("region box contains no quadrature node");
  return w;
}

double RegionPatch::measure() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

bool patches_disjoint(const ModelManifold& m, const RegionPatch& a, const RegionPatch& b, double margin) {
  for (std::size_t i : a.nodes())
    for (std::size_t j : b.nodes()) {
      if (i == j) return false;
      if (m.distance(m.node(i), m.node(j)) < margin) return false;
    }
  return true;
}

// ---------------------------------------------------------------------------

std::complex<double> inner_product(const ModelManifold& m, std::span<const std::complex<double>> u,
                                   std::span<const std::complex<double>> v) {
  if (u.size() != m.size() || v.size() != m.size())
    throw ShapeMismatch("field samples do not match the manifold grid");
  std::complex<double> s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += m.weights()[i] * u[i] * std::conj(v[i]);
  return s;
}

double inner_product(const ModelManifold& m, std::span<const double> u, std::span<const double> v) {
  if (u.size() != m.size() || v.size() != m.size())
    throw ShapeMismatch("field samples do not match the manifold grid");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += m.weights()[i] * u[i] * v[i];
  return s;
}

double inner_product(const RegionPatch& w, std::span<const double> u, std::span<const double> v) {
  if (u.size() != w.size() || v.size() != w.size())
    throw ShapeMismatch("samples do not match the patch nodes");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += w.weights()[i] * u[i] * v[i];
  return s;
}

std::vector<double> zero_extension(const ModelManifold& m, const RegionPatch& w1, std::span<const double> xi) {
  if (xi.size() != w1.size()) throw ShapeMismatch("source coefficients do not match W1");
  std::vector<double> out(m.size(), 0.0);
  for (std::size_t i = 0; i < xi.size(); ++i) out[w1.nodes()[i]] = xi[i];
  return out;
}

int numerical_rank(const Eigen::VectorXd& sv, double rel_threshold) {
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) >= rel_threshold * sv(0)) ++r;
  return r;
}

ProjectorData restricted_projector(const SampledBasis& b, std::size_t entry, const RegionPatch& w1,
                                   const RegionPatch& w2, double rank_threshold) {
  if (entry >= b.table().entries.size()) throw OutOfRange("spectrum entry index out of range");
  const std::size_t c0 = b.first_column(entry), c1 = b.first_column(entry + 1);
  const Eigen::Index mk = Eigen::Index(c1 - c0);
  Eigen::MatrixXd A(Eigen::Index(w2.size()), mk), B(Eigen::Index(w1.size()), mk);
  for (Eigen::Index p = 0; p < mk; ++p) {
    for (std::size_t r = 0; r < w2.size(); ++r)
      A(Eigen::Index(r), p) = b.values()(Eigen::Index(w2.nodes()[r]), Eigen::Index(c0) + p);
    for (std::size_t c = 0; c < w1.size(); ++c)
      B(Eigen::Index(c), p) = w1.weights()[c] * b.values()(Eigen::Index(w1.nodes()[c]), Eigen::Index(c0) + p);
  }
  ProjectorData out;
  out.entry = entry;
  out.matrix = A * B.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.matrix);
  out.singular_values = svd.singularValues();
  out.rank = numerical_rank(out.singular_values, rank_threshold);
  return out;
}

Eigen::MatrixXd eigenspace_projector(const SampledBasis& b, std::size_t entry) {
  if (entry >= b.table().entries.size()) throw OutOfRange("spectrum entry index out of range");
  const std::size_t c0 = b.first_column(entry), c1 = b.first_column(entry + 1);
  const Eigen::MatrixXd Phi = b.values().middleCols(Eigen::Index(c0), Eigen::Index(c1 - c0));
  const Eigen::Map<const Eigen::VectorXd> w(b.manifold().weights().data(), Eigen::Index(b.manifold().size()));
  return Phi * (w.asDiagonal() * Phi).transpose();
}

long weyl_count(const SpectrumTable& t, double lambda) {
  if (lambda > t.lambda_max) throw OutOfRange("Weyl count requested above lambda_max");
  long n = 0;
  for (const auto& e : t.entries)
    if (e.lambda <= lambda) n += e.multiplicity();
  return n;
}

PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("power-law fit needs >= 2 points");
  const double n = double(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  PowerLawFit f;
  f.points = x.size();
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 0.0)) throw NumericalError("power-law fit has no spread in x");
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = std::log(y[i]) - f.intercept - f.slope * std::log(x[i]);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / n);
  return f;
}

PowerLawFit weyl_slope(const SpectrumTable& t) {
  std::vector<double> lam, cnt;
  long n = 0;
  for (const auto& e : t.entries) {
    n += e.multiplicity();
    if (e.lambda > 0.0) {
      lam.push_back(e.lambda);
      cnt.push_back(double(n));
    }
  }
  const std::size_t half = lam.size() / 2;
  return fit_power_law(std::span(lam).subspan(half), std::span(cnt).subspan(half));
}

double laplacian_residual(const ModelManifold& m, const Eigenfunction& phi, double lambda) {
  const double h = m.grid_spacing();
  double ss = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const GridPoint& p = m.node(i);
    const double f0 = phi(p);
    double lap = 0.0;
    if (m.kind() == ManifoldKind::torus) {
      for (int d = 0; d < m.dim(); ++d) {
        GridPoint a = p, b = p;
        a.x[d] += h;
        b.x[d] -= h;
        lap += (phi(a) - 2.0 * f0 + phi(b)) / (h * h);
      }
    } else {
      const double th = p.x[0];
      GridPoint a = p, b = p, c = p, d = p;
      a.x[0] += h;
      b.x[0] -= h;
      c.x[1] += h;
      d.x[1] -= h;
      const double st = std::sin(th);
      lap = (std::sin(th + 0.5 * h) * (phi(a) - f0) - std::sin(th - 0.5 * h) * (f0 - phi(b))) / (h * h * st) +
            (phi(c) - 2.0 * f0 + phi(d)) / (h * h * st * st);
    }
    const double r = -lap - lambda * f0;
    ss += m.weights()[i] * r * r;
  }
  return std::sqrt(ss);
}

double min_patch_norm(const SampledBasis& b, const RegionPatch& w) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < b.values().cols(); ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double v = b.values()(Eigen::Index(w.nodes()[i]), c);
      s += w.weights()[i] * v * v;
    }
    best = std::min(best, std::sqrt(s));
  }
  return best;
}

void write_spectrum_csv(std::ostream& os, const SpectrumTable& t) {
  os << "k,lambda,multiplicity\n";
  for (std::size_t k = 0; k < t.entries.size(); ++k)
    os << k << ',' << t.entries[k].lambda << ',' << t.entries[k].multiplicity() << '\n';
}

}  // namespace fracinv
