#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fracinv {

enum class ManifoldKind { torus, sphere };

// Torus: Cartesian coordinates in [0, 2pi)^d. Sphere: (colatitude, longitude).
struct GridPoint {
  std::array<double, 3> x{};
};

class ModelManifold {
 public:
  static ModelManifold torus(int dim, int nodes_per_axis);
  static ModelManifold sphere(int n_colatitude, int n_longitude);

  ManifoldKind kind() const { return kind_; }
  int dim() const { return dim_; }
  const std::vector<int>& resolution() const { return resolution_; }
  std::size_t size() const { return nodes_.size(); }
  const GridPoint& node(std::size_t i) const { return nodes_[i]; }
  const std::vector<double>& weights() const { return weights_; }
  double quadrature_volume() const;
  double analytic_volume() const;
  // Finite-difference step matched to the grid (2pi/n on T^d, pi/n_theta on S^2).
  double grid_spacing() const;
  double distance(const GridPoint& p, const GridPoint& q) const;
  std::string name() const;

 private:
  ManifoldKind kind_ = ManifoldKind::torus;
  int dim_ = 1;
  std::vector<int> resolution_;
  std::vector<GridPoint> nodes_;
  std::vector<double> weights_;
};

// Real eigenfunction of -Laplacian, orthonormal in L^2(M).
struct Eigenfunction {
  ManifoldKind kind = ManifoldKind::torus;
  int dim = 1;
  std::array<int, 3> wave{};  // torus lattice vector, first nonzero entry positive
  int trig = 0;               // torus: 0 constant, 1 cosine, 2 sine
  int degree = 0;             // sphere: l
  int order = 0;              // sphere: m, negative selects sin(|m| phi)
  double operator()(const GridPoint& p) const;
};

double real_spherical_harmonic(int l, int m, double colatitude, double longitude);

struct SpectralEntry {
  long key = 0;  // |m|^2 on tori, l on the sphere
  double lambda = 0.0;
  std::vector<Eigenfunction> functions;
  int multiplicity() const { return int(functions.size()); }
};

struct SpectrumTable {
  ManifoldKind kind = ManifoldKind::torus;
  int dim = 1;
  double lambda_max = 0.0;
  std::vector<SpectralEntry> entries;

  std::size_t basis_size() const;
  // Keeps only the listed entries (in the given order); used for few-mode worlds.
  SpectrumTable subset(std::span<const std::size_t> keep) const;
};

// Analytic grouping by integer key; throws ResolutionError when the grid cannot
// integrate products of the listed eigenfunctions exactly.
SpectrumTable enumerate_spectrum(const ModelManifold& m, double lambda_max);

// Eigenfunctions tabulated on the manifold grid (nodes x basis columns).
class SampledBasis {
 public:
  SampledBasis(const ModelManifold& m, const SpectrumTable& t);
  const ModelManifold& manifold() const { return manifold_; }
  const SpectrumTable& table() const { return table_; }
  const Eigen::MatrixXd& values() const { return values_; }
  std::size_t columns() const { return std::size_t(values_.cols()); }
  std::size_t entry_of(std::size_t col) const { return entry_of_[col]; }
  std::size_t first_column(std::size_t entry) const { return first_col_[entry]; }

 private:
  ModelManifold manifold_;
  SpectrumTable table_;
  Eigen::MatrixXd values_;
  std::vector<std::size_t> entry_of_;
  std::vector<std::size_t> first_col_;
};

// Coordinate box [lo, hi) per axis; tori also accept hi > 2pi for wrap-around.
struct RegionBox {
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};
};

class RegionPatch {
 public:
  static RegionPatch from_box(const ModelManifold& m, const RegionBox& box);
  const RegionBox& box() const { return box_; }
  const std::vector<std::size_t>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return nodes_.size(); }
  double measure() const;

 private:
  RegionBox box_;
  std::vector<std::size_t> nodes_;
  std::vector<double> weights_;
};

// No shared node and every node pair at least `margin` apart.
bool patches_disjoint(const ModelManifold& m, const RegionPatch& a, const RegionPatch& b,
                      double margin);

std::complex<double> inner_product(const ModelManifold& m, std::span<const std::complex<double>> u,
                                   std::span<const std::complex<double>> v);
double inner_product(const ModelManifold& m, std::span<const double> u, std::span<const double> v);
// Patch version: u, v hold values at the patch nodes.
double inner_product(const RegionPatch& w, std::span<const double> u, std::span<const double> v);

std::vector<double> zero_extension(const ModelManifold& m, const RegionPatch& w1,
                                   std::span<const double> xi);

struct ProjectorData {
  std::size_t entry = 0;
  Eigen::MatrixXd matrix;  // |W2| x |W1|
  Eigen::VectorXd singular_values;
  int rank = 0;
};

inline constexpr double kProjectorRankThreshold = 1e-8;

int numerical_rank(const Eigen::VectorXd& singular_values, double rel_threshold);

ProjectorData restricted_projector(const SampledBasis& b, std::size_t entry, const RegionPatch& w1,
                                   const RegionPatch& w2,
                                   double rank_threshold = kProjectorRankThreshold);

// Full eigenspace projector on the grid, P = Phi_k Phi_k^T W.
Eigen::MatrixXd eigenspace_projector(const SampledBasis& b, std::size_t entry);

long weyl_count(const SpectrumTable& t, double lambda);

struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // rms of the log residuals
  std::size_t points = 0;
};

// Ordinary least squares of log y on log x.
PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y);

// Slope of log N(lambda) against log lambda over the upper half of the table.
PowerLawFit weyl_slope(const SpectrumTable& t);

// L^2(M) norm of (-Delta_h - lambda) phi, central differences at the grid spacing.
double laplacian_residual(const ModelManifold& m, const Eigenfunction& phi, double lambda);

// min over listed eigenfunctions of ||phi||_{L^2(W)}.
double min_patch_norm(const SampledBasis& b, const RegionPatch& w);

void write_spectrum_csv(std::ostream& os, const SpectrumTable& t);

}  // namespace fracinv
