#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "fracinv/forward.hpp"
#include "fracinv/manifold.hpp"

namespace fracinv {

// Grid description only; enough to rebuild nodes, weights and patches.
struct ManifoldSpec {
  ManifoldKind kind = ManifoldKind::torus;
  int dim = 2;
  std::vector<int> resolution;  // nodes per axis (torus) or {n_theta, n_phi}
  ModelManifold build() const;
};

struct MeasurementRecord {
  TemporalProfile profile;
  std::vector<double> xi;  // nodal values on W1
  double h = 1.0;
  Eigen::MatrixXcd values;  // time nodes x |W2|
  TimeGrid grid() const { return TimeGrid(h, std::size_t(values.rows())); }
  bool is_pulse() const { return std::holds_alternative<TriangularPulse>(profile); }
  bool is_bump() const { return std::holds_alternative<SmoothBump>(profile); }
};

// The discrete source-to-solution map as recorded data; the generating
// exponents are not part of it.
struct MeasurementSet {
  ManifoldSpec manifold;
  RegionBox w1;
  RegionBox w2;
  std::vector<MeasurementRecord> records;
};

// Ground truth kept next to the data for benchmarking; readers of the
// measurement set never see it.
struct SealedTruth {
  double alpha = 0.0;
  double beta = 0.0;
  double lambda_max = 0.0;
};

// Layout: magic line, u64 header length + JSON header, u64 sealed length +
// sealed JSON, then the complex payload (little-endian doubles, re/im pairs,
// time-major per record). The header carries an FNV-1a checksum of the payload.
void write_dataset(const std::string& path, const MeasurementSet& ms,
                   const std::optional<SealedTruth>& sealed);
MeasurementSet read_dataset(const std::string& path);
std::optional<SealedTruth> read_sealed(const std::string& path);

}  // namespace fracinv
