#include "fracinv/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "fracinv/errors.hpp"

namespace fracinv {

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw ValidationError("Gauss-Legendre needs n >= 1");
  QuadratureRule q;
  q.nodes.resize(n);
  q.weights.resize(n);
  const double pi = std::acos(-1.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    q.nodes[i] = -x;
    q.nodes[n - 1 - i] = x;
    q.weights[i] = q.weights[n - 1 - i] = w;
  }
  return q;
}

QuadratureRule gauss_laguerre(int n) {
  if (n < 1) throw ValidationError("Gauss-Laguerre needs n >= 1");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    J(i, i) = 2.0 * i + 1.0;
    if (i + 1 < n) J(i, i + 1) = J(i + 1, i) = i + 1.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  QuadratureRule q;
  for (int i = 0; i < n; ++i) {
    q.nodes.push_back(es.eigenvalues()(i));
    const double v = es.eigenvectors()(0, i);
    q.weights.push_back(v * v);
  }
  return q;
}

}  // namespace fracinv
