#pragma once

#include <vector>

namespace fracinv {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Nodes on (-1, 1), ascending.
QuadratureRule gauss_legendre(int n);
// Weight e^{-x} on (0, inf).
QuadratureRule gauss_laguerre(int n);

}  // namespace fracinv
