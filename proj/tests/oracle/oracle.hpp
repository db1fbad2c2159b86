#pragma once
// Reference values computed by nested adaptive quadrature (GSL QAGP) straight
// from the kernel formulas, without the library's quadrature or assembly.

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace oracle {

struct Line {
  std::vector<double> nodes;          // sorted node coordinates
  std::function<double(double)> beta;  // order field
  double a = 1.0;                      // scalar diffusion coefficient
  double horizon = 1.0;
};

/// Symmetrized kernel a |y-x|^2 / 2 (|y-x|^{-3-2beta(x)} + |y-x|^{-3-2beta(y)})
/// inside the horizon.
double gamma_sym(const Line& l, double x, double y);

/// Dense stiffness matrix of the hat-function basis on the line mesh.
Eigen::MatrixXd stiffness(const Line& l, double tol = 1e-11);

/// 2 int (u(y) - u(x)) gamma_sym(x, y) dy over the mesh, principal value at
/// y = x; u given by nodal values.
double interaction(const Line& l, const std::vector<double>& u, double x, double tol = 1e-11);

/// int int_{[0,1]^2} |y - x|^p dy dx by nested adaptive quadrature.
double unit_square_power(double p, double tol = 1e-12);

/// int_a^b f by adaptive quadrature.
double integral(const std::function<double(double)>& f, double a, double b, double tol = 1e-12);

}  // namespace oracle
