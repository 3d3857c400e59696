#ifndef ALGEBROID_TESTS_SUPPORT_HPP
#define ALGEBROID_TESTS_SUPPORT_HPP

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "algebroid/model_io.hpp"

namespace testsupport {

inline std::string model_path(const std::string& name) {
  return std::string(MODELS_DIR) + "/" + name + ".json";
}

inline algebroid::LoadedModel load(const std::string& name) {
  return algebroid::load_model_file(model_path(name));
}

// Central finite difference, the independent oracle for symbolic derivatives.
inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Minimal RK4 written independently of the library integrator; used as the
// oracle for classical flows (sphere great circles, Larmor orbits).
inline Eigen::VectorXd rk4_oracle(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& rhs, Eigen::VectorXd z,
    double t_end, int steps) {
  const double h = t_end / steps;
  for (int s = 0; s < steps; ++s) {
    const Eigen::VectorXd k1 = rhs(z);
    const Eigen::VectorXd k2 = rhs(z + 0.5 * h * k1);
    const Eigen::VectorXd k3 = rhs(z + 0.5 * h * k2);
    const Eigen::VectorXd k4 = rhs(z + h * k3);
    z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return z;
}

// Classical unit-sphere geodesic RHS in (theta, phi, dtheta, dphi), written
// from the textbook Christoffel symbols, not from the library pipeline.
inline Eigen::VectorXd sphere_geodesic_rhs(const Eigen::VectorXd& z) {
  Eigen::VectorXd d(4);
  const double th = z[0], dth = z[2], dph = z[3];
  d[0] = dth;
  d[1] = dph;
  d[2] = std::sin(th) * std::cos(th) * dph * dph;
  d[3] = -2.0 * std::cos(th) / std::sin(th) * dth * dph;
  return d;
}

}  // namespace testsupport

#endif
