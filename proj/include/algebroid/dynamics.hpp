#ifndef ALGEBROID_DYNAMICS_HPP
#define ALGEBROID_DYNAMICS_HPP

#include <iosfwd>
#include <vector>

#include "algebroid/riemann.hpp"

namespace algebroid {

struct PhasePoint {
  Eigen::VectorXd x;   // base point, dim_m entries
  Eigen::VectorXd pi;  // momenta, rank entries
};

struct EPoint {
  Eigen::VectorXd x;  // base point
  Eigen::VectorXd y;  // fiber velocity
};

enum class FlowKind { Cogeodesic, Geodesic, Charged };

/// Fixed-step trajectory with per-step conservation diagnostics.
struct Trajectory {
  FlowKind kind = FlowKind::Geodesic;
  double step = 0.0;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> base;       // x per state
  std::vector<Eigen::VectorXd> fiber;      // y (geodesic/charged) or pi (cogeodesic)
  std::vector<double> energy;              // H per state
  std::vector<double> admissibility;       // ||dx_rhs - y^a Q_a^A||_inf per state
  bool vertical = false;                   // y^a Q_a^A (x0) = 0 at start
  bool blew_up = false;
  double last_valid_time = 0.0;

  double energy_drift() const;
  double admissibility_max() const;
  void write_csv(std::ostream& out, const AlgebroidModel& m) const;
};

/// H(x, pi) = 1/2 G^{ab}(x) pi_b pi_a.
double hamiltonian(const Geometry& geom, const PhasePoint& s);

/// Energy of an E-point, 1/2 G_ab y^a y^b; equals hamiltonian after dualize.
double energy(const Geometry& geom, const EPoint& s);

/// The linear Poisson bracket on E^*, symbolic:
///   {F,H} = Q_a^A (dF/dpi_a dH/dx^A - dF/dx^A dH/dpi_a)
///           - Q_ba^c pi_c dF/dpi_a dH/dpi_b.
/// F and H are expressions over the declared coordinates and the pi_<frame>
/// momentum variables.
Expr poisson_bracket(const AlgebroidModel& m, const Expr& f, const Expr& h);

struct CogeodesicRhs {
  Eigen::VectorXd dx;
  Eigen::VectorXd dpi;
};
CogeodesicRhs cogeodesic_rhs(const Geometry& geom, const PhasePoint& s);

struct GeodesicRhs {
  Eigen::VectorXd dx;
  Eigen::VectorXd dy;
};
GeodesicRhs geodesic_rhs(const Geometry& geom, const EPoint& s);

/// pi_b = y^a G_ab and its inverse.
PhasePoint dualize(const Geometry& geom, const EPoint& s);
EPoint undualize(const Geometry& geom, const PhasePoint& s);

/// Classical fixed-step RK4. `fiber0` is y^a for geodesic/charged flows and
/// pi_a for the cogeodesic flow. t_end is divided into round(t_end/h) uniform
/// steps. The charged flow needs the one-form potential C_a (as expressions
/// over the base coordinates); the force uses F = d_E C assembled in
/// components. Any state component exceeding 1e12 aborts the integration at
/// the last valid time.
Trajectory integrate(const Geometry& geom, FlowKind kind, const Eigen::VectorXd& x0,
                     const Eigen::VectorXd& fiber0, double t_end, double h,
                     const std::vector<Expr>* oneform = nullptr);

/// F_bc = Q_b^A d_A C_c - Q_c^A d_A C_b - Q_bc^e C_e, the component form of
/// d_E C; antisymmetric by construction.
Array2<Expr> field_strength(const AlgebroidModel& m, const std::vector<Expr>& oneform);

}  // namespace algebroid

#endif
