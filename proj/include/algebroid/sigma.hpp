#ifndef ALGEBROID_SIGMA_HPP
#define ALGEBROID_SIGMA_HPP

#include <iosfwd>

#include "algebroid/killing.hpp"

namespace algebroid {

/// Declared lattice block: source dimension k (1 or 2), nodes per axis, the
/// coordinate box, source metric g_ij over the grid coordinate names (which
/// must be disjoint from the base coordinates), and per-axis boundary kind.
struct SigmaSpec {
  int k = 1;
  std::vector<int> sizes;
  Box box;
  std::vector<std::string> coords;
  std::vector<Expr> metric_upper;  // upper triangle of g_ij
  std::vector<bool> periodic;      // per axis; false = Dirichlet
};

/// Structured grid over the source manifold with its metric compiled at the
/// nodes. Dirichlet axes include both endpoints (spacing (hi-lo)/(n-1));
/// periodic axes drop the duplicate endpoint (spacing (hi-lo)/n).
class SourceManifold {
public:
  explicit SourceManifold(SigmaSpec spec);

  const SigmaSpec& spec() const { return spec_; }
  int k() const { return spec_.k; }
  int size(int axis) const { return spec_.sizes[static_cast<std::size_t>(axis)]; }
  bool periodic(int axis) const { return spec_.periodic[static_cast<std::size_t>(axis)]; }
  double spacing(int axis) const { return h_[static_cast<std::size_t>(axis)]; }
  int num_nodes() const { return nodes_; }

  int id(int i, int j = 0) const { return spec_.k == 1 ? i : i * size(1) + j; }
  void unpack(int id, int& i, int& j) const;
  double coord(int axis, int idx) const;
  Eigen::VectorXd z_of(int id) const;

  /// Node is on a Dirichlet boundary of some axis.
  bool is_boundary(int id) const;

  /// g, g^{-1} and sqrt|det g| at a coordinate point.
  void metric_at(const Eigen::VectorXd& z, Eigen::MatrixXd& g, Eigen::MatrixXd& ginv,
                 double& sqrtg) const;
  /// Cached per-node metric data.
  const Eigen::MatrixXd& g(int id) const { return g_[static_cast<std::size_t>(id)]; }
  const Eigen::MatrixXd& ginv(int id) const { return ginv_[static_cast<std::size_t>(id)]; }
  double sqrtg(int id) const { return sqrtg_[static_cast<std::size_t>(id)]; }

private:
  SigmaSpec spec_;
  std::vector<double> h_;
  int nodes_ = 0;
  std::vector<CompiledExpr> gtab_;
  std::vector<Eigen::MatrixXd> g_, ginv_;
  std::vector<double> sqrtg_;
};

/// Discretized fields phi^A(z) and chi_i^a(z).
struct SigmaConfiguration {
  Array2<double> phi;  // (node, A)
  Array3<double> chi;  // (node, i, a)
};

/// phi linear between the endpoint values, chi fitted per node from the
/// admissibility condition by least squares (k = 1 only).
SigmaConfiguration linear_configuration(const Geometry& geom, const SourceManifold& src,
                                        const Eigen::VectorXd& phi_left,
                                        const Eigen::VectorXd& phi_right);

struct MorphismResidual {
  double res_a = 0.0;  // max |d_i phi^A - chi_i^a Q_a^A|
  double res_b = 0.0;  // max |d_j chi_k^a - d_k chi_j^a - chi_j^b chi_k^c Q_cb^a|, k = 2 only
};
MorphismResidual morphism_residual(const SigmaConfiguration& cfg, const Geometry& geom,
                                   const SourceManifold& src);

/// Midpoint-rule quadrature of (1/2) sqrt|g| g^{ij} chi_j^b chi_i^a G_ab.
double action(const SigmaConfiguration& cfg, const Geometry& geom, const SourceManifold& src);

/// Tension field per node: (1/sqrt g) d_j (sqrt g g^{ji} chi_i^a)
/// + g^{ij} chi_j^c chi_i^b Gamma_bc^a(phi). Zero at Dirichlet boundary nodes.
Array2<double> el_residual(const SigmaConfiguration& cfg, const Geometry& geom,
                           const SourceManifold& src);

double max_tension(const Array2<double>& tension);

struct RelaxLogEntry {
  int iter;
  double action;
  double max_tension;
  double step;
};

struct RelaxResult {
  SigmaConfiguration cfg;
  std::vector<RelaxLogEntry> log;
  bool converged = false;
  bool stalled = false;  // line search exhausted its 30 halvings
  double final_action = 0.0;
  double final_tension = 0.0;
};

/// Tension-driven descent toward harmonic maps. Each iteration applies the
/// morphism-preserving variation generated by sigma = step * tension
/// (vanishing on Dirichlet boundaries), re-solves phi from the admissibility
/// condition (integration from the left anchor for k = 1, least-squares
/// projection for k = 2), and accepts only action-non-increasing steps,
/// halving the step up to 30 times otherwise. Stops when max tension drops
/// below `tension_tol` or the iteration budget is exhausted.
RelaxResult relax(const SigmaConfiguration& cfg0, const Geometry& geom,
                  const SourceManifold& src, double step, int iters,
                  double tension_tol = 1e-6);

/// Coarse-to-fine driver for the k = 1 Dirichlet boundary-value problem:
/// solves on a chain of coarsened grids, prolonging by linear interpolation.
RelaxResult relax_multilevel(const Geometry& geom, const SourceManifold& fine,
                             const Eigen::VectorXd& phi_left, const Eigen::VectorXd& phi_right,
                             double step_factor = 0.3, int iters_per_level = 40000,
                             double tension_tol = 1e-6);

/// First-order shift along the lifted Killing directions, scaled by epsilon.
SigmaConfiguration field_redefinition(const SigmaConfiguration& cfg, const Geometry& geom,
                                      const SourceManifold& src,
                                      const std::vector<Section>& basis,
                                      const Eigen::VectorXd& xi, double epsilon);

/// |S(redefined) - S(cfg)| / epsilon.
double invariance_check(const SigmaConfiguration& cfg, const Geometry& geom,
                        const SourceManifold& src, const std::vector<Section>& basis,
                        const Eigen::VectorXd& xi, double epsilon);

/// J^j = xi^alpha u_alpha^a g^{ji} chi_i^b G_ba per node.
Array2<double> noether_current(const SigmaConfiguration& cfg, const Geometry& geom,
                               const SourceManifold& src, const std::vector<Section>& basis,
                               const Eigen::VectorXd& xi);

struct NoetherDivergence {
  double divergence = 0.0;   // max interior |(1/sqrt g) d_j (sqrt g J^j)|
  double max_tension = 0.0;  // reported alongside: how far off-shell cfg is
};
NoetherDivergence noether_divergence(const SigmaConfiguration& cfg, const Geometry& geom,
                                     const SourceManifold& src,
                                     const std::vector<Section>& basis,
                                     const Eigen::VectorXd& xi);

/// The 1D charged particle: geodesic flow with the d_E C force term.
Trajectory charged_particle(const Geometry& geom, const std::vector<Expr>& oneform,
                            const EPoint& s0, double t_end, double h);

/// (L_u C)_a = u^b Q_b^A d_A C_a + C_c (Q_a^A d_A u^c + Q_ab^c u^b), symbolic.
std::vector<Expr> lie_derivative_oneform(const Section& u, const std::vector<Expr>& oneform);

/// max_t |J(t) - J(0)| of the charged Noether current
/// J = xi u^a (chi^b G_ba + C_a) along a charged trajectory.
double charged_noether_drift(const Geometry& geom, const std::vector<Expr>& oneform,
                             const Section& u, const Trajectory& traj);

void write_config_csv(std::ostream& out, const SigmaConfiguration& cfg,
                      const SourceManifold& src, const AlgebroidModel& m);
SigmaConfiguration read_config_csv(std::istream& in, const SourceManifold& src,
                                   const AlgebroidModel& m);
void write_relax_log_csv(std::ostream& out, const std::vector<RelaxLogEntry>& log);

}  // namespace algebroid

#endif
