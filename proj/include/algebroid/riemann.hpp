#ifndef ALGEBROID_RIEMANN_HPP
#define ALGEBROID_RIEMANN_HPP

#include <Eigen/Core>
#include <memory>

#include "algebroid/algebroid.hpp"
#include "algebroid/compiled.hpp"

namespace algebroid {

class DegenerateMetricError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a freshly computed connection fails its torsion or metric
/// compatibility certificate; signals an inconsistent model or a formula
/// transcription bug, never a tolerance issue.
class CertificationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Fiber metric G_ab(x); only the upper triangle is stored, so symmetry
/// holds by construction.
struct MetricModel {
  const AlgebroidModel* owner = nullptr;
  std::vector<Expr> upper;  // (a,b) with a <= b, row-major

  Expr entry(int a, int b) const;
};

MetricModel make_metric(const AlgebroidModel& m, std::vector<Expr> upper_triangle);
MetricModel identity_metric(const AlgebroidModel& m);

/// Levi-Civita data at a point, certified on creation: the torsion and
/// frame-compatibility residuals at the point are below 1e-9.
struct ConnectionAt {
  Eigen::VectorXd point;
  Array3<double> gamma;  // gamma(a, b, c) = Gamma_bc^a
  Eigen::MatrixXd g;
  Eigen::MatrixXd ginv;
  double torsion_certificate = 0.0;
  double compat_certificate = 0.0;
};

/// Curvature data at a point.
///
/// Index convention (fixed project-wide, echoed in reports):
///   r(a, d, b, c) = R_a{}^d{}_{bc} = component along s_d of R(s_b, s_c) s_a,
///   with R(u,v)w = [nabla_u, nabla_v] w - nabla_{[u,v]} w.
/// The first lower index is the section acted on; the last two lower indices
/// form the antisymmetric argument pair. Ricci_ab = R_a{}^c{}_{cb}, which is
/// positive definite on the round sphere.
struct CurvatureAt {
  Eigen::VectorXd point;
  Array4<double> r;
  Eigen::MatrixXd ricci;
  double antisym_certificate = 0.0;
};

/// Binds a model+metric pair and owns the symbolic Christoffel pipeline:
/// Koszul numerators and their exact coordinate derivatives are built as
/// Expr once and compiled, so curvature uses exact derivatives of Gamma.
class Geometry {
public:
  explicit Geometry(const MetricModel& met);

  const AlgebroidModel& model() const { return *model_; }
  const MetricModel& metric_model() const { return met_; }

  Eigen::MatrixXd metric(const Eigen::VectorXd& x) const;
  /// Inverse with certificate ||G Ginv - I||_max < 1e-10; throws
  /// DegenerateMetricError when |det G| < 1e-12 (max |G_ab|)^rank.
  Eigen::MatrixXd metric_inverse(const Eigen::VectorXd& x) const;

  /// dG[A](a,b) = d G_ab / d x^A, exact.
  std::vector<Eigen::MatrixXd> metric_derivative(const Eigen::VectorXd& x) const;
  /// d G^{ab} / d x^A via -Ginv dG Ginv (no symbolic matrix inversion).
  std::vector<Eigen::MatrixXd> metric_inverse_derivative(const Eigen::VectorXd& x) const;

  ConnectionAt christoffel(const Eigen::VectorXd& x) const;
  /// dGamma(a, b, c, A) = d Gamma_bc^a / d x^A, exact through the pipeline.
  Array4<double> christoffel_derivative(const Eigen::VectorXd& x) const;
  CurvatureAt curvature(const Eigen::VectorXd& x) const;

  /// T(u,v) components at p; zero for the certified connection.
  Eigen::VectorXd torsion_residual(const Eigen::VectorXd& p, const Section& u,
                                   const Section& v) const;
  /// rho(u)<v|w> - <nabla_u v|w> - <v|nabla_u w> at p.
  double compat_residual(const Eigen::VectorXd& p, const Section& u, const Section& v,
                         const Section& w) const;
  /// 2<nabla_u v|w> minus the six-term Koszul right-hand side at p.
  double koszul_check(const Eigen::VectorXd& p, const Section& u, const Section& v,
                      const Section& w) const;

  /// (nabla_u v)^d at p.
  Eigen::VectorXd covariant_derivative(const Eigen::VectorXd& p, const Section& u,
                                       const Section& v) const;
  /// Frame gradient A(b, d) = (nabla_{s_b} u)^d at p.
  Eigen::MatrixXd frame_nabla(const Eigen::VectorXd& p, const Section& u) const;

  /// Frame-level torsion/compat residuals for an arbitrary Gamma array;
  /// used by the uniqueness probe.
  struct FrameResiduals {
    double torsion;
    double compat;
  };
  FrameResiduals frame_residuals(const Eigen::VectorXd& x, const Array3<double>& gamma) const;

  double metric_scale(const Eigen::VectorXd& x) const;  // max |G_ab(x)|

  /// Hot-path variant for integrators and lattice sweeps: fills G, Ginv and
  /// Gamma without recomputing the per-point certificates. The pipeline is
  /// certified separately (christoffel) at sampled points.
  void connection_data(std::span<const double> x, Eigen::MatrixXd& g, Eigen::MatrixXd& ginv,
                       Array3<double>& gamma) const;
  /// Same, metric only.
  void metric_data(std::span<const double> x, Eigen::MatrixXd& g) const;
  /// Anchor matrix Q(a, A) evaluated through the compiled table.
  void anchor_data(std::span<const double> x, Eigen::MatrixXd& q) const;
  /// Bracket coefficients Q_ab^c evaluated through the compiled table.
  void bracket_data(std::span<const double> x, Array3<double>& q) const;

private:
  const AlgebroidModel* model_;
  MetricModel met_;
  std::vector<std::string> slots_;  // base coordinates

  // Compiled tables, all over coordinate slots.
  std::vector<CompiledExpr> g_;        // rank*rank
  std::vector<CompiledExpr> dg_;       // dim_m * rank * rank
  std::vector<CompiledExpr> koszul_;   // rank^3: K(d,b,c) = 2<nabla_b s_c, s_d>
  std::vector<CompiledExpr> dkoszul_;  // dim_m * rank^3
  std::vector<CompiledExpr> anchor_;   // rank * dim_m
  std::vector<CompiledExpr> bracket_;  // rank^3

  int n_, d_;

  double gv(std::span<const double> x, int a, int b) const;
  Eigen::MatrixXd metric_at(std::span<const double> x) const;
  Eigen::MatrixXd inverse_of(const Eigen::MatrixXd& g) const;
  Array3<double> gamma_at(std::span<const double> x, const Eigen::MatrixXd& ginv) const;
};

}  // namespace algebroid

#endif
