#ifndef ALGEBROID_KILLING_HPP
#define ALGEBROID_KILLING_HPP

#include "algebroid/dynamics.hpp"

namespace algebroid {

/// Tangent lift of a section to a vector field on E:
///   d_T(u) = u^a Q_a^A d/dx^A + (y^a Q_a^A d_A u^c - y^a u^b Q_ba^c) d/dy^c.
/// The fiber components are expressions over the base coordinates and the
/// y_<frame> velocity variables, linear in the latter.
struct LiftedField {
  const AlgebroidModel* owner = nullptr;
  std::vector<Expr> base;   // dim_m components
  std::vector<Expr> fiber;  // rank components
};

LiftedField tangent_lift(const Section& u);

/// max over sampled (x, y) of || lift([u,v]) - [lift(u), lift(v)] ||, the
/// vector-field commutator computed symbolically.
double lift_morphism_residual(const Section& u, const Section& v, int samples,
                              std::uint64_t seed);

// --- The three equivalent Killing conditions ------------------------------

/// Local form of L_u G = 0 (the five-term condition), max over samples and
/// symmetric index pairs.
double killing_residual_lemma(const Geometry& geom, const Section& u, int samples,
                              std::uint64_t seed);

/// max |{u^a pi_a, H}| over sampled base points and unit momenta.
double killing_residual_poisson(const Geometry& geom, const Section& u, int samples,
                                std::uint64_t seed);

/// max |<nabla_b u|s_c> + <nabla_c u|s_b>| over samples and frame pairs.
double killing_residual_connection(const Geometry& geom, const Section& u, int samples,
                                   std::uint64_t seed);

struct KillingReport {
  std::string section;
  double residual_lemma = 0.0;
  double residual_poisson = 0.0;
  double residual_connection = 0.0;
  double normalization = 1.0;  // max(1, ||u||_inf, ||G||_inf) over the box
  double tolerance = 1e-8;     // applied to normalized residuals
  bool verdict = false;
};

/// Runs all three residual forms; throws std::logic_error if their verdicts
/// disagree (internal-consistency failure).
KillingReport killing_check(const Geometry& geom, const Section& u, int samples,
                            std::uint64_t seed, double tolerance = 1e-8);

/// max_t |<u|gamma(t)> - <u|gamma(0)>| along a geodesic trajectory on E.
double charge_along_geodesic(const Geometry& geom, const Section& u, const Trajectory& traj);

// --- Killing transport ------------------------------------------------------

struct TransportData {
  Eigen::VectorXd u;  // section value, rank entries
  Eigen::MatrixXd l;  // L_ab = (nabla_a u)^c G_cb, antisymmetric
};

/// Initial data consistent with a known section: u(p) and L_ab(p).
TransportData transport_data_of(const Geometry& geom, const Section& u,
                                const Eigen::VectorXd& p);

/// Propagates (u, L) along the admissible curve underlying `curve` (a
/// geodesic trajectory) by integrating the first-order transport pair driven
/// by the curvature; the geodesic itself is re-integrated alongside with the
/// same step so no interpolation enters. Requires ||L + L^T|| < 1e-12.
TransportData killing_transport(const Geometry& geom, const TransportData& data0,
                                const Trajectory& curve);

// --- Discovery ---------------------------------------------------------------

struct KillingBasis {
  std::vector<Section> sections;        // orthonormal coefficient vectors
  Array3<double> structure_constants;   // C(alpha, beta, gamma)
  double closure_residual = 0.0;        // max ||[u_a,u_b] - C_ab^c u_c|| on the grid
  int dim = 0;
  int bound = 0;                        // n(n+1)/2
  double gap_ratio = 0.0;               // smallest kept sigma / largest dropped sigma
  std::vector<double> singular_values;
};

/// Monomials in the base coordinates up to total degree `degree`
/// (1, x, y, x^2, x y, ...). For dim M = 0 this is just {1}.
std::vector<Expr> monomial_basis(const AlgebroidModel& m, int degree);

/// Assembles the Killing condition as a linear system over candidate
/// coefficients u^a = sum_k c_{a,k} b_k(x) on a tensor sample grid
/// (grid_per_axis points per axis over the model box) and extracts the null
/// space by SVD with relative cutoff 1e-7. Throws std::invalid_argument when
/// the system is underdetermined.
KillingBasis killing_find(const Geometry& geom, const std::vector<Expr>& basis,
                          int grid_per_axis = 5);

/// max ||nabla_v v|| over samples.
double geodesic_section_residual(const Geometry& geom, const Section& v, int samples,
                                 std::uint64_t seed);

// --- Killing-Staeckel tensors ------------------------------------------------

/// Fiberwise polynomial K(x, pi) of declared homogeneity degree in pi.
struct StackelTensor {
  Expr k;
  int degree = 0;
};

/// Validates the homogeneity degree numerically at a few sample points.
StackelTensor make_stackel(const AlgebroidModel& m, Expr k, int degree,
                           std::uint64_t seed = 42);

/// max |{K, H}_E| over sampled base points and unit momenta. The H side is
/// evaluated exactly through the inverse-derivative identity; the K side uses
/// the symbolic derivatives of the supplied expression.
double stackel_residual(const Geometry& geom, const StackelTensor& k, int samples,
                        std::uint64_t seed);

// --- Maxwell analogy ----------------------------------------------------------

struct MaxwellResult {
  double div_residual = 0.0;    // max |(nabla_a u)^a|
  double ricci_residual = 0.0;  // Prop.-3.5 form: (nab_b nab_c u)^d G_da + u^e R_e^d_ca G_db
  double trace_residual = 0.0;  // G^{cb}(nab_b nab_c u)^a + u^b Ric_bc G^{ca}
};

MaxwellResult maxwell_identities(const Geometry& geom, const Section& u, int samples,
                                 std::uint64_t seed);

/// Second covariant derivative (nabla^2_{b,c} u)^d
///   = nabla_b (nabla_c u)^d - Gamma_bc^e (nabla_e u)^d
/// evaluated exactly at p; shared by maxwell_identities, the transport pair
/// and their tests.
Array3<double> second_covariant_derivative(const Geometry& geom, const Section& u,
                                           const Eigen::VectorXd& p);

}  // namespace algebroid

#endif
