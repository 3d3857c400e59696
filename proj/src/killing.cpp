#include "algebroid/killing.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <functional>
#include <limits>

namespace algebroid {

LiftedField tangent_lift(const Section& u) {
  const AlgebroidModel& m = *u.owner;
  LiftedField lift;
  lift.owner = &m;
  lift.base.resize(static_cast<std::size_t>(m.dim_m));
  for (int A = 0; A < m.dim_m; ++A) {
    Expr e;
    for (int a = 0; a < m.rank; ++a) e = e + u.components[a] * m.anchor(a, A);
    lift.base[A] = e;
  }
  lift.fiber.resize(static_cast<std::size_t>(m.rank));
  for (int c = 0; c < m.rank; ++c) {
    Expr e;
    for (int a = 0; a < m.rank; ++a) {
      const Expr ya = Expr::variable(m.velocity_name(a));
      for (int A = 0; A < m.dim_m; ++A)
        e = e + ya * m.anchor(a, A) * u.components[c].diff(m.coords[A]);
      for (int b = 0; b < m.rank; ++b)
        e = e - ya * u.components[b] * m.bracket(b, a, c);
    }
    lift.fiber[c] = e;
  }
  return lift;
}

namespace {

// Vector-field commutator on E of two lifted fields, symbolic over the
// combined (x, y) variables.
LiftedField lift_commutator(const LiftedField& xf, const LiftedField& yf) {
  const AlgebroidModel& m = *xf.owner;
  auto apply = [&](const LiftedField& v, const Expr& f) {
    Expr e;
    for (int A = 0; A < m.dim_m; ++A) e = e + v.base[A] * f.diff(m.coords[A]);
    for (int c = 0; c < m.rank; ++c) e = e + v.fiber[c] * f.diff(m.velocity_name(c));
    return e;
  };
  LiftedField out;
  out.owner = &m;
  out.base.resize(static_cast<std::size_t>(m.dim_m));
  out.fiber.resize(static_cast<std::size_t>(m.rank));
  for (int A = 0; A < m.dim_m; ++A)
    out.base[A] = apply(xf, yf.base[A]) - apply(yf, xf.base[A]);
  for (int c = 0; c < m.rank; ++c)
    out.fiber[c] = apply(xf, yf.fiber[c]) - apply(yf, xf.fiber[c]);
  return out;
}

Binding bind_e_point(const AlgebroidModel& m, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& y) {
  Binding b = m.bind_point(x);
  for (int a = 0; a < m.rank; ++a) b[m.velocity_name(a)] = y[a];
  return b;
}

Eigen::VectorXd draw_unit(Rng& rng, int n) {
  for (;;) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(-1.0, 1.0);
    const double norm = v.norm();
    if (norm > 1e-3) return v / norm;
  }
}

}  // namespace

double lift_morphism_residual(const Section& u, const Section& v, int samples,
                              std::uint64_t seed) {
  const AlgebroidModel& m = *u.owner;
  const LiftedField lhs = tangent_lift(bracket_sections(u, v));
  const LiftedField rhs = lift_commutator(tangent_lift(u), tangent_lift(v));

  Rng rng(seed);
  const int n = m.dim_m == 0 ? std::max(1, samples / 4) : samples;
  double worst = 0.0;
  for (int s = 0; s < n; ++s) {
    Eigen::VectorXd x(m.dim_m);
    for (int i = 0; i < m.dim_m; ++i) x[i] = rng.uniform(m.box[i][0], m.box[i][1]);
    Eigen::VectorXd y(m.rank);
    for (int i = 0; i < m.rank; ++i) y[i] = rng.uniform(-1.0, 1.0);
    const Binding b = bind_e_point(m, x, y);
    for (int A = 0; A < m.dim_m; ++A)
      worst = std::max(worst, std::abs(lhs.base[A].eval(b) - rhs.base[A].eval(b)));
    for (int c = 0; c < m.rank; ++c)
      worst = std::max(worst, std::abs(lhs.fiber[c].eval(b) - rhs.fiber[c].eval(b)));
  }
  return worst;
}

double killing_residual_lemma(const Geometry& geom, const Section& u, int samples,
                              std::uint64_t seed) {
  const AlgebroidModel& m = geom.model();
  const MetricModel& met = geom.metric_model();
  const int n = m.rank;

  // Build the five-term condition per symmetric pair once.
  Array2<Expr> cond(n, n);
  for (int b = 0; b < n; ++b)
    for (int c = b; c < n; ++c) {
      Expr e;
      for (int a = 0; a < n; ++a) {
        for (int A = 0; A < m.dim_m; ++A)
          e = e + u.components[a] * m.anchor(a, A) * met.entry(b, c).diff(m.coords[A]);
        for (int d = 0; d < n; ++d)
          e = e - u.components[a] * (m.bracket(a, b, d) * met.entry(d, c) +
                                     m.bracket(a, c, d) * met.entry(d, b));
      }
      for (int d = 0; d < n; ++d)
        for (int A = 0; A < m.dim_m; ++A)
          e = e + m.anchor(b, A) * u.components[d].diff(m.coords[A]) * met.entry(d, c) +
              m.anchor(c, A) * u.components[d].diff(m.coords[A]) * met.entry(d, b);
      cond(b, c) = e;
    }

  double worst = 0.0;
  BoxSampler sampler(m, seed);
  sampler.sweep(m.dim_m == 0 ? 1 : samples, [&](const Eigen::VectorXd& x) {
    const Binding bound = m.bind_point(x);
    for (int b = 0; b < n; ++b)
      for (int c = b; c < n; ++c)
        worst = std::max(worst, std::abs(cond(b, c).eval(bound)));
  });
  return worst;
}

double killing_residual_poisson(const Geometry& geom, const Section& u, int samples,
                                std::uint64_t seed) {
  const AlgebroidModel& m = geom.model();
  const int n = m.rank;

  std::vector<Expr> du(static_cast<std::size_t>(n) * std::max(m.dim_m, 1));
  for (int a = 0; a < n; ++a)
    for (int A = 0; A < m.dim_m; ++A)
      du[static_cast<std::size_t>(a) * m.dim_m + A] = u.components[a].diff(m.coords[A]);

  Rng rng(seed);
  double worst = 0.0;
  BoxSampler sampler(m, seed);
  sampler.sweep(m.dim_m == 0 ? 1 : samples, [&](const Eigen::VectorXd& x) {
    const Binding bound = m.bind_point(x);
    const Eigen::VectorXd pi = draw_unit(rng, n);
    const Eigen::MatrixXd ginv = geom.metric_inverse(x);
    const std::vector<Eigen::MatrixXd> dginv = geom.metric_inverse_derivative(x);
    const Eigen::VectorXd w = ginv * pi;

    double val = 0.0;
    for (int a = 0; a < n; ++a) {
      const double ua = u.components[a].eval(bound);
      for (int A = 0; A < m.dim_m; ++A) {
        const double q = m.anchor(a, A).eval(bound);
        double dfdx = 0.0;  // d(u^c pi_c)/dx^A
        for (int c = 0; c < n; ++c)
          dfdx += du[static_cast<std::size_t>(c) * m.dim_m + A].eval(bound) * pi[c];
        val += q * (ua * 0.5 * pi.dot(dginv[A] * pi) - dfdx * w[a]);
      }
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          val -= m.bracket(b, a, c).eval(bound) * pi[c] * ua * w[b];
    }
    worst = std::max(worst, std::abs(val));
  });
  return worst;
}

double killing_residual_connection(const Geometry& geom, const Section& u, int samples,
                                   std::uint64_t seed) {
  const AlgebroidModel& m = geom.model();
  double worst = 0.0;
  BoxSampler sampler(m, seed);
  sampler.sweep(m.dim_m == 0 ? 1 : samples, [&](const Eigen::VectorXd& x) {
    const Eigen::MatrixXd a = geom.frame_nabla(x, u);
    const Eigen::MatrixXd l = a * geom.metric(x);  // L_bc = (nabla_b u)^d G_dc
    worst = std::max(worst, (l + l.transpose()).cwiseAbs().maxCoeff());
  });
  return worst;
}

KillingReport killing_check(const Geometry& geom, const Section& u, int samples,
                            std::uint64_t seed, double tolerance) {
  const AlgebroidModel& m = geom.model();
  KillingReport rep;
  rep.section = u.name;
  rep.tolerance = tolerance;
  rep.residual_lemma = killing_residual_lemma(geom, u, samples, seed);
  rep.residual_poisson = killing_residual_poisson(geom, u, samples, seed);
  rep.residual_connection = killing_residual_connection(geom, u, samples, seed);

  double scale = 1.0;
  BoxSampler sampler(m, seed);
  sampler.sweep(m.dim_m == 0 ? 1 : samples, [&](const Eigen::VectorXd& x) {
    scale = std::max(scale, u.at(x).cwiseAbs().maxCoeff());
    scale = std::max(scale, geom.metric_scale(x));
  });
  rep.normalization = scale;

  const bool v1 = rep.residual_lemma / scale < tolerance;
  const bool v2 = rep.residual_poisson / scale < tolerance;
  const bool v3 = rep.residual_connection / scale < tolerance;
  if (v1 != v2 || v2 != v3)
    throw std::logic_error("Killing residual forms disagree on the verdict for section '" +
                           u.name + "'");
  rep.verdict = v1;
  return rep;
}

double charge_along_geodesic(const Geometry& geom, const Section& u, const Trajectory& traj) {
  if (traj.kind == FlowKind::Cogeodesic)
    throw std::invalid_argument("charge_along_geodesic expects a trajectory on E");
  double q0 = 0.0, worst = 0.0;
  for (std::size_t s = 0; s < traj.times.size(); ++s) {
    const Eigen::VectorXd uv = u.at(traj.base[s]);
    const double q = uv.dot(geom.metric(traj.base[s]) * traj.fiber[s]);
    if (s == 0)
      q0 = q;
    else
      worst = std::max(worst, std::abs(q - q0));
  }
  return worst;
}

TransportData transport_data_of(const Geometry& geom, const Section& u,
                                const Eigen::VectorXd& p) {
  TransportData d;
  d.u = u.at(p);
  d.l = geom.frame_nabla(p, u) * geom.metric(p);
  return d;
}

TransportData killing_transport(const Geometry& geom, const TransportData& data0,
                                const Trajectory& curve) {
  const AlgebroidModel& m = geom.model();
  const int d = m.dim_m, n = m.rank;
  if ((data0.l + data0.l.transpose()).cwiseAbs().maxCoeff() >= 1e-12)
    throw std::invalid_argument("killing_transport: L must be antisymmetric");
  if (curve.kind == FlowKind::Cogeodesic)
    throw std::invalid_argument("killing_transport: curve must live on E");
  if (curve.times.size() < 2 || curve.step <= 0.0) return data0;

  // State: [x, y, u, L]; the geodesic is re-integrated with the same step so
  // the transport pair sees exact curve data at every RK4 stage.
  const int nz = d + n + n + n * n;
  Eigen::VectorXd z(nz);
  z.head(d) = curve.base.front();
  z.segment(d, n) = curve.fiber.front();
  z.segment(d + n, n) = data0.u;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) z[d + 2 * n + a * n + b] = data0.l(a, b);

  auto rhs = [&](const Eigen::VectorXd& state, Eigen::VectorXd& out) {
    const Eigen::VectorXd x = state.head(d);
    const Eigen::VectorXd y = state.segment(d, n);
    const Eigen::VectorXd uv = state.segment(d + n, n);
    Eigen::MatrixXd l(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) l(a, b) = state[d + 2 * n + a * n + b];

    const ConnectionAt conn = geom.christoffel(x);
    const CurvatureAt cur = geom.curvature(x);
    const Eigen::MatrixXd ginv = conn.ginv;
    const GeodesicRhs gr = geodesic_rhs(geom, EPoint{x, y});

    out.resize(nz);
    out.head(d) = gr.dx;
    out.segment(d, n) = gr.dy;

    // du^a/dt = y^b (L_bc G^{ca} - Gamma_bc^a u^c)
    for (int a = 0; a < n; ++a) {
      double v = 0.0;
      for (int b = 0; b < n; ++b) {
        for (int c = 0; c < n; ++c)
          v += y[b] * (l(b, c) * ginv(c, a) - conn.gamma(a, b, c) * uv[c]);
      }
      out[d + n + a] = v;
    }
    // dL_ca/dt = y^b (Gamma_bc^e L_ea + Gamma_ba^e L_ce) - y^b u^e R_e^d_ca G_db
    for (int c = 0; c < n; ++c)
      for (int a = 0; a < n; ++a) {
        double v = 0.0;
        for (int b = 0; b < n; ++b) {
          for (int e = 0; e < n; ++e)
            v += y[b] * (conn.gamma(e, b, c) * l(e, a) + conn.gamma(e, b, a) * l(c, e));
          double curv = 0.0;
          for (int e = 0; e < n; ++e)
            for (int dd = 0; dd < n; ++dd)
              curv += uv[e] * cur.r(e, dd, c, a) * conn.g(dd, b);
          v -= y[b] * curv;
        }
        out[d + 2 * n + c * n + a] = v;
      }
  };

  const double h = curve.step;
  const std::size_t steps = curve.times.size() - 1;
  Eigen::VectorXd k1, k2, k3, k4, zt;
  for (std::size_t s = 0; s < steps; ++s) {
    rhs(z, k1);
    zt = z + 0.5 * h * k1;
    rhs(zt, k2);
    zt = z + 0.5 * h * k2;
    rhs(zt, k3);
    zt = z + h * k3;
    rhs(zt, k4);
    z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  TransportData out;
  out.u = z.segment(d + n, n);
  out.l.resize(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) out.l(a, b) = z[d + 2 * n + a * n + b];
  return out;
}

std::vector<Expr> monomial_basis(const AlgebroidModel& m, int degree) {
  std::vector<Expr> out{Expr::constant(1.0)};
  for (int total = 1; total <= degree; ++total) {
    // enumerate exponent vectors with sum == total
    std::vector<int> e(static_cast<std::size_t>(m.dim_m), 0);
    if (m.dim_m == 0) break;
    std::function<void(int, int)> rec = [&](int axis, int remaining) {
      if (axis == m.dim_m - 1) {
        e[axis] = remaining;
        Expr mono = Expr::constant(1.0);
        for (int i = 0; i < m.dim_m; ++i)
          for (int p = 0; p < e[i]; ++p) mono = mono * Expr::variable(m.coords[i]);
        out.push_back(mono);
        return;
      }
      for (int p = remaining; p >= 0; --p) {
        e[axis] = p;
        rec(axis + 1, remaining - p);
      }
    };
    rec(0, total);
  }
  return out;
}

namespace {

std::vector<Eigen::VectorXd> tensor_grid(const Box& box, int per_axis) {
  const int d = static_cast<int>(box.size());
  std::vector<Eigen::VectorXd> pts;
  if (d == 0) {
    pts.emplace_back(0);
    return pts;
  }
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  for (;;) {
    Eigen::VectorXd p(d);
    for (int i = 0; i < d; ++i) {
      const double t = per_axis == 1 ? 0.5 : static_cast<double>(idx[i]) / (per_axis - 1);
      p[i] = box[i][0] + t * (box[i][1] - box[i][0]);
    }
    pts.push_back(p);
    int axis = 0;
    while (axis < d && ++idx[axis] == per_axis) idx[axis++] = 0;
    if (axis == d) break;
  }
  return pts;
}

}  // namespace

KillingBasis killing_find(const Geometry& geom, const std::vector<Expr>& basis,
                          int grid_per_axis) {
  const AlgebroidModel& m = geom.model();
  const int n = m.rank, nb = static_cast<int>(basis.size());
  const int ncols = n * nb;
  const int npairs = n * (n + 1) / 2;

  std::vector<Expr> dbasis(static_cast<std::size_t>(nb) * std::max(m.dim_m, 1));
  for (int k = 0; k < nb; ++k)
    for (int A = 0; A < m.dim_m; ++A)
      dbasis[static_cast<std::size_t>(k) * m.dim_m + A] = basis[k].diff(m.coords[A]);

  const std::vector<Eigen::VectorXd> grid = tensor_grid(m.box, grid_per_axis);
  const int nrows = static_cast<int>(grid.size()) * npairs;
  if (nrows < ncols)
    throw std::invalid_argument("killing_find: sample grid too small for " +
                                std::to_string(ncols) + " unknowns (" +
                                std::to_string(nrows) + " equations)");

  Eigen::MatrixXd sys(nrows, ncols);
  int row = 0;
  for (const Eigen::VectorXd& p : grid) {
    const Binding bound = m.bind_point(p);
    const Eigen::MatrixXd g = geom.metric(p);
    const std::vector<Eigen::MatrixXd> dg = geom.metric_derivative(p);
    Eigen::MatrixXd q(n, std::max(m.dim_m, 1));
    for (int a = 0; a < n; ++a)
      for (int A = 0; A < m.dim_m; ++A) q(a, A) = m.anchor(a, A).eval(bound);
    Array3<double> br(n, n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) br(a, b, c) = m.bracket(a, b, c).eval(bound);
    std::vector<double> phi(static_cast<std::size_t>(nb));
    Eigen::MatrixXd dphi(nb, std::max(m.dim_m, 1));
    for (int k = 0; k < nb; ++k) {
      phi[k] = basis[k].eval(bound);
      for (int A = 0; A < m.dim_m; ++A)
        dphi(k, A) = dbasis[static_cast<std::size_t>(k) * m.dim_m + A].eval(bound);
    }

    for (int b = 0; b < n; ++b)
      for (int c = b; c < n; ++c) {
        for (int a = 0; a < n; ++a)
          for (int k = 0; k < nb; ++k) {
            double coeff = 0.0;
            for (int A = 0; A < m.dim_m; ++A) {
              coeff += phi[k] * q(a, A) * dg[A](b, c);
              // derivative terms pick d = a
            }
            for (int A = 0; A < m.dim_m; ++A)
              coeff += q(b, A) * dphi(k, A) * g(a, c) + q(c, A) * dphi(k, A) * g(a, b);
            for (int dd = 0; dd < n; ++dd)
              coeff -= phi[k] * (br(a, b, dd) * g(dd, c) + br(a, c, dd) * g(dd, b));
            sys(row, a * nb + k) = coeff;
          }
        ++row;
      }
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double cutoff = 1e-7 * (sv.size() ? sv[0] : 0.0);
  int dim = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] <= cutoff) ++dim;

  KillingBasis out;
  out.bound = n * (n + 1) / 2;
  out.dim = dim;
  out.singular_values.assign(sv.data(), sv.data() + sv.size());
  const int m_sv = static_cast<int>(sv.size());
  if (dim == 0)
    out.gap_ratio = 0.0;
  else if (dim == m_sv)
    out.gap_ratio = 1e300;
  else
    out.gap_ratio = std::min(1e300, sv[m_sv - dim - 1] / std::max(sv[m_sv - dim], 1e-300));

  for (int j = 0; j < dim; ++j) {
    const Eigen::VectorXd c = svd.matrixV().col(m_sv - 1 - j);
    std::vector<Expr> comps(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
      Expr e;
      for (int k = 0; k < nb; ++k) e = e + Expr::constant(c[a * nb + k]) * basis[k];
      comps[a] = e;
    }
    out.sections.push_back(make_section(m, std::move(comps), "k" + std::to_string(j + 1)));
  }

  // Structure constants by least-squares projection of the brackets onto the
  // discovered span, evaluated on the same grid.
  out.structure_constants = Array3<double>(dim, dim, dim);
  if (dim > 0) {
    const int pn = static_cast<int>(grid.size()) * n;
    Eigen::MatrixXd span(pn, dim);
    for (int j = 0; j < dim; ++j) {
      int r = 0;
      for (const Eigen::VectorXd& p : grid) {
        const Eigen::VectorXd v = out.sections[j].at(p);
        for (int a = 0; a < n; ++a) span(r++, j) = v[a];
      }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(span);
    for (int alpha = 0; alpha < dim; ++alpha)
      for (int beta = 0; beta < dim; ++beta) {
        if (alpha == beta) continue;
        const Section w = bracket_sections(out.sections[alpha], out.sections[beta]);
        Eigen::VectorXd wv(pn);
        int r = 0;
        for (const Eigen::VectorXd& p : grid) {
          const Eigen::VectorXd v = w.at(p);
          for (int a = 0; a < n; ++a) wv(r++) = v[a];
        }
        const Eigen::VectorXd c = qr.solve(wv);
        for (int gma = 0; gma < dim; ++gma) out.structure_constants(alpha, beta, gma) = c[gma];
        out.closure_residual =
            std::max(out.closure_residual, (span * c - wv).cwiseAbs().maxCoeff());
      }
  }
  return out;
}

double geodesic_section_residual(const Geometry& geom, const Section& v, int samples,
                                 std::uint64_t seed) {
  const AlgebroidModel& m = geom.model();
  double worst = 0.0;
  BoxSampler sampler(m, seed);
  sampler.sweep(m.dim_m == 0 ? 1 : samples, [&](const Eigen::VectorXd& x) {
    worst = std::max(worst, geom.covariant_derivative(x, v, v).cwiseAbs().maxCoeff());
  });
  return worst;
}

StackelTensor make_stackel(const AlgebroidModel& m, Expr k, int degree, std::uint64_t seed) {
  Rng rng(seed);
  for (int trial = 0; trial < 5; ++trial) {
    Binding b;
    for (int i = 0; i < m.dim_m; ++i) b[m.coords[i]] = rng.uniform(m.box[i][0], m.box[i][1]);
    Eigen::VectorXd pi(m.rank);
    for (int a = 0; a < m.rank; ++a) pi[a] = rng.uniform(-1.0, 1.0);
    const double lambda = 1.0 + rng.uniform(0.25, 1.0);
    Binding b1 = b, b2 = b;
    for (int a = 0; a < m.rank; ++a) {
      b1[m.momentum_name(a)] = pi[a];
      b2[m.momentum_name(a)] = lambda * pi[a];
    }
    const double v1 = k.eval(b1), v2 = k.eval(b2);
    const double expect = std::pow(lambda, degree) * v1;
    if (std::abs(v2 - expect) > 1e-8 * (1.0 + std::abs(expect)))
      throw std::invalid_argument("Killing-Staeckel candidate is not homogeneous of degree " +
                                  std::to_string(degree) + " in the momenta");
  }
  return StackelTensor{std::move(k), degree};
}

double stackel_residual(const Geometry& geom, const StackelTensor& kt, int samples,
                        std::uint64_t seed) {
  const AlgebroidModel& m = geom.model();
  const int n = m.rank;

  std::vector<Expr> dk_pi(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) dk_pi[a] = kt.k.diff(m.momentum_name(a));
  std::vector<Expr> dk_x(static_cast<std::size_t>(std::max(m.dim_m, 1)));
  for (int A = 0; A < m.dim_m; ++A) dk_x[A] = kt.k.diff(m.coords[A]);

  Rng rng(seed);
  double worst = 0.0;
  BoxSampler sampler(m, seed);
  sampler.sweep(m.dim_m == 0 ? 1 : samples, [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd pi = draw_unit(rng, n);
    Binding bound = m.bind_point(x);
    for (int a = 0; a < n; ++a) bound[m.momentum_name(a)] = pi[a];

    const Eigen::MatrixXd ginv = geom.metric_inverse(x);
    const std::vector<Eigen::MatrixXd> dginv = geom.metric_inverse_derivative(x);
    const Eigen::VectorXd w = ginv * pi;  // dH/dpi

    double val = 0.0;
    for (int a = 0; a < n; ++a) {
      const double dka = dk_pi[a].eval(bound);
      for (int A = 0; A < m.dim_m; ++A) {
        const double q = m.anchor(a, A).eval(bound);
        val += q * (dka * 0.5 * pi.dot(dginv[A] * pi) - dk_x[A].eval(bound) * w[a]);
      }
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          val -= m.bracket(b, a, c).eval(bound) * pi[c] * dka * w[b];
    }
    worst = std::max(worst, std::abs(val));
  });
  return worst;
}

Array3<double> second_covariant_derivative(const Geometry& geom, const Section& u,
                                           const Eigen::VectorXd& p) {
  const AlgebroidModel& m = geom.model();
  const int n = m.rank, d = m.dim_m;
  const Binding bound = m.bind_point(p);
  const ConnectionAt conn = geom.christoffel(p);
  const Array4<double> dgamma = geom.christoffel_derivative(p);

  Eigen::MatrixXd q(n, std::max(d, 1));
  Array3<double> dq(n, std::max(d, 1), std::max(d, 1));
  for (int a = 0; a < n; ++a)
    for (int A = 0; A < d; ++A) {
      q(a, A) = m.anchor(a, A).eval(bound);
      for (int B = 0; B < d; ++B)
        dq(a, A, B) = m.anchor(a, A).diff(m.coords[B]).eval(bound);
    }

  Eigen::VectorXd uv(n);
  Eigen::MatrixXd du(n, std::max(d, 1));      // du(a, A) = d_A u^a
  Array3<double> ddu(n, std::max(d, 1), std::max(d, 1));
  for (int a = 0; a < n; ++a) {
    uv[a] = u.components[a].eval(bound);
    for (int A = 0; A < d; ++A) {
      const Expr da = u.components[a].diff(m.coords[A]);
      du(a, A) = da.eval(bound);
      for (int B = 0; B < d; ++B) ddu(a, A, B) = da.diff(m.coords[B]).eval(bound);
    }
  }

  // N(c, dd) = (nabla_c u)^dd and dN(c, dd, A) = d_A N(c, dd)
  Eigen::MatrixXd nab(n, n);
  Array3<double> dnab(n, n, std::max(d, 1));
  for (int c = 0; c < n; ++c)
    for (int dd = 0; dd < n; ++dd) {
      double v = 0.0;
      for (int B = 0; B < d; ++B) v += q(c, B) * du(dd, B);
      for (int e = 0; e < n; ++e) v += conn.gamma(dd, c, e) * uv[e];
      nab(c, dd) = v;
      for (int A = 0; A < d; ++A) {
        double w = 0.0;
        for (int B = 0; B < d; ++B) w += dq(c, B, A) * du(dd, B) + q(c, B) * ddu(dd, B, A);
        for (int e = 0; e < n; ++e)
          w += dgamma(dd, c, e, A) * uv[e] + conn.gamma(dd, c, e) * du(e, A);
        dnab(c, dd, A) = w;
      }
    }

  Array3<double> out(n, n, n);  // out(b, c, dd) = (nabla^2_{b,c} u)^dd
  for (int b = 0; b < n; ++b)
    for (int c = 0; c < n; ++c)
      for (int dd = 0; dd < n; ++dd) {
        double v = 0.0;
        for (int A = 0; A < d; ++A) v += q(b, A) * dnab(c, dd, A);
        for (int e = 0; e < n; ++e)
          v += conn.gamma(dd, b, e) * nab(c, e) - conn.gamma(e, b, c) * nab(e, dd);
        out(b, c, dd) = v;
      }
  return out;
}

MaxwellResult maxwell_identities(const Geometry& geom, const Section& u, int samples,
                                 std::uint64_t seed) {
  const AlgebroidModel& m = geom.model();
  const int n = m.rank;
  MaxwellResult res;
  BoxSampler sampler(m, seed);
  sampler.sweep(m.dim_m == 0 ? 1 : samples, [&](const Eigen::VectorXd& x) {
    const Eigen::MatrixXd a = geom.frame_nabla(x, u);
    res.div_residual = std::max(res.div_residual, std::abs(a.trace()));

    const ConnectionAt conn = geom.christoffel(x);
    const CurvatureAt cur = geom.curvature(x);
    const Array3<double> d2 = second_covariant_derivative(geom, u, x);
    const Eigen::VectorXd uv = u.at(x);

    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int aa = 0; aa < n; ++aa) {
          double lhs = 0.0;
          for (int dd = 0; dd < n; ++dd) lhs += d2(b, c, dd) * conn.g(dd, aa);
          double rhs = 0.0;
          for (int e = 0; e < n; ++e)
            for (int dd = 0; dd < n; ++dd) rhs += uv[e] * cur.r(e, dd, c, aa) * conn.g(dd, b);
          res.ricci_residual = std::max(res.ricci_residual, std::abs(lhs + rhs));
        }

    for (int aa = 0; aa < n; ++aa) {
      double v = 0.0;
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          v += conn.ginv(c, b) * d2(b, c, aa);
          v += uv[b] * cur.ricci(b, c) * conn.ginv(c, aa);
        }
      res.trace_residual = std::max(res.trace_residual, std::abs(v));
    }
  });
  return res;
}

}  // namespace algebroid
