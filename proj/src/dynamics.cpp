#include "algebroid/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace algebroid {

double Trajectory::energy_drift() const {
  if (energy.empty()) return 0.0;
  double worst = 0.0;
  for (double e : energy) worst = std::max(worst, std::abs(e - energy.front()));
  return worst;
}

double Trajectory::admissibility_max() const {
  double worst = 0.0;
  for (double a : admissibility) worst = std::max(worst, a);
  return worst;
}

void Trajectory::write_csv(std::ostream& out, const AlgebroidModel& m) const {
  out << "t";
  for (const auto& c : m.coords) out << "," << c;
  for (int a = 0; a < m.rank; ++a)
    out << "," << (kind == FlowKind::Cogeodesic ? m.momentum_name(a) : m.velocity_name(a));
  out << ",H,admissibility\n";
  char buf[32];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t s = 0; s < times.size(); ++s) {
    emit(times[s]);
    for (int A = 0; A < m.dim_m; ++A) {
      out << ",";
      emit(base[s][A]);
    }
    for (int a = 0; a < m.rank; ++a) {
      out << ",";
      emit(fiber[s][a]);
    }
    out << ",";
    emit(energy[s]);
    out << ",";
    emit(admissibility[s]);
    out << "\n";
  }
}

double hamiltonian(const Geometry& geom, const PhasePoint& s) {
  const Eigen::MatrixXd ginv = geom.metric_inverse(s.x);
  return 0.5 * s.pi.dot(ginv * s.pi);
}

double energy(const Geometry& geom, const EPoint& s) {
  return 0.5 * s.y.dot(geom.metric(s.x) * s.y);
}

Expr poisson_bracket(const AlgebroidModel& m, const Expr& f, const Expr& h) {
  Expr out;
  for (int a = 0; a < m.rank; ++a) {
    const std::string pia = m.momentum_name(a);
    for (int A = 0; A < m.dim_m; ++A)
      out = out + m.anchor(a, A) * (f.diff(pia) * h.diff(m.coords[A]) -
                                    f.diff(m.coords[A]) * h.diff(pia));
    for (int b = 0; b < m.rank; ++b) {
      const std::string pib = m.momentum_name(b);
      for (int c = 0; c < m.rank; ++c)
        out = out - m.bracket(b, a, c) * Expr::variable(m.momentum_name(c)) *
                        f.diff(pia) * h.diff(pib);
    }
  }
  return out;
}

namespace {

std::vector<double> slots_of(const Eigen::VectorXd& x) {
  return std::vector<double>(x.data(), x.data() + x.size());
}

}  // namespace

CogeodesicRhs cogeodesic_rhs(const Geometry& geom, const PhasePoint& s) {
  const AlgebroidModel& m = geom.model();
  const auto x = slots_of(s.x);
  Eigen::MatrixXd g, ginv, q;
  geom.metric_data(x, g);
  ginv = geom.metric_inverse(s.x);
  geom.anchor_data(x, q);

  const Eigen::VectorXd w = ginv * s.pi;  // w^a = G^{ab} pi_b

  CogeodesicRhs rhs;
  rhs.dx = Eigen::VectorXd::Zero(m.dim_m);
  for (int A = 0; A < m.dim_m; ++A)
    for (int a = 0; a < m.rank; ++a) rhs.dx[A] += w[a] * q(a, A);

  const std::vector<Eigen::MatrixXd> dginv = geom.metric_inverse_derivative(s.x);
  const Binding bound = m.bind_point(s.x);

  rhs.dpi = Eigen::VectorXd::Zero(m.rank);
  for (int a = 0; a < m.rank; ++a) {
    double v = 0.0;
    for (int d = 0; d < m.rank; ++d)
      for (int c = 0; c < m.rank; ++c)
        v += w[d] * m.bracket(d, a, c).eval(bound) * s.pi[c];
    for (int A = 0; A < m.dim_m; ++A)
      v -= 0.5 * q(a, A) * s.pi.dot(dginv[A] * s.pi);
    rhs.dpi[a] = v;
  }
  return rhs;
}

GeodesicRhs geodesic_rhs(const Geometry& geom, const EPoint& s) {
  const AlgebroidModel& m = geom.model();
  const auto x = slots_of(s.x);
  Eigen::MatrixXd g, ginv, q;
  Array3<double> gamma;
  geom.connection_data(x, g, ginv, gamma);
  geom.anchor_data(x, q);

  GeodesicRhs rhs;
  rhs.dx = Eigen::VectorXd::Zero(m.dim_m);
  for (int A = 0; A < m.dim_m; ++A)
    for (int a = 0; a < m.rank; ++a) rhs.dx[A] += s.y[a] * q(a, A);
  rhs.dy = Eigen::VectorXd::Zero(m.rank);
  for (int a = 0; a < m.rank; ++a) {
    double v = 0.0;
    for (int b = 0; b < m.rank; ++b)
      for (int c = 0; c < m.rank; ++c) v += gamma(a, b, c) * s.y[c] * s.y[b];
    rhs.dy[a] = -v;
  }
  return rhs;
}

PhasePoint dualize(const Geometry& geom, const EPoint& s) {
  return PhasePoint{s.x, geom.metric(s.x) * s.y};
}

EPoint undualize(const Geometry& geom, const PhasePoint& s) {
  return EPoint{s.x, geom.metric_inverse(s.x) * s.pi};
}

Array2<Expr> field_strength(const AlgebroidModel& m, const std::vector<Expr>& oneform) {
  if (static_cast<int>(oneform.size()) != m.rank)
    throw std::invalid_argument("one-form component count does not match fiber rank");
  Array2<Expr> f(m.rank, m.rank);
  for (int b = 0; b < m.rank; ++b)
    for (int c = b + 1; c < m.rank; ++c) {
      Expr e;
      for (int A = 0; A < m.dim_m; ++A)
        e = e + m.anchor(b, A) * oneform[c].diff(m.coords[A]) -
            m.anchor(c, A) * oneform[b].diff(m.coords[A]);
      for (int ee = 0; ee < m.rank; ++ee) e = e - m.bracket(b, c, ee) * oneform[ee];
      f(b, c) = e;
      f(c, b) = -e;
    }
  return f;
}

namespace {

// State layout for RK4: [x (dim_m), fiber (rank)].
struct FlowContext {
  const Geometry* geom;
  const AlgebroidModel* m;
  FlowKind kind;
  std::vector<CompiledExpr> fstrength;  // rank*rank tapes, charged only

  void rhs(const Eigen::VectorXd& z, Eigen::VectorXd& dz) const {
    const int d = m->dim_m, n = m->rank;
    const Eigen::VectorXd x = z.head(d);
    const Eigen::VectorXd fib = z.tail(n);
    dz.resize(d + n);
    if (kind == FlowKind::Cogeodesic) {
      const CogeodesicRhs r = cogeodesic_rhs(*geom, PhasePoint{x, fib});
      dz.head(d) = r.dx;
      dz.tail(n) = r.dpi;
      return;
    }
    const GeodesicRhs r = geodesic_rhs(*geom, EPoint{x, fib});
    dz.head(d) = r.dx;
    dz.tail(n) = r.dy;
    if (kind == FlowKind::Charged) {
      const auto xs = slots_of(x);
      const Eigen::MatrixXd ginv = geom->metric_inverse(x);
      Eigen::MatrixXd fv(n, n);
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          fv(b, c) = fstrength[static_cast<std::size_t>(b) * n + c].eval(xs);
      // chi_dot^a += -chi^b F_bc G^{ca}
      dz.tail(n) -= (fib.transpose() * fv * ginv).transpose();
    }
  }
};

}  // namespace

Trajectory integrate(const Geometry& geom, FlowKind kind, const Eigen::VectorXd& x0,
                     const Eigen::VectorXd& fiber0, double t_end, double h,
                     const std::vector<Expr>* oneform) {
  const AlgebroidModel& m = geom.model();
  if (h <= 0.0 || t_end < 0.0) throw std::invalid_argument("integrate: need h > 0, t_end >= 0");
  if (kind == FlowKind::Charged && oneform == nullptr)
    throw std::invalid_argument("integrate: charged flow needs a one-form potential");

  FlowContext ctx{&geom, &m, kind, {}};
  if (kind == FlowKind::Charged) {
    const Array2<Expr> f = field_strength(m, *oneform);
    std::vector<Expr> flat;
    for (int b = 0; b < m.rank; ++b)
      for (int c = 0; c < m.rank; ++c) flat.push_back(f(b, c));
    ctx.fstrength = compile_all(flat, m.coords);
  }

  const int steps = std::max(1, static_cast<int>(std::llround(t_end / h)));
  const double dt = t_end > 0.0 ? t_end / steps : 0.0;

  Trajectory traj;
  traj.kind = kind;
  traj.step = dt;

  const int d = m.dim_m, n = m.rank;
  Eigen::VectorXd z(d + n);
  z.head(d) = x0;
  z.tail(n) = fiber0;

  Eigen::MatrixXd q;
  auto record = [&](double t) {
    const Eigen::VectorXd x = z.head(d);
    const Eigen::VectorXd fib = z.tail(n);
    traj.times.push_back(t);
    traj.base.push_back(x);
    traj.fiber.push_back(fib);
    if (kind == FlowKind::Cogeodesic) {
      traj.energy.push_back(hamiltonian(geom, PhasePoint{x, fib}));
    } else {
      traj.energy.push_back(energy(geom, EPoint{x, fib}));
    }
    // Admissibility of the flow at this state: dx from the RHS against the
    // anchor image of the fiber velocity.
    Eigen::VectorXd dz;
    ctx.rhs(z, dz);
    geom.anchor_data(slots_of(x), q);
    const Eigen::VectorXd y =
        kind == FlowKind::Cogeodesic ? Eigen::VectorXd(geom.metric_inverse(x) * fib) : fib;
    double res = 0.0;
    for (int A = 0; A < d; ++A) {
      double v = dz[A];
      for (int a = 0; a < n; ++a) v -= y[a] * q(a, A);
      res = std::max(res, std::abs(v));
    }
    traj.admissibility.push_back(res);
  };

  {
    geom.anchor_data(slots_of(x0), q);
    const Eigen::VectorXd y0 = kind == FlowKind::Cogeodesic
                                   ? Eigen::VectorXd(geom.metric_inverse(x0) * fiber0)
                                   : fiber0;
    double v = 0.0;
    for (int A = 0; A < d; ++A) {
      double s = 0.0;
      for (int a = 0; a < n; ++a) s += y0[a] * q(a, A);
      v = std::max(v, std::abs(s));
    }
    traj.vertical = v == 0.0;
  }

  record(0.0);
  Eigen::VectorXd k1, k2, k3, k4, zt;
  for (int s = 0; s < steps && t_end > 0.0; ++s) {
    ctx.rhs(z, k1);
    zt = z + 0.5 * dt * k1;
    ctx.rhs(zt, k2);
    zt = z + 0.5 * dt * k2;
    ctx.rhs(zt, k3);
    zt = z + dt * k3;
    ctx.rhs(zt, k4);
    z += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double t = dt * (s + 1);
    if (!z.allFinite() || z.cwiseAbs().maxCoeff() > 1e12) {
      traj.blew_up = true;
      traj.last_valid_time = traj.times.back();
      return traj;
    }
    record(t);
  }
  traj.last_valid_time = traj.times.back();
  return traj;
}

}  // namespace algebroid
