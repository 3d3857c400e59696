#include "algebroid/riemann.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace algebroid {

Expr MetricModel::entry(int a, int b) const {
  const int n = owner->rank;
  if (a > b) std::swap(a, b);
  // row-major upper triangle: row a contributes (n - a) entries
  const int idx = a * n - a * (a - 1) / 2 + (b - a);
  return upper[static_cast<std::size_t>(idx)];
}

MetricModel make_metric(const AlgebroidModel& m, std::vector<Expr> upper_triangle) {
  const std::size_t expect = static_cast<std::size_t>(m.rank) * (m.rank + 1) / 2;
  if (upper_triangle.size() != expect)
    throw std::invalid_argument("metric upper triangle has wrong length");
  return MetricModel{&m, std::move(upper_triangle)};
}

MetricModel identity_metric(const AlgebroidModel& m) {
  std::vector<Expr> upper;
  for (int a = 0; a < m.rank; ++a)
    for (int b = a; b < m.rank; ++b)
      upper.push_back(Expr::constant(a == b ? 1.0 : 0.0));
  return MetricModel{&m, std::move(upper)};
}

namespace {
constexpr double kCertTol = 1e-9;

std::vector<double> to_slots(const Eigen::VectorXd& x) {
  return std::vector<double>(x.data(), x.data() + x.size());
}
}  // namespace

Geometry::Geometry(const MetricModel& met)
    : model_(met.owner), met_(met), slots_(met.owner->coords),
      n_(met.owner->rank), d_(met.owner->dim_m) {
  const AlgebroidModel& m = *model_;

  std::vector<Expr> g_exprs;
  g_exprs.reserve(static_cast<std::size_t>(n_) * n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) g_exprs.push_back(met_.entry(a, b));
  g_ = compile_all(g_exprs, slots_);

  std::vector<Expr> dg_exprs;
  for (int A = 0; A < d_; ++A)
    for (int a = 0; a < n_; ++a)
      for (int b = 0; b < n_; ++b) dg_exprs.push_back(met_.entry(a, b).diff(m.coords[A]));
  dg_ = compile_all(dg_exprs, slots_);

  // Koszul numerator K(d,b,c) = 2 <nabla_{s_b} s_c, s_d>:
  //   Q_b^A dG_cd + Q_c^A dG_db - Q_d^A dG_bc
  //   + Q_db^e G_ec + Q_dc^e G_eb + Q_bc^e G_ed.
  // The sign of the last term follows from the Koszul formula; the connection
  // certificate below fails for the opposite choice.
  std::vector<Expr> k_exprs;
  k_exprs.reserve(static_cast<std::size_t>(n_) * n_ * n_);
  for (int dd = 0; dd < n_; ++dd)
    for (int b = 0; b < n_; ++b)
      for (int c = 0; c < n_; ++c) {
        Expr k;
        for (int A = 0; A < d_; ++A) {
          k = k + m.anchor(b, A) * met_.entry(c, dd).diff(m.coords[A]);
          k = k + m.anchor(c, A) * met_.entry(dd, b).diff(m.coords[A]);
          k = k - m.anchor(dd, A) * met_.entry(b, c).diff(m.coords[A]);
        }
        for (int e = 0; e < n_; ++e) {
          k = k + m.bracket(dd, b, e) * met_.entry(e, c);
          k = k + m.bracket(dd, c, e) * met_.entry(e, b);
          k = k + m.bracket(b, c, e) * met_.entry(e, dd);
        }
        k_exprs.push_back(k);
      }
  koszul_ = compile_all(k_exprs, slots_);

  std::vector<Expr> dk_exprs;
  for (int A = 0; A < d_; ++A)
    for (const Expr& k : k_exprs) dk_exprs.push_back(k.diff(m.coords[A]));
  dkoszul_ = compile_all(dk_exprs, slots_);

  std::vector<Expr> q_exprs;
  for (int a = 0; a < n_; ++a)
    for (int A = 0; A < d_; ++A) q_exprs.push_back(m.anchor(a, A));
  anchor_ = compile_all(q_exprs, slots_);

  std::vector<Expr> br_exprs;
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b)
      for (int c = 0; c < n_; ++c) br_exprs.push_back(m.bracket(a, b, c));
  bracket_ = compile_all(br_exprs, slots_);
}

double Geometry::gv(std::span<const double> x, int a, int b) const {
  return g_[static_cast<std::size_t>(a) * n_ + b].eval(x);
}

Eigen::MatrixXd Geometry::metric_at(std::span<const double> x) const {
  Eigen::MatrixXd g(n_, n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b) g(a, b) = gv(x, a, b);
  return g;
}

Eigen::MatrixXd Geometry::inverse_of(const Eigen::MatrixXd& g) const {
  const double scale = g.cwiseAbs().maxCoeff();
  const double det = g.determinant();
  if (std::abs(det) < 1e-12 * std::pow(std::max(scale, 1e-300), n_))
    throw DegenerateMetricError("metric degenerate: |det G| = " + std::to_string(det));
  Eigen::MatrixXd ginv = g.inverse();
  const double cert = (g * ginv - Eigen::MatrixXd::Identity(n_, n_)).cwiseAbs().maxCoeff();
  if (cert >= 1e-10)
    throw DegenerateMetricError("metric inverse certificate failed: residual " +
                                std::to_string(cert));
  return ginv;
}

Eigen::MatrixXd Geometry::metric(const Eigen::VectorXd& x) const {
  return metric_at(to_slots(x));
}

Eigen::MatrixXd Geometry::metric_inverse(const Eigen::VectorXd& x) const {
  return inverse_of(metric_at(to_slots(x)));
}

double Geometry::metric_scale(const Eigen::VectorXd& x) const {
  return metric_at(to_slots(x)).cwiseAbs().maxCoeff();
}

std::vector<Eigen::MatrixXd> Geometry::metric_derivative(const Eigen::VectorXd& x) const {
  const auto xs = to_slots(x);
  std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(d_));
  for (int A = 0; A < d_; ++A) {
    out[A].resize(n_, n_);
    for (int a = 0; a < n_; ++a)
      for (int b = 0; b < n_; ++b)
        out[A](a, b) = dg_[(static_cast<std::size_t>(A) * n_ + a) * n_ + b].eval(xs);
  }
  return out;
}

std::vector<Eigen::MatrixXd> Geometry::metric_inverse_derivative(const Eigen::VectorXd& x) const {
  const Eigen::MatrixXd ginv = metric_inverse(x);
  std::vector<Eigen::MatrixXd> dg = metric_derivative(x);
  std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(d_));
  for (int A = 0; A < d_; ++A) out[A] = -ginv * dg[A] * ginv;
  return out;
}

Array3<double> Geometry::gamma_at(std::span<const double> x, const Eigen::MatrixXd& ginv) const {
  Array3<double> gamma(n_, n_, n_);
  for (int b = 0; b < n_; ++b)
    for (int c = 0; c < n_; ++c) {
      for (int a = 0; a < n_; ++a) gamma(a, b, c) = 0.0;
      for (int dd = 0; dd < n_; ++dd) {
        const double k = koszul_[(static_cast<std::size_t>(dd) * n_ + b) * n_ + c].eval(x);
        for (int a = 0; a < n_; ++a) gamma(a, b, c) += 0.5 * ginv(a, dd) * k;
      }
    }
  return gamma;
}

Geometry::FrameResiduals Geometry::frame_residuals(const Eigen::VectorXd& xv,
                                                   const Array3<double>& gamma) const {
  const auto x = to_slots(xv);
  FrameResiduals res{0.0, 0.0};
  const Eigen::MatrixXd g = metric_at(x);
  // torsion: Gamma_bc^a - Gamma_cb^a - Q_bc^a
  for (int b = 0; b < n_; ++b)
    for (int c = 0; c < n_; ++c)
      for (int a = 0; a < n_; ++a) {
        const double q = bracket_[(static_cast<std::size_t>(b) * n_ + c) * n_ + a].eval(x);
        res.torsion = std::max(res.torsion, std::abs(gamma(a, b, c) - gamma(a, c, b) - q));
      }
  // compatibility: Q_a^A dG_bc = Gamma_ab^e G_ec + Gamma_ac^e G_eb
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b)
      for (int c = 0; c < n_; ++c) {
        double lhs = 0.0;
        for (int A = 0; A < d_; ++A)
          lhs += anchor_[static_cast<std::size_t>(a) * d_ + A].eval(x) *
                 dg_[(static_cast<std::size_t>(A) * n_ + b) * n_ + c].eval(x);
        double rhs = 0.0;
        for (int e = 0; e < n_; ++e)
          rhs += gamma(e, a, b) * g(e, c) + gamma(e, a, c) * g(e, b);
        res.compat = std::max(res.compat, std::abs(lhs - rhs));
      }
  return res;
}

ConnectionAt Geometry::christoffel(const Eigen::VectorXd& xv) const {
  const auto x = to_slots(xv);
  ConnectionAt conn;
  conn.point = xv;
  conn.g = metric_at(x);
  conn.ginv = inverse_of(conn.g);
  conn.gamma = gamma_at(x, conn.ginv);
  const FrameResiduals res = frame_residuals(xv, conn.gamma);
  conn.torsion_certificate = res.torsion;
  conn.compat_certificate = res.compat;
  if (res.torsion >= kCertTol || res.compat >= kCertTol)
    throw CertificationError("Levi-Civita certification failed: torsion " +
                             std::to_string(res.torsion) + ", compatibility " +
                             std::to_string(res.compat));
  return conn;
}

Array4<double> Geometry::christoffel_derivative(const Eigen::VectorXd& xv) const {
  const auto x = to_slots(xv);
  const Eigen::MatrixXd g = metric_at(x);
  const Eigen::MatrixXd ginv = inverse_of(g);
  std::vector<Eigen::MatrixXd> dginv = metric_inverse_derivative(xv);

  Array4<double> dgamma(n_, n_, n_, std::max(d_, 1));
  for (int A = 0; A < d_; ++A)
    for (int b = 0; b < n_; ++b)
      for (int c = 0; c < n_; ++c)
        for (int a = 0; a < n_; ++a) {
          double v = 0.0;
          for (int dd = 0; dd < n_; ++dd) {
            const std::size_t kidx = (static_cast<std::size_t>(dd) * n_ + b) * n_ + c;
            const double k = koszul_[kidx].eval(x);
            const double dk =
                dkoszul_[static_cast<std::size_t>(A) * n_ * n_ * n_ + kidx].eval(x);
            v += 0.5 * (dginv[A](a, dd) * k + ginv(a, dd) * dk);
          }
          dgamma(a, b, c, A) = v;
        }
  return dgamma;
}

CurvatureAt Geometry::curvature(const Eigen::VectorXd& xv) const {
  const auto x = to_slots(xv);
  const ConnectionAt conn = christoffel(xv);
  const Array4<double> dgamma = christoffel_derivative(xv);

  Eigen::MatrixXd q(n_, std::max(d_, 1));
  for (int a = 0; a < n_; ++a)
    for (int A = 0; A < d_; ++A)
      q(a, A) = anchor_[static_cast<std::size_t>(a) * d_ + A].eval(x);

  CurvatureAt cur;
  cur.point = xv;
  cur.r = Array4<double>(n_, n_, n_, n_);
  const auto& gamma = conn.gamma;
  for (int a = 0; a < n_; ++a)
    for (int dd = 0; dd < n_; ++dd)
      for (int b = 0; b < n_; ++b)
        for (int c = 0; c < n_; ++c) {
          double v = 0.0;
          for (int A = 0; A < d_; ++A)
            v += q(b, A) * dgamma(dd, c, a, A) - q(c, A) * dgamma(dd, b, a, A);
          for (int e = 0; e < n_; ++e) {
            v += gamma(e, c, a) * gamma(dd, b, e) - gamma(e, b, a) * gamma(dd, c, e);
            v -= bracket_[(static_cast<std::size_t>(b) * n_ + c) * n_ + e].eval(x) *
                 gamma(dd, e, a);
          }
          cur.r(a, dd, b, c) = v;
        }

  cur.ricci = Eigen::MatrixXd::Zero(n_, n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b)
      for (int c = 0; c < n_; ++c) cur.ricci(a, b) += cur.r(a, c, c, b);

  for (int a = 0; a < n_; ++a)
    for (int dd = 0; dd < n_; ++dd)
      for (int b = 0; b < n_; ++b)
        for (int c = 0; c < n_; ++c)
          cur.antisym_certificate = std::max(
              cur.antisym_certificate, std::abs(cur.r(a, dd, b, c) + cur.r(a, dd, c, b)));
  if (cur.antisym_certificate >= 1e-10)
    throw CertificationError("curvature antisymmetry certificate failed: " +
                             std::to_string(cur.antisym_certificate));
  return cur;
}

void Geometry::connection_data(std::span<const double> x, Eigen::MatrixXd& g,
                               Eigen::MatrixXd& ginv, Array3<double>& gamma) const {
  g = metric_at(x);
  ginv = inverse_of(g);
  gamma = gamma_at(x, ginv);
}

void Geometry::metric_data(std::span<const double> x, Eigen::MatrixXd& g) const {
  g = metric_at(x);
}

void Geometry::anchor_data(std::span<const double> x, Eigen::MatrixXd& q) const {
  q.resize(n_, std::max(d_, 1));
  for (int a = 0; a < n_; ++a)
    for (int A = 0; A < d_; ++A)
      q(a, A) = anchor_[static_cast<std::size_t>(a) * d_ + A].eval(x);
}

void Geometry::bracket_data(std::span<const double> x, Array3<double>& q) const {
  q = Array3<double>(n_, n_, n_);
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b)
      for (int c = 0; c < n_; ++c)
        q(a, b, c) = bracket_[(static_cast<std::size_t>(a) * n_ + b) * n_ + c].eval(x);
}

Eigen::VectorXd Geometry::covariant_derivative(const Eigen::VectorXd& p, const Section& u,
                                               const Section& v) const {
  const AlgebroidModel& m = *model_;
  const Binding b = m.bind_point(p);
  const ConnectionAt conn = christoffel(p);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
  for (int dd = 0; dd < n_; ++dd) {
    double acc = 0.0;
    for (int bb = 0; bb < n_; ++bb) {
      const double ub = u.components[bb].eval(b);
      double dir = 0.0;
      for (int A = 0; A < d_; ++A)
        dir += m.anchor(bb, A).eval(b) * v.components[dd].diff(m.coords[A]).eval(b);
      acc += ub * dir;
      for (int c = 0; c < n_; ++c)
        acc += ub * conn.gamma(dd, bb, c) * v.components[c].eval(b);
    }
    out[dd] = acc;
  }
  return out;
}

Eigen::MatrixXd Geometry::frame_nabla(const Eigen::VectorXd& p, const Section& u) const {
  const AlgebroidModel& m = *model_;
  const Binding bind = m.bind_point(p);
  const ConnectionAt conn = christoffel(p);
  Eigen::MatrixXd a(n_, n_);  // a(b, d) = (nabla_b u)^d
  for (int b = 0; b < n_; ++b)
    for (int dd = 0; dd < n_; ++dd) {
      double acc = 0.0;
      for (int A = 0; A < d_; ++A)
        acc += m.anchor(b, A).eval(bind) * u.components[dd].diff(m.coords[A]).eval(bind);
      for (int e = 0; e < n_; ++e)
        acc += conn.gamma(dd, b, e) * u.components[e].eval(bind);
      a(b, dd) = acc;
    }
  return a;
}

Eigen::VectorXd Geometry::torsion_residual(const Eigen::VectorXd& p, const Section& u,
                                           const Section& v) const {
  const Section w = bracket_sections(u, v);
  const Eigen::VectorXd duv = covariant_derivative(p, u, v);
  const Eigen::VectorXd dvu = covariant_derivative(p, v, u);
  return duv - dvu - w.at(p);
}

double Geometry::compat_residual(const Eigen::VectorXd& p, const Section& u,
                                 const Section& v, const Section& w) const {
  const AlgebroidModel& m = *model_;
  const Binding bind = m.bind_point(p);

  Expr inner;  // <v|w> as an Expr over the base coordinates
  for (int a = 0; a < n_; ++a)
    for (int b = 0; b < n_; ++b)
      inner = inner + met_.entry(a, b) * v.components[a] * w.components[b];

  double lhs = 0.0;  // rho(u)<v|w>
  for (int a = 0; a < n_; ++a) {
    const double ua = u.components[a].eval(bind);
    for (int A = 0; A < d_; ++A)
      lhs += ua * m.anchor(a, A).eval(bind) * inner.diff(m.coords[A]).eval(bind);
  }

  const Eigen::MatrixXd g = metric(p);
  const Eigen::VectorXd nuv = covariant_derivative(p, u, v);
  const Eigen::VectorXd nuw = covariant_derivative(p, u, w);
  const Eigen::VectorXd vv = v.at(p), wv = w.at(p);
  return lhs - nuv.dot(g * wv) - vv.dot(g * nuw);
}

double Geometry::koszul_check(const Eigen::VectorXd& p, const Section& u, const Section& v,
                              const Section& w) const {
  const AlgebroidModel& m = *model_;
  const Binding bind = m.bind_point(p);

  auto inner_expr = [&](const Section& s, const Section& t) {
    Expr e;
    for (int a = 0; a < n_; ++a)
      for (int b = 0; b < n_; ++b)
        e = e + met_.entry(a, b) * s.components[a] * t.components[b];
    return e;
  };
  auto rho_of = [&](const Section& s, const Expr& f) {
    double acc = 0.0;
    for (int a = 0; a < n_; ++a) {
      const double sa = s.components[a].eval(bind);
      for (int A = 0; A < d_; ++A)
        acc += sa * m.anchor(a, A).eval(bind) * f.diff(m.coords[A]).eval(bind);
    }
    return acc;
  };
  auto inner_at = [&](const Section& s, const Section& t) {
    return s.at(p).dot(metric(p) * t.at(p));
  };

  const double lhs = 2.0 * covariant_derivative(p, u, v).dot(metric(p) * w.at(p));
  const double rhs = rho_of(u, inner_expr(v, w)) + rho_of(v, inner_expr(w, u)) -
                     rho_of(w, inner_expr(u, v)) - inner_at(u, bracket_sections(v, w)) +
                     inner_at(v, bracket_sections(w, u)) + inner_at(w, bracket_sections(u, v));
  return lhs - rhs;
}

}  // namespace algebroid
