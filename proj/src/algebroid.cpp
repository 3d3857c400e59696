#include "algebroid/algebroid.hpp"

#include <cmath>

namespace algebroid {

std::vector<double> sample_box(const Box& box, Rng& rng) {
  std::vector<double> x(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) x[i] = rng.uniform(box[i][0], box[i][1]);
  return x;
}

std::vector<std::string> AlgebroidModel::momentum_names() const {
  std::vector<std::string> out;
  out.reserve(frame.size());
  for (int i = 0; i < rank; ++i) out.push_back(momentum_name(i));
  return out;
}

std::vector<std::string> AlgebroidModel::velocity_names() const {
  std::vector<std::string> out;
  out.reserve(frame.size());
  for (int i = 0; i < rank; ++i) out.push_back(velocity_name(i));
  return out;
}

Binding AlgebroidModel::bind_point(const Eigen::VectorXd& x) const {
  Binding b;
  for (int i = 0; i < dim_m; ++i) b[coords[i]] = x[i];
  return b;
}

Eigen::MatrixXd AlgebroidModel::anchor_at(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd q(rank, dim_m);
  const Binding b = bind_point(x);
  for (int a = 0; a < rank; ++a)
    for (int A = 0; A < dim_m; ++A) q(a, A) = anchor(a, A).eval(b);
  return q;
}

double AlgebroidModel::bracket_at(int a, int b, int c, const Binding& bound) const {
  return bracket(a, b, c).eval(bound);
}

Eigen::VectorXd Section::at(const Eigen::VectorXd& x) const {
  const Binding b = owner->bind_point(x);
  Eigen::VectorXd u(owner->rank);
  for (int a = 0; a < owner->rank; ++a) u[a] = components[a].eval(b);
  return u;
}

Section make_section(const AlgebroidModel& m, std::vector<Expr> components,
                     std::string name) {
  if (static_cast<int>(components.size()) != m.rank)
    throw std::invalid_argument("section component count does not match fiber rank");
  return Section{&m, std::move(components), std::move(name)};
}

Section zero_section(const AlgebroidModel& m) {
  return Section{&m, std::vector<Expr>(static_cast<std::size_t>(m.rank)), "zero"};
}

BoxSampler::BoxSampler(const AlgebroidModel& m, std::uint64_t seed)
    : model_(&m), rng_(seed) {}

Eigen::VectorXd BoxSampler::draw() {
  Eigen::VectorXd x(model_->dim_m);
  for (int i = 0; i < model_->dim_m; ++i)
    x[i] = rng_.uniform(model_->box[i][0], model_->box[i][1]);
  return x;
}

double validate_antisymmetry(const AlgebroidModel& m, int samples, std::uint64_t seed) {
  // dim_m = 0 still needs one (empty) sample point.
  const int n = m.dim_m == 0 ? 1 : samples;
  double worst = 0.0;
  BoxSampler sampler(m, seed);
  sampler.sweep(n, [&](const Eigen::VectorXd& x) {
    const Binding b = m.bind_point(x);
    for (int a = 0; a < m.rank; ++a)
      for (int bb = 0; bb < m.rank; ++bb)
        for (int c = 0; c < m.rank; ++c) {
          const double r = m.bracket(a, bb, c).eval(b) + m.bracket(bb, a, c).eval(b);
          worst = std::max(worst, std::abs(r));
        }
  });
  return worst;
}

AnchorMorphismResult validate_anchor_morphism(const AlgebroidModel& m, int samples,
                                              std::uint64_t seed) {
  AnchorMorphismResult res;
  if (m.dim_m == 0) return res;  // vacuous: no base derivatives

  // Precompute dQ(a, A, B) = d Q_a^A / d x^B.
  Array3<Expr> dq(m.rank, m.dim_m, m.dim_m);
  for (int a = 0; a < m.rank; ++a)
    for (int A = 0; A < m.dim_m; ++A)
      for (int B = 0; B < m.dim_m; ++B) dq(a, A, B) = m.anchor(a, A).diff(m.coords[B]);

  BoxSampler sampler(m, seed);
  sampler.sweep(samples, [&](const Eigen::VectorXd& x) {
    const Binding b = m.bind_point(x);
    Eigen::MatrixXd q(m.rank, m.dim_m);
    for (int a = 0; a < m.rank; ++a)
      for (int A = 0; A < m.dim_m; ++A) q(a, A) = m.anchor(a, A).eval(b);
    Array3<double> d(m.rank, m.dim_m, m.dim_m);
    for (int a = 0; a < m.rank; ++a)
      for (int A = 0; A < m.dim_m; ++A)
        for (int B = 0; B < m.dim_m; ++B) d(a, A, B) = dq(a, A, B).eval(b);

    for (int a = 0; a < m.rank; ++a)
      for (int c = 0; c < m.rank; ++c)
        for (int B = 0; B < m.dim_m; ++B) {
          double commutator = 0.0;
          for (int A = 0; A < m.dim_m; ++A)
            commutator += q(a, A) * d(c, B, A) - q(c, A) * d(a, B, A);
          double bracket_term = 0.0;
          for (int e = 0; e < m.rank; ++e)
            bracket_term += m.bracket(a, c, e).eval(b) * q(e, B);
          res.pairwise = std::max(res.pairwise, std::abs(commutator));
          res.full = std::max(res.full, std::abs(commutator - bracket_term));
        }
  });
  return res;
}

double validate_jacobi(const AlgebroidModel& m, int samples, std::uint64_t seed) {
  const int n = m.dim_m == 0 ? 1 : samples;

  Array4<Expr> dq;  // dq(a, b, c, A) = d Q_ab^c / d x^A
  if (m.dim_m > 0) {
    dq = Array4<Expr>(m.rank, m.rank, m.rank, m.dim_m);
    for (int a = 0; a < m.rank; ++a)
      for (int b = 0; b < m.rank; ++b)
        for (int c = 0; c < m.rank; ++c)
          for (int A = 0; A < m.dim_m; ++A)
            dq(a, b, c, A) = m.bracket(a, b, c).diff(m.coords[A]);
  }

  double worst = 0.0;
  BoxSampler sampler(m, seed);
  sampler.sweep(n, [&](const Eigen::VectorXd& x) {
    const Binding bnd = m.bind_point(x);
    for (int a = 0; a < m.rank; ++a)
      for (int b = 0; b < m.rank; ++b)
        for (int c = 0; c < m.rank; ++c)
          for (int d = 0; d < m.rank; ++d) {
            double sum = 0.0;
            // cyclic sum over (a, b, c) of Q_a^A d_A Q_bc^d - Q_ae^d Q_bc^e
            const int cyc[3][3] = {{a, b, c}, {b, c, a}, {c, a, b}};
            for (const auto& idx : cyc) {
              const int p = idx[0], q = idx[1], r = idx[2];
              for (int A = 0; A < m.dim_m; ++A)
                sum += m.anchor(p, A).eval(bnd) * dq(q, r, d, A).eval(bnd);
              for (int e = 0; e < m.rank; ++e)
                sum -= m.bracket(p, e, d).eval(bnd) * m.bracket(q, r, e).eval(bnd);
            }
            worst = std::max(worst, std::abs(sum));
          }
  });
  return worst;
}

Section bracket_sections(const Section& u, const Section& v) {
  const AlgebroidModel& m = *u.owner;
  if (v.owner != &m) throw std::invalid_argument("bracket_sections: sections from different models");
  std::vector<Expr> w(static_cast<std::size_t>(m.rank));
  for (int c = 0; c < m.rank; ++c) {
    Expr acc;
    for (int a = 0; a < m.rank; ++a) {
      for (int A = 0; A < m.dim_m; ++A) {
        acc = acc + m.anchor(a, A) * (u.components[a] * v.components[c].diff(m.coords[A]) -
                                      u.components[c].diff(m.coords[A]) * v.components[a]);
      }
      for (int b = 0; b < m.rank; ++b)
        acc = acc - m.bracket(b, a, c) * u.components[a] * v.components[b];
    }
    w[c] = acc;
  }
  Section out{&m, std::move(w), "[" + u.name + "," + v.name + "]"};
  return out;
}

Eigen::VectorXd anchor_apply(const Section& u, const Eigen::VectorXd& p) {
  const AlgebroidModel& m = *u.owner;
  const Binding b = m.bind_point(p);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.dim_m);
  for (int A = 0; A < m.dim_m; ++A)
    for (int a = 0; a < m.rank; ++a)
      out[A] += u.components[a].eval(b) * m.anchor(a, A).eval(b);
  return out;
}

}  // namespace algebroid
