#include "algebroid/sigma.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace algebroid {

SourceManifold::SourceManifold(SigmaSpec spec) : spec_(std::move(spec)) {
  const int k = spec_.k;
  if (k != 1 && k != 2) throw std::invalid_argument("source manifold dimension must be 1 or 2");
  if (static_cast<int>(spec_.sizes.size()) != k || static_cast<int>(spec_.box.size()) != k ||
      static_cast<int>(spec_.coords.size()) != k)
    throw std::invalid_argument("sigma block: sizes/box/coords must have k entries");
  if (spec_.periodic.empty()) spec_.periodic.assign(static_cast<std::size_t>(k), false);
  if (static_cast<std::size_t>(k) != spec_.periodic.size())
    throw std::invalid_argument("sigma block: periodic flags must have k entries");
  if (spec_.metric_upper.size() != static_cast<std::size_t>(k) * (k + 1) / 2)
    throw std::invalid_argument("sigma block: source metric upper triangle has wrong length");

  nodes_ = 1;
  h_.resize(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const int n = spec_.sizes[static_cast<std::size_t>(i)];
    if (n < 4) throw std::invalid_argument("sigma grid needs at least 4 nodes per axis");
    const double lo = spec_.box[static_cast<std::size_t>(i)][0];
    const double hi = spec_.box[static_cast<std::size_t>(i)][1];
    if (!(hi > lo)) throw std::invalid_argument("sigma box axis is empty");
    h_[static_cast<std::size_t>(i)] = periodic(i) ? (hi - lo) / n : (hi - lo) / (n - 1);
    nodes_ *= n;
  }

  std::vector<Expr> full;
  auto upper_entry = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    const int idx = a * k - a * (a - 1) / 2 + (b - a);
    return spec_.metric_upper[static_cast<std::size_t>(idx)];
  };
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) full.push_back(upper_entry(a, b));
  gtab_ = compile_all(full, spec_.coords);

  g_.resize(static_cast<std::size_t>(nodes_));
  ginv_.resize(static_cast<std::size_t>(nodes_));
  sqrtg_.resize(static_cast<std::size_t>(nodes_));
  for (int id = 0; id < nodes_; ++id)
    metric_at(z_of(id), g_[static_cast<std::size_t>(id)], ginv_[static_cast<std::size_t>(id)],
              sqrtg_[static_cast<std::size_t>(id)]);
}

void SourceManifold::unpack(int id, int& i, int& j) const {
  if (spec_.k == 1) {
    i = id;
    j = 0;
  } else {
    i = id / size(1);
    j = id % size(1);
  }
}

double SourceManifold::coord(int axis, int idx) const {
  return spec_.box[static_cast<std::size_t>(axis)][0] + idx * spacing(axis);
}

Eigen::VectorXd SourceManifold::z_of(int id) const {
  Eigen::VectorXd z(spec_.k);
  int i, j;
  unpack(id, i, j);
  z[0] = coord(0, i);
  if (spec_.k == 2) z[1] = coord(1, j);
  return z;
}

bool SourceManifold::is_boundary(int id) const {
  int i, j;
  unpack(id, i, j);
  if (!periodic(0) && (i == 0 || i == size(0) - 1)) return true;
  if (spec_.k == 2 && !periodic(1) && (j == 0 || j == size(1) - 1)) return true;
  return false;
}

void SourceManifold::metric_at(const Eigen::VectorXd& z, Eigen::MatrixXd& g,
                               Eigen::MatrixXd& ginv, double& sqrtg) const {
  const int k = spec_.k;
  const std::span<const double> zs(z.data(), static_cast<std::size_t>(z.size()));
  g.resize(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) g(a, b) = gtab_[static_cast<std::size_t>(a) * k + b].eval(zs);
  const double det = g.determinant();
  if (std::abs(det) < 1e-12)
    throw DegenerateMetricError("source metric degenerate at a grid node");
  ginv = g.inverse();
  sqrtg = std::sqrt(std::abs(det));
}

namespace {

// d(field)/dz^axis at node (i, j): central in the interior, one-sided
// second order at Dirichlet boundaries, wrap-around on periodic axes.
template <typename F>
double ddz(const SourceManifold& s, F&& f, int axis, int i, int j) {
  const int n = s.size(axis);
  const double h = s.spacing(axis);
  const int idx = axis == 0 ? i : j;
  auto at = [&](int m) {
    const int ii = axis == 0 ? m : i;
    const int jj = axis == 0 ? j : m;
    return f(s.id(ii, jj));
  };
  if (s.periodic(axis)) {
    return (at((idx + 1) % n) - at((idx + n - 1) % n)) / (2.0 * h);
  }
  if (idx == 0) return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
  if (idx == n - 1) return (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
  return (at(idx + 1) - at(idx - 1)) / (2.0 * h);
}

void check_shapes(const SigmaConfiguration& cfg, const Geometry& geom,
                  const SourceManifold& src) {
  const int nodes = src.num_nodes();
  if (cfg.phi.rows() != nodes || cfg.phi.cols() != geom.model().dim_m ||
      cfg.chi.dim0() != nodes || cfg.chi.dim1() != src.k() ||
      cfg.chi.dim2() != geom.model().rank)
    throw std::invalid_argument("sigma configuration shape mismatch");
}

Eigen::VectorXd phi_at(const SigmaConfiguration& cfg, int id, int dim_m) {
  Eigen::VectorXd p(dim_m);
  for (int A = 0; A < dim_m; ++A) p[A] = cfg.phi(id, A);
  return p;
}

// chi_i^a Q_a^A(phi) at a node: the anchor image of the fiber field.
Eigen::MatrixXd anchor_image(const SigmaConfiguration& cfg, const Geometry& geom,
                             const SourceManifold& src, int id, const Eigen::MatrixXd& q) {
  const int k = src.k(), n = geom.model().rank, d = geom.model().dim_m;
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(k, d);
  for (int i = 0; i < k; ++i)
    for (int A = 0; A < d; ++A)
      for (int a = 0; a < n; ++a) v(i, A) += cfg.chi(id, i, a) * q(a, A);
  return v;
}

}  // namespace

SigmaConfiguration linear_configuration(const Geometry& geom, const SourceManifold& src,
                                        const Eigen::VectorXd& phi_left,
                                        const Eigen::VectorXd& phi_right) {
  if (src.k() != 1) throw std::invalid_argument("linear_configuration is a k = 1 helper");
  const AlgebroidModel& m = geom.model();
  const int n = src.size(0), d = m.dim_m, r = m.rank;
  SigmaConfiguration cfg;
  cfg.phi = Array2<double>(n, d);
  cfg.chi = Array3<double>(n, 1, r);
  const double span = src.coord(0, n - 1) - src.coord(0, 0);
  Eigen::VectorXd slope = (phi_right - phi_left) / span;
  Eigen::MatrixXd q;
  for (int i = 0; i < n; ++i) {
    const double t = (src.coord(0, i) - src.coord(0, 0)) / span;
    Eigen::VectorXd phi = (1.0 - t) * phi_left + t * phi_right;
    for (int A = 0; A < d; ++A) cfg.phi(i, A) = phi[A];
    geom.anchor_data(std::span<const double>(phi.data(), static_cast<std::size_t>(d)), q);
    // chi from the admissibility condition by least squares
    Eigen::MatrixXd mat(d, r);
    for (int A = 0; A < d; ++A)
      for (int a = 0; a < r; ++a) mat(A, a) = q(a, A);
    const Eigen::VectorXd chi = mat.completeOrthogonalDecomposition().solve(slope);
    for (int a = 0; a < r; ++a) cfg.chi(i, 0, a) = chi[a];
  }
  return cfg;
}

MorphismResidual morphism_residual(const SigmaConfiguration& cfg, const Geometry& geom,
                                   const SourceManifold& src) {
  check_shapes(cfg, geom, src);
  const AlgebroidModel& m = geom.model();
  const int k = src.k(), d = m.dim_m, n = m.rank;
  MorphismResidual res;
  Eigen::MatrixXd q;
  Array3<double> br;
  for (int id = 0; id < src.num_nodes(); ++id) {
    int i, j;
    src.unpack(id, i, j);
    const Eigen::VectorXd phi = phi_at(cfg, id, d);
    const std::span<const double> ps(phi.data(), static_cast<std::size_t>(d));
    geom.anchor_data(ps, q);
    for (int axis = 0; axis < k; ++axis)
      for (int A = 0; A < d; ++A) {
        const double dphi =
            ddz(src, [&](int nid) { return cfg.phi(nid, A); }, axis, i, j);
        double v = dphi;
        for (int a = 0; a < n; ++a) v -= cfg.chi(id, axis, a) * q(a, A);
        res.res_a = std::max(res.res_a, std::abs(v));
      }
    if (k == 2) {
      geom.bracket_data(ps, br);
      for (int a = 0; a < n; ++a) {
        const double d01 = ddz(src, [&](int nid) { return cfg.chi(nid, 1, a); }, 0, i, j);
        const double d10 = ddz(src, [&](int nid) { return cfg.chi(nid, 0, a); }, 1, i, j);
        double v = d01 - d10;
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c) v -= cfg.chi(id, 0, b) * cfg.chi(id, 1, c) * br(c, b, a);
        res.res_b = std::max(res.res_b, std::abs(v));
      }
    }
  }
  return res;
}

double action(const SigmaConfiguration& cfg, const Geometry& geom, const SourceManifold& src) {
  check_shapes(cfg, geom, src);
  const AlgebroidModel& m = geom.model();
  const int k = src.k(), d = m.dim_m, n = m.rank;

  double vol = 1.0;
  for (int i = 0; i < k; ++i) vol *= src.spacing(i);

  const int cells0 = src.periodic(0) ? src.size(0) : src.size(0) - 1;
  const int cells1 = k == 2 ? (src.periodic(1) ? src.size(1) : src.size(1) - 1) : 1;

  Eigen::MatrixXd gsrc, gsrcinv, gt;
  double sqrtg = 0.0;
  double total = 0.0;
  Eigen::VectorXd phi(d);
  Eigen::MatrixXd chi(k, n);
  Eigen::VectorXd z(k);
  for (int ci = 0; ci < cells0; ++ci)
    for (int cj = 0; cj < cells1; ++cj) {
      // average fields over the cell corners
      phi.setZero();
      chi.setZero();
      const int corners = 1 << k;
      for (int corner = 0; corner < corners; ++corner) {
        const int ii = (ci + (corner & 1)) % src.size(0);
        const int jj = k == 2 ? (cj + ((corner >> 1) & 1)) % src.size(1) : 0;
        const int id = src.id(ii, jj);
        for (int A = 0; A < d; ++A) phi[A] += cfg.phi(id, A);
        for (int i = 0; i < k; ++i)
          for (int a = 0; a < n; ++a) chi(i, a) += cfg.chi(id, i, a);
      }
      phi /= corners;
      chi /= corners;

      z[0] = src.coord(0, ci) + 0.5 * src.spacing(0);
      if (k == 2) z[1] = src.coord(1, cj) + 0.5 * src.spacing(1);
      src.metric_at(z, gsrc, gsrcinv, sqrtg);
      geom.metric_data(std::span<const double>(phi.data(), static_cast<std::size_t>(d)), gt);

      double dens = 0.0;
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
              dens += gsrcinv(i, j) * chi(j, b) * chi(i, a) * gt(a, b);
      total += 0.5 * sqrtg * dens * vol;
    }
  return total;
}

Array2<double> el_residual(const SigmaConfiguration& cfg, const Geometry& geom,
                           const SourceManifold& src) {
  check_shapes(cfg, geom, src);
  const AlgebroidModel& m = geom.model();
  const int k = src.k(), d = m.dim_m, n = m.rank;
  const int nodes = src.num_nodes();

  // flux(node, j, a) = sqrt g g^{ji} chi_i^a
  Array3<double> flux(nodes, k, n);
  for (int id = 0; id < nodes; ++id)
    for (int j = 0; j < k; ++j)
      for (int a = 0; a < n; ++a) {
        double v = 0.0;
        for (int i = 0; i < k; ++i) v += src.ginv(id)(j, i) * cfg.chi(id, i, a);
        flux(id, j, a) = src.sqrtg(id) * v;
      }

  Array2<double> tension(nodes, n);
  Eigen::MatrixXd g, ginv;
  Array3<double> gamma;
  for (int id = 0; id < nodes; ++id) {
    if (src.is_boundary(id)) continue;  // Dirichlet nodes carry no tension
    int i, j;
    src.unpack(id, i, j);
    const Eigen::VectorXd phi = phi_at(cfg, id, d);
    geom.connection_data(std::span<const double>(phi.data(), static_cast<std::size_t>(d)), g,
                         ginv, gamma);
    for (int a = 0; a < n; ++a) {
      double div = 0.0;
      for (int ax = 0; ax < k; ++ax)
        div += ddz(src, [&](int nid) { return flux(nid, ax, a); }, ax, i, j);
      div /= src.sqrtg(id);
      double curv = 0.0;
      for (int ii = 0; ii < k; ++ii)
        for (int jj = 0; jj < k; ++jj)
          for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
              curv += src.ginv(id)(ii, jj) * cfg.chi(id, jj, c) * cfg.chi(id, ii, b) *
                      gamma(a, b, c);
      tension(id, a) = div + curv;
    }
  }
  return tension;
}

double max_tension(const Array2<double>& tension) {
  double worst = 0.0;
  for (int id = 0; id < tension.rows(); ++id)
    for (int a = 0; a < tension.cols(); ++a)
      worst = std::max(worst, std::abs(tension(id, a)));
  return worst;
}

namespace {

// Morphism-preserving variation generated by sigma: delta phi = sigma Q,
// delta chi_i = d_i sigma - sigma Q_{..} chi_i; phi is then re-solved from
// the admissibility condition, so only the chi update is applied here.
void apply_variation(SigmaConfiguration& cfg, const Geometry& geom, const SourceManifold& src,
                     const Array2<double>& sigma) {
  const AlgebroidModel& m = geom.model();
  const int k = src.k(), d = m.dim_m, n = m.rank;
  Array3<double> br;
  Array3<double> delta(src.num_nodes(), k, n);
  for (int id = 0; id < src.num_nodes(); ++id) {
    int i, j;
    src.unpack(id, i, j);
    const Eigen::VectorXd phi = phi_at(cfg, id, d);
    geom.bracket_data(std::span<const double>(phi.data(), static_cast<std::size_t>(d)), br);
    for (int ax = 0; ax < k; ++ax)
      for (int a = 0; a < n; ++a) {
        double v = ddz(src, [&](int nid) { return sigma(nid, a); }, ax, i, j);
        for (int c = 0; c < n; ++c)
          for (int b = 0; b < n; ++b) v -= sigma(id, c) * br(c, b, a) * cfg.chi(id, ax, b);
        delta(id, ax, a) = v;
      }
  }
  for (int id = 0; id < src.num_nodes(); ++id)
    for (int ax = 0; ax < k; ++ax)
      for (int a = 0; a < n; ++a) cfg.chi(id, ax, a) += delta(id, ax, a);
}

// Heun integration of d phi / dt = chi^a Q_a^A(phi) from the left anchor,
// plus (Dirichlet) a least-squares constant shift of chi that pins the right
// endpoint to its anchor.
void resolve_phi_1d(SigmaConfiguration& cfg, const Geometry& geom, const SourceManifold& src,
                    const Eigen::VectorXd& left, const Eigen::VectorXd& right) {
  const AlgebroidModel& m = geom.model();
  const int nn = src.size(0), d = m.dim_m, r = m.rank;
  if (d == 0) return;  // no base field to solve
  const double h = src.spacing(0);
  const bool dirichlet = !src.periodic(0);

  Eigen::MatrixXd q;
  auto qv = [&](const Eigen::VectorXd& p, int node) {
    geom.anchor_data(std::span<const double>(p.data(), static_cast<std::size_t>(d)), q);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
    for (int A = 0; A < d; ++A)
      for (int a = 0; a < r; ++a) v[A] += cfg.chi(node, 0, a) * q(a, A);
    return v;
  };

  auto integrate_from = [&](const Eigen::VectorXd& anchor) {
    Eigen::VectorXd p = anchor;
    for (int A = 0; A < d; ++A) cfg.phi(0, A) = p[A];
    for (int i = 0; i + 1 < nn; ++i) {
      const Eigen::VectorXd v0 = qv(p, i);
      const Eigen::VectorXd pred = p + h * v0;
      const Eigen::VectorXd v1 = qv(pred, i + 1);
      p += 0.5 * h * (v0 + v1);
      for (int A = 0; A < d; ++A) cfg.phi(i + 1, A) = p[A];
    }
    return p;
  };

  Eigen::VectorXd anchor = dirichlet ? left : phi_at(cfg, 0, d);
  Eigen::VectorXd end = integrate_from(anchor);

  if (dirichlet) {
    // Two correction passes keep the right endpoint pinned without
    // disturbing the interior beyond a uniform chi shift.
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd defect = right - end;
      if (defect.cwiseAbs().maxCoeff() < 1e-14) break;
      Eigen::MatrixXd response = Eigen::MatrixXd::Zero(d, r);
      for (int i = 0; i < nn; ++i) {
        const double w = (i == 0 || i == nn - 1) ? 0.5 : 1.0;
        const Eigen::VectorXd p = phi_at(cfg, i, d);
        geom.anchor_data(std::span<const double>(p.data(), static_cast<std::size_t>(d)), q);
        for (int A = 0; A < d; ++A)
          for (int a = 0; a < r; ++a) response(A, a) += w * h * q(a, A);
      }
      const Eigen::VectorXd shift = response.completeOrthogonalDecomposition().solve(defect);
      for (int i = 0; i < nn; ++i)
        for (int a = 0; a < r; ++a) cfg.chi(i, 0, a) += shift[a];
      end = integrate_from(anchor);
    }
  }
}

// Least-squares admissible phi for k = 2: minimize the sum over grid edges of
// |(phi_v - phi_u)/h - avg(chi Q)|^2 with Dirichlet nodes fixed, a sparse SPD
// solve per component.
struct Projector2d {
  const SourceManifold* src;
  std::vector<int> unknown_of;  // node -> unknown index or -1
  std::vector<int> node_of;     // unknown index -> node
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  int pinned = -1;

  void build(const SourceManifold& s) {
    src = &s;
    const int nodes = s.num_nodes();
    unknown_of.assign(static_cast<std::size_t>(nodes), -1);
    for (int id = 0; id < nodes; ++id)
      if (!s.is_boundary(id)) {
        unknown_of[static_cast<std::size_t>(id)] = static_cast<int>(node_of.size());
        node_of.push_back(id);
      }
    if (node_of.size() == static_cast<std::size_t>(nodes)) {
      // fully periodic: pin node 0 to remove the constant null space
      pinned = 0;
      unknown_of[0] = -1;
      node_of.erase(node_of.begin());
      for (auto& u : unknown_of)
        if (u > 0) --u;
      for (std::size_t i = 0; i < node_of.size(); ++i)
        unknown_of[static_cast<std::size_t>(node_of[i])] = static_cast<int>(i);
    }

    std::vector<Eigen::Triplet<double>> trips;
    const int nu = static_cast<int>(node_of.size());
    for (int uidx = 0; uidx < nu; ++uidx) {
      const int id = node_of[static_cast<std::size_t>(uidx)];
      int i, j;
      s.unpack(id, i, j);
      double diag = 0.0;
      for (int ax = 0; ax < 2; ++ax) {
        const double w = 1.0 / (s.spacing(ax) * s.spacing(ax));
        for (int dir = -1; dir <= 1; dir += 2) {
          int ni = i, nj = j;
          (ax == 0 ? ni : nj) += dir;
          if (s.periodic(ax)) {
            const int n = s.size(ax);
            ni = (ni + n) % n;
            nj = (nj + n) % n;
          } else if ((ax == 0 ? ni : nj) < 0 || (ax == 0 ? ni : nj) >= s.size(ax)) {
            continue;  // no edge past a Dirichlet boundary
          }
          diag += w;
          const int nid = s.id(ax == 0 ? ni : i, ax == 0 ? j : nj);
          const int nunk = unknown_of[static_cast<std::size_t>(nid)];
          if (nunk >= 0) trips.emplace_back(uidx, nunk, -w);
        }
      }
      trips.emplace_back(uidx, uidx, diag);
    }
    Eigen::SparseMatrix<double> lap(nu, nu);
    lap.setFromTriplets(trips.begin(), trips.end());
    solver.compute(lap);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("admissibility projection: factorization failed");
  }

  void solve(SigmaConfiguration& cfg, const Geometry& geom) const {
    const SourceManifold& s = *src;
    const AlgebroidModel& m = geom.model();
    const int d = m.dim_m;
    if (d == 0) return;
    const int nodes = s.num_nodes();

    // anchor image chi Q at every node (lagged phi)
    Eigen::MatrixXd q;
    std::vector<Eigen::MatrixXd> s_img(static_cast<std::size_t>(nodes));
    for (int id = 0; id < nodes; ++id) {
      const Eigen::VectorXd phi = phi_at(cfg, id, d);
      geom.anchor_data(std::span<const double>(phi.data(), static_cast<std::size_t>(d)), q);
      s_img[static_cast<std::size_t>(id)] = anchor_image(cfg, geom, s, id, q);
    }

    const int nu = static_cast<int>(node_of.size());
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nu, d);
    for (int uidx = 0; uidx < nu; ++uidx) {
      const int id = node_of[static_cast<std::size_t>(uidx)];
      int i, j;
      s.unpack(id, i, j);
      for (int ax = 0; ax < 2; ++ax) {
        const double h = s.spacing(ax);
        for (int dir = -1; dir <= 1; dir += 2) {
          int ni = i, nj = j;
          (ax == 0 ? ni : nj) += dir;
          bool exists = true;
          if (s.periodic(ax)) {
            const int nn = s.size(ax);
            ni = (ni + nn) % nn;
            nj = (nj + nn) % nn;
          } else if ((ax == 0 ? ni : nj) < 0 || (ax == 0 ? ni : nj) >= s.size(ax)) {
            exists = false;
          }
          if (!exists) continue;
          const int nid = s.id(ax == 0 ? ni : i, ax == 0 ? j : nj);
          for (int A = 0; A < d; ++A) {
            const double sbar = 0.5 * (s_img[static_cast<std::size_t>(id)](ax, A) +
                                       s_img[static_cast<std::size_t>(nid)](ax, A));
            rhs(uidx, A) += dir * sbar / h;
            if (unknown_of[static_cast<std::size_t>(nid)] < 0)
              rhs(uidx, A) += cfg.phi(nid, A) / (h * h);
          }
        }
      }
    }
    const Eigen::MatrixXd sol = solver.solve(rhs);
    for (int uidx = 0; uidx < nu; ++uidx) {
      const int id = node_of[static_cast<std::size_t>(uidx)];
      for (int A = 0; A < d; ++A) cfg.phi(id, A) = sol(uidx, A);
    }
  }
};

}  // namespace

RelaxResult relax(const SigmaConfiguration& cfg0, const Geometry& geom,
                  const SourceManifold& src, double step, int iters, double tension_tol) {
  check_shapes(cfg0, geom, src);
  const AlgebroidModel& m = geom.model();
  const int d = m.dim_m, n = m.rank;

  RelaxResult res;
  res.cfg = cfg0;

  Eigen::VectorXd left(d), right(d);
  if (src.k() == 1 && d > 0) {
    left = phi_at(cfg0, 0, d);
    right = phi_at(cfg0, src.size(0) - 1, d);
  }
  Projector2d projector;
  if (src.k() == 2) projector.build(src);

  auto resolve = [&](SigmaConfiguration& cfg) {
    if (src.k() == 1)
      resolve_phi_1d(cfg, geom, src, left, right);
    else
      projector.solve(cfg, geom);
  };

  double s_now = action(res.cfg, geom, src);
  double step_used = step;
  for (int iter = 0; iter < iters; ++iter) {
    const Array2<double> tau = el_residual(res.cfg, geom, src);
    const double mt = max_tension(tau);
    res.log.push_back({iter, s_now, mt, step_used});
    res.final_tension = mt;
    if (mt < tension_tol) {
      res.converged = true;
      break;
    }

    double trial = step;
    bool accepted = false;
    for (int halving = 0; halving <= 30; ++halving) {
      SigmaConfiguration cand = res.cfg;
      Array2<double> sigma(src.num_nodes(), n);
      for (int id = 0; id < src.num_nodes(); ++id) {
        if (src.is_boundary(id)) continue;  // variation vanishes on the boundary
        for (int a = 0; a < n; ++a) sigma(id, a) = trial * tau(id, a);
      }
      apply_variation(cand, geom, src, sigma);
      resolve(cand);
      const double s_cand = action(cand, geom, src);
      if (s_cand <= s_now) {
        res.cfg = std::move(cand);
        s_now = s_cand;
        step_used = trial;
        accepted = true;
        break;
      }
      trial *= 0.5;
    }
    if (!accepted) {
      res.stalled = true;
      break;
    }
  }
  res.final_action = s_now;
  if (res.log.empty() || res.log.back().action != s_now) {
    const double mt = max_tension(el_residual(res.cfg, geom, src));
    res.final_tension = mt;
    res.converged = res.converged || mt < tension_tol;
    res.log.push_back({static_cast<int>(res.log.size()), s_now, mt, step_used});
  }
  return res;
}

RelaxResult relax_multilevel(const Geometry& geom, const SourceManifold& fine,
                             const Eigen::VectorXd& phi_left, const Eigen::VectorXd& phi_right,
                             double step_factor, int iters_per_level, double tension_tol) {
  if (fine.k() != 1 || fine.periodic(0))
    throw std::invalid_argument("relax_multilevel handles the k = 1 Dirichlet problem");

  std::vector<int> sizes{fine.size(0)};
  while (sizes.back() > 41) sizes.push_back(sizes.back() / 2 + 1);
  std::reverse(sizes.begin(), sizes.end());

  SigmaConfiguration cfg;
  RelaxResult last;
  for (std::size_t lvl = 0; lvl < sizes.size(); ++lvl) {
    SigmaSpec spec = fine.spec();
    spec.sizes[0] = sizes[lvl];
    SourceManifold src(spec);
    if (lvl == 0) {
      cfg = linear_configuration(geom, src, phi_left, phi_right);
    } else {
      // prolong by linear interpolation in the grid coordinate
      const SigmaSpec prev_spec = [&] {
        SigmaSpec sp = fine.spec();
        sp.sizes[0] = sizes[lvl - 1];
        return sp;
      }();
      SourceManifold prev(prev_spec);
      SigmaConfiguration up;
      const int nn = src.size(0);
      up.phi = Array2<double>(nn, geom.model().dim_m);
      up.chi = Array3<double>(nn, 1, geom.model().rank);
      for (int i = 0; i < nn; ++i) {
        const double t = src.coord(0, i);
        const double pos = (t - prev.coord(0, 0)) / prev.spacing(0);
        const int i0 = std::min(static_cast<int>(pos), prev.size(0) - 2);
        const double w = pos - i0;
        for (int A = 0; A < geom.model().dim_m; ++A)
          up.phi(i, A) = (1.0 - w) * cfg.phi(i0, A) + w * cfg.phi(i0 + 1, A);
        for (int a = 0; a < geom.model().rank; ++a)
          up.chi(i, 0, a) = (1.0 - w) * cfg.chi(i0, 0, a) + w * cfg.chi(i0 + 1, 0, a);
      }
      cfg = std::move(up);
    }
    const double h = src.spacing(0);
    last = relax(cfg, geom, src, step_factor * h * h, iters_per_level, tension_tol);
    cfg = last.cfg;
  }
  return last;
}

SigmaConfiguration field_redefinition(const SigmaConfiguration& cfg, const Geometry& geom,
                                      const SourceManifold& src,
                                      const std::vector<Section>& basis,
                                      const Eigen::VectorXd& xi, double epsilon) {
  check_shapes(cfg, geom, src);
  const AlgebroidModel& m = geom.model();
  const int k = src.k(), d = m.dim_m, n = m.rank;
  if (static_cast<int>(basis.size()) != xi.size())
    throw std::invalid_argument("field_redefinition: xi length must match basis size");

  SigmaConfiguration out = cfg;
  for (int id = 0; id < src.num_nodes(); ++id) {
    const Eigen::VectorXd phi = phi_at(cfg, id, d);
    const Binding bound = m.bind_point(phi);
    for (std::size_t alpha = 0; alpha < basis.size(); ++alpha) {
      const double scale = epsilon * xi[static_cast<Eigen::Index>(alpha)];
      if (scale == 0.0) continue;
      const Section& u = basis[alpha];
      for (int A = 0; A < d; ++A) {
        double v = 0.0;
        for (int a = 0; a < n; ++a)
          v += u.components[a].eval(bound) * m.anchor(a, A).eval(bound);
        out.phi(id, A) += scale * v;
      }
      for (int ax = 0; ax < k; ++ax)
        for (int a = 0; a < n; ++a) {
          double v = 0.0;
          for (int b = 0; b < n; ++b) {
            double shift = 0.0;
            for (int A = 0; A < d; ++A)
              shift += m.anchor(b, A).eval(bound) * u.components[a].diff(m.coords[A]).eval(bound);
            for (int c = 0; c < n; ++c)
              shift -= u.components[c].eval(bound) * m.bracket(c, b, a).eval(bound);
            v += cfg.chi(id, ax, b) * shift;
          }
          out.chi(id, ax, a) += scale * v;
        }
    }
  }
  return out;
}

double invariance_check(const SigmaConfiguration& cfg, const Geometry& geom,
                        const SourceManifold& src, const std::vector<Section>& basis,
                        const Eigen::VectorXd& xi, double epsilon) {
  if (epsilon == 0.0) return 0.0;
  const double s0 = action(cfg, geom, src);
  const SigmaConfiguration moved = field_redefinition(cfg, geom, src, basis, xi, epsilon);
  const double s1 = action(moved, geom, src);
  return std::abs(s1 - s0) / epsilon;
}

Array2<double> noether_current(const SigmaConfiguration& cfg, const Geometry& geom,
                               const SourceManifold& src, const std::vector<Section>& basis,
                               const Eigen::VectorXd& xi) {
  check_shapes(cfg, geom, src);
  const AlgebroidModel& m = geom.model();
  const int k = src.k(), d = m.dim_m, n = m.rank;
  Array2<double> cur(src.num_nodes(), k);
  Eigen::MatrixXd gt;
  for (int id = 0; id < src.num_nodes(); ++id) {
    const Eigen::VectorXd phi = phi_at(cfg, id, d);
    geom.metric_data(std::span<const double>(phi.data(), static_cast<std::size_t>(d)), gt);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    for (std::size_t alpha = 0; alpha < basis.size(); ++alpha)
      u += xi[static_cast<Eigen::Index>(alpha)] * basis[alpha].at(phi);
    for (int j = 0; j < k; ++j) {
      double v = 0.0;
      for (int i = 0; i < k; ++i)
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            v += u[a] * src.ginv(id)(j, i) * cfg.chi(id, i, b) * gt(b, a);
      cur(id, j) = v;
    }
  }
  return cur;
}

NoetherDivergence noether_divergence(const SigmaConfiguration& cfg, const Geometry& geom,
                                     const SourceManifold& src,
                                     const std::vector<Section>& basis,
                                     const Eigen::VectorXd& xi) {
  const Array2<double> cur = noether_current(cfg, geom, src, basis, xi);
  const int k = src.k();
  NoetherDivergence out;
  out.max_tension = max_tension(el_residual(cfg, geom, src));
  for (int id = 0; id < src.num_nodes(); ++id) {
    if (src.is_boundary(id)) continue;
    int i, j;
    src.unpack(id, i, j);
    bool interior = true;
    for (int ax = 0; ax < k; ++ax) {
      if (src.periodic(ax)) continue;
      const int idx = ax == 0 ? i : j;
      if (idx == 0 || idx == src.size(ax) - 1) interior = false;
    }
    if (!interior) continue;
    double div = 0.0;
    for (int ax = 0; ax < k; ++ax)
      div += ddz(src, [&](int nid) { return src.sqrtg(nid) * cur(nid, ax); }, ax, i, j);
    div /= src.sqrtg(id);
    out.divergence = std::max(out.divergence, std::abs(div));
  }
  return out;
}

Trajectory charged_particle(const Geometry& geom, const std::vector<Expr>& oneform,
                            const EPoint& s0, double t_end, double h) {
  return integrate(geom, FlowKind::Charged, s0.x, s0.y, t_end, h, &oneform);
}

std::vector<Expr> lie_derivative_oneform(const Section& u, const std::vector<Expr>& oneform) {
  const AlgebroidModel& m = *u.owner;
  if (static_cast<int>(oneform.size()) != m.rank)
    throw std::invalid_argument("one-form component count does not match fiber rank");
  std::vector<Expr> out(static_cast<std::size_t>(m.rank));
  for (int a = 0; a < m.rank; ++a) {
    Expr e;
    for (int b = 0; b < m.rank; ++b)
      for (int A = 0; A < m.dim_m; ++A)
        e = e + u.components[b] * m.anchor(b, A) * oneform[a].diff(m.coords[A]);
    for (int c = 0; c < m.rank; ++c) {
      Expr inner;
      for (int A = 0; A < m.dim_m; ++A)
        inner = inner + m.anchor(a, A) * u.components[c].diff(m.coords[A]);
      for (int b = 0; b < m.rank; ++b)
        inner = inner + m.bracket(a, b, c) * u.components[b];
      e = e + oneform[c] * inner;
    }
    out[a] = e;
  }
  return out;
}

double charged_noether_drift(const Geometry& geom, const std::vector<Expr>& oneform,
                             const Section& u, const Trajectory& traj) {
  const AlgebroidModel& m = geom.model();
  double j0 = 0.0, worst = 0.0;
  for (std::size_t s = 0; s < traj.times.size(); ++s) {
    const Eigen::VectorXd& x = traj.base[s];
    const Binding bound = m.bind_point(x);
    const Eigen::VectorXd uv = u.at(x);
    const Eigen::VectorXd low = geom.metric(x) * traj.fiber[s];
    double jv = 0.0;
    for (int a = 0; a < m.rank; ++a) jv += uv[a] * (low[a] + oneform[a].eval(bound));
    if (s == 0)
      j0 = jv;
    else
      worst = std::max(worst, std::abs(jv - j0));
  }
  return worst;
}

void write_config_csv(std::ostream& out, const SigmaConfiguration& cfg,
                      const SourceManifold& src, const AlgebroidModel& m) {
  for (int ax = 0; ax < src.k(); ++ax)
    out << (ax ? "," : "") << src.spec().coords[static_cast<std::size_t>(ax)];
  for (int A = 0; A < m.dim_m; ++A) out << ",phi_" << m.coords[A];
  for (int ax = 0; ax < src.k(); ++ax)
    for (int a = 0; a < m.rank; ++a) out << ",chi" << ax + 1 << "_" << m.frame[a];
  out << "\n";
  char buf[32];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (int id = 0; id < src.num_nodes(); ++id) {
    const Eigen::VectorXd z = src.z_of(id);
    for (int ax = 0; ax < src.k(); ++ax) {
      if (ax) out << ",";
      emit(z[ax]);
    }
    for (int A = 0; A < m.dim_m; ++A) {
      out << ",";
      emit(cfg.phi(id, A));
    }
    for (int ax = 0; ax < src.k(); ++ax)
      for (int a = 0; a < m.rank; ++a) {
        out << ",";
        emit(cfg.chi(id, ax, a));
      }
    out << "\n";
  }
}

SigmaConfiguration read_config_csv(std::istream& in, const SourceManifold& src,
                                   const AlgebroidModel& m) {
  SigmaConfiguration cfg;
  cfg.phi = Array2<double>(src.num_nodes(), m.dim_m);
  cfg.chi = Array3<double>(src.num_nodes(), src.k(), m.rank);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("configuration CSV: missing header");
  int id = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (id >= src.num_nodes()) throw std::runtime_error("configuration CSV: too many rows");
    std::istringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    const std::size_t expect =
        static_cast<std::size_t>(src.k() + m.dim_m + src.k() * m.rank);
    if (vals.size() != expect) throw std::runtime_error("configuration CSV: wrong column count");
    std::size_t at = static_cast<std::size_t>(src.k());
    for (int A = 0; A < m.dim_m; ++A) cfg.phi(id, A) = vals[at++];
    for (int ax = 0; ax < src.k(); ++ax)
      for (int a = 0; a < m.rank; ++a) cfg.chi(id, ax, a) = vals[at++];
    ++id;
  }
  if (id != src.num_nodes()) throw std::runtime_error("configuration CSV: too few rows");
  return cfg;
}

void write_relax_log_csv(std::ostream& out, const std::vector<RelaxLogEntry>& log) {
  out << "iter,action,max_tension,step\n";
  char buf[32];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (const auto& e : log) {
    out << e.iter << ",";
    emit(e.action);
    out << ",";
    emit(e.max_tension);
    out << ",";
    emit(e.step);
    out << "\n";
  }
}

}  // namespace algebroid
