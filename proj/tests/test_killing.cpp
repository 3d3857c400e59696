#include <doctest.h>

#include "algebroid/killing.hpp"
#include "support.hpp"

using namespace algebroid;
using testsupport::load;

namespace {

Section named(const LoadedModel& lm, const std::string& name) {
  return make_section(*lm.model, lm.model->sections.at(name), name);
}

}  // namespace

TEST_CASE("tangent_lift component forms") {
  auto tm2 = load("flat_tm2");
  const Section dx = named(tm2, "dx");
  const LiftedField lift = tangent_lift(dx);
  Binding env{{"x1", 0.3}, {"x2", -0.2}, {"y_e1", 0.7}, {"y_e2", -0.4}};
  CHECK(lift.base[0].eval(env) == doctest::Approx(1.0));
  CHECK(lift.base[1].eval(env) == doctest::Approx(0.0));
  CHECK(lift.fiber[0].eval(env) == doctest::Approx(0.0));
  CHECK(lift.fiber[1].eval(env) == doctest::Approx(0.0));

  // rotation: fiber part (-y2, y1)
  const LiftedField rot = tangent_lift(named(tm2, "rot"));
  CHECK(rot.fiber[0].eval(env) == doctest::Approx(0.4));
  CHECK(rot.fiber[1].eval(env) == doctest::Approx(0.7));

  // so(3), u = e1: no base part, fiber^c = -y^a Q_1a^c, i.e. (0, +y3, -y2)
  auto so3 = load("so3_killing");
  const LiftedField l1 = tangent_lift(named(so3, "E1"));
  Binding env3{{"y_e1", 0.5}, {"y_e2", 0.8}, {"y_e3", -0.3}};
  CHECK(l1.base.empty());
  CHECK(l1.fiber[0].eval(env3) == doctest::Approx(0.0));
  CHECK(l1.fiber[1].eval(env3) == doctest::Approx(-0.3));
  CHECK(l1.fiber[2].eval(env3) == doctest::Approx(-0.8));

  // fiber components are linear in y
  for (const Expr& f : rot.fiber) {
    Binding doubled = env;
    doubled["y_e1"] *= 2.0;
    doubled["y_e2"] *= 2.0;
    CHECK(f.eval(doubled) == doctest::Approx(2.0 * f.eval(env)));
  }
}

TEST_CASE("lift is a Lie algebra morphism") {
  auto so3 = load("so3_killing");
  CHECK(lift_morphism_residual(named(so3, "E1"), named(so3, "E2"), 32, 42) < 1e-12);

  auto tm2 = load("flat_tm2");
  const Section u = make_section(*tm2.model, {parse_expr("x1^2 - 0.5*x2"), parse_expr("x1*x2")},
                                 "poly_u");
  const Section v = make_section(*tm2.model, {parse_expr("x2^2"), parse_expr("x1 + x2")},
                                 "poly_v");
  CHECK(lift_morphism_residual(u, v, 64, 42) < 1e-9);
  CHECK(lift_morphism_residual(named(tm2, "rot"), named(tm2, "dx"), 64, 42) < 1e-10);

  auto fol = load("foliation_product");
  CHECK(lift_morphism_residual(named(fol, "k_y"), named(fol, "nk_x"), 32, 42) < 1e-10);
}

TEST_CASE("killing residuals: flat translations and the dilation witness") {
  auto tm2 = load("flat_tm2");
  Geometry geom(tm2.metric);
  CHECK(killing_residual_lemma(geom, named(tm2, "dx"), 32, 42) == 0.0);
  CHECK(killing_residual_poisson(geom, named(tm2, "dx"), 32, 42) == 0.0);
  CHECK(killing_residual_connection(geom, named(tm2, "dx"), 32, 42) == 0.0);

  // dilation: the lemma form evaluates to exactly 2 at G = I
  CHECK(killing_residual_lemma(geom, named(tm2, "dilation"), 32, 42) == doctest::Approx(2.0));
}

TEST_CASE("Example 2: every constant so(3) section is Killing") {
  auto so3 = load("so3_killing");
  Geometry geom(so3.metric);
  Rng rng(11);
  for (const char* name : {"E1", "E2", "E3"}) {
    const KillingReport rep = killing_check(geom, named(so3, name), 16, 42);
    CHECK(rep.verdict);
    CHECK(rep.residual_lemma < 1e-14);
  }
  // and random constant combinations too
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<Expr> comps;
    for (int a = 0; a < 3; ++a) comps.push_back(Expr::constant(rng.uniform(-2.0, 2.0)));
    const KillingReport rep = killing_check(geom, make_section(*so3.model, comps, "mix"), 8, 42);
    CHECK(rep.verdict);
  }
}

TEST_CASE("Example 3: the X[f] = 0 criterion on the line bundle") {
  auto line = load("linebundle_X");
  Geometry geom(line.metric);
  const KillingReport constant = killing_check(geom, named(line, "const1"), 32, 42);
  CHECK(constant.verdict);
  const KillingReport linear = killing_check(geom, named(line, "linear"), 32, 42);
  CHECK(!linear.verdict);
  CHECK(linear.residual_poisson > 0.1);  // |X f'| with X >= 1
}

TEST_CASE("three-way equivalence battery") {
  struct Case {
    const char* model;
    const char* section;
    bool killing;
  };
  const Case battery[] = {
      {"flat_tm2", "dx", true},          {"flat_tm2", "dy", true},
      {"flat_tm2", "rot", true},         {"flat_tm2", "dilation", false},
      {"sphere_chart", "rot_x", true},   {"sphere_chart", "rot_y", true},
      {"sphere_chart", "rot_z", true},   {"sphere_chart", "e_th", false},
      {"so3_killing", "E1", true},       {"so3_killing", "E2", true},
      {"linebundle_X", "const1", true},  {"linebundle_X", "linear", false},
      {"foliation_product", "k_y", true}, {"foliation_product", "nk_x", false},
  };
  int count = 0;
  for (const Case& c : battery) {
    auto lm = load(c.model);
    Geometry geom(lm.metric);
    const KillingReport rep = killing_check(geom, named(lm, c.section), 48, 42);
    CHECK_MESSAGE(rep.verdict == c.killing, c.model << "/" << c.section);
    // when nonzero, the three forms agree within a factor of 100
    if (!c.killing) {
      const double lo = std::min({rep.residual_lemma, rep.residual_poisson,
                                  rep.residual_connection});
      const double hi = std::max({rep.residual_lemma, rep.residual_poisson,
                                  rep.residual_connection});
      CHECK(hi / lo < 100.0);
    }
    ++count;
  }
  CHECK(count >= 12);
}

TEST_CASE("killing verdicts close under the vector space and Lie bracket") {
  auto sph = load("sphere_chart");
  Geometry geom(sph.metric);
  const Section rx = named(sph, "rot_x");
  const Section ry = named(sph, "rot_y");

  // linear combination
  std::vector<Expr> comps;
  for (int a = 0; a < 2; ++a)
    comps.push_back(Expr::constant(1.3) * rx.components[a] +
                    Expr::constant(-0.7) * ry.components[a]);
  const double res_combo = killing_residual_lemma(geom, make_section(*sph.model, comps, "combo"),
                                                  32, 42);
  const double res_x = killing_residual_lemma(geom, rx, 32, 42);
  const double res_y = killing_residual_lemma(geom, ry, 32, 42);
  CHECK(res_combo <= 1.3 * res_x + 0.7 * res_y + 1e-12);

  // bracket of two Killing sections is Killing
  const Section bracket = bracket_sections(rx, ry);
  CHECK(killing_residual_lemma(geom, bracket, 32, 42) < 1e-8);

  // f u for non-constant f generically fails: the module obstruction
  auto tm2 = load("flat_tm2");
  Geometry fgeom(tm2.metric);
  const Section fdx = make_section(*tm2.model, {parse_expr("x1"), parse_expr("0")}, "f_dx");
  CHECK(killing_residual_lemma(fgeom, fdx, 32, 42) > 1e-2);
}

TEST_CASE("conserved charges along geodesics") {
  auto tm2 = load("flat_tm2");
  Geometry geom(tm2.metric);
  Eigen::Vector2d x0(0.1, -0.3), y0(0.7, 0.4);
  const Trajectory line = integrate(geom, FlowKind::Geodesic, x0, y0, 5.0, 1e-3);
  CHECK(charge_along_geodesic(geom, named(tm2, "dx"), line) < 1e-10);
  CHECK(charge_along_geodesic(geom, named(tm2, "rot"), line) < 1e-10);
  // dilation: <u|gamma> = x . y grows linearly, order 1 after t = 5
  CHECK(charge_along_geodesic(geom, named(tm2, "dilation"), line) > 1e-2);

  auto sph = load("sphere_chart");
  Geometry sgeom(sph.metric);
  Eigen::Vector2d sx0(1.0, 0.5), sy0(0.3, 0.4);
  const Trajectory arc = integrate(sgeom, FlowKind::Geodesic, sx0, sy0, 10.0, 1e-3);
  const double drift = arc.energy_drift();
  for (const char* name : {"rot_x", "rot_y", "rot_z"}) {
    const double cd = charge_along_geodesic(sgeom, named(sph, name), arc);
    CHECK(cd < 1e-8);
    CHECK(cd <= 10.0 * drift + 1e-12);
  }
}

TEST_CASE("killing transport: flat, sphere, Lie algebra") {
  // flat: (u, L) = ((1,0), 0) along a straight line stays put
  auto tm2 = load("flat_tm2");
  Geometry geom(tm2.metric);
  Eigen::Vector2d x0(0.0, 0.0), y0(0.6, 0.2);
  const Trajectory line = integrate(geom, FlowKind::Geodesic, x0, y0, 1.0, 1e-2);
  TransportData d0;
  d0.u = Eigen::Vector2d(1.0, 0.0);
  d0.l = Eigen::Matrix2d::Zero();
  const TransportData d1 = killing_transport(geom, d0, line);
  CHECK((d1.u - d0.u).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(d1.l.cwiseAbs().maxCoeff() < 1e-12);

  // the flat rotation field is reproduced exactly by its transport data
  const Section rot = named(tm2, "rot");
  const TransportData r0 = transport_data_of(geom, rot, x0);
  const TransportData r1 = killing_transport(geom, r0, line);
  CHECK((r1.u - rot.at(line.base.back())).cwiseAbs().maxCoeff() < 1e-10);

  // sphere: transport the rot_x data along a geodesic and compare with the
  // symbolic field at the endpoint
  auto sph = load("sphere_chart");
  Geometry sgeom(sph.metric);
  Eigen::Vector2d sx0(1.1, 0.4), sy0(0.35, 0.3);
  const Trajectory arc = integrate(sgeom, FlowKind::Geodesic, sx0, sy0, 1.5, 1e-3);
  const Section rx = named(sph, "rot_x");
  const TransportData s0 = transport_data_of(sgeom, rx, sx0);
  const TransportData s1 = killing_transport(sgeom, s0, arc);
  CHECK((s1.u - rx.at(arc.base.back())).cwiseAbs().maxCoeff() < 1e-6);
  const TransportData s_ref = transport_data_of(sgeom, rx, arc.base.back());
  CHECK((s1.l - s_ref.l).cwiseAbs().maxCoeff() < 1e-6);

  // so(3): vertical curve, consistent data is preserved (transport = identity)
  auto so3 = load("so3_killing");
  Geometry kg(so3.metric);
  Eigen::Vector3d v0(0.3, 0.8, -0.5);
  const Trajectory vert = integrate(kg, FlowKind::Geodesic, Eigen::VectorXd(0), v0, 1.0, 1e-2);
  const Section e1 = named(so3, "E1");
  const TransportData k0 = transport_data_of(kg, e1, Eigen::VectorXd(0));
  const TransportData k1 = killing_transport(kg, k0, vert);
  CHECK((k1.u - k0.u).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((k1.l - k0.l).cwiseAbs().maxCoeff() < 1e-10);

  // symmetric L is rejected
  TransportData bad;
  bad.u = Eigen::Vector2d(1.0, 0.0);
  bad.l = Eigen::Matrix2d::Identity();
  CHECK_THROWS_AS(killing_transport(geom, bad, line), std::invalid_argument);
}

TEST_CASE("killing_find: flat plane, so(3), line bundle, foliation") {
  auto tm2 = load("flat_tm2");
  Geometry geom(tm2.metric);
  const KillingBasis kb = killing_find(geom, monomial_basis(*tm2.model, 1), 5);
  CHECK(kb.dim == 3);
  CHECK(kb.bound == 3);
  CHECK(kb.gap_ratio > 1e4);
  CHECK(kb.closure_residual < 1e-8);
  for (const Section& u : kb.sections)
    CHECK(killing_residual_lemma(geom, u, 32, 42) < 1e-8);

  // so(3): constants only; structure constants are totally antisymmetric and
  // match eps up to an orthogonal change of basis (|C| = 1 on off-diagonal
  // index triples, 0 otherwise)
  auto so3 = load("so3_killing");
  Geometry sg(so3.metric);
  const KillingBasis skb = killing_find(sg, monomial_basis(*so3.model, 2), 5);
  CHECK(skb.dim == 3);
  CHECK(skb.closure_residual < 1e-10);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        const double v = std::abs(skb.structure_constants(a, b, c));
        const bool distinct = a != b && b != c && a != c;
        CHECK(v == doctest::Approx(distinct ? 1.0 : 0.0).epsilon(1e-8));
      }

  // line bundle with basis {1, x, x^2}: only constants survive
  auto line = load("linebundle_X");
  Geometry lg(line.metric);
  const KillingBasis lkb = killing_find(lg, monomial_basis(*line.model, 2), 7);
  CHECK(lkb.dim == 1);
  Eigen::VectorXd pa(1), pb(1);
  pa << -0.5;
  pb << 0.7;
  CHECK(lkb.sections[0].at(pa)[0] == doctest::Approx(lkb.sections[0].at(pb)[0]).epsilon(1e-10));

  // foliation with a leaf-coordinate basis: the x2 translation plus the
  // hyperbolic scaling isometry (-1, x2) of the leaf metric dx1^2 + c e^{2x1} dx2^2
  auto fol = load("foliation_product");
  Geometry fg(fol.metric);
  const std::vector<Expr> leaf_basis{Expr::constant(1.0), Expr::variable("x1"),
                                     Expr::variable("x2")};
  const KillingBasis fkb = killing_find(fg, leaf_basis, 4);
  CHECK(fkb.dim == 2);
  CHECK(fkb.dim <= fkb.bound);
  const Section hyperbolic =
      make_section(*fol.model, {parse_expr("-1"), parse_expr("x2")}, "k_scale");
  CHECK(killing_residual_lemma(fg, hyperbolic, 16, 42) < 1e-12);
  for (const Section& u : fkb.sections)
    CHECK(killing_residual_lemma(fg, u, 16, 42) < 1e-8);

  // underdetermined systems are refused
  CHECK_THROWS_AS(killing_find(lg, monomial_basis(*line.model, 12), 3),
                  std::invalid_argument);
}

TEST_CASE("geodesic sections") {
  auto tm2 = load("flat_tm2");
  Geometry geom(tm2.metric);
  CHECK(geodesic_section_residual(geom, named(tm2, "dx"), 16, 42) == 0.0);
  CHECK(geodesic_section_residual(geom, named(tm2, "dilation"), 16, 42) > 0.5);

  auto so3 = load("so3_killing");
  Geometry sg(so3.metric);
  CHECK(geodesic_section_residual(sg, named(so3, "E2"), 8, 42) < 1e-14);

  // Killing + geodesic: <u|u> constant along the flow
  Eigen::Vector2d x0(0.2, 0.4), y0(0.5, -0.3);
  const Trajectory line = integrate(geom, FlowKind::Geodesic, x0, y0, 2.0, 1e-2);
  const Section dx = named(tm2, "dx");
  double norm0 = dx.at(line.base.front()).squaredNorm();
  for (const auto& x : line.base)
    CHECK(dx.at(x).squaredNorm() == doctest::Approx(norm0).epsilon(1e-12));
}

TEST_CASE("Killing-Staeckel tensors") {
  auto sph = load("sphere_chart");
  Geometry geom(sph.metric);
  const AlgebroidModel& m = *sph.model;

  // H itself, written out explicitly with the inverse sphere metric
  const Expr h = parse_expr("0.5*(pi_e1^2 + pi_e2^2/sin(th)^2)");
  const StackelTensor k_h = make_stackel(m, h, 2);
  CHECK(stackel_residual(geom, k_h, 32, 42) < 1e-13);

  // constants are degree-zero Killing-Staeckel tensors
  const StackelTensor k_c = make_stackel(m, parse_expr("0*pi_e1 + 3"), 0);
  CHECK(stackel_residual(geom, k_c, 16, 42) == 0.0);

  // (u^a pi_a)^2 for the Killing rotation field
  const Expr uz = parse_expr("(-sin(ph)*pi_e1 - cos(ph)*cos(th)/sin(th)*pi_e2)^2");
  CHECK(stackel_residual(geom, make_stackel(m, uz, 2), 48, 42) < 1e-9);

  // a generic quadratic fails
  CHECK(stackel_residual(geom, make_stackel(m, parse_expr("pi_e1^2"), 2), 48, 42) > 1e-3);

  // homogeneity declaration is validated
  CHECK_THROWS_AS(make_stackel(m, parse_expr("pi_e1^2 + pi_e1"), 2), std::invalid_argument);
}

TEST_CASE("Maxwell-analogy identities") {
  auto tm2 = load("flat_tm2");
  Geometry geom(tm2.metric);
  const MaxwellResult flat_rot = maxwell_identities(geom, named(tm2, "rot"), 16, 42);
  CHECK(flat_rot.div_residual == 0.0);
  CHECK(flat_rot.ricci_residual < 1e-12);
  CHECK(flat_rot.trace_residual < 1e-12);

  // the dilation has divergence exactly 2 on the flat plane
  const MaxwellResult dil = maxwell_identities(geom, named(tm2, "dilation"), 16, 42);
  CHECK(dil.div_residual == doctest::Approx(2.0));

  auto sph = load("sphere_chart");
  Geometry sg(sph.metric);
  for (const char* name : {"rot_x", "rot_y", "rot_z"}) {
    const MaxwellResult r = maxwell_identities(sg, named(sph, name), 32, 42);
    CHECK(r.div_residual < 1e-7);
    CHECK(r.ricci_residual < 1e-7);
    CHECK(r.trace_residual < 1e-7);
  }

  auto so3 = load("so3_killing");
  Geometry kg(so3.metric);
  const MaxwellResult r3 = maxwell_identities(kg, named(so3, "E1"), 8, 42);
  CHECK(r3.div_residual < 1e-14);
  CHECK(r3.ricci_residual < 1e-13);
  CHECK(r3.trace_residual < 1e-13);
}
