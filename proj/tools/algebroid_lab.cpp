// algebroid-lab: load Lie algebroid models, run the validator/geodesic/
// Killing/sigma analyses, and emit machine-readable reports.
//
// Exit codes: 0 success, 1 validation failure or blow-up, 2 schema/usage
// error, 3 non-convergence.

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "algebroid/model_io.hpp"

namespace {

using namespace algebroid;
using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitSchema = 2;
constexpr int kExitNoConvergence = 3;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("ALGEBROID_LAB_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0') return v;
    throw SchemaError("ALGEBROID_LAB_SEED is not an integer");
  }
  return 42;
}

Eigen::VectorXd parse_vector(const std::string& text, int expect, const std::string& what) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      vals.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw SchemaError(what + ": cannot parse '" + cell + "'");
    }
  }
  if (static_cast<int>(vals.size()) != expect)
    throw SchemaError(what + ": expected " + std::to_string(expect) + " comma-separated values");
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

void emit_report(const ordered_json& rep, const std::string& out_path, std::ostream& fallback) {
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write report to " + out_path);
    out << rep.dump(2) << "\n";
  } else {
    fallback << rep.dump(2) << "\n";
  }
}

const Section& named_section(const AlgebroidModel& m, const std::string& name,
                             std::map<std::string, Section>& cache) {
  auto found = cache.find(name);
  if (found != cache.end()) return found->second;
  auto it = m.sections.find(name);
  if (it == m.sections.end()) throw SchemaError("model declares no section named '" + name + "'");
  return cache.emplace(name, make_section(m, it->second, name)).first->second;
}

int cmd_validate(const std::string& path, int samples, std::uint64_t seed,
                 const std::string& out_path) {
  const LoadedModel lm = load_model_file(path);
  const AlgebroidModel& m = *lm.model;
  ordered_json rep = new_report(m.name, seed);
  rep["analysis"] = "validate";
  rep["samples"] = samples;

  constexpr double kAxiomTol = 1e-10;
  constexpr double kConnTol = 1e-9;

  double worst = 0.0;
  std::string worst_name = "none";
  auto track = [&](const char* name, double value, double tol) {
    if (value >= tol && value > worst) {
      worst = value;
      worst_name = name;
    }
    return value;
  };

  const double antisym = track("antisymmetry", validate_antisymmetry(m, samples, seed), kAxiomTol);
  const AnchorMorphismResult morph = validate_anchor_morphism(m, samples, seed);
  track("anchor_morphism", morph.full, kAxiomTol);
  const double jacobi = track("jacobi", validate_jacobi(m, samples, seed), kAxiomTol);
  const double sym = track("metric_symmetry", metric_symmetry_residual(lm, samples, seed), kAxiomTol);

  rep["axioms"] = {
      {"antisymmetry_residual", antisym},
      {"anchor_morphism_residual", morph.full},
      {"anchor_morphism_pairwise_residual", morph.pairwise},
      {"jacobi_residual", jacobi},
      {"metric_symmetry_residual", sym},
      {"tolerance", kAxiomTol},
  };

  // Fundamental-Theorem certification: torsion, compatibility and the Koszul
  // identity on frame triples at sampled points.
  double torsion_max = 0.0, compat_max = 0.0, koszul_max = 0.0, det_min = 1e300;
  bool degenerate = false;
  std::string degenerate_msg;
  try {
    Geometry geom(lm.metric);
    std::vector<Section> frame_sections;
    for (int a = 0; a < m.rank; ++a) {
      std::vector<Expr> comps(static_cast<std::size_t>(m.rank));
      for (int b = 0; b < m.rank; ++b) comps[b] = Expr::constant(a == b ? 1.0 : 0.0);
      frame_sections.push_back(make_section(m, std::move(comps), "s" + std::to_string(a + 1)));
    }
    BoxSampler sampler(m, seed + 1);
    sampler.sweep(m.dim_m == 0 ? 1 : samples, [&](const Eigen::VectorXd& x) {
      const ConnectionAt conn = geom.christoffel(x);
      torsion_max = std::max(torsion_max, conn.torsion_certificate);
      compat_max = std::max(compat_max, conn.compat_certificate);
      det_min = std::min(det_min, std::abs(conn.g.determinant()));
      for (int a = 0; a < m.rank; ++a)
        for (int b = 0; b < m.rank; ++b)
          for (int c = 0; c < m.rank; ++c)
            koszul_max = std::max(koszul_max,
                                  std::abs(geom.koszul_check(x, frame_sections[a],
                                                             frame_sections[b], frame_sections[c])));
    });
  } catch (const DegenerateMetricError& err) {
    degenerate = true;
    degenerate_msg = err.what();
  } catch (const CertificationError& err) {
    degenerate = true;  // treated as a validation failure below
    degenerate_msg = err.what();
  }
  track("connection_torsion", torsion_max, kConnTol);
  track("connection_compatibility", compat_max, kConnTol);
  track("koszul", koszul_max, kConnTol);

  rep["connection"] = {
      {"torsion_residual", torsion_max},
      {"compatibility_residual", compat_max},
      {"koszul_residual", koszul_max},
      {"min_abs_det_metric", det_min},
      {"tolerance", kConnTol},
  };
  if (degenerate) rep["connection"]["error"] = degenerate_msg;

  const bool ok = !degenerate && antisym < kAxiomTol && morph.full < kAxiomTol &&
                  jacobi < kAxiomTol && sym < kAxiomTol && torsion_max < kConnTol &&
                  compat_max < kConnTol && koszul_max < kConnTol;
  rep["verdict"] = ok ? "pass" : "fail";
  if (!ok) {
    rep["worst"] = {{"residual", degenerate ? degenerate_msg : worst_name},
                    {"value", worst}};
  }
  emit_report(rep, out_path, std::cout);
  return ok ? kExitOk : kExitValidation;
}

int cmd_geodesic(const std::string& path, const std::string& x0_text, const std::string& y0_text,
                 const std::string& pi0_text, double t_end, double h, bool dual,
                 const std::string& csv_path, const std::string& report_path,
                 std::uint64_t seed) {
  const LoadedModel lm = load_model_file(path);
  const AlgebroidModel& m = *lm.model;
  if (y0_text.empty() == pi0_text.empty())
    throw SchemaError("provide exactly one of --y0 (geodesic flow) or --pi0 (cogeodesic flow)");

  Geometry geom(lm.metric);
  const Eigen::VectorXd x0 = m.dim_m == 0 ? Eigen::VectorXd(0)
                                          : parse_vector(x0_text, m.dim_m, "--x0");
  const FlowKind kind = y0_text.empty() ? FlowKind::Cogeodesic : FlowKind::Geodesic;
  const Eigen::VectorXd fiber0 =
      parse_vector(y0_text.empty() ? pi0_text : y0_text, m.rank,
                   y0_text.empty() ? "--pi0" : "--y0");

  const Trajectory traj = integrate(geom, kind, x0, fiber0, t_end, h);

  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    traj.write_csv(out, m);
  } else {
    traj.write_csv(std::cout, m);
  }

  ordered_json rep = new_report(m.name, seed);
  rep["analysis"] = "geodesic";
  rep["flow"] = kind == FlowKind::Cogeodesic ? "cogeodesic" : "geodesic";
  rep["t_end"] = t_end;
  rep["h"] = traj.step;
  rep["energy_drift"] = traj.energy_drift();
  rep["admissibility_max"] = traj.admissibility_max();
  rep["vertical"] = traj.vertical;
  rep["blew_up"] = traj.blew_up;
  rep["last_valid_time"] = traj.last_valid_time;

  if (dual && !traj.blew_up) {
    // Integrate the dual flow and compare endpoints after mapping to E.
    const FlowKind other = kind == FlowKind::Geodesic ? FlowKind::Cogeodesic : FlowKind::Geodesic;
    Eigen::VectorXd dual_fiber;
    if (kind == FlowKind::Geodesic)
      dual_fiber = dualize(geom, EPoint{x0, fiber0}).pi;
    else
      dual_fiber = undualize(geom, PhasePoint{x0, fiber0}).y;
    const Trajectory traj2 = integrate(geom, other, x0, dual_fiber, t_end, h);
    double dev = 0.0;
    const std::size_t count = std::min(traj.times.size(), traj2.times.size());
    for (std::size_t s = 0; s < count; ++s) {
      const Eigen::VectorXd y1 = kind == FlowKind::Geodesic
                                     ? traj.fiber[s]
                                     : undualize(geom, PhasePoint{traj.base[s], traj.fiber[s]}).y;
      const Eigen::VectorXd y2 = other == FlowKind::Geodesic
                                     ? traj2.fiber[s]
                                     : undualize(geom, PhasePoint{traj2.base[s], traj2.fiber[s]}).y;
      if (m.dim_m > 0) dev = std::max(dev, (traj.base[s] - traj2.base[s]).cwiseAbs().maxCoeff());
      dev = std::max(dev, (y1 - y2).cwiseAbs().maxCoeff());
    }
    rep["dual_flow_deviation"] = dev;
    rep["dual_energy_drift"] = traj2.energy_drift();
  }

  emit_report(rep, report_path, csv_path.empty() ? std::cerr : std::cout);
  return traj.blew_up ? kExitValidation : kExitOk;
}

int cmd_killing(const std::string& path, const std::string& mode, const std::string& section_name,
                int degree, int grid, int samples, std::uint64_t seed,
                const std::string& out_path) {
  const LoadedModel lm = load_model_file(path);
  const AlgebroidModel& m = *lm.model;
  Geometry geom(lm.metric);
  std::map<std::string, Section> cache;

  ordered_json rep = new_report(m.name, seed);
  rep["analysis"] = "killing_" + mode;
  rep["samples"] = samples;

  if (mode == "check") {
    const Section& u = named_section(m, section_name, cache);
    const KillingReport kr = killing_check(geom, u, samples, seed);
    rep["section"] = section_name;
    rep["residual_lemma"] = kr.residual_lemma;
    rep["residual_poisson"] = kr.residual_poisson;
    rep["residual_connection"] = kr.residual_connection;
    rep["normalization"] = kr.normalization;
    rep["tolerance"] = kr.tolerance;
    rep["killing"] = kr.verdict;
    emit_report(rep, out_path, std::cout);
    return kExitOk;
  }

  const std::vector<Expr> basis = monomial_basis(m, degree);
  const KillingBasis kb = killing_find(geom, basis, grid);
  rep["degree"] = degree;
  rep["grid_per_axis"] = grid;
  rep["dimension"] = kb.dim;
  rep["bound"] = kb.bound;
  rep["bound_exceeded"] = kb.dim > kb.bound;
  rep["gap_ratio"] = kb.gap_ratio;
  rep["closure_residual"] = kb.closure_residual;
  rep["singular_values"] = kb.singular_values;
  ordered_json cj = ordered_json::array();
  for (int a = 0; a < kb.dim; ++a) {
    ordered_json row = ordered_json::array();
    for (int b = 0; b < kb.dim; ++b) {
      ordered_json inner = ordered_json::array();
      for (int c = 0; c < kb.dim; ++c) inner.push_back(kb.structure_constants(a, b, c));
      row.push_back(inner);
    }
    cj.push_back(row);
  }
  rep["structure_constants"] = cj;
  ordered_json sections = ordered_json::object();
  for (const Section& u : kb.sections) {
    ordered_json comps = ordered_json::array();
    for (const Expr& e : u.components) comps.push_back(e.str());
    sections[u.name] = comps;
  }
  rep["sections"] = sections;
  emit_report(rep, out_path, std::cout);
  return kExitOk;
}

SourceManifold require_source(const AlgebroidModel& m, int nodes_override) {
  if (!m.sigma) throw SchemaError("model has no sigma block");
  SigmaSpec spec = *m.sigma;
  if (nodes_override > 0) {
    for (auto& s : spec.sizes) s = nodes_override;
  }
  return SourceManifold(spec);
}

int cmd_sigma_solve(const LoadedModel& lm, const std::string& phi0_text,
                    const std::string& phi1_text, int nodes, double step_factor, int iters,
                    double tol, const std::string& csv_path, const std::string& log_path,
                    const std::string& out_path, std::uint64_t seed) {
  const AlgebroidModel& m = *lm.model;
  Geometry geom(lm.metric);
  const SourceManifold src = require_source(m, nodes);
  if (src.k() != 1) throw SchemaError("sigma solve currently drives the k = 1 problem");

  const Eigen::VectorXd phi0 = parse_vector(phi0_text, m.dim_m, "--phi0");
  const Eigen::VectorXd phi1 = parse_vector(phi1_text, m.dim_m, "--phi1");
  const RelaxResult res = relax_multilevel(geom, src, phi0, phi1, step_factor, iters, tol);

  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    write_config_csv(out, res.cfg, src, m);
  }
  if (!log_path.empty()) {
    std::ofstream out(log_path);
    write_relax_log_csv(out, res.log);
  }

  ordered_json rep = new_report(m.name, seed);
  rep["analysis"] = "sigma_solve";
  rep["nodes"] = src.size(0);
  rep["action"] = res.final_action;
  rep["max_tension"] = res.final_tension;
  rep["converged"] = res.converged;
  rep["stalled"] = res.stalled;
  const MorphismResidual mr = morphism_residual(res.cfg, geom, src);
  rep["morphism_residual"] = {{"admissibility", mr.res_a}, {"curl", mr.res_b}};
  emit_report(rep, out_path, std::cout);
  return res.converged ? kExitOk : kExitNoConvergence;
}

int cmd_sigma_residual(const LoadedModel& lm, const std::string& config_path, int nodes,
                       const std::string& out_path, std::uint64_t seed) {
  const AlgebroidModel& m = *lm.model;
  Geometry geom(lm.metric);
  const SourceManifold src = require_source(m, nodes);
  std::ifstream in(config_path);
  if (!in) throw SchemaError("cannot open configuration " + config_path);
  const SigmaConfiguration cfg = read_config_csv(in, src, m);

  ordered_json rep = new_report(m.name, seed);
  rep["analysis"] = "sigma_residual";
  const MorphismResidual mr = morphism_residual(cfg, geom, src);
  rep["morphism_residual"] = {{"admissibility", mr.res_a}, {"curl", mr.res_b}};
  rep["action"] = action(cfg, geom, src);
  rep["max_tension"] = max_tension(el_residual(cfg, geom, src));
  emit_report(rep, out_path, std::cout);
  return kExitOk;
}

int cmd_sigma_noether(const LoadedModel& lm, const std::string& config_path,
                      const std::string& section_name, int nodes, const std::string& csv_path,
                      const std::string& out_path, std::uint64_t seed) {
  const AlgebroidModel& m = *lm.model;
  Geometry geom(lm.metric);
  const SourceManifold src = require_source(m, nodes);
  std::ifstream in(config_path);
  if (!in) throw SchemaError("cannot open configuration " + config_path);
  const SigmaConfiguration cfg = read_config_csv(in, src, m);
  std::map<std::string, Section> cache;
  const Section& u = named_section(m, section_name, cache);
  const Eigen::VectorXd xi = Eigen::VectorXd::Ones(1);
  const std::vector<Section> basis{u};

  const Array2<double> cur = noether_current(cfg, geom, src, basis, xi);
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    out << "node";
    for (int j = 0; j < src.k(); ++j) out << ",J" << j + 1;
    out << "\n";
    for (int id = 0; id < src.num_nodes(); ++id) {
      out << id;
      for (int j = 0; j < src.k(); ++j) out << "," << cur(id, j);
      out << "\n";
    }
  }
  const NoetherDivergence div = noether_divergence(cfg, geom, src, basis, xi);
  ordered_json rep = new_report(m.name, seed);
  rep["analysis"] = "sigma_noether";
  rep["section"] = section_name;
  rep["divergence"] = div.divergence;
  rep["max_tension"] = div.max_tension;
  emit_report(rep, out_path, std::cout);
  return kExitOk;
}

int cmd_sigma_charged(const LoadedModel& lm, const std::string& x0_text,
                      const std::string& chi0_text, double t_end, double h,
                      const std::string& section_name, const std::string& csv_path,
                      const std::string& out_path, std::uint64_t seed) {
  const AlgebroidModel& m = *lm.model;
  if (m.oneform.empty()) throw SchemaError("model has no oneform block");
  Geometry geom(lm.metric);
  const Eigen::VectorXd x0 = m.dim_m == 0 ? Eigen::VectorXd(0)
                                          : parse_vector(x0_text, m.dim_m, "--x0");
  const Eigen::VectorXd chi0 = parse_vector(chi0_text, m.rank, "--chi0");

  const Trajectory traj = charged_particle(geom, m.oneform, EPoint{x0, chi0}, t_end, h);
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    traj.write_csv(out, m);
  } else {
    traj.write_csv(std::cout, m);
  }

  // Antisymmetry certificate of the assembled field strength at the start.
  const Array2<Expr> f = field_strength(m, m.oneform);
  double fres = 0.0;
  {
    const Binding b = m.bind_point(x0);
    for (int bb = 0; bb < m.rank; ++bb)
      for (int c = 0; c < m.rank; ++c)
        fres = std::max(fres, std::abs(f(bb, c).eval(b) + f(c, bb).eval(b)));
  }

  ordered_json rep = new_report(m.name, seed);
  rep["analysis"] = "sigma_charged";
  rep["t_end"] = t_end;
  rep["h"] = traj.step;
  rep["energy_drift"] = traj.energy_drift();
  rep["field_strength_antisymmetry"] = fres;
  rep["blew_up"] = traj.blew_up;
  rep["last_valid_time"] = traj.last_valid_time;
  if (!section_name.empty()) {
    std::map<std::string, Section> cache;
    const Section& u = named_section(m, section_name, cache);
    const std::vector<Expr> lie = lie_derivative_oneform(u, m.oneform);
    double lres = 0.0;
    BoxSampler sampler(m, seed);
    sampler.sweep(m.dim_m == 0 ? 1 : 32, [&](const Eigen::VectorXd& x) {
      const Binding b = m.bind_point(x);
      for (const Expr& e : lie) lres = std::max(lres, std::abs(e.eval(b)));
    });
    rep["section"] = section_name;
    rep["lie_derivative_oneform_residual"] = lres;
    rep["noether_drift"] = charged_noether_drift(geom, m.oneform, u, traj);
  }
  emit_report(rep, out_path, csv_path.empty() ? std::cerr : std::cout);
  return traj.blew_up ? kExitValidation : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian Lie algebroid laboratory"};
  app.set_help_flag("--help", "print help");
  app.require_subcommand(1);

  std::string model_path, out_path, csv_path, report_path, log_path, config_path;
  std::string x0_text, y0_text, pi0_text, phi0_text, phi1_text, chi0_text, section_name;
  std::string killing_mode;
  double t_end = 1.0, h = 1e-3, step_factor = 0.3, tol = 1e-6;
  int samples = 64, degree = 1, grid = 5, iters = 40000, nodes = 0;
  bool dual = false;
  std::uint64_t seed = 0;
  bool seed_given = false;

  auto add_common = [&](CLI::App* sub) {
    sub->set_help_flag("--help", "print help");
    sub->add_option("model", model_path, "model JSON file")->required();
    sub->add_option("--seed", seed, "RNG seed (default 42 or ALGEBROID_LAB_SEED)")
        ->each([&](const std::string&) { seed_given = true; });
  };

  CLI::App* validate = app.add_subcommand("validate", "axiom + connection certification");
  add_common(validate);
  validate->add_option("--samples", samples, "sample count");
  validate->add_option("--out", out_path, "report file (default stdout)");

  CLI::App* geodesic = app.add_subcommand("geodesic", "integrate (co)geodesic flow");
  add_common(geodesic);
  geodesic->add_option("--x0", x0_text, "initial base point");
  geodesic->add_option("--y0", y0_text, "initial fiber velocity (geodesic flow)");
  geodesic->add_option("--pi0", pi0_text, "initial momenta (cogeodesic flow)");
  geodesic->add_option("--t-end", t_end, "integration time");
  geodesic->add_option("--h", h, "step size");
  geodesic->add_flag("--dual", dual, "also integrate the dual flow and compare");
  geodesic->add_option("--out", csv_path, "trajectory CSV file (default stdout)");
  geodesic->add_option("--report", report_path, "report file");

  CLI::App* killing = app.add_subcommand("killing", "Killing section analyses");
  add_common(killing);
  killing->add_option("mode", killing_mode, "check | find")->required();
  killing->add_option("--section", section_name, "section name (check mode)");
  killing->add_option("--degree", degree, "monomial degree cap (find mode)");
  killing->add_option("--grid", grid, "sample grid points per axis");
  killing->add_option("--samples", samples, "sample count");
  killing->add_option("--out", out_path, "report file (default stdout)");

  CLI::App* sigma = app.add_subcommand("sigma", "lattice sigma model");
  add_common(sigma);
  std::string sigma_mode;
  sigma->add_option("mode", sigma_mode, "solve | residual | noether | charged")->required();
  sigma->add_option("--phi0", phi0_text, "left Dirichlet value (solve)");
  sigma->add_option("--phi1", phi1_text, "right Dirichlet value (solve)");
  sigma->add_option("--nodes", nodes, "override node count per axis");
  sigma->add_option("--step-factor", step_factor, "descent step as a fraction of h^2");
  sigma->add_option("--iters", iters, "iteration budget per level");
  sigma->add_option("--tol", tol, "tension tolerance");
  sigma->add_option("--config", config_path, "configuration CSV (residual/noether)");
  sigma->add_option("--section", section_name, "section name (noether/charged)");
  sigma->add_option("--x0", x0_text, "initial base point (charged)");
  sigma->add_option("--chi0", chi0_text, "initial fiber velocity (charged)");
  sigma->add_option("--t-end", t_end, "integration time (charged)");
  sigma->add_option("--h", h, "step size (charged)");
  sigma->add_option("--csv", csv_path, "output CSV file");
  sigma->add_option("--log", log_path, "convergence log CSV (solve)");
  sigma->add_option("--out", out_path, "report file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitSchema;
  }

  try {
    if (!seed_given) seed = default_seed();
    if (validate->parsed()) return cmd_validate(model_path, samples, seed, out_path);
    if (geodesic->parsed())
      return cmd_geodesic(model_path, x0_text, y0_text, pi0_text, t_end, h, dual, csv_path,
                          report_path, seed);
    if (killing->parsed()) {
      if (killing_mode != "check" && killing_mode != "find")
        throw SchemaError("killing mode must be 'check' or 'find'");
      if (killing_mode == "check" && section_name.empty())
        throw SchemaError("killing check needs --section");
      return cmd_killing(model_path, killing_mode, section_name, degree, grid, samples, seed,
                         out_path);
    }
    if (sigma->parsed()) {
      const LoadedModel lm = load_model_file(model_path);
      if (sigma_mode == "solve")
        return cmd_sigma_solve(lm, phi0_text, phi1_text, nodes, step_factor, iters, tol,
                               csv_path, log_path, out_path, seed);
      if (sigma_mode == "residual")
        return cmd_sigma_residual(lm, config_path, nodes, out_path, seed);
      if (sigma_mode == "noether")
        return cmd_sigma_noether(lm, config_path, section_name, nodes, csv_path, out_path, seed);
      if (sigma_mode == "charged")
        return cmd_sigma_charged(lm, x0_text, chi0_text, t_end, h, section_name, csv_path,
                                 out_path, seed);
      throw SchemaError("sigma mode must be solve, residual, noether or charged");
    }
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const DegenerateMetricError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const CertificationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitSchema;
}
