#include "algebroid/model_io.hpp"

#include <fstream>
#include <set>

namespace algebroid {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& msg) {
  throw SchemaError(origin + ": " + msg);
}

Expr parse_checked(const std::string& origin, const json& j, const std::string& what,
                   const std::set<std::string>& allowed) {
  if (!j.is_string()) fail(origin, what + " must be an expression string");
  Expr e;
  try {
    e = parse_expr(j.get<std::string>());
  } catch (const ParseError& err) {
    fail(origin, what + ": " + err.what());
  }
  for (const std::string& v : e.variables())
    if (!allowed.count(v))
      fail(origin, what + " references undeclared name '" + v + "'");
  return e;
}

std::vector<std::string> read_names(const std::string& origin, const json& j,
                                    const std::string& what, int expect) {
  if (!j.is_array() || static_cast<int>(j.size()) != expect)
    fail(origin, what + " must be a list of " + std::to_string(expect) + " names");
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& item : j) {
    if (!item.is_string()) fail(origin, what + " entries must be strings");
    const std::string name = item.get<std::string>();
    if (!seen.insert(name).second) fail(origin, what + " has duplicate name '" + name + "'");
    out.push_back(name);
  }
  return out;
}

Box read_box(const std::string& origin, const json& j, const std::string& what, int expect) {
  if (!j.is_array() || static_cast<int>(j.size()) != expect)
    fail(origin, what + " must list " + std::to_string(expect) + " [lo, hi] pairs");
  Box box;
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
      fail(origin, what + " entries must be numeric [lo, hi] pairs");
    const double lo = pair[0].get<double>(), hi = pair[1].get<double>();
    if (!(hi > lo)) fail(origin, what + " has an empty axis");
    box.push_back({lo, hi});
  }
  return box;
}

}  // namespace

LoadedModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& err) {
    throw SchemaError(path + ": invalid JSON: " + err.what());
  }
  return load_model_json(doc, path);
}

LoadedModel load_model_json(const json& doc, const std::string& origin) {
  if (!doc.is_object()) fail(origin, "model file must be a JSON object");
  auto require = [&](const char* key) -> const json& {
    if (!doc.contains(key)) fail(origin, std::string("missing field '") + key + "'");
    return doc.at(key);
  };

  auto model = std::make_unique<AlgebroidModel>();
  if (doc.contains("name")) model->name = doc.at("name").get<std::string>();

  const json& jd = require("dimM");
  const json& jr = require("rank");
  if (!jd.is_number_integer() || jd.get<int>() < 0) fail(origin, "dimM must be an integer >= 0");
  if (!jr.is_number_integer() || jr.get<int>() < 1) fail(origin, "rank must be an integer >= 1");
  model->dim_m = jd.get<int>();
  model->rank = jr.get<int>();

  model->coords = read_names(origin, require("coords"), "coords", model->dim_m);
  model->frame = read_names(origin, require("frame"), "frame", model->rank);

  std::set<std::string> declared(model->coords.begin(), model->coords.end());
  for (const std::string& f : model->frame) {
    if (declared.count(f)) fail(origin, "frame name '" + f + "' collides with a coordinate");
    // derived momentum / velocity names must stay free
    for (const std::string& derived : {"pi_" + f, "y_" + f})
      if (declared.count(derived))
        fail(origin, "coordinate '" + derived + "' collides with a derived variable name");
  }

  const std::set<std::string> base_vars(model->coords.begin(), model->coords.end());

  // anchor: rank rows of dimM expression strings
  const json& ja = require("anchor");
  if (!ja.is_array() || static_cast<int>(ja.size()) != model->rank)
    fail(origin, "anchor must have rank rows");
  model->anchor = Array2<Expr>(model->rank, std::max(model->dim_m, 1));
  for (int a = 0; a < model->rank; ++a) {
    const json& row = ja.at(static_cast<std::size_t>(a));
    if (!row.is_array() || static_cast<int>(row.size()) != model->dim_m)
      fail(origin, "anchor row " + std::to_string(a + 1) + " must have dimM entries");
    for (int A = 0; A < model->dim_m; ++A)
      model->anchor(a, A) = parse_checked(origin, row.at(static_cast<std::size_t>(A)),
                                          "anchor[" + std::to_string(a + 1) + "][" +
                                              std::to_string(A + 1) + "]",
                                          base_vars);
  }

  // bracket: sparse entries, antisymmetric completion automatic
  model->bracket = Array3<Expr>(model->rank, model->rank, model->rank);
  if (doc.contains("bracket")) {
    const json& jb = doc.at("bracket");
    if (!jb.is_array()) fail(origin, "bracket must be a list of {a,b,c,expr} entries");
    std::set<std::array<int, 3>> given;
    for (const auto& entry : jb) {
      if (!entry.is_object() || !entry.contains("a") || !entry.contains("b") ||
          !entry.contains("c") || !entry.contains("expr"))
        fail(origin, "bracket entries must be {a, b, c, expr}");
      const int a = entry.at("a").get<int>(), b = entry.at("b").get<int>(),
                c = entry.at("c").get<int>();
      if (a < 1 || a > model->rank || b < 1 || b > model->rank || c < 1 || c > model->rank)
        fail(origin, "bracket entry index out of range");
      if (a == b) fail(origin, "bracket entry with a == b (diagonal is identically zero)");
      if (given.count({b, a, c}))
        fail(origin, "bracket entry (" + std::to_string(a) + "," + std::to_string(b) + "," +
                         std::to_string(c) +
                         ") duplicates its antisymmetric partner; store one triangle only");
      if (!given.insert({a, b, c}).second)
        fail(origin, "duplicate bracket entry");
      const Expr e = parse_checked(origin, entry.at("expr"), "bracket expr", base_vars);
      model->bracket(a - 1, b - 1, c - 1) = e;
      model->bracket(b - 1, a - 1, c - 1) = -e;
    }
  }

  model->box = model->dim_m == 0 ? Box{} : read_box(origin, require("box"), "box", model->dim_m);

  // metric: upper-triangle rows (row a has rank - a entries) or a full matrix
  const json& jm = require("metric");
  if (!jm.is_array() || static_cast<int>(jm.size()) != model->rank)
    fail(origin, "metric must have rank rows");
  bool full = true, upper = true;
  for (int a = 0; a < model->rank; ++a) {
    const int len = static_cast<int>(jm.at(static_cast<std::size_t>(a)).size());
    if (len != model->rank) full = false;
    if (len != model->rank - a) upper = false;
  }
  if (model->rank == 1) upper = true;  // ambiguous single entry: treat as upper
  if (!full && !upper)
    fail(origin, "metric rows must form the upper triangle or a full matrix");

  std::vector<Expr> upper_exprs;
  std::shared_ptr<Array2<Expr>> full_exprs;
  if (upper) {
    for (int a = 0; a < model->rank; ++a) {
      const json& row = jm.at(static_cast<std::size_t>(a));
      for (int off = 0; off < model->rank - a; ++off)
        upper_exprs.push_back(parse_checked(origin, row.at(static_cast<std::size_t>(off)),
                                            "metric entry", base_vars));
    }
  } else {
    full_exprs = std::make_shared<Array2<Expr>>(model->rank, model->rank);
    for (int a = 0; a < model->rank; ++a)
      for (int b = 0; b < model->rank; ++b)
        (*full_exprs)(a, b) =
            parse_checked(origin, jm.at(static_cast<std::size_t>(a)).at(static_cast<std::size_t>(b)),
                          "metric entry", base_vars);
    for (int a = 0; a < model->rank; ++a)
      for (int b = a; b < model->rank; ++b) upper_exprs.push_back((*full_exprs)(a, b));
  }

  if (doc.contains("sections")) {
    const json& js = doc.at("sections");
    if (!js.is_object()) fail(origin, "sections must map names to component lists");
    for (const auto& [name, comps] : js.items()) {
      if (!comps.is_array() || static_cast<int>(comps.size()) != model->rank)
        fail(origin, "section '" + name + "' must have rank components");
      std::vector<Expr> v;
      for (const auto& c : comps)
        v.push_back(parse_checked(origin, c, "section '" + name + "'", base_vars));
      model->sections.emplace(name, std::move(v));
    }
  }

  if (doc.contains("oneform")) {
    const json& jo = doc.at("oneform");
    if (!jo.is_array() || static_cast<int>(jo.size()) != model->rank)
      fail(origin, "oneform must have rank components");
    for (const auto& c : jo)
      model->oneform.push_back(parse_checked(origin, c, "oneform", base_vars));
  }

  if (doc.contains("sigma")) {
    const json& jsig = doc.at("sigma");
    if (!jsig.is_object()) fail(origin, "sigma must be an object");
    auto spec = std::make_shared<SigmaSpec>();
    if (!jsig.contains("k") || !jsig.at("k").is_number_integer())
      fail(origin, "sigma.k must be 1 or 2");
    spec->k = jsig.at("k").get<int>();
    if (spec->k != 1 && spec->k != 2) fail(origin, "sigma.k must be 1 or 2");
    if (!jsig.contains("sizes") || !jsig.at("sizes").is_array() ||
        static_cast<int>(jsig.at("sizes").size()) != spec->k)
      fail(origin, "sigma.sizes must list k node counts");
    for (const auto& s : jsig.at("sizes")) {
      if (!s.is_number_integer() || s.get<int>() < 4)
        fail(origin, "sigma.sizes entries must be integers >= 4");
      spec->sizes.push_back(s.get<int>());
    }
    spec->box = read_box(origin, jsig.contains("box") ? jsig.at("box") : json(), "sigma.box",
                         spec->k);
    spec->coords = read_names(origin,
                              jsig.contains("coords") ? jsig.at("coords") : json(),
                              "sigma.coords", spec->k);
    for (const std::string& z : spec->coords)
      if (base_vars.count(z))
        fail(origin, "sigma coordinate '" + z + "' collides with a base coordinate");
    std::set<std::string> zvars(spec->coords.begin(), spec->coords.end());
    if (!jsig.contains("metric")) fail(origin, "sigma.metric missing");
    const json& jgm = jsig.at("metric");
    if (!jgm.is_array() || static_cast<int>(jgm.size()) != spec->k)
      fail(origin, "sigma.metric must have k upper-triangle rows");
    for (int a = 0; a < spec->k; ++a) {
      const json& row = jgm.at(static_cast<std::size_t>(a));
      if (!row.is_array() || static_cast<int>(row.size()) != spec->k - a)
        fail(origin, "sigma.metric rows must form the upper triangle");
      for (const auto& c : row)
        spec->metric_upper.push_back(parse_checked(origin, c, "sigma.metric entry", zvars));
    }
    if (jsig.contains("periodic")) {
      const json& jp = jsig.at("periodic");
      if (!jp.is_array() || static_cast<int>(jp.size()) != spec->k)
        fail(origin, "sigma.periodic must list k booleans");
      for (const auto& p : jp) spec->periodic.push_back(p.get<bool>());
    }
    model->sigma = spec;
  }

  LoadedModel lm;
  lm.model = std::move(model);
  lm.metric = make_metric(*lm.model, std::move(upper_exprs));
  lm.metric_full = full_exprs;
  return lm;
}

double metric_symmetry_residual(const LoadedModel& lm, int samples, std::uint64_t seed) {
  if (!lm.metric_full) return 0.0;
  const AlgebroidModel& m = *lm.model;
  double worst = 0.0;
  BoxSampler sampler(m, seed);
  sampler.sweep(m.dim_m == 0 ? 1 : samples, [&](const Eigen::VectorXd& x) {
    const Binding b = m.bind_point(x);
    for (int a = 0; a < m.rank; ++a)
      for (int c = a + 1; c < m.rank; ++c)
        worst = std::max(worst,
                         std::abs((*lm.metric_full)(a, c).eval(b) - (*lm.metric_full)(c, a).eval(b)));
  });
  return worst;
}

nlohmann::ordered_json new_report(const std::string& model_name, std::uint64_t seed) {
  nlohmann::ordered_json rep;
  rep["tool_version"] = kToolVersion;
  rep["model"] = model_name;
  rep["seed"] = seed;
  rep["conventions"] = {
      {"curvature_index_order",
       "R[a][d][b][c] = <s^d, R(s_b, s_c) s_a>; Ricci_ab = R[a][c][c][b]"},
      {"second_covariant_derivative",
       "nabla2_{b,c} u = nabla_b(nabla_c u) - Gamma_bc^e nabla_e u"},
      {"curl_condition",
       "res^a_{jk} = d_j chi_k^a - d_k chi_j^a - chi_j^b chi_k^c Q_cb^a"},
      {"christoffel_bracket_term", "+Q_bc^e G_ed (Koszul form)"},
  };
  return rep;
}

}  // namespace algebroid
