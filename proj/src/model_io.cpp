#include "bv/model_io.hpp"

#include <json.hpp>

namespace bv::io {

using nlohmann::ordered_json;

namespace {

long to_long(const Rational& r, bool num) {
  mpz_class z = num ? r.get_num() : r.get_den();
  if (!z.fits_slong_p())
    throw ParseError("emit: rational exceeds the integer range of the file schema");
  return z.get_si();
}

ordered_json coeff_json(const GaussianRational& g) {
  return ordered_json::array(
      {to_long(g.re(), true), to_long(g.re(), false), to_long(g.im(), true), to_long(g.im(), false)});
}

GaussianRational coeff_from_json(const ordered_json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4)
    throw ParseError(where + ": coeff must be [re_num, re_den, im_num, im_den]");
  for (auto& x : j)
    if (!x.is_number_integer()) throw ParseError(where + ": coeff entries must be integers");
  long rn = j[0].get<long>(), rd = j[1].get<long>(), in = j[2].get<long>(), id = j[3].get<long>();
  if (rd == 0 || id == 0) throw ParseError(where + ": zero denominator");
  Rational re(rn, rd), im(in, id);
  re.canonicalize();
  im.canonicalize();
  return {re, im};
}

ordered_json polynomial_json(const GradedPolynomial& p) {
  ordered_json terms = ordered_json::array();
  for (auto& [mono, c] : p.terms()) {
    for (auto& [power, g] : c.terms()) {
      ordered_json t;
      t["hbar_power"] = power;
      t["coeff"] = coeff_json(g);
      ordered_json mj = ordered_json::array();
      for (auto& [v, e] : mono.factors())
        mj.push_back(ordered_json::array({p.chart()->var(v).name, e}));
      t["monomial"] = std::move(mj);
      terms.push_back(std::move(t));
    }
  }
  return terms;
}

GradedPolynomial polynomial_from_json(const ordered_json& j, const ChartPtr& chart,
                                      const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": polynomial must be a term array");
  GradedPolynomial p(chart);
  std::size_t idx = 0;
  for (auto& t : j) {
    std::string at = where + ".term[" + std::to_string(idx++) + "]";
    if (!t.is_object()) throw ParseError(at + ": term must be an object");
    if (!t.contains("hbar_power") || !t["hbar_power"].is_number_integer())
      throw ParseError(at + ": missing integer hbar_power");
    int power = t["hbar_power"].get<int>();
    if (power < 0) throw ParseError(at + ": hbar_power must be non-negative");
    GaussianRational g = coeff_from_json(t.at("coeff"), at);
    if (!t.contains("monomial") || !t["monomial"].is_array())
      throw ParseError(at + ": missing monomial list");
    std::vector<VarIndex> factors;
    for (auto& f : t["monomial"]) {
      if (!f.is_array() || f.size() != 2 || !f[0].is_string() || !f[1].is_number_integer())
        throw ParseError(at + ": monomial entries must be [var, exponent]");
      auto vi = chart->find(f[0].get<std::string>());
      if (!vi) throw ParseError(at + ": unknown variable " + f[0].get<std::string>());
      long e = f[1].get<long>();
      if (e < 1) throw ParseError(at + ": exponent must be positive");
      for (long k = 0; k < e; ++k) factors.push_back(*vi);
    }
    auto mono = Monomial::from_factors(factors, *chart);
    if (!mono) throw ParseError(at + ": odd variable squared");
    Scalar coeff = Scalar::term(g, power);
    if (mono->second < 0) coeff = -coeff;
    p += GradedPolynomial::monomial(chart, mono->first, coeff);
  }
  return p;
}

}  // namespace

std::string emit_polynomial_json(const GradedPolynomial& p) {
  return polynomial_json(p).dump(2);
}

GradedPolynomial parse_polynomial_json(const std::string& bytes, const ChartPtr& chart) {
  ordered_json j;
  try {
    j = ordered_json::parse(bytes);
  } catch (const std::exception& e) {
    throw ParseError(std::string("json: ") + e.what());
  }
  return polynomial_from_json(j, chart, "polynomial");
}

models::BvModel run_constructor(const std::string& kind,
                                const std::map<std::string, std::string>& params) {
  auto get = [&](const std::string& key, const std::string& dflt) {
    auto it = params.find(key);
    return it == params.end() ? dflt : it->second;
  };
  bool mutate = get("mutate", "0") == "1";

  if (kind == "bv_ansatz") {
    std::string system = get("system", "so3");
    models::GaugeSystem G;
    if (system == "so3")
      G = models::so3_linear_gauge_system();
    else if (system == "abelian")
      G = models::abelian_shift_system();
    else
      throw ParseError("bv_ansatz: unknown system " + system);
    if (mutate)
      for (auto& fa : G.f)
        for (auto& fb : fa)
          for (auto& fc : fb) fc = fc.scaled(Scalar(2));
    return models::build_bv_ansatz(G);
  }
  if (kind == "cs_superpoint") {
    std::string lie = get("lie", "so3");
    std::string base = get("base", "superpoint");
    models::QuadraticLie g =
        lie == "so3" ? models::QuadraticLie::so3()
                     : (lie == "abelian" ? models::QuadraticLie::abelian(1)
                                         : throw ParseError("cs_superpoint: unknown lie " + lie));
    models::CdgaBase b =
        base == "superpoint"
            ? models::CdgaBase::superpoint3()
            : (base == "heisenberg" ? models::CdgaBase::heisenberg_ce()
                                    : throw ParseError("cs_superpoint: unknown base " + base));
    models::BvModel m = models::chern_simons_superpoint(g, b);
    if (mutate) {
      GradedPolynomial cubic = m.S.homogeneous_part(3);
      if (cubic.is_zero())
        throw ParseError("cs_superpoint: abelian model has no cubic term to mutate");
      auto first = cubic.terms().begin();
      m.S += GradedPolynomial::monomial(m.chart, first->first, first->second);
    }
    return m;
  }
  if (kind == "pform_tower") {
    std::string tower = get("tower", "circle3");
    models::ReducibleTower t;
    if (tower == "circle3")
      t = models::ReducibleTower::circle3();
    else if (tower == "line1") {
      t.dims = {1, 1};
      t.maps = {linalg::identity(1)};
    } else {
      throw ParseError("pform_tower: unknown tower " + tower);
    }
    if (mutate) {
      t.maps[0][0][0] += GaussianRational(1);
      t.validate_exactness = false;
    }
    return models::pform_tower_model(t);
  }
  throw ParseError("unknown constructor kind: " + kind);
}

ModelFile parse_model(const std::string& bytes) {
  ordered_json j;
  try {
    j = ordered_json::parse(bytes);
  } catch (const std::exception& e) {
    throw ParseError(std::string("json: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("top level must be an object");
  ModelFile out;
  if (!j.contains("version") || !j["version"].is_string())
    throw ParseError("missing mandatory version field");
  out.version = j["version"].get<std::string>();
  if (out.version != "1") throw ParseError("unsupported schema version " + out.version);

  bool explicit_model = !j.contains("constructor");
  if (j.contains("constructor")) {
    const auto& c = j["constructor"];
    if (!c.is_object() || !c.contains("kind") || !c["kind"].is_string())
      throw ParseError("constructor: missing kind");
    std::string kind = c["kind"].get<std::string>();
    // kind "explicit" is an alias for a chart-and-polynomials model.
    explicit_model = kind == "explicit";
    if (!explicit_model) {
      out.constructor_kind = kind;
      for (auto& [k, v] : c.items()) {
        if (k == "kind") continue;
        if (!v.is_string()) throw ParseError("constructor." + k + ": parameters are strings");
        out.constructor_params[k] = v.get<std::string>();
      }
      out.model = run_constructor(*out.constructor_kind, out.constructor_params);
    }
  }
  if (!explicit_model) {
    // model built by the constructor above
  } else {
    if (!j.contains("chart") || !j["chart"].is_object() || !j["chart"].contains("pairs"))
      throw ParseError("chart.pairs: required for explicit models");
    auto chart = std::make_shared<DarbouxChart>();
    std::size_t idx = 0;
    for (auto& pj : j["chart"]["pairs"]) {
      std::string at = "chart.pairs[" + std::to_string(idx++) + "]";
      auto need = [&](const ordered_json& o, const char* k) -> const ordered_json& {
        if (!o.is_object() || !o.contains(k)) throw ParseError(at + ": missing " + k);
        return o.at(k);
      };
      const auto& f = need(pj, "field");
      const auto& a = need(pj, "antifield");
      std::string fn = need(f, "name").get<std::string>();
      int fg = need(f, "ghost").get<int>();
      std::string an = need(a, "name").get<std::string>();
      int ag = need(a, "ghost").get<int>();
      if (ag != -1 - fg)
        throw ParseError(at + ": pair (" + fn + ", " + an + ") violates gh(antifield) = -1-gh(field)");
      chart->add_pair(fn, fg, an);
    }
    out.model.chart = chart;
    out.model.S = GradedPolynomial(chart);
  }

  if (j.contains("polynomials")) {
    if (!j["polynomials"].is_object()) throw ParseError("polynomials: must be an object");
    for (auto& [name, pj] : j["polynomials"].items()) {
      GradedPolynomial p = polynomial_from_json(pj, out.model.chart, "polynomials." + name);
      if (name == "S") {
        if (out.constructor_kind) throw ParseError("polynomials.S conflicts with a constructor");
        out.model.S = p;
      } else {
        out.extra.emplace(name, std::move(p));
      }
    }
  }
  return out;
}

std::string emit_model(const ModelFile& m) {
  ordered_json j;
  j["version"] = m.version;
  if (m.constructor_kind) {
    ordered_json c;
    c["kind"] = *m.constructor_kind;
    for (auto& [k, v] : m.constructor_params) c[k] = v;
    j["constructor"] = std::move(c);
  } else {
    ordered_json pairs = ordered_json::array();
    for (const auto& p : m.model.chart->pairs()) {
      ordered_json pj;
      pj["field"] = {{"name", m.model.chart->var(p.field).name},
                     {"ghost", m.model.chart->var(p.field).ghost}};
      pj["antifield"] = {{"name", m.model.chart->var(p.antifield).name},
                         {"ghost", m.model.chart->var(p.antifield).ghost}};
      pairs.push_back(std::move(pj));
    }
    j["chart"] = {{"pairs", std::move(pairs)}};
  }
  ordered_json polys;
  if (!m.constructor_kind) polys["S"] = polynomial_json(m.model.S);
  for (auto& [name, p] : m.extra) polys[name] = polynomial_json(p);
  if (!polys.empty()) j["polynomials"] = std::move(polys);
  return j.dump(2) + "\n";
}

}  // namespace bv::io
