#include "islt/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "islt/errors.hpp"
#include "islt/io.hpp"

namespace islt {

using nlohmann::json;

GridField make_test_function(const TestFunctionSpec& spec, const GridPtr& grid) {
  const DomainSpec& dom = grid->domain();
  const int d = grid->dim();
  const double pi = std::numbers::pi;
  auto gauss = [&](const Point& x, const Point& c) {
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) r2 += (x[a] - c[a]) * (x[a] - c[a]);
    return std::exp(-0.5 * r2 / (spec.width * spec.width));
  };
  if (spec.kind == "constant") return GridField(grid, spec.amplitude);
  if (spec.kind == "sine")
    return sample_field(grid, [&](const Point& x) {
      double v = spec.amplitude;
      for (int a = 0; a < d; ++a) v *= std::sin(spec.mode[a] * pi * (x[a] - dom.lower[a]) / (dom.upper[a] - dom.lower[a]));
      return v;
    });
  if (spec.kind == "gaussian") return sample_field(grid, [&](const Point& x) { return spec.amplitude * gauss(x, spec.center); });
  if (spec.kind == "signed_bump") {
    Point mirror = spec.center;
    mirror[0] = dom.lower[0] + dom.upper[0] - spec.center[0];
    return sample_field(grid, [&](const Point& x) { return spec.amplitude * (gauss(x, spec.center) - gauss(x, mirror)); });
  }
  throw ValidationError("unknown test function kind '" + spec.kind + "'");
}

void ExperimentConfig::validate() const {
  domain.validate();
  require(n >= 2, "grid n must be at least 2");
  auto ladder = [](const std::vector<double>& v, const char* name) {
    if (v.empty()) throw ValidationError(std::string(name) + " must be nonempty");
    if (!std::is_sorted(v.begin(), v.end())) throw ValidationError(std::string(name) + " must be sorted");
    for (double x : v)
      if (!(x > 0.0) || !std::isfinite(x)) throw ValidationError(std::string(name) + " entries must be positive");
  };
  ladder(t_ladder, "t_ladder");
  ladder(eps_ladder, "eps_ladder");
  ladder(delta_ladder, "delta_ladder");
  require(samples >= 1, "samples must be positive");
  require(path.dt > 0.0 && path.t > 0.0, "path dt and t must be positive");
  require(mollifier.eps > 0.0, "mollifier eps must be positive");
  require(!test_functions.empty(), "test function catalog must be nonempty");
  require(fine_n >= 0 && modes >= 0, "fine_n and modes must be nonnegative");
  require(minimize.p >= 1, "minimize.p must be positive");
  require(counting.k >= 1 && counting.p >= 1 && counting.R >= 1, "counting k, p, R must be positive");
}

namespace {

json point_json(const Point& x, int d) {
  json a = json::array();
  for (int i = 0; i < d; ++i) a.push_back(x[i]);
  return a;
}

Point point_from(const json& j, int d, Point fallback) {
  if (!j.is_array() || static_cast<int>(j.size()) != d)
    throw ValidationError("point must be an array of " + std::to_string(d) + " numbers");
  for (int i = 0; i < d; ++i) fallback[i] = j[i].get<double>();
  return fallback;
}

void reject_unknown(const json& j, const std::set<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!keys.count(it.key())) throw ValidationError("unknown key '" + it.key() + "' in " + where);
}

std::string start_kind_name(StartKind k) {
  switch (k) {
    case StartKind::fixed_point: return "fixed";
    case StartKind::uniform: return "uniform";
    case StartKind::product_of_points: return "product";
  }
  return "fixed";
}

StartKind parse_start_kind(const std::string& s) {
  if (s == "fixed") return StartKind::fixed_point;
  if (s == "uniform") return StartKind::uniform;
  if (s == "product") return StartKind::product_of_points;
  throw ValidationError("unknown start kind '" + s + "'");
}

json to_json(const ExperimentConfig& c) {
  const int d = c.domain.dim;
  json j;
  j["experiment"] = c.experiment;
  j["domain"] = {{"dim", d},
                 {"lower", point_json(c.domain.lower, d)},
                 {"upper", point_json(c.domain.upper, d)},
                 {"motions", c.domain.motions}};
  j["grid"] = {{"n", c.n}};
  json pts = json::array();
  for (const auto& x : c.path.start.points) pts.push_back(point_json(x, d));
  j["path"] = {{"dt", c.path.dt},
               {"t", c.path.t},
               {"b", c.path.b},
               {"start", {{"kind", start_kind_name(c.path.start.kind)}, {"points", pts}}}};
  j["mollifier"] = {{"eps", c.mollifier.eps}, {"profile", profile_name(c.mollifier.profile)}};
  json tf = json::array();
  for (const auto& f : c.test_functions)
    tf.push_back({{"kind", f.kind},
                  {"amplitude", f.amplitude},
                  {"mode", std::vector<int>(f.mode.begin(), f.mode.begin() + d)},
                  {"center", point_json(f.center, d)},
                  {"width", f.width}});
  j["test_functions"] = tf;
  j["t_ladder"] = c.t_ladder;
  j["eps_ladder"] = c.eps_ladder;
  j["delta_ladder"] = c.delta_ladder;
  j["samples"] = c.samples;
  j["seed"] = c.seed;
  j["spectral"] = {{"modes", c.modes}};
  j["moments"] = {{"fine_n", c.fine_n}};
  const auto& m = c.minimize;
  j["minimize"] = {{"functional", m.functional},
                   {"p", m.p},
                   {"U", {{"lower", point_json(m.U.lower, d)}, {"upper", point_json(m.U.upper, d)}}},
                   {"b", m.b},
                   {"max_iter", m.flow.max_iter},
                   {"rel_tol", m.flow.rel_tol},
                   {"restarts", m.flow.restarts},
                   {"metric", m.flow.metric == FlowMetric::sobolev ? "sobolev" : "l2"},
                   {"eta0", m.flow.eta0},
                   {"noise", m.flow.noise}};
  j["counting"] = {{"k", c.counting.k}, {"p", c.counting.p}, {"R", c.counting.R}};
  return j;
}

ExperimentConfig from_json(const json& j) {
  reject_unknown(j, {"experiment", "domain", "grid", "path", "mollifier", "test_functions", "t_ladder", "eps_ladder",
                     "delta_ladder", "samples", "seed", "spectral", "moments", "minimize", "counting"},
                 "config");
  ExperimentConfig c;
  if (j.contains("experiment")) c.experiment = j["experiment"].get<std::string>();
  if (j.contains("domain")) {
    const json& dj = j["domain"];
    reject_unknown(dj, {"dim", "lower", "upper", "motions"}, "domain");
    const int d = dj.value("dim", 2);
    require(d == 2 || d == 3, "domain.dim must be 2 or 3");
    c.domain = DomainSpec::unit_box(d, dj.value("motions", 1));
    if (dj.contains("lower")) c.domain.lower = point_from(dj["lower"], d, c.domain.lower);
    if (dj.contains("upper")) c.domain.upper = point_from(dj["upper"], d, c.domain.upper);
  }
  const int d = c.domain.dim;
  if (j.contains("grid")) {
    reject_unknown(j["grid"], {"n"}, "grid");
    c.n = j["grid"].value("n", c.n);
  }
  c.minimize.U.lower = c.minimize.U.upper = Point{0, 0, 0};
  for (int a = 0; a < d; ++a) {
    const double lo = c.domain.lower[a], hi = c.domain.upper[a];
    c.minimize.U.lower[a] = lo + 0.25 * (hi - lo);
    c.minimize.U.upper[a] = lo + 0.75 * (hi - lo);
  }
  for (auto& f : c.test_functions) f.center = c.domain.center();
  if (j.contains("path")) {
    const json& pj = j["path"];
    reject_unknown(pj, {"dt", "t", "b", "start"}, "path");
    c.path.dt = pj.value("dt", c.path.dt);
    c.path.t = pj.value("t", c.path.t);
    if (pj.contains("b")) c.path.b = pj["b"].get<std::vector<double>>();
    if (pj.contains("start")) {
      const json& sj = pj["start"];
      reject_unknown(sj, {"kind", "points"}, "path.start");
      c.path.start.kind = parse_start_kind(sj.value("kind", std::string("fixed")));
      c.path.start.points.clear();
      if (sj.contains("points"))
        for (const auto& pt : sj["points"]) c.path.start.points.push_back(point_from(pt, d, Point{0, 0, 0}));
    }
  }
  if (j.contains("mollifier")) {
    reject_unknown(j["mollifier"], {"eps", "profile"}, "mollifier");
    c.mollifier.eps = j["mollifier"].value("eps", c.mollifier.eps);
    c.mollifier.profile = parse_profile(j["mollifier"].value("profile", std::string("bump")));
  }
  if (j.contains("test_functions")) {
    c.test_functions.clear();
    for (const auto& fj : j["test_functions"]) {
      reject_unknown(fj, {"kind", "amplitude", "mode", "center", "width"}, "test_functions entry");
      TestFunctionSpec f;
      f.center = c.domain.center();
      f.kind = fj.value("kind", f.kind);
      f.amplitude = fj.value("amplitude", f.amplitude);
      if (fj.contains("mode")) {
        const auto m = fj["mode"].get<std::vector<int>>();
        require(static_cast<int>(m.size()) == d, "test function mode must have one entry per dimension");
        for (int a = 0; a < d; ++a) f.mode[a] = m[a];
      }
      if (fj.contains("center")) f.center = point_from(fj["center"], d, f.center);
      f.width = fj.value("width", f.width);
      c.test_functions.push_back(f);
    }
  }
  if (j.contains("t_ladder")) c.t_ladder = j["t_ladder"].get<std::vector<double>>();
  if (j.contains("eps_ladder")) c.eps_ladder = j["eps_ladder"].get<std::vector<double>>();
  if (j.contains("delta_ladder")) c.delta_ladder = j["delta_ladder"].get<std::vector<double>>();
  if (j.contains("samples")) c.samples = j["samples"].get<std::size_t>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("spectral")) {
    reject_unknown(j["spectral"], {"modes"}, "spectral");
    c.modes = j["spectral"].value("modes", c.modes);
  }
  if (j.contains("moments")) {
    reject_unknown(j["moments"], {"fine_n"}, "moments");
    c.fine_n = j["moments"].value("fine_n", c.fine_n);
  }
  if (j.contains("minimize")) {
    const json& mj = j["minimize"];
    reject_unknown(mj, {"functional", "p", "U", "b", "max_iter", "rel_tol", "restarts", "metric", "eta0", "noise"},
                   "minimize");
    auto& m = c.minimize;
    m.functional = mj.value("functional", m.functional);
    m.p = mj.value("p", m.p);
    if (mj.contains("U")) {
      reject_unknown(mj["U"], {"lower", "upper"}, "minimize.U");
      if (mj["U"].contains("lower")) m.U.lower = point_from(mj["U"]["lower"], d, m.U.lower);
      if (mj["U"].contains("upper")) m.U.upper = point_from(mj["U"]["upper"], d, m.U.upper);
    }
    if (mj.contains("b")) m.b = mj["b"].get<std::vector<double>>();
    m.flow.max_iter = mj.value("max_iter", m.flow.max_iter);
    m.flow.rel_tol = mj.value("rel_tol", m.flow.rel_tol);
    m.flow.restarts = mj.value("restarts", m.flow.restarts);
    const std::string metric = mj.value("metric", std::string("sobolev"));
    if (metric != "sobolev" && metric != "l2") throw ValidationError("minimize.metric must be sobolev or l2");
    m.flow.metric = metric == "l2" ? FlowMetric::l2 : FlowMetric::sobolev;
    m.flow.eta0 = mj.value("eta0", m.flow.eta0);
    m.flow.noise = mj.value("noise", m.flow.noise);
  }
  if (j.contains("counting")) {
    reject_unknown(j["counting"], {"k", "p", "R"}, "counting");
    c.counting.k = j["counting"].value("k", c.counting.k);
    c.counting.p = j["counting"].value("p", c.counting.p);
    c.counting.R = j["counting"].value("R", c.counting.R);
  }
  c.validate();
  return c;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  try {
    return from_json(json::parse(json_text));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::string config_hash(const ExperimentConfig& cfg) { return hex64(fnv1a64(to_json(cfg).dump())); }

}  // namespace islt
