#include "cli.hpp"

#include "driftlab/error.hpp"
#include "driftlab/lattice.hpp"
#include "driftlab/perturb.hpp"
#include "driftlab/qcore.hpp"
#include "driftlab/verify.hpp"
#include "driftlab/walk.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <locale>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace driftlab::cli {

namespace {

enum class Kind { Integer, Number, Bool, String, IntArray, NumArray, Object };

bool matches(const json& v, Kind k) {
  switch (k) {
    case Kind::Integer: return v.is_number_integer();
    case Kind::Number: return v.is_number();
    case Kind::Bool: return v.is_boolean();
    case Kind::String: return v.is_string();
    case Kind::Object: return v.is_object();
    case Kind::IntArray:
    case Kind::NumArray:
      if (!v.is_array()) return false;
      for (const auto& e : v) {
        if (k == Kind::IntArray ? !e.is_number_integer() : !e.is_number()) return false;
      }
      return true;
  }
  return false;
}

using Schema = std::map<std::string, Kind>;

void check_object(const json& obj, const Schema& schema, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    auto it = schema.find(key);
    if (it == schema.end()) throw ValidationError("unknown key '" + key + "' in " + where);
    if (!matches(value, it->second)) throw ValidationError("key '" + key + "' in " + where + " has the wrong type");
  }
}

void require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError("missing key '" + key + "' in " + where);
}

const std::map<std::string, Schema>& command_schemas() {
  static const Schema common{{"command", Kind::String}, {"output", Kind::String}, {"lattice", Kind::Object}};
  static const std::map<std::string, Schema> schemas = [] {
    std::map<std::string, Schema> s{
        {"q-compute", {{"field", Kind::Object}}},
        {"q-compare", {{"field", Kind::Object}, {"tolerance", Kind::Number}}},
        {"mc-estimate",
         {{"field", Kind::Object}, {"steps", Kind::Integer}, {"paths", Kind::Integer}, {"seed", Kind::Integer}}},
        {"perturb-scan", {{"dims", Kind::IntArray}, {"limit", Kind::Integer}}},
        {"counterexample-search",
         {{"dims", Kind::IntArray},
          {"amplitude", Kind::Number},
          {"refine", Kind::Bool},
          {"levels", Kind::Integer},
          {"max_sweeps", Kind::Integer}}},
        {"symbol-limit", {{"field", Kind::Object}, {"xi", Kind::NumArray}, {"epsilons", Kind::NumArray}}},
        {"convergence",
         {{"field", Kind::Object},
          {"source", Kind::Object},
          {"epsilons", Kind::NumArray},
          {"q_scale", Kind::Number},
          {"tol", Kind::Number},
          {"max_unknowns", Kind::Integer}}},
        {"green-table", {{"n_max", Kind::Integer}}},
        {"qv-check",
         {{"transverse_dims", Kind::IntArray},
          {"instances", Kind::Integer},
          {"amplitude", Kind::Number},
          {"seed", Kind::Integer}}},
    };
    for (auto& [name, schema] : s) schema.insert(common.begin(), common.end());
    return s;
  }();
  return schemas;
}

std::vector<int> int_vector(const json& v) { return v.get<std::vector<int>>(); }
std::vector<double> num_vector(const json& v) { return v.get<std::vector<double>>(); }

std::uint64_t seed_of(const json& v) {
  const auto s = v.get<long long>();
  if (s < 0) throw ValidationError("seeds must be nonnegative");
  return static_cast<std::uint64_t>(s);
}

std::string fmt(double x) {
  if (!std::isfinite(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void dump(std::ostream& os, const json& v, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(2 * depth), ' ');
  switch (v.type()) {
    case json::value_t::object: {
      if (v.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (const auto& [key, value] : v.items()) {
        if (!first) os << ",\n";
        first = false;
        os << pad << json(key).dump() << ": ";
        dump(os, value, depth + 1);
      }
      os << "\n" << close << "}";
      return;
    }
    case json::value_t::array: {
      // Numeric arrays stay on one line.
      bool flat = true;
      for (const auto& e : v) flat = flat && e.is_primitive();
      os << "[";
      bool first = true;
      for (const auto& e : v) {
        if (!first) os << (flat ? ", " : ",");
        first = false;
        if (!flat) os << "\n" << pad;
        dump(os, e, depth + 1);
      }
      if (!flat && !v.empty()) os << "\n" << close;
      os << "]";
      return;
    }
    case json::value_t::number_float: {
      const double x = v.get<double>();
      os << (std::isfinite(x) ? fmt(x) : "null");
      return;
    }
    default:
      os << v.dump();
  }
}

json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

void write_csv_header(std::ostream& out, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
}

void convergence_csv(std::ostream& out, const ConvergenceReport& r) {
  write_csv_header(out, {"epsilon", "sup_error", "observed_order"});
  for (std::size_t i = 0; i < r.epsilons.size(); ++i) {
    out << fmt(r.epsilons[i]) << "," << fmt(r.sup_errors[i]) << ",";
    if (i > 0) out << fmt(r.observed_orders[i - 1]);
    out << "\n";
  }
}

// Commands. Each writes its artifact to `out`.

void cmd_q_compute(const json& c, std::ostream& out) {
  const DriftField b = parse_field(c.at("field"));
  const QReport r = compute_report(b);
  json j;
  j["q_direct"] = r.q_direct;
  j["q_boundary"] = r.q_boundary;
  j["q_chain"] = r.q_chain;
  j["q_closed_1d"] = optional_number(r.q_closed_1d);
  j["q_slab2"] = optional_number(r.q_slab2);
  j["q_slab4"] = optional_number(r.q_slab4);
  j["max_rel_disagreement"] = r.max_rel_disagreement;
  j["shape"] = r.shape;
  j["doubled"] = b.shape().doubled();
  j["half_values_digest"] = r.digest;
  out << dump_json(j) << "\n";
}

void cmd_q_compare(const json& c, std::ostream& out) {
  const DriftField b = parse_field(c.at("field"));
  const double tolerance = c.value("tolerance", 1e-10);
  if (!(tolerance > 0.0)) throw ValidationError("tolerance must be positive");
  const QReport r = compute_report(b);
  std::vector<std::pair<std::string, double>> routes{
      {"q_direct", r.q_direct}, {"q_boundary", r.q_boundary}, {"q_chain", r.q_chain}};
  if (r.q_closed_1d) routes.emplace_back("q_closed_1d", *r.q_closed_1d);
  if (r.q_slab2) routes.emplace_back("q_slab2", *r.q_slab2);
  if (r.q_slab4) routes.emplace_back("q_slab4", *r.q_slab4);

  json j;
  j["routes"] = json::object();
  for (const auto& [name, value] : routes) j["routes"][name] = value;
  j["pairs"] = json::array();
  double worst = 0.0;
  for (std::size_t a = 0; a < routes.size(); ++a) {
    for (std::size_t k = a + 1; k < routes.size(); ++k) {
      const double d = rel_diff(routes[a].second, routes[k].second);
      worst = std::max(worst, d);
      j["pairs"].push_back({{"a", routes[a].first}, {"b", routes[k].first}, {"rel_diff", d}});
    }
  }
  j["max_rel_disagreement"] = worst;
  j["tolerance"] = tolerance;
  j["agree"] = worst <= tolerance;
  j["half_values_digest"] = r.digest;
  out << dump_json(j) << "\n";
  if (worst > tolerance) throw ConsistencyError("routes disagree by " + fmt(worst));
}

void cmd_mc_estimate(const json& c, std::ostream& out) {
  const DriftField b = parse_field(c.at("field"));
  const long long steps = c.value("steps", 100000LL);
  const long long paths = c.value("paths", 1000LL);
  const std::uint64_t seed = c.contains("seed") ? seed_of(c.at("seed")) : 0;
  const McReport r = estimate_q_mc(b, steps, paths, seed);
  json j;
  j["q_hat"] = r.q_hat;
  j["stderr"] = r.stderr_q;
  j["mean_drift"] = r.mean_drift;
  j["stderr_drift"] = r.stderr_drift;
  j["q_perp"] = r.q_perp;
  j["stderr_perp"] = r.stderr_perp;
  j["steps"] = r.steps;
  j["paths"] = r.paths;
  j["seed"] = r.seed;
  out << dump_json(j) << "\n";
}

void cmd_perturb_scan(const json& c, std::ostream& out) {
  require(c, "dims", "perturb-scan");
  const TorusShape shape(int_vector(c.at("dims")));
  const auto modes = mode_scan(shape);
  std::size_t limit = modes.size();
  if (c.contains("limit")) {
    const auto l = c.at("limit").get<long long>();
    if (l < 1) throw ValidationError("limit must be positive");
    limit = std::min(limit, static_cast<std::size_t>(l));
  }
  std::vector<std::string> cols{"k"};
  for (int j = 2; j <= shape.dim(); ++j) cols.push_back("m" + std::to_string(j));
  cols.push_back("xi1");
  cols.push_back("eigenvalue");
  write_csv_header(out, cols);
  for (std::size_t i = 0; i < limit; ++i) {
    const Mode& m = modes[i];
    out << m.k;
    for (int v : m.m) out << "," << v;
    out << "," << fmt(m.xi1) << "," << fmt(m.eigenvalue) << "\n";
  }
}

void cmd_counterexample(const json& c, std::ostream& out) {
  require(c, "dims", "counterexample-search");
  const TorusShape shape(int_vector(c.at("dims")));
  const double bound = drift_bound(shape.dim());
  const double amplitude = c.value("amplitude", 0.5 * bound);
  Counterexample ce = construct_counterexample(shape, amplitude);
  const double mode_q = ce.q;
  if (c.value("refine", false)) {
    RefineOptions opts;
    opts.levels = c.value("levels", opts.levels);
    opts.max_sweeps = c.value("max_sweeps", opts.max_sweeps);
    ce = refine_counterexample(ce, amplitude, opts);
  }
  json j;
  j["q"] = ce.q;
  j["q_mode_field"] = mode_q;
  j["excess"] = ce.q - bound;
  j["amplitude"] = ce.amplitude;
  j["mode"] = {{"k", ce.mode.k}, {"m", ce.mode.m}, {"xi1", ce.mode.xi1}, {"eigenvalue", ce.mode.eigenvalue}};
  j["field"] = describe_field(ce.field);
  j["half_values_digest"] = ce.field.digest();
  out << dump_json(j) << "\n";
}

void cmd_symbol_limit(const json& c, std::ostream& out) {
  const DriftField b = parse_field(c.at("field"));
  require(c, "xi", "symbol-limit");
  const auto eps = c.contains("epsilons") ? num_vector(c.at("epsilons")) : std::vector<double>{0.2, 0.1, 0.05, 0.025};
  convergence_csv(out, symbol_limit_report(b, num_vector(c.at("xi")), eps));
}

void cmd_convergence(const json& c, std::ostream& out) {
  const DriftField b = parse_field(c.at("field"));
  SourceSpec f;
  f.center.assign(static_cast<std::size_t>(b.dim()), 0.0);
  if (c.contains("source")) {
    const json& s = c.at("source");
    check_object(s, {{"width", Kind::Number}, {"center", Kind::NumArray}}, "source");
    f.width = s.value("width", f.width);
    if (s.contains("center")) f.center = num_vector(s.at("center"));
  }
  ConvergenceOptions opts;
  opts.q_scale = c.value("q_scale", 1.0);
  opts.box.tol = c.value("tol", opts.box.tol);
  if (c.contains("max_unknowns")) {
    const auto m = c.at("max_unknowns").get<long long>();
    if (m < 1) throw ValidationError("max_unknowns must be positive");
    opts.box.max_unknowns = static_cast<std::size_t>(m);
  }
  const auto eps = c.contains("epsilons") ? num_vector(c.at("epsilons")) : std::vector<double>{0.1, 0.05, 0.025};
  convergence_csv(out, convergence_report(b, f, eps, opts));
}

void cmd_green_table(const json& c, std::ostream& out) {
  const long long n = c.value("n_max", 10LL);
  if (n < 0) throw ValidationError("n_max must be nonnegative");
  write_csv_header(out, {"y", "G"});
  for (long long y = 0; y <= n; ++y) out << y << "," << fmt(green_1d(y)) << "\n";
}

void cmd_qv_check(const json& c, std::ostream& out) {
  const std::vector<int> dims = c.contains("transverse_dims") ? int_vector(c.at("transverse_dims")) : std::vector<int>{8};
  const TransverseTorus torus(dims);
  const long long instances = c.value("instances", 200LL);
  const double a = c.value("amplitude", 1.9);
  if (instances < 1) throw ValidationError("instances must be positive");
  if (!(a > 0.0) || a >= 2.0) throw ValidationError("V amplitude must lie in (0, 2)");
  std::mt19937_64 rng(c.contains("seed") ? seed_of(c.at("seed")) : 0);
  const auto n = static_cast<Eigen::Index>(torus.sites());
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit_interval(rng()); };

  double min_local = INFINITY, min_ww = INFINITY, max_identity = 0.0, max_gap = 0.0;
  for (long long t = 0; t < instances; ++t) {
    TransverseField V(n), Phi(n), f(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      // Nonvanishing V: magnitude bounded away from 0, random sign.
      const double mag = uniform(0.05 * a, a);
      V[i] = rng() & 1 ? mag : -mag;
      Phi[i] = uniform(-1.0, 1.0);
      f[i] = uniform(-1.0, 1.0);
    }
    const QVForm generic = qv_form(torus, V, f);
    min_ww = std::min(min_ww, generic.w_plus.cwiseProduct(generic.w_minus).mean());
    const LpmResult l = lpm_apply(torus, V, Phi);
    max_identity = std::max(max_identity, l.identity_residual);
    const QVForm local = qv_form(torus, V, l.f);
    min_local = std::min(min_local, local.value);
    max_gap = std::max({max_gap, std::abs(generic.value - generic.value_alt), std::abs(local.value - local.value_alt)});
  }
  json j;
  j["transverse_dims"] = dims;
  j["instances"] = instances;
  j["min_qv_localized"] = min_local;
  j["min_mean_wplus_wminus"] = min_ww;
  j["max_identity_residual"] = max_identity;
  j["max_form_gap"] = max_gap;
  out << dump_json(j) << "\n";
}

using Command = void (*)(const json&, std::ostream&);

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table{
      {"q-compute", cmd_q_compute},
      {"q-compare", cmd_q_compare},
      {"mc-estimate", cmd_mc_estimate},
      {"perturb-scan", cmd_perturb_scan},
      {"counterexample-search", cmd_counterexample},
      {"symbol-limit", cmd_symbol_limit},
      {"convergence", cmd_convergence},
      {"green-table", cmd_green_table},
      {"qv-check", cmd_qv_check},
  };
  return table;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation: return 1;
    case ErrorKind::Numerical: return 2;
    case ErrorKind::Budget: return 3;
  }
  return 2;
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

}  // namespace

DriftField parse_field(const json& d) {
  check_object(d, {{"dims", Kind::IntArray}, {"half_values", Kind::NumArray}, {"generator", Kind::Object}}, "field");
  require(d, "dims", "field");
  if (d.contains("half_values") == d.contains("generator")) {
    throw ValidationError("field needs exactly one of half_values or generator");
  }
  const TorusShape shape(int_vector(d.at("dims")));
  if (d.contains("half_values")) {
    const auto v = num_vector(d.at("half_values"));
    if (v.size() != shape.half_sites()) {
      throw ShapeError("half_values has " + std::to_string(v.size()) + " entries, expected " +
                       std::to_string(shape.half_sites()));
    }
    return DriftField(shape, Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  const json& g = d.at("generator");
  require(g, "kind", "generator");
  if (!g.at("kind").is_string()) throw ValidationError("generator kind must be a string");
  const std::string kind = g.at("kind").get<std::string>();
  if (kind == "zero") {
    check_object(g, {{"kind", Kind::String}}, "generator");
    return DriftField::zero(shape);
  }
  if (kind == "uniform") {
    check_object(g, {{"kind", Kind::String}, {"amplitude", Kind::Number}, {"seed", Kind::Integer}}, "generator");
    require(g, "amplitude", "generator");
    return random_drift(shape, g.at("amplitude").get<double>(), g.contains("seed") ? seed_of(g.at("seed")) : 0);
  }
  if (kind == "mode") {
    check_object(g,
                 {{"kind", Kind::String}, {"k", Kind::Integer}, {"transverse_wave", Kind::IntArray},
                  {"amplitude", Kind::Number}},
                 "generator");
    require(g, "k", "generator");
    require(g, "amplitude", "generator");
    const std::vector<int> m = g.contains("transverse_wave") ? int_vector(g.at("transverse_wave"))
                                                             : std::vector<int>(static_cast<std::size_t>(shape.dim() - 1), 0);
    const double a = g.at("amplitude").get<double>();
    if (!(std::abs(a) < drift_bound(shape.dim()))) throw AmplitudeError("mode amplitude must be below 1/(2d)");
    return mode_drift(shape, g.at("k").get<int>(), m, a);
  }
  throw ValidationError("unknown generator kind '" + kind + "'");
}

json describe_field(const DriftField& b) {
  const auto& h = b.half_values();
  return {{"dims", b.shape().dims()}, {"half_values", std::vector<double>(h.data(), h.data() + h.size())}};
}

std::vector<std::string> command_names() {
  std::vector<std::string> out;
  for (const auto& [name, schema] : command_schemas()) out.push_back(name);
  return out;
}

std::vector<std::string> command_keys(const std::string& command) {
  std::vector<std::string> out;
  auto it = command_schemas().find(command);
  if (it == command_schemas().end()) throw ValidationError("unknown command '" + command + "'");
  for (const auto& [key, kind] : it->second) out.push_back(key);
  return out;
}

void validate_config(const json& config) {
  if (!config.is_object()) throw ValidationError("config must be a JSON object");
  require(config, "command", "config");
  if (!config.at("command").is_string()) throw ValidationError("command must be a string");
  const std::string name = config.at("command").get<std::string>();
  const auto& schemas = command_schemas();
  auto it = schemas.find(name);
  if (it == schemas.end()) throw ValidationError("unknown command '" + name + "'");
  check_object(config, it->second, "config");
  if (it->second.count("field") && name != "perturb-scan") require(config, "field", "config");
  if (config.contains("lattice")) {
    check_object(config.at("lattice"), {{"cache_max", Kind::Integer}}, "lattice");
  }
}

void execute(const json& config, std::ostream& out) {
  validate_config(config);
  if (config.contains("lattice") && config.at("lattice").contains("cache_max")) {
    const auto m = config.at("lattice").at("cache_max").get<long long>();
    if (m < 0) throw ValidationError("lattice.cache_max must be nonnegative");
    set_cache_max(static_cast<std::size_t>(m));
  }
  const Command cmd = commands().at(config.at("command").get<std::string>());
  if (!config.contains("output")) {
    cmd(config, out);
    return;
  }
  // Render fully before touching the file so failures leave no partial artifact.
  std::ostringstream buffer;
  std::exception_ptr failure;
  try {
    cmd(config, buffer);
  } catch (const ConsistencyError&) {
    failure = std::current_exception();
  }
  const std::string path = config.at("output").get<std::string>();
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ValidationError("cannot open output '" + path + "'");
  file << buffer.str();
  if (failure) std::rethrow_exception(failure);
}

int run(const json& config, std::ostream& out, std::ostream& err) {
  try {
    execute(config, out);
    return 0;
  } catch (const Error& e) {
    err << "error " << e.tag() << ": " << one_line(e.what()) << "\n";
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    err << "error ValidationError: " << one_line(e.what()) << "\n";
    return 1;
  }
}

std::string dump_json(const json& value) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  dump(os, value, 0);
  return os.str();
}

}  // namespace driftlab::cli
