#include "horizonlab/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

namespace fs = std::filesystem;

namespace horizonlab {

namespace {

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Vec json_vec(const nlohmann::json& j) {
  if (j.is_number()) return scalar_vec(j.get<double>());
  if (!j.is_array() || j.empty() || j.size() > static_cast<std::size_t>(kMaxDim)) {
    throw ArgumentError("expected a number or an array of up to 4 numbers");
  }
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> split_numbers(const std::string& text, std::size_t expected, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ArgumentError(std::string("cannot parse ") + what + " '" + text + "'");
    }
  }
  if (out.size() != expected) throw ArgumentError(std::string(what) + " needs " + std::to_string(expected) + " values");
  return out;
}

class Writer {
 public:
  explicit Writer(fs::path dir) : dir_(std::move(dir)) {}
  std::string path(const std::string& name) {
    names_.push_back(name);
    return (dir_ / name).string();
  }
  void json(const std::string& name, const nlohmann::json& j) {
    std::ofstream out(path(name));
    out << j.dump(2) << '\n';
  }
  void text(const std::string& name, const std::string& body) {
    std::ofstream out(path(name));
    out << body;
  }
  const std::vector<std::string>& names() const { return names_; }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

/// Everything a task needs, built once per run.
struct Context {
  const ExperimentConfig& config;
  ControlProblem problem;
  GridSpec grid;
  HorizonSequence horizons;
  ValueGridCache cache;
  Writer& writer;

  /// V^{tau_N} on the configured grid, used as the value field for
  /// certificates and optimal-in-view checks.
  TimeStateField long_horizon_value() {
    return as_field(cache.get(problem, grid.with_horizon(horizons.back())));
  }
};

nlohmann::json task_value(Context& c) {
  const auto V = c.cache.get(c.problem, c.grid);
  if (c.config.value_format == "binary") {
    write_value_binary(*V, c.writer.path("value_grid.bin"));
  } else {
    write_value_csv(*V, c.writer.path("value_grid.csv"));
  }
  write_value_sidecar(*V, c.writer.path("value_grid.json"));
  nlohmann::json at = nlohmann::json::array();
  for (const auto& b : c.config.query_points(c.problem)) {
    at.push_back({{"b", vec_json(b)}, {"V0", V->evaluate(0.0, b)}});
  }
  return {{"horizon", c.grid.horizon},
          {"layers", V->num_layers()},
          {"nodes_per_layer", V->nodes_per_layer()},
          {"out_of_box_queries", V->out_of_box_queries()},
          {"values_at_points", at}};
}

nlohmann::json task_limits(Context& c) {
  LimitOptions lo;
  lo.tolerance = c.config.tol;
  lo.cache = &c.cache;
  const auto family = ControlFamily::standard(c.problem, c.horizons);
  nlohmann::json points = nlohmann::json::array();
  std::ostringstream trace;
  trace << "point,variant,tau,value,gap\n";
  const auto pts = c.config.query_points(c.problem);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec& b = pts[i];
    const auto all = estimate_v_all(c.problem, c.grid, c.horizons, 0.0, b, lo);
    const auto infty = estimate_v_infty(c.problem, c.grid, c.horizons, 0.0, b, lo);
    const auto inf = estimate_v_inf(c.problem, b, 0.0, family, c.horizons, c.config.tol);
    for (const auto* e : {&all, &infty, &inf}) {
      for (std::size_t k = 0; k < e->taus.size(); ++k) {
        const double gap = k == 0 ? 0.0 : std::abs(e->values[k] - e->values[k - 1]);
        trace << i << ',' << to_string(e->variant) << ',' << fmt(e->taus[k]) << ',' << fmt(e->values[k]) << ','
              << fmt(gap) << '\n';
      }
    }
    points.push_back({{"b", vec_json(b)},
                      {"V_all", all.to_json()},
                      {"V_infty", infty.to_json()},
                      {"V_inf", inf.to_json()},
                      {"inf_minus_all", inf.limit - all.limit}});
  }
  c.writer.text("limits_trace.csv", trace.str());
  return {{"family", family.to_json()}, {"points", points}};
}

Certificate run_certificate(Context& c, nlohmann::json& out) {
  CertificateOptions co;
  co.optimal_tol = c.config.tol;
  const auto u = c.config.control_for(c.problem);
  auto cert = pmp_certificate(c.problem, c.long_horizon_value(), u, c.horizons, c.grid, co);
  out = cert.report.to_json();
  out["control"] = u.to_json();
  if (!cert.arc.times.empty()) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : cert.arc.psi) {
      lo = std::min(lo, p.minCoeff());
      hi = std::max(hi, p.maxCoeff());
    }
    out["psi_range"] = {lo, hi};
  }
  return cert;
}

nlohmann::json task_pmp(Context& c) {
  nlohmann::json report;
  const auto cert = run_certificate(c, report);
  c.writer.json("certificate.json", report);
  if (!cert.arc.times.empty()) write_arc_csv(cert.arc, c.writer.path("certificate_arc.csv"));
  return report;
}

nlohmann::json task_criteria(Context& c) {
  const auto u = c.config.control_for(c.problem);
  CriteriaOptions co;
  co.tol = c.config.tol;
  co.cache = &c.cache;
  const double t0 = c.horizons.front();
  OptimalityReport rep;
  rep.problem = c.problem.name();
  rep.control = u.describe();
  rep.entries.push_back(weak_agreeable_check(c.problem, u, c.grid, c.horizons, {t0 / 4.0, t0 / 2.0}, co));
  rep.entries.push_back(agreeable_check(c.problem, u, c.grid, c.horizons.taus, {t0 / 4.0, t0 / 2.0, 3.0 * t0 / 4.0}, co));
  const auto family = ControlFamily::standard(c.problem, c.horizons);
  rep.entries.push_back(
      constrained_optimality_check(c.problem, u, AsymptoticConstraint::lebesgue(), c.horizons, family, c.config.tol));
  rep.entries.push_back(
      constrained_optimality_check(c.problem, u, AsymptoticConstraint::riemann(), c.horizons, family, c.config.tol));
  std::vector<double> Ts;
  for (double T = 1.0; T <= std::min(6.0, c.horizons.back() / 2.0) + 1e-12; T += 1.0) Ts.push_back(T);
  const auto inview = optimal_in_view_residual(c.long_horizon_value(), c.problem, u, Ts, c.config.tol);
  rep.entries.push_back(inview.result);

  nlohmann::json cert_json;
  const auto cert = run_certificate(c, cert_json);
  CriterionResult cr;
  cr.criterion = "certificate";
  cr.verdict = cert.report.found ? Verdict::Pass : Verdict::Fail;
  cr.residual = cert.report.found ? cert.report.max_condition_residual : cert.report.witnessed_residual;
  cr.tolerance = c.config.tol;
  cr.horizons = c.horizons.taus;
  cr.reason = cert.report.reason;
  cr.witness = {{"psi0", vec_json(cert.report.psi0)}};
  rep.entries.push_back(cr);

  std::ostringstream res;
  res << "T,residual\n";
  for (std::size_t k = 0; k < inview.horizons.size(); ++k) {
    res << fmt(inview.horizons[k]) << ',' << fmt(inview.residuals[k]) << '\n';
  }
  c.writer.text("optimal_in_view.csv", res.str());
  c.writer.json("criteria.json", rep.to_json());
  c.writer.text("criteria_table.txt", rep.summary_table());
  return rep.to_json();
}

nlohmann::json task_regularity(Context& c) {
  const std::string name = c.problem.name();
  const int m = c.problem.state_dim();
  auto V = c.cache.get(c.problem, c.grid);
  const TimeStateField field = as_field(V);
  ClassifierOptions co;
  StateBox region{c.grid.lower, c.grid.upper};
  std::vector<int> cells(static_cast<std::size_t>(m), 20);
  if (name == "capital-stock") {
    region = {scalar_vec(0.05), scalar_vec(2.95)};
    cells = {29};
  } else if (name == "double-integrator") {
    const double a = c.problem.control_box().hi(0) > 0 ? std::sqrt(c.problem.control_box().hi(0)) : 1.0;
    co.charts = {double_integrator_structure(DoubleIntegratorChart::Sqrt, a),
                 double_integrator_structure(DoubleIntegratorChart::Ratio, a)};
    region = {make_vec({-1.5, 0.1}), make_vec({1.5, 1.1})};
    cells = {12, 5};
  }
  if (c.config.region) region = *c.config.region;
  if (!c.config.cells.empty()) cells = c.config.cells;
  // keep the Lipschitz neighborhoods inside the value grid
  const auto map = lipschitz_region_classifier(c.problem, field, region, cells, co);
  map.write_csv(c.writer.path("region_map.csv"));
  nlohmann::json out = {{"region_map", map.summary()}};

  if (name == "capital-stock") {
    const auto S = [V](const Vec& x) { return V->evaluate(0.0, x); };
    const auto ps = capital_stock_structure(c.problem, S);
    std::vector<double> times;
    for (double t = 0.0; t <= std::min(1.0, c.grid.horizon / 4.0) + 1e-12; t += 0.25) times.push_back(t);
    const auto lattice = validation_lattice(times, StateBox{scalar_vec(0.2), scalar_vec(0.8)}, 7);
    out["product_structure"] = validate_product_structure(field, ps, lattice, c.config.tol).to_json();
  }
  if (name == "double-integrator") {
    HomogeneityOptions ho;
    ho.seed = static_cast<unsigned>(c.config.seed);
    ho.tol = c.config.tol;
    out["homogeneity"] = example2_homogeneity(c.problem, 2.0, ho).to_json();
  }
  c.writer.json("regularity.json", out);
  return out;
}

}  // namespace

std::vector<std::string> task_names() { return {"value", "limits", "pmp", "criteria", "regularity", "example-suite"}; }

// ---------------------------------------------------------------------------
// Configuration

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ArgumentError("config must be a JSON object");
  ExperimentConfig c;
  if (j.contains("problem")) c.problem = j.at("problem");
  c.task = j.value("task", c.task);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    c.h = g.value("h", 0.0);
    c.dt = g.value("dt", 0.0);
    c.T = g.value("T", 0.0);
    if (g.contains("lower")) c.lower = json_vec(g.at("lower"));
    if (g.contains("upper")) c.upper = json_vec(g.at("upper"));
    if (g.contains("scheme")) c.scheme = time_scheme_from_string(g.at("scheme").get<std::string>());
  }
  if (j.contains("horizons")) {
    const auto& hz = j.at("horizons");
    if (hz.is_array()) {
      c.horizons = hz.get<std::vector<double>>();
    } else {
      c.horizons = HorizonSequence::geometric(hz.value("t0", 2.0), hz.value("ratio", 2.0), hz.value("count", 4)).taus;
    }
  }
  c.tol = j.value("tol", c.tol);
  c.out_dir = j.value("out", c.out_dir);
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("control")) c.control = j.at("control");
  if (j.contains("points")) {
    for (const auto& p : j.at("points")) c.points.push_back(json_vec(p));
  }
  if (j.contains("region")) {
    const auto& r = j.at("region");
    c.region = StateBox{json_vec(r.at("lo")), json_vec(r.at("hi"))};
    if (r.contains("cells")) c.cells = r.at("cells").get<std::vector<int>>();
  }
  c.value_format = j.value("value_format", c.value_format);
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json g = {{"h", h}, {"dt", dt}, {"T", T}, {"scheme", to_string(scheme)}};
  if (lower) g["lower"] = vec_json(*lower);
  if (upper) g["upper"] = vec_json(*upper);
  nlohmann::json j = {{"problem", problem}, {"task", task},   {"grid", g},        {"horizons", horizons},
                      {"tol", tol},         {"out", out_dir}, {"seed", seed},     {"value_format", value_format}};
  if (control) j["control"] = *control;
  if (!points.empty()) {
    nlohmann::json p = nlohmann::json::array();
    for (const auto& v : points) p.push_back(vec_json(v));
    j["points"] = p;
  }
  if (region) j["region"] = {{"lo", vec_json(region->lo)}, {"hi", vec_json(region->hi)}, {"cells", cells}};
  return j;
}

void ExperimentConfig::validate() const {
  const auto tasks = task_names();
  if (std::find(tasks.begin(), tasks.end(), task) == tasks.end()) {
    std::string msg = "unknown task '" + task + "'; valid tasks:";
    for (const auto& t : tasks) msg += " " + t;
    throw ArgumentError(msg);
  }
  if (!(tol > 0.0) || !std::isfinite(tol)) throw ArgumentError("tolerance must be positive");
  if (h < 0.0 || dt < 0.0 || T < 0.0) throw ArgumentError("grid values must be positive");
  if (value_format != "csv" && value_format != "binary") throw ArgumentError("value_format must be csv or binary");
  if (out_dir.empty()) throw ArgumentError("output directory is empty");
  if (!horizons.empty()) HorizonSequence{horizons};
}

ControlProblem ExperimentConfig::build_problem() const {
  if (problem.is_string()) return builtin_problem(problem.get<std::string>());
  return problem_from_json(problem);
}

GridSpec ExperimentConfig::grid_for(const ControlProblem& p) const {
  const std::string name = p.name();
  const int m = p.state_dim();
  Vec lo = Vec::Constant(m, -3.0), hi = Vec::Constant(m, 3.0);
  double hh = 0.01, step = 0.01, horizon = 2.0;
  if (name == "capital-stock") {
    lo = scalar_vec(-0.5);
    hi = scalar_vec(3.5);
    horizon = 4.0;
  } else if (m >= 2) {
    lo = Vec::Constant(m, -2.0);
    hi = Vec::Constant(m, 2.0);
    hh = 0.05;
    step = 0.02;
    horizon = 1.0;
  }
  if (lower) lo = *lower;
  if (upper) hi = *upper;
  if (lo.size() != m || hi.size() != m) throw ArgumentError("grid box dimension does not match the problem");
  GridSpec spec = GridSpec::uniform(lo, hi, h > 0 ? h : hh, dt > 0 ? dt : step, T > 0 ? T : horizon);
  spec.scheme = scheme;
  spec.validate();
  return spec;
}

HorizonSequence ExperimentConfig::horizon_sequence() const {
  if (horizons.empty()) return HorizonSequence({2.0, 4.0, 8.0, 16.0});
  return HorizonSequence(horizons);
}

ControlSignal ExperimentConfig::control_for(const ControlProblem& p) const {
  if (control) return ControlSignal::from_json(*control);
  return ControlSignal::constant(Vec(Vec::Zero(p.control_dim())));
}

std::vector<Vec> ExperimentConfig::query_points(const ControlProblem& p) const {
  if (!points.empty()) {
    for (const auto& v : points) {
      if (v.size() != p.state_dim()) throw ArgumentError("query point dimension does not match the problem");
    }
    return points;
  }
  if (p.name() == "linear-l1") return {scalar_vec(0.0), scalar_vec(1.0), scalar_vec(-1.0)};
  return {p.initial_state()};
}

void apply_grid_flag(ExperimentConfig& config, const std::string& flag) {
  const auto v = split_numbers(flag, 3, "--grid");
  config.h = v[0];
  config.dt = v[1];
  config.T = v[2];
  if (!(v[0] > 0.0) || !(v[1] > 0.0) || !(v[2] > 0.0)) throw ArgumentError("--grid values must be positive");
}

void apply_horizons_flag(ExperimentConfig& config, const std::string& flag) {
  const auto v = split_numbers(flag, 3, "--horizons");
  const double count = v[2];
  if (count < 1.0 || count != std::floor(count)) throw ArgumentError("--horizons count must be a positive integer");
  config.horizons = HorizonSequence::geometric(v[0], v[1], static_cast<int>(count)).taus;
}

// ---------------------------------------------------------------------------
// Files

std::string fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot read " + path);
  std::uint64_t h = 14695981039346656037ULL;
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

void write_manifest(const std::string& dir, const ExperimentConfig& config, const std::vector<std::string>& outputs) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& name : outputs) {
    const auto p = fs::path(dir) / name;
    files.push_back({{"path", name}, {"bytes", fs::file_size(p)}, {"fnv1a64", fnv1a64_file(p.string())}});
  }
  nlohmann::json inputs = {{"config", config.to_json()}};
  if (!config.config_path.empty() && fs::exists(config.config_path)) {
    inputs["config_file"] = {{"path", config.config_path}, {"fnv1a64", fnv1a64_file(config.config_path)}};
  }
  const nlohmann::json manifest = {{"tool", "horizonlab"}, {"version", kToolVersion}, {"seed", config.seed},
                                   {"task", config.task},  {"inputs", inputs},          {"outputs", files}};
  std::ofstream out(fs::path(dir) / "manifest.json");
  out << manifest.dump(2) << '\n';
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

std::string series_name(const std::string& variant) {
  if (variant == "all") return "V_all";
  if (variant == "liminf-sequence") return "V_infty";
  if (variant == "inf-over-controls") return "V_inf";
  if (variant == "diamond") return "V_diamond";
  return variant;
}

}  // namespace

std::vector<std::string> emit_plot_data(const std::string& dir) {
  const fs::path d(dir);
  std::vector<std::string> written;
  auto open = [&](const std::string& name) {
    written.push_back(name);
    auto out = std::make_unique<std::ofstream>(d / name);
    *out << "series,x,y\n";
    return out;
  };

  if (fs::exists(d / "value_grid.csv")) {
    const auto rows = read_csv(d / "value_grid.csv");
    if (!rows.empty() && rows[0].size() == 3) {
      auto out = open("plot_value_profile.csv");
      for (std::size_t i = 1; i < rows.size(); ++i) {
        if (std::stod(rows[i].at(0)) == 0.0) *out << "V_t0," << rows[i].at(1) << ',' << rows[i].at(2) << '\n';
      }
    }
  }
  if (fs::exists(d / "limits_trace.csv")) {
    const auto rows = read_csv(d / "limits_trace.csv");
    std::size_t points = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) points = std::max(points, std::stoul(rows[i].at(0)) + 1);
    auto out = open("plot_value_vs_horizon.csv");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      std::string s = series_name(rows[i].at(1));
      if (points > 1) s += "#" + rows[i].at(0);
      *out << s << ',' << rows[i].at(2) << ',' << rows[i].at(3) << '\n';
    }
  }
  const bool inview = fs::exists(d / "optimal_in_view.csv");
  const bool cert = fs::exists(d / "certificate.json");
  if (inview || cert) {
    auto out = open("plot_residual_vs_T.csv");
    if (inview) {
      const auto rows = read_csv(d / "optimal_in_view.csv");
      for (std::size_t i = 1; i < rows.size(); ++i) *out << "optimal-in-view," << rows[i].at(0) << ',' << rows[i].at(1) << '\n';
    }
    if (cert) {
      std::ifstream in(d / "certificate.json");
      const auto j = nlohmann::json::parse(in);
      for (const auto& r : j.at("optimal_residuals")) {
        *out << "certificate-in-view," << fmt(r.at("T").get<double>()) << ',' << fmt(r.at("value").get<double>())
             << '\n';
      }
    }
  }
  if (fs::exists(d / "certificate_arc.csv")) {
    const auto rows = read_csv(d / "certificate_arc.csv");
    auto out = open("plot_costate.csv");
    for (std::size_t c = 1; !rows.empty() && c < rows[0].size(); ++c) {
      for (std::size_t i = 1; i < rows.size(); ++i) *out << "psi_" << (c - 1) << ',' << rows[i].at(0) << ',' << rows[i].at(c) << '\n';
    }
  }
  if (fs::exists(d / "region_map.csv")) {
    const auto rows = read_csv(d / "region_map.csv");
    auto out = open("plot_region.csv");
    const std::size_t coords = rows.empty() ? 0 : rows[0].size() - 5;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      std::string s = "code";
      for (std::size_t k = 1; k < coords; ++k) s += "@x" + std::to_string(k) + "=" + rows[i].at(k);
      *out << s << ',' << rows[i].at(0) << ',' << rows[i].back() << '\n';
    }
  }
  if (written.empty()) throw ArgumentError("no report files to plot in " + dir);
  return written;
}

// ---------------------------------------------------------------------------
// Orchestration

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ArgumentError*>(&e) || dynamic_cast<const LookupError*>(&e) ||
      dynamic_cast<const nlohmann::json::exception*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kExitValidation;
  }
  return kExitSolver;
}

RunResult run(const ExperimentConfig& config) {
  RunResult result;
  try {
    config.validate();
    const auto problem = config.build_problem();
    const auto grid = config.grid_for(problem);
    const auto horizons = config.horizon_sequence();
    fs::create_directories(config.out_dir);
    Writer writer(config.out_dir);
    Context ctx{config, problem, grid, horizons, {}, writer};

    nlohmann::json results = nlohmann::json::object();
    const std::string& t = config.task;
    if (t == "value") results["value"] = task_value(ctx);
    if (t == "limits" || t == "example-suite") results["limits"] = task_limits(ctx);
    if (t == "pmp" || t == "example-suite") results["pmp"] = task_pmp(ctx);
    if (t == "criteria" || t == "example-suite") results["criteria"] = task_criteria(ctx);
    if (t == "regularity") results["regularity"] = task_regularity(ctx);

    result.summary = {{"tool", "horizonlab"},
                      {"version", kToolVersion},
                      {"status", "ok"},
                      {"task", t},
                      {"seed", config.seed},
                      {"tol", config.tol},
                      {"problem", problem_to_json(problem)},
                      {"grid", grid.to_json()},
                      {"horizons", horizons.taus},
                      {"threads", configured_threads()},
                      {"results", results}};
    writer.json("summary.json", result.summary);
    result.outputs = writer.names();
    try {
      for (const auto& p : emit_plot_data(config.out_dir)) result.outputs.push_back(p);
    } catch (const ArgumentError&) {
      // nothing plottable for this task
    }
    write_manifest(config.out_dir, config, result.outputs);
    result.outputs.push_back("manifest.json");
    result.exit_code = kExitOk;
  } catch (const std::exception& e) {
    result.exit_code = exit_code_for(e);
    result.message = e.what();
  }
  return result;
}

}  // namespace horizonlab
