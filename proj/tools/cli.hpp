#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "twosample/io.hpp"

namespace twosample::cli {

struct help_requested : std::runtime_error {
  explicit help_requested(const std::string& text) : std::runtime_error(text) {}
};

inline const std::set<std::string> commands{"test", "sim-level", "sim-power", "sim-joint",
                                            "sim-lan", "sim-dscan", "power-table"};

struct run_config {
  std::string command;
  std::string x_path, y_path, out_path;
  std::string format = "json";
  std::uint64_t seed = 1;
  double alpha = 0.05;
  sidedness sided = sidedness::one;
  std::optional<cv_source> source;
  std::size_t reps = 10000;
  std::vector<std::size_t> n_grid{100, 400, 1600};
  double d = 0.5;
  ojson functional_json = "wilcoxon";
  functional k = wilcoxon{};
  std::optional<measure> P0, Q0;
  ojson tangent_json;
  std::vector<double> theta_grid;
  double theta = 1.0;
  std::vector<double> d_grid;
  std::optional<double> a;
  std::size_t B = 100000;
  unsigned workers = 0;
  std::optional<double> sigma1;
};

namespace detail {

[[noreturn]] inline void config_fail(const std::string& field, const std::string& msg) {
  fail(errc::config_error, field + ": " + msg);
}

inline sidedness parse_sided(const std::string& s) {
  if (s == "one") return sidedness::one;
  if (s == "two") return sidedness::two;
  config_fail("sided", "must be 'one' or 'two', got '" + s + "'");
}

inline cv_source parse_source(const std::string& s) {
  for (auto c : {cv_source::exact, cv_source::plugin_sum, cv_source::plugin_product, cv_source::ustat_w,
                 cv_source::permutation})
    if (s == source_name(c)) return c;
  config_fail("source", "must be exact | plugin_sum | plugin_product | ustat_w | permutation, got '" + s + "'");
}

inline std::vector<std::size_t> parse_n_grid(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      config_fail("n-grid", "expected comma-separated positive integers, got '" + s + "'");
    }
  }
  if (out.empty()) config_fail("n-grid", "is empty");
  return out;
}

template <class T>
T get_as(const ojson& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    config_fail(field, "has the wrong type");
  }
}

inline ojson functional_arg(const std::string& s) {
  auto j = ojson::parse(s, nullptr, false);
  return j.is_discarded() ? ojson(s) : j;
}

inline void apply_file(run_config& cfg, const ojson& j) {
  static const std::set<std::string> known{"command", "x",     "y",     "out",     "format", "seed",    "alpha",
                                           "sided",   "source", "reps", "n_grid",  "d",      "functional",
                                           "P0",      "Q0",     "tangent", "theta_grid", "theta", "d_grid",
                                           "a",       "B",      "workers", "sigma1"};
  if (!j.is_object()) fail(errc::config_error, "config file must hold a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) config_fail(key, "unknown config field");
  if (j.contains("command")) cfg.command = get_as<std::string>(j["command"], "command");
  if (j.contains("x")) cfg.x_path = get_as<std::string>(j["x"], "x");
  if (j.contains("y")) cfg.y_path = get_as<std::string>(j["y"], "y");
  if (j.contains("out")) cfg.out_path = get_as<std::string>(j["out"], "out");
  if (j.contains("format")) cfg.format = get_as<std::string>(j["format"], "format");
  if (j.contains("seed")) cfg.seed = get_as<std::uint64_t>(j["seed"], "seed");
  if (j.contains("alpha")) cfg.alpha = get_as<double>(j["alpha"], "alpha");
  if (j.contains("sided")) cfg.sided = parse_sided(get_as<std::string>(j["sided"], "sided"));
  if (j.contains("source")) cfg.source = parse_source(get_as<std::string>(j["source"], "source"));
  if (j.contains("reps")) cfg.reps = get_as<std::size_t>(j["reps"], "reps");
  if (j.contains("n_grid")) cfg.n_grid = get_as<std::vector<std::size_t>>(j["n_grid"], "n_grid");
  if (j.contains("d")) cfg.d = get_as<double>(j["d"], "d");
  if (j.contains("functional")) cfg.functional_json = j["functional"];
  try {
    if (j.contains("P0")) cfg.P0 = measure_from_json(j["P0"]);
    if (j.contains("Q0")) cfg.Q0 = measure_from_json(j["Q0"]);
  } catch (const stats_error& e) {
    config_fail("P0/Q0", e.detail());
  }
  if (j.contains("tangent")) cfg.tangent_json = j["tangent"];
  if (j.contains("theta_grid")) cfg.theta_grid = get_as<std::vector<double>>(j["theta_grid"], "theta_grid");
  if (j.contains("theta")) cfg.theta = get_as<double>(j["theta"], "theta");
  if (j.contains("d_grid")) cfg.d_grid = get_as<std::vector<double>>(j["d_grid"], "d_grid");
  if (j.contains("a")) cfg.a = get_as<double>(j["a"], "a");
  if (j.contains("B")) cfg.B = get_as<std::size_t>(j["B"], "B");
  if (j.contains("workers")) cfg.workers = get_as<unsigned>(j["workers"], "workers");
  if (j.contains("sigma1")) cfg.sigma1 = get_as<double>(j["sigma1"], "sigma1");
}

inline bool is_kernel_functional(const functional& k) {
  return std::holds_alternative<wilcoxon>(k) || std::holds_alternative<von_mises>(k);
}

inline bool is_wilcoxon_like(const functional& k) {
  if (std::holds_alternative<wilcoxon>(k)) return true;
  auto* v = std::get_if<von_mises>(&k);
  return v && v->name == "x_ge_y";
}

inline cv_source default_source(const run_config& cfg) {
  if (cfg.P0 && cfg.Q0) return cv_source::exact;
  if (is_kernel_functional(cfg.k)) return cv_source::ustat_w;
  if (auto* c = std::get_if<composite>(&cfg.k)) {
    if (c->op == composite_op::sum) return cv_source::plugin_sum;
    if (c->op == composite_op::product) return cv_source::plugin_product;
  }
  config_fail("source", "no data-only critical value for this functional; give P0/Q0 and use 'exact'");
}

inline void validate(run_config& cfg) {
  if (cfg.command.empty()) config_fail("command", "missing; one of test | sim-level | sim-power | sim-joint | sim-lan | sim-dscan | power-table");
  if (!commands.count(cfg.command)) config_fail("command", "unknown command '" + cfg.command + "'");
  if (cfg.format != "json" && cfg.format != "csv") config_fail("format", "must be 'json' or 'csv'");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) config_fail("alpha", "must lie in (0,1)");
  if (!(cfg.d > 0.0 && cfg.d < 1.0)) config_fail("d", "must lie in (0,1)");
  try {
    cfg.k = functional_from_json(cfg.functional_json);
  } catch (const stats_error& e) {
    config_fail("functional", e.detail());
  }
  if ((cfg.P0.has_value()) != (cfg.Q0.has_value())) config_fail("P0/Q0", "give both footpoint measures or neither");
  if (cfg.command == "test") {
    if (cfg.x_path.empty()) config_fail("x", "test needs a data file");
    for (const auto& p : {cfg.x_path, cfg.y_path})
      if (!p.empty() && !std::filesystem::exists(p)) config_fail("x/y", "data file '" + p + "' does not exist");
    if (!cfg.source) cfg.source = default_source(cfg);
    if (cfg.source == cv_source::permutation && cfg.B < 1000) config_fail("B", "permutation source needs B >= 1000");
    return;
  }
  if (cfg.command == "power-table") {
    if (!cfg.sigma1 && !cfg.P0) config_fail("P0/Q0", "power-table needs a footpoint or an explicit sigma1");
    if (cfg.sigma1 && !(*cfg.sigma1 > 0.0)) config_fail("sigma1", "must be positive");
    return;
  }
  if (!cfg.P0) config_fail("P0/Q0", cfg.command + " needs footpoint measures P0 and Q0");
  if (cfg.reps < 100) config_fail("reps", "must be at least 100");
  if (!cfg.source) cfg.source = cv_source::exact;
  for (double d : cfg.d_grid)
    if (!(d > 0.0 && d < 1.0)) config_fail("d_grid", "values must lie in (0,1)");
  bool needs_tangent = cfg.command == "sim-power" || cfg.command == "sim-joint" || cfg.command == "sim-lan" ||
                       cfg.command == "sim-dscan";
  if (needs_tangent && cfg.tangent_json.is_null()) config_fail("tangent", cfg.command + " needs a tangent");
}

}  // namespace detail

inline run_config parse_config(int argc, const char* const* argv) {
  CLI::App app{"Two-sample tests of differentiable functionals"};
  std::string command;
  std::optional<std::string> config_path, x, y, functional_s, sided, source, out, format, n_grid;
  std::optional<double> alpha, d;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  app.add_option("command", command, "test | sim-level | sim-power | sim-joint | sim-lan | sim-dscan | power-table");
  app.add_option("--config", config_path, "JSON config file; flags override its values");
  app.add_option("--x", x, "first-sample file (or two-column sample_id,value file)");
  app.add_option("--y", y, "second-sample file");
  app.add_option("--functional", functional_s, "functional descriptor (JSON or a kind name)");
  app.add_option("--alpha", alpha, "level");
  app.add_option("--sided", sided, "one | two");
  app.add_option("--source", source, "critical value source");
  app.add_option("--seed", seed, "64-bit seed");
  app.add_option("--out", out, "output file (stdout if absent)");
  app.add_option("--format", format, "json | csv");
  app.add_option("--reps", reps, "Monte Carlo replications");
  app.add_option("--n-grid", n_grid, "comma-separated total sample sizes");
  app.add_option("--d", d, "allocation n2/n");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    throw help_requested(app.help());
  } catch (const CLI::ParseError& e) {
    fail(errc::config_error, e.what());
  }

  run_config cfg;
  if (config_path) {
    std::ifstream in(*config_path);
    if (!in) detail::config_fail("config", "cannot open '" + *config_path + "'");
    auto j = ojson::parse(in, nullptr, false);
    if (j.is_discarded()) detail::config_fail("config", "'" + *config_path + "' is not valid JSON");
    detail::apply_file(cfg, j);
  }
  if (!command.empty()) cfg.command = command;
  if (x) cfg.x_path = *x;
  if (y) cfg.y_path = *y;
  if (functional_s) cfg.functional_json = detail::functional_arg(*functional_s);
  if (alpha) cfg.alpha = *alpha;
  if (sided) cfg.sided = detail::parse_sided(*sided);
  if (source) cfg.source = detail::parse_source(*source);
  if (seed) cfg.seed = *seed;
  if (out) cfg.out_path = *out;
  if (format) cfg.format = *format;
  if (reps) cfg.reps = *reps;
  if (n_grid) cfg.n_grid = detail::parse_n_grid(*n_grid);
  if (d) cfg.d = *d;
  detail::validate(cfg);
  return cfg;
}

inline run_config parse_config(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"twosample"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return parse_config(static_cast<int>(argv.size()), argv.data());
}

namespace detail {

inline product_tangent build_tangent(const run_config& cfg) {
  const auto& j = cfg.tangent_json;
  if (j.is_string() && j.get<std::string>() == "gradient") {
    auto gp = gradient(cfg.k, *cfg.P0, *cfg.Q0);
    return {gp.k1, gp.k2};
  }
  if (!j.is_object() || !j.contains("g1") || !j.contains("g2"))
    config_fail("tangent", "expected \"gradient\" or {\"g1\": {...}, \"g2\": {...}}");
  return {tangent_from_json(*cfg.P0, j["g1"]), tangent_from_json(*cfg.Q0, j["g2"])};
}

inline sim_config to_sim_config(const run_config& cfg) {
  sim_config s;
  s.P0 = *cfg.P0;
  s.Q0 = *cfg.Q0;
  s.k = cfg.k;
  if (!cfg.tangent_json.is_null()) s.tangent = build_tangent(cfg);
  s.n_grid = cfg.n_grid;
  s.d = cfg.d;
  s.reps = cfg.reps;
  s.alpha = cfg.alpha;
  s.seed = cfg.seed;
  s.source = *cfg.source;
  s.sided = cfg.sided;
  s.a = cfg.a;
  s.B = cfg.B;
  s.workers = cfg.workers;
  return s;
}

inline void emit(const run_config& cfg, const std::string& text) {
  if (cfg.out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(cfg.out_path, std::ios::binary);
  if (!out) fail(errc::domain_error, "cannot write '" + cfg.out_path + "'");
  out << text;
}

inline std::string render(const run_config& cfg, const sim_result& res) {
  return cfg.format == "csv" ? sim_result_to_csv(res) : sim_result_to_json(res).dump(2) + "\n";
}

inline std::string run_test_command(const run_config& cfg, std::ostream& log) {
  auto s = read_sample(cfg.x_path, cfg.y_path);
  test_spec spec;
  spec.k = cfg.k;
  spec.sided = cfg.sided;
  spec.alpha = cfg.alpha;
  spec.source = *cfg.source;
  spec.B = cfg.B;
  std::optional<footpoint> fp;
  if (cfg.P0) fp = footpoint{*cfg.P0, *cfg.Q0};
  if (cfg.a) spec.a = *cfg.a;
  else if (fp) spec.a = evaluate(cfg.k, fp->P0, fp->Q0);
  else spec.a = is_wilcoxon_like(cfg.k) ? 0.5 : 0.0;
  counter_rng aux(cfg.seed);
  auto rep = prepared_test(spec, fp, cfg.seed ^ 0x7065726d75746521ULL).run(s, aux);
  log << "test " << functional_name(cfg.k) << " [" << rep.source << "]: statistic " << format_number(rep.statistic)
      << ", critical value " << format_number(rep.critical_value) << ", "
      << (rep.reject ? "reject" : "do not reject") << "\n";
  return cfg.format == "csv" ? report_to_csv(rep) : report_to_json(rep).dump(2) + "\n";
}

inline std::string power_table(const run_config& cfg, std::ostream& log) {
  double sigma1 = 0.0;
  std::optional<double> dopt;
  if (cfg.sigma1) {
    sigma1 = *cfg.sigma1;
  } else {
    auto gp = gradient(cfg.k, *cfg.P0, *cfg.Q0);
    sigma1 = sigma1_exact(gp, cfg.d);
    if (gp.k1.norm() > 0.0 && gp.k2.norm() > 0.0) dopt = d_opt(gp.k1.norm(), gp.k2.norm());
  }
  auto grid = cfg.theta_grid.empty() ? std::vector<double>{-2, -1, -0.5, 0, 0.5, 1, 2} : cfg.theta_grid;
  std::ostringstream csv;
  csv << "theta,one_sided,two_sided\n";
  ojson rows = ojson::array();
  for (double th : grid) {
    double p1 = power_one_sided(th, sigma1, cfg.alpha), p2 = power_two_sided(th, sigma1, cfg.alpha);
    csv << format_number(th) << ',' << format_number(p1) << ',' << format_number(p2) << '\n';
    ojson r;
    r["theta"] = th;
    r["one_sided"] = p1;
    r["two_sided"] = p2;
    rows.push_back(r);
  }
  log << "power-table: sigma1 " << format_number(sigma1) << ", " << grid.size() << " rows\n";
  if (cfg.format == "csv") return csv.str();
  ojson j;
  j["alpha"] = cfg.alpha;
  j["d"] = cfg.d;
  j["sigma1"] = sigma1;
  j["d_opt"] = dopt ? ojson(*dopt) : ojson(nullptr);
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

inline std::string run_simulation(const run_config& cfg, std::ostream& log) {
  auto s = to_sim_config(cfg);
  sim_result res;
  if (cfg.command == "sim-level") {
    res = simulate_level(s);
  } else if (cfg.command == "sim-power") {
    res = simulate_power(s, cfg.theta_grid.empty() ? std::vector<double>{0, 0.5, 1, 2} : cfg.theta_grid);
  } else if (cfg.command == "sim-joint") {
    res = simulate_joint(s);
  } else if (cfg.command == "sim-lan") {
    res = simulate_lan(s, cfg.theta);
  } else {
    std::vector<double> grid = cfg.d_grid;
    if (grid.empty())
      for (int i = 1; i <= 9; ++i) grid.push_back(i / 10.0);
    res = simulate_d_scan(s, grid, cfg.theta);
  }
  log << cfg.command << ": " << res.rows.size() << " rows, " << cfg.reps << " replications each\n";
  return render(cfg, res);
}

}  // namespace detail

// 0 success, 1 rejected configuration, 2 runtime failure
inline int execute(const run_config& cfg, std::ostream& log) {
  try {
    std::string text;
    if (cfg.command == "test") text = detail::run_test_command(cfg, log);
    else if (cfg.command == "power-table") text = detail::power_table(cfg, log);
    else text = detail::run_simulation(cfg, log);
    detail::emit(cfg, text);
    return 0;
  } catch (const stats_error& e) {
    log << "error: " << e.what() << "\n";
    return e.code() == errc::config_error ? 1 : 2;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace twosample::cli
