#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "montecarlo.hpp"

namespace twosample {

using ojson = nlohmann::ordered_json;

namespace detail {

template <class J>
const J& require_field(const J& j, const char* key, const char* ctx) {
  if (!j.is_object() || !j.contains(key)) fail(errc::config_error, std::string(ctx) + ": missing field '" + key + "'");
  return j.at(key);
}

template <class J>
std::vector<double> number_array(const J& j, const char* ctx) {
  if (!j.is_array()) fail(errc::config_error, std::string(ctx) + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) fail(errc::config_error, std::string(ctx) + " must contain numbers only");
    out.push_back(v.template get<double>());
  }
  return out;
}

}  // namespace detail

// ---- measures ------------------------------------------------------------

template <class J = ojson>
J measure_to_json(const measure& m) {
  J j;
  j["kind"] = m.kind();
  if (m.is_discrete()) {
    J atoms = J::array();
    const auto& d = m.discrete();
    for (std::size_t i = 0; i < d.size(); ++i) atoms.push_back(J::array({d.locations()[i], d.weights()[i]}));
    j["atoms"] = atoms;
  } else {
    j["breaks"] = m.pw_uniform().breaks();
    j["masses"] = m.pw_uniform().masses();
  }
  return j;
}

template <class J>
measure measure_from_json(const J& j) {
  const auto& kind = detail::require_field(j, "kind", "measure");
  if (kind == "discrete") {
    const auto& atoms = detail::require_field(j, "atoms", "discrete measure");
    if (!atoms.is_array()) fail(errc::config_error, "atoms must be an array of [x, w] pairs");
    std::vector<double> xs, ws;
    for (const auto& a : atoms) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
        fail(errc::config_error, "each atom must be [location, weight]");
      xs.push_back(a[0].template get<double>());
      ws.push_back(a[1].template get<double>());
    }
    return discrete_measure(std::move(xs), std::move(ws));
  }
  if (kind == "pwuniform") {
    return pw_uniform_measure(detail::number_array(detail::require_field(j, "breaks", "pwuniform measure"), "breaks"),
                              detail::number_array(detail::require_field(j, "masses", "pwuniform measure"), "masses"));
  }
  fail(errc::config_error, "measure kind must be 'discrete' or 'pwuniform'");
}

// ---- tangents --------------------------------------------------------------

template <class J = ojson>
J tangent_to_json(const tangent& g) {
  if (!g.steps()) fail(errc::not_step_tangent, "only per-atom / per-segment tangents have a literal form");
  J j;
  j["values"] = *g.steps();
  return j;
}

template <class J>
tangent tangent_from_json(const measure& base, const J& j) {
  auto values = detail::number_array(detail::require_field(j, "values", "tangent"), "tangent values");
  bool centre = j.contains("center") && j.at("center").template get<bool>();
  return tangent::from_steps(base, std::move(values), centre);
}

// ---- functionals ---------------------------------------------------------

template <class J>
functional functional_from_json(const J& j) {
  if (j.is_string()) {
    J wrapped;
    wrapped["kind"] = j;
    return functional_from_json(wrapped);
  }
  const auto& kind_j = detail::require_field(j, "kind", "functional");
  std::string kind = kind_j.is_string() ? kind_j.template get<std::string>() : "";
  if (kind == "wilcoxon") return wilcoxon{};
  if (kind == "vonmises")
    return make_kernel(detail::require_field(j, "h", "vonmises functional").template get<std::string>());
  if (kind == "invariant") {
    auto v = make_invariant(detail::require_field(j, "h", "invariant functional").template get<std::string>());
    check_invariant(v);
    return v;
  }
  if (kind == "composite") {
    std::string op = detail::require_field(j, "op", "composite functional").template get<std::string>();
    composite c;
    if (op == "sum") c.op = composite_op::sum;
    else if (op == "product") c.op = composite_op::product;
    else if (op == "quotient") c.op = composite_op::quotient;
    else fail(errc::config_error, "composite op must be sum | product | quotient");
    c.f1 = make_one_sample(detail::require_field(j, "f1", "composite functional").template get<std::string>());
    c.f2 = make_one_sample(detail::require_field(j, "f2", "composite functional").template get<std::string>());
    return c;
  }
  fail(errc::config_error, "unknown functional kind '" + kind + "'; known: wilcoxon | vonmises | invariant | composite");
}

// ---- reports -------------------------------------------------------------

inline ojson report_to_json(const test_report& r) {
  ojson j;
  j["statistic"] = r.statistic;
  j["critical_value"] = r.critical_value;
  j["gamma"] = r.gamma;
  j["reject"] = r.reject;
  j["sigma1"] = r.sigma1;
  j["source"] = r.source;
  return j;
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string report_to_csv(const test_report& r) {
  std::ostringstream os;
  os << "statistic,critical_value,gamma,reject,sigma1,source\n"
     << format_number(r.statistic) << ',' << format_number(r.critical_value) << ',' << format_number(r.gamma) << ','
     << (r.reject ? "true" : "false") << ',' << format_number(r.sigma1) << ',' << r.source << '\n';
  return os.str();
}

inline const char* sim_columns[] = {"n", "theta_or_d", "rate", "se", "analytic", "diagnostic"};

inline ojson sim_result_to_json(const sim_result& res) {
  ojson j;
  j["kind"] = res.kind;
  j["columns"] = sim_columns;
  ojson rows = ojson::array();
  for (const auto& r : res.rows) {
    ojson row;
    row["n"] = r.n;
    row["theta_or_d"] = r.theta_or_d;
    row["rate"] = r.rate;
    row["se"] = r.se;
    row["analytic"] = r.analytic;
    row["diagnostic"] = r.diagnostic;
    rows.push_back(row);
  }
  j["rows"] = rows;
  ojson summary = ojson::object();
  for (const auto& [k, v] : res.summary) summary[k] = v;
  j["summary"] = summary;
  return j;
}

inline std::string sim_result_to_csv(const sim_result& res) {
  std::ostringstream os;
  os << "n,theta_or_d,rate,se,analytic,diagnostic\n";
  for (const auto& r : res.rows)
    os << r.n << ',' << format_number(r.theta_or_d) << ',' << format_number(r.rate) << ',' << format_number(r.se)
       << ',' << format_number(r.analytic) << ',' << format_number(r.diagnostic) << '\n';
  return os.str();
}

// ---- data files ------------------------------------------------------------

namespace detail {

inline std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::config_error, "cannot open data file '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      auto a = cell.find_first_not_of(" \t"), b = cell.find_last_not_of(" \t");
      cells.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

inline std::vector<double> read_column(const std::string& path) {
  auto rows = read_csv_rows(path);
  std::vector<double> v;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double x;
    if (rows[i].size() != 1 || !parse_double(rows[i][0], x)) {
      if (i == 0 && v.empty()) continue;  // header
      fail(errc::config_error, path + ": line " + std::to_string(i + 1) + " is not a single number");
    }
    v.push_back(x);
  }
  return v;
}

}  // namespace detail

// Two-column file (sample_id in {1,2}, value) when `y_path` is empty, else one
// value per line in each file. A non-numeric first line is taken as a header.
inline product_sample read_sample(const std::string& x_path, const std::string& y_path = "") {
  if (!y_path.empty()) return product_sample(detail::read_column(x_path), detail::read_column(y_path));
  auto rows = detail::read_csv_rows(x_path);
  std::vector<double> x, y;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double id, v;
    bool ok = rows[i].size() == 2 && detail::parse_double(rows[i][0], id) && detail::parse_double(rows[i][1], v);
    if (!ok) {
      if (i == 0) continue;
      fail(errc::config_error, x_path + ": line " + std::to_string(i + 1) + " is not 'sample_id,value'");
    }
    if (id == 1.0) x.push_back(v);
    else if (id == 2.0) y.push_back(v);
    else fail(errc::config_error, x_path + ": sample_id must be 1 or 2");
  }
  return product_sample(std::move(x), std::move(y));
}

}  // namespace twosample
