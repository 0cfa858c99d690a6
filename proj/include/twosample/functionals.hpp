#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <variant>

#include "tangents.hpp"

namespace twosample {

// Sections of a kernel against the footpoint: x -> ∫h(x,y)dQ0(y), y -> ∫h(x,y)dP0(x)
using section_builder = std::function<std::pair<real_fn, real_fn>(const measure& P0, const measure& Q0)>;

struct von_mises {
  std::string name;
  kernel2 h;
  section_builder sections;  // optional closed form
};

struct wilcoxon {};

struct invariant {
  std::string name;
  std::function<double(double)> h, hdot;
  int degree = -1;  // polynomial degree of h, -1 if not polynomial
  double bound = 0.0;
};

struct one_sample_fn {
  std::string name;
  real_fn f;
};

enum class composite_op { sum, product, quotient };

struct composite {
  composite_op op;
  one_sample_fn f1, f2;
};

using functional = std::variant<von_mises, wilcoxon, invariant, composite>;

struct gradient_pair {
  tangent k1, k2;
  double value;

  bool degenerate() const { return k1.norm2() + k2.norm2() <= 1e-24; }
};

inline constexpr double quotient_zero_tol = 1e-14;

inline std::string functional_name(const functional& k) {
  struct {
    std::string operator()(const von_mises& v) const { return "vonmises:" + v.name; }
    std::string operator()(const wilcoxon&) const { return "wilcoxon"; }
    std::string operator()(const invariant& v) const { return "invariant:" + v.name; }
    std::string operator()(const composite& c) const {
      const char* op = c.op == composite_op::sum ? "sum" : c.op == composite_op::product ? "product" : "quotient";
      return std::string("composite:") + op + "(" + c.f1.name + "," + c.f2.name + ")";
    }
  } vis;
  return std::visit(vis, k);
}

inline double composite_combine(composite_op op, double k1, double k2) {
  switch (op) {
    case composite_op::sum: return k1 + k2;
    case composite_op::product: return k1 * k2;
    case composite_op::quotient:
      if (std::abs(k2) < quotient_zero_tol) fail(errc::quotient_by_zero, "second mean vanishes");
      return k1 / k2;
  }
  return 0.0;
}

// (∂f/∂k1, ∂f/∂k2)
inline std::pair<double, double> composite_coefficients(composite_op op, double k1, double k2) {
  switch (op) {
    case composite_op::sum: return {1.0, 1.0};
    case composite_op::product: return {k2, k1};
    case composite_op::quotient:
      if (std::abs(k2) < quotient_zero_tol) fail(errc::quotient_by_zero, "second mean vanishes");
      return {1.0 / k2, -k1 / (k2 * k2)};
  }
  return {0.0, 0.0};
}

inline real_fn invariant_inner(const invariant& v, const measure& Q) {
  auto F = Q.cdf_fn(cdf_side::right_closed);
  int deg = v.degree;
  return F.map(v.h, [deg](int d) { return deg < 0 ? -1 : deg * d; });
}

inline double evaluate(const functional& k, const measure& P, const measure& Q) {
  struct {
    const measure& P;
    const measure& Q;
    double operator()(const von_mises& v) const { return product_integrate(P, Q, v.h); }
    double operator()(const wilcoxon&) const { return integrate(P, Q.cdf_fn(cdf_side::right_closed)); }
    double operator()(const invariant& v) const { return integrate(P, invariant_inner(v, Q)); }
    double operator()(const composite& c) const {
      return composite_combine(c.op, integrate(P, c.f1.f), integrate(Q, c.f2.f));
    }
  } vis{P, Q};
  return std::visit(vis, k);
}

namespace detail {

inline std::pair<real_fn, real_fn> generic_sections(const kernel2& h, const measure& P0, const measure& Q0) {
  auto outer_hint = [&](bool first) -> std::optional<poly_hint> {
    auto own = first ? h.dx : h.dy;
    auto other = first ? h.dy : h.dx;
    if (!own || !other) return std::nullopt;
    const measure& m = first ? Q0 : P0;
    int deg = *own;
    std::vector<double> br = first ? h.x_breaks : h.y_breaks;
    if (h.diagonal) {
      br = merge_breaks(br, m.structure_points());
      if (!m.is_discrete()) deg = *own + *other + 1;
    }
    return poly_hint{deg, std::move(br)};
  };
  real_fn s1([h, Q0](double x) { return integrate(Q0, h.section_y(x)); }, outer_hint(true));
  real_fn s2([h, P0](double y) { return integrate(P0, h.section_x(y)); }, outer_hint(false));
  return {std::move(s1), std::move(s2)};
}

}  // namespace detail

inline gradient_pair gradient(const functional& k, const measure& P0, const measure& Q0) {
  struct {
    const measure& P0;
    const measure& Q0;
    gradient_pair operator()(const von_mises& v) const {
      auto [s1, s2] = v.sections ? v.sections(P0, Q0) : detail::generic_sections(v.h, P0, Q0);
      return {tangent::center(P0, s1), tangent::center(Q0, s2), product_integrate(P0, Q0, v.h)};
    }
    gradient_pair operator()(const wilcoxon&) const {
      auto s1 = Q0.cdf_fn(cdf_side::right_closed);
      auto s2 = real_fn::constant(1.0) - P0.cdf_fn(cdf_side::left_open);
      return {tangent::center(P0, s1), tangent::center(Q0, s2), integrate(P0, s1)};
    }
    gradient_pair operator()(const invariant& v) const {
      auto F = Q0.cdf_fn(cdf_side::right_closed);
      auto inner = invariant_inner(v, Q0);
      int deg = v.degree;
      auto slope = F.map(v.hdot, [deg](int d) { return deg < 0 ? -1 : std::max(deg - 1, 0) * d; });
      auto s2 = tail_integral(P0, slope);
      return {tangent::center(P0, inner), tangent::center(Q0, s2), integrate(P0, inner)};
    }
    gradient_pair operator()(const composite& c) const {
      double k1 = integrate(P0, c.f1.f), k2 = integrate(Q0, c.f2.f);
      double value = composite_combine(c.op, k1, k2);
      auto [c1, c2] = composite_coefficients(c.op, k1, k2);
      return {tangent::center(P0, c1 * c.f1.f), tangent::center(Q0, c2 * c.f2.f), value};
    }
  } vis{P0, Q0};
  return std::visit(vis, k);
}

// ⟨k̃, g⟩ = ∫k̃1 g1 dP0 + ∫k̃2 g2 dQ0
inline double gradient_inner(const gradient_pair& gp, const product_tangent& pt) {
  return inner(gp.k1, pt.g1) + inner(gp.k2, pt.g2);
}

enum class fd_scheme { forward, central };

inline double directional_derivative(const functional& k, const measure& P0, const measure& Q0,
                                     const product_tangent& pt, double t, fd_scheme scheme = fd_scheme::forward) {
  if (t == 0.0) fail(errc::domain_error, "t must be nonzero");
  auto at = [&](double s) { return evaluate(k, curve_measure(P0, pt.g1, s), curve_measure(Q0, pt.g2, s)); };
  if (scheme == fd_scheme::central) return (at(t) - at(-t)) / (2.0 * t);
  return (at(t) - evaluate(k, P0, Q0)) / t;
}

// ---- registries ---------------------------------------------------------

namespace detail {

// parses "name(arg)" into name and numeric arg; returns false for a bare name
inline bool split_call(const std::string& s, std::string& name, double& arg) {
  auto open = s.find('(');
  if (open == std::string::npos) {
    name = s;
    return false;
  }
  if (s.back() != ')') fail(errc::config_error, "malformed registry id '" + s + "'");
  name = s.substr(0, open);
  std::string inside = s.substr(open + 1, s.size() - open - 2);
  try {
    std::size_t used = 0;
    arg = std::stod(inside, &used);
    if (used != inside.size()) throw std::invalid_argument(inside);
  } catch (const std::exception&) {
    fail(errc::config_error, "bad numeric argument in '" + s + "'");
  }
  return true;
}

}  // namespace detail

inline const char* kernel_registry_ids = "x_ge_y | x_minus_y | product_xy | indicator_leq(q)";
inline const char* invariant_registry_ids = "identity | square | smoothstep";
inline const char* one_sample_registry_ids =
    "identity | neg_identity | square | indicator_leq(q) | neg_indicator_leq(q) | constant(c)";

inline von_mises make_kernel(const std::string& id) {
  std::string name;
  double q = 0.0;
  bool has_arg = detail::split_call(id, name, q);
  if (name == "x_ge_y" && !has_arg) {
    kernel2 h{[](double x, double y) { return x >= y ? 1.0 : 0.0; }, 0, 0, {}, {}, true};
    section_builder sec = [](const measure& P0, const measure& Q0) {
      return std::pair{Q0.cdf_fn(cdf_side::right_closed), real_fn::constant(1.0) - P0.cdf_fn(cdf_side::left_open)};
    };
    return {id, h, sec};
  }
  if (name == "x_minus_y" && !has_arg) {
    kernel2 h{[](double x, double y) { return x - y; }, 1, 1, {}, {}, false};
    section_builder sec = [](const measure& P0, const measure& Q0) {
      return std::pair{real_fn::identity() - mean(Q0), real_fn::constant(mean(P0)) - real_fn::identity()};
    };
    return {id, h, sec};
  }
  if (name == "product_xy" && !has_arg) {
    kernel2 h{[](double x, double y) { return x * y; }, 1, 1, {}, {}, false};
    section_builder sec = [](const measure& P0, const measure& Q0) {
      return std::pair{mean(Q0) * real_fn::identity(), mean(P0) * real_fn::identity()};
    };
    return {id, h, sec};
  }
  if (name == "indicator_leq" && has_arg) {
    kernel2 h{[q](double x, double y) { return (x <= q ? 1.0 : 0.0) - (y <= q ? 1.0 : 0.0); }, 0, 0, {q}, {q}, false};
    section_builder sec = [q](const measure& P0, const measure& Q0) {
      return std::pair{real_fn::indicator_leq(q) - Q0.cdf(q), real_fn::constant(P0.cdf(q)) - real_fn::indicator_leq(q)};
    };
    return {id, h, sec};
  }
  fail(errc::config_error, "unknown kernel '" + id + "'; known: " + kernel_registry_ids);
}

inline invariant make_invariant(const std::string& id) {
  if (id == "identity") return {id, [](double u) { return u; }, [](double) { return 1.0; }, 1, 1.0};
  if (id == "square") return {id, [](double u) { return u * u; }, [](double u) { return 2.0 * u; }, 2, 2.0};
  if (id == "smoothstep")
    return {id, [](double u) { return u * u * (3.0 - 2.0 * u); }, [](double u) { return 6.0 * u * (1.0 - u); }, 3, 1.5};
  fail(errc::config_error, "unknown invariant h '" + id + "'; known: " + invariant_registry_ids);
}

// checks the derivative bound on a grid of [0,1]
inline void check_invariant(const invariant& v) {
  for (int i = 0; i <= 1000; ++i) {
    double u = i / 1000.0;
    if (std::abs(v.hdot(u)) > v.bound + 1e-12)
      fail(errc::config_error, "derivative of '" + v.name + "' exceeds its declared bound");
  }
}

inline one_sample_fn make_one_sample(const std::string& id) {
  std::string name;
  double a = 0.0;
  bool has_arg = detail::split_call(id, name, a);
  if (!has_arg) {
    if (name == "identity") return {id, real_fn::identity()};
    if (name == "neg_identity") return {id, -1.0 * real_fn::identity()};
    if (name == "square") return {id, real_fn::square()};
  } else {
    if (name == "indicator_leq") return {id, real_fn::indicator_leq(a)};
    if (name == "neg_indicator_leq") return {id, -1.0 * real_fn::indicator_leq(a)};
    if (name == "constant") return {id, real_fn::constant(a)};
  }
  fail(errc::config_error, "unknown one-sample function '" + id + "'; known: " + one_sample_registry_ids);
}

}  // namespace twosample
