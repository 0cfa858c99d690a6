#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "measures.hpp"

namespace twosample {

inline constexpr double zero_mean_tol = 1e-10;

// Zero-mean square-integrable function on the support of `base`. Tangents read
// from literals or built from step functions keep per-atom / per-segment
// values, which is what curve_measure needs on piecewise-uniform bases.
class tangent {
 public:
  static tangent center(const measure& base, const real_fn& raw) {
    double mu = integrate(base, raw);
    tangent g(base, raw - mu);
    g.extract_steps();
    g.refresh();
    return g;
  }

  static tangent from_steps(const measure& base, std::vector<double> values, bool centre = false) {
    std::size_t expected = base.is_discrete() ? base.discrete().size() : base.pw_uniform().segments();
    if (values.size() != expected)
      fail(errc::invalid_measure, "tangent has " + std::to_string(values.size()) + " values, base needs " +
                                      std::to_string(expected));
    for (double v : values) detail::check_finite(v, "tangent values");
    double mu = step_mean(base, values);
    if (centre) {
      for (double& v : values) v -= mu;
    } else if (std::abs(mu) > zero_mean_tol) {
      fail(errc::degenerate_tangent, "tangent values do not integrate to zero (mean " + std::to_string(mu) + ")");
    }
    tangent g(base, step_fn(base, values));
    g.steps_ = std::move(values);
    g.refresh();
    return g;
  }

  static tangent zero(const measure& base) {
    std::size_t k = base.is_discrete() ? base.discrete().size() : base.pw_uniform().segments();
    return from_steps(base, std::vector<double>(k, 0.0));
  }

  const measure& base() const { return base_; }
  const real_fn& fn() const { return fn_; }
  const std::optional<std::vector<double>>& steps() const { return steps_; }
  double mean() const { return mean_; }
  double norm2() const { return norm2_; }
  double norm() const { return std::sqrt(norm2_); }
  bool is_zero() const { return norm2_ == 0.0; }

  double operator()(double x) const {
    if (steps_) {
      if (base_.is_discrete()) {
        std::size_t i = base_.discrete().find(x);
        if (i == base_.discrete().size()) outside(x);
        return (*steps_)[i];
      }
      if (!base_.pw_uniform().in_support(x)) outside(x);
      return (*steps_)[base_.pw_uniform().segment_of(x)];
    }
    if (!base_.in_support(x)) outside(x);
    return fn_(x);
  }

  tangent scaled(double c) const {
    tangent g(base_, c * fn_);
    if (steps_) {
      g.steps_ = *steps_;
      for (double& v : *g.steps_) v *= c;
    }
    g.mean_ = c * mean_;
    g.norm2_ = c * c * norm2_;
    return g;
  }
  tangent operator-() const { return scaled(-1.0); }

 private:
  tangent(measure base, real_fn f) : base_(std::move(base)), fn_(std::move(f)) {}

  [[noreturn]] static void outside(double x) {
    fail(errc::value_outside_support, "no tangent value at " + std::to_string(x));
  }

  static double step_mean(const measure& base, const std::vector<double>& v) {
    const auto& w = base.is_discrete() ? base.discrete().weights() : base.pw_uniform().masses();
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * w[i];
    return s;
  }

  static real_fn step_fn(const measure& base, const std::vector<double>& values) {
    if (base.is_discrete()) {
      auto xs = base.discrete().locations();
      return real_fn(
          [xs, values](double x) {
            auto it = std::lower_bound(xs.begin(), xs.end(), x);
            if (it == xs.end() || *it != x) return 0.0;
            return values[static_cast<std::size_t>(it - xs.begin())];
          },
          poly_hint{0, xs});
    }
    auto p = base.pw_uniform();
    return real_fn(
        [p, values](double x) {
          std::size_t k = p.segment_of(x);
          return k < values.size() ? values[k] : 0.0;
        },
        poly_hint{0, p.breaks()});
  }

  // Discrete bases always admit per-atom values; piecewise-uniform bases only
  // when the function is constant on every segment.
  void extract_steps() {
    if (base_.is_discrete()) {
      std::vector<double> v;
      for (double x : base_.discrete().locations()) v.push_back(fn_(x));
      steps_ = std::move(v);
      return;
    }
    const auto& h = fn_.hint();
    if (!h || h->degree != 0) return;
    const auto& br = base_.pw_uniform().breaks();
    for (double b : h->breaks)
      if (b > br.front() && b < br.back() && !std::binary_search(br.begin(), br.end(), b)) return;
    std::vector<double> v;
    for (std::size_t k = 0; k + 1 < br.size(); ++k) v.push_back(fn_(0.5 * (br[k] + br[k + 1])));
    steps_ = std::move(v);
  }

  void refresh() {
    if (steps_) {
      mean_ = step_mean(base_, *steps_);
      const auto& w = base_.is_discrete() ? base_.discrete().weights() : base_.pw_uniform().masses();
      double s = 0.0;
      for (std::size_t i = 0; i < steps_->size(); ++i) s += (*steps_)[i] * (*steps_)[i] * w[i];
      norm2_ = s;
    } else {
      mean_ = integrate(base_, fn_);
      norm2_ = integrate(base_, fn_ * fn_);
    }
  }

  measure base_;
  real_fn fn_;
  std::optional<std::vector<double>> steps_;
  double mean_ = 0.0;
  double norm2_ = 0.0;
};

struct product_tangent {
  tangent g1, g2;
};

inline void require_same_base(const measure& a, const measure& b, const char* what) {
  if (!(a == b)) fail(errc::base_mismatch, what);
}

// ∫ a b dP over the shared base
inline double inner(const tangent& a, const tangent& b) {
  require_same_base(a.base(), b.base(), "tangents live on different base measures");
  if (a.steps() && b.steps()) {
    const auto& m = a.base();
    const auto& w = m.is_discrete() ? m.discrete().weights() : m.pw_uniform().masses();
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += (*a.steps())[i] * (*b.steps())[i] * w[i];
    return s;
  }
  return integrate(a.base(), a.fn() * b.fn());
}

inline double d_inner(const product_tangent& a, const product_tangent& b, double d) {
  if (!(d > 0.0 && d < 1.0)) fail(errc::domain_error, "d must lie in (0,1)");
  return (1.0 - d) * inner(a.g1, b.g1) + d * inner(a.g2, b.g2);
}

inline double curve_normalizer(const tangent& g, double t) { return 1.0 + 0.25 * t * t * g.norm2(); }

inline measure curve_measure(const measure& base, const tangent& g, double t) {
  require_same_base(base, g.base(), "curve tangent is attached to another measure");
  if (t == 0.0) return base;
  if (!g.steps()) fail(errc::not_step_tangent, "curve on a piecewise-uniform base needs a per-segment tangent");
  const auto& v = *g.steps();
  auto factor = [t](double gv) {
    double r = 1.0 + 0.5 * t * gv;
    return r * r;
  };
  if (base.is_discrete()) {
    const auto& d = base.discrete();
    std::vector<double> xs, ws;
    double c = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) c += d.weights()[i] * factor(v[i]);
    for (std::size_t i = 0; i < d.size(); ++i) {
      double w = d.weights()[i] * factor(v[i]) / c;
      if (w > 0.0) {
        xs.push_back(d.locations()[i]);
        ws.push_back(w);
      }
    }
    return discrete_measure(std::move(xs), std::move(ws));
  }
  const auto& p = base.pw_uniform();
  std::vector<double> ms(p.segments());
  double c = 0.0;
  for (std::size_t k = 0; k < ms.size(); ++k) c += p.masses()[k] * factor(v[k]);
  for (std::size_t k = 0; k < ms.size(); ++k) ms[k] = p.masses()[k] * factor(v[k]) / c;
  return pw_uniform_measure(p.breaks(), std::move(ms));
}

// ‖(2/t)(sqrt(dP_tg/dP) - 1) - g‖ in L2(P)
inline double l2_derivative_residual(const measure& base, const tangent& g, double t) {
  require_same_base(base, g.base(), "residual tangent is attached to another measure");
  if (t == 0.0) fail(errc::domain_error, "t must be nonzero");
  const double c = curve_normalizer(g, t);
  const double rc = std::sqrt(c);
  const double rc_minus_1 = 0.25 * t * t * g.norm2() / (rc + 1.0);
  auto gap = [=](double gv) {
    double r = 1.0 + 0.5 * t * gv;
    double scaled = r >= 0.0 ? (gv - 2.0 / t * rc_minus_1) / rc : 2.0 / t * (-r / rc - 1.0);
    double e = scaled - gv;
    return e * e;
  };
  double s = 0.0;
  if (g.steps()) {
    const auto& w = base.is_discrete() ? base.discrete().weights() : base.pw_uniform().masses();
    for (std::size_t i = 0; i < w.size(); ++i) s += gap((*g.steps())[i]) * w[i];
  } else {
    s = integrate(base, g.fn().map(gap, [](int) { return -1; }));
  }
  return std::sqrt(s);
}

inline double central_sequence(const product_tangent& pt, const product_sample& s) {
  double sum = 0.0;
  for (double x : s.x) sum += pt.g1(x);
  for (double y : s.y) sum += pt.g2(y);
  return sum / std::sqrt(static_cast<double>(s.n()));
}

inline double lan_sigma2(const product_tangent& pt, double d) { return (1.0 - d) * pt.g1.norm2() + d * pt.g2.norm2(); }

// R in log dP_{n,θ}/dP_{n,0} = θ X_n − θ²σ²/2 + R with t = θ/√n
inline double lan_remainder(const measure& P0, const measure& Q0, const product_tangent& pt, double theta,
                            const product_sample& s) {
  require_same_base(P0, pt.g1.base(), "first tangent base differs from P0");
  require_same_base(Q0, pt.g2.base(), "second tangent base differs from Q0");
  if (theta == 0.0) return 0.0;
  const double n = static_cast<double>(s.n());
  const double t = theta / std::sqrt(n);
  double loglr = 0.0, xn = 0.0;
  auto add = [&](const tangent& g, double v) {
    double gv = g(v);
    double r = 0.5 * t * gv;
    if (r == -1.0) fail(errc::degenerate_density, "curve density vanishes at a sampled point");
    double log_factor = r > -1.0 ? 2.0 * std::log1p(r) : 2.0 * std::log(-(1.0 + r));
    loglr += log_factor - std::log1p(0.25 * t * t * g.norm2());
    xn += gv;
  };
  for (double x : s.x) add(pt.g1, x);
  for (double y : s.y) add(pt.g2, y);
  xn /= std::sqrt(n);
  return loglr - theta * xn + 0.5 * theta * theta * lan_sigma2(pt, s.d_hat());
}

struct d_weighted_gradient {
  tangent k_hat1, k_hat2;
  double d;
  double d_norm;
};

inline d_weighted_gradient make_d_weighted(const tangent& k1, const tangent& k2, double d) {
  if (!(d > 0.0 && d < 1.0)) fail(errc::domain_error, "d must lie in (0,1)");
  auto h1 = k1.scaled(1.0 / (1.0 - d));
  auto h2 = k2.scaled(1.0 / d);
  double n2 = (1.0 - d) * h1.norm2() + d * h2.norm2();
  return {std::move(h1), std::move(h2), d, std::sqrt(n2)};
}

}  // namespace twosample
