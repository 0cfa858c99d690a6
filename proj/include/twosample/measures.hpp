#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "error.hpp"
#include "real_fn.hpp"
#include "rng.hpp"

namespace twosample {

inline constexpr double normalization_tol = 1e-9;
inline constexpr double exact_sum_tol = 1e-12;
inline constexpr double quadrature_abs_tol = 1e-10;

enum class cdf_side { right_closed, left_open };

namespace detail {

inline void check_finite(double v, const char* where) {
  if (!std::isfinite(v)) fail(errc::non_finite_value, std::string("non-finite value in ") + where);
}

// weights -> cumulative sums with cum[0] = 0 and cum.back() = 1
inline std::vector<double> cumulate(const std::vector<double>& w) {
  std::vector<double> cum(w.size() + 1, 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) cum[i + 1] = cum[i] + w[i];
  cum.back() = 1.0;
  return cum;
}

inline void normalize_or_reject(std::vector<double>& w, const char* what) {
  double total = 0.0;
  for (double v : w) total += v;
  if (!std::isfinite(total) || std::abs(total - 1.0) > normalization_tol)
    fail(errc::invalid_measure, std::string(what) + " sum to " + std::to_string(total));
  // already normalized inputs are kept bit-for-bit so literals round-trip
  if (std::abs(total - 1.0) > exact_sum_tol)
    for (double& v : w) v /= total;
}

// Lebesgue integral of f over [a, b]. Exact Gauss-Legendre per polynomial
// piece when f carries a hint, adaptive Gauss-Kronrod otherwise.
inline double integrate_interval(const real_fn& f, double a, double b) {
  if (!(b > a)) return 0.0;
  auto call = [&f](double x) { return f(x); };
  const auto& h = f.hint();
  if (h && h->degree <= 19) {
    auto lo = std::upper_bound(h->breaks.begin(), h->breaks.end(), a);
    auto hi = std::lower_bound(lo, h->breaks.end(), b);
    double left = a, sum = 0.0;
    for (auto it = lo; it != hi; ++it) {
      sum += boost::math::quadrature::gauss<double, 10>::integrate(call, left, *it);
      left = *it;
    }
    sum += boost::math::quadrature::gauss<double, 10>::integrate(call, left, b);
    return sum;
  }
  double err = 0.0;
  double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(call, a, b, 20, 1e-13, &err);
  return v;
}

}  // namespace detail

class discrete_measure {
 public:
  discrete_measure(std::vector<double> locations, std::vector<double> weights)
      : xs_(std::move(locations)), ws_(std::move(weights)) {
    if (xs_.empty() || xs_.size() != ws_.size()) fail(errc::invalid_measure, "atoms and weights must be non-empty and aligned");
    for (std::size_t i = 0; i < xs_.size(); ++i) {
      if (!std::isfinite(xs_[i])) fail(errc::invalid_measure, "non-finite atom location");
      if (!(ws_[i] > 0.0) || !std::isfinite(ws_[i])) fail(errc::invalid_measure, "atom weights must be positive");
      if (i > 0 && !(xs_[i] > xs_[i - 1])) fail(errc::invalid_measure, "atom locations must be strictly increasing");
    }
    detail::normalize_or_reject(ws_, "atom weights");
    cum_ = detail::cumulate(ws_);
  }

  static discrete_measure point(double x) { return discrete_measure({x}, {1.0}); }
  static discrete_measure uniform(std::vector<double> xs) {
    std::vector<double> w(xs.size(), 1.0 / static_cast<double>(xs.size()));
    return discrete_measure(std::move(xs), std::move(w));
  }

  const std::vector<double>& locations() const { return xs_; }
  const std::vector<double>& weights() const { return ws_; }
  std::size_t size() const { return xs_.size(); }

  // index of the atom at exactly x, or size() when x is not an atom
  std::size_t find(double x) const {
    auto it = std::lower_bound(xs_.begin(), xs_.end(), x);
    if (it == xs_.end() || *it != x) return xs_.size();
    return static_cast<std::size_t>(it - xs_.begin());
  }

  double cdf(double t, cdf_side side) const {
    auto it = side == cdf_side::right_closed ? std::upper_bound(xs_.begin(), xs_.end(), t)
                                             : std::lower_bound(xs_.begin(), xs_.end(), t);
    return cum_[static_cast<std::size_t>(it - xs_.begin())];
  }

  double draw(counter_rng& rng) const {
    double u = rng.uniform();
    auto it = std::upper_bound(cum_.begin() + 1, cum_.end(), u);
    std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - (cum_.begin() + 1)), xs_.size() - 1);
    return xs_[k];
  }

  bool operator==(const discrete_measure& o) const { return xs_ == o.xs_ && ws_ == o.ws_; }

 private:
  std::vector<double> xs_, ws_, cum_;
};

class pw_uniform_measure {
 public:
  pw_uniform_measure(std::vector<double> breaks, std::vector<double> masses)
      : br_(std::move(breaks)), ms_(std::move(masses)) {
    if (br_.size() < 2 || ms_.size() + 1 != br_.size())
      fail(errc::invalid_measure, "need k+1 breakpoints for k segment masses");
    for (std::size_t i = 0; i < br_.size(); ++i) {
      if (!std::isfinite(br_[i])) fail(errc::invalid_measure, "non-finite breakpoint");
      if (i > 0 && !(br_[i] > br_[i - 1])) fail(errc::invalid_measure, "breakpoints must be strictly increasing");
    }
    for (double m : ms_)
      if (!(m >= 0.0) || !std::isfinite(m)) fail(errc::invalid_measure, "segment masses must be non-negative");
    detail::normalize_or_reject(ms_, "segment masses");
    cum_ = detail::cumulate(ms_);
  }

  static pw_uniform_measure uniform(double a, double b) { return pw_uniform_measure({a, b}, {1.0}); }

  const std::vector<double>& breaks() const { return br_; }
  const std::vector<double>& masses() const { return ms_; }
  std::size_t segments() const { return ms_.size(); }
  double density(std::size_t k) const { return ms_[k] / (br_[k + 1] - br_[k]); }

  // segment containing x (right-open, last segment closed), or segments() if outside
  std::size_t segment_of(double x) const {
    if (x < br_.front() || x > br_.back()) return ms_.size();
    auto it = std::upper_bound(br_.begin(), br_.end(), x);
    std::size_t k = static_cast<std::size_t>(it - br_.begin());
    return k == 0 ? 0 : std::min(k - 1, ms_.size() - 1);
  }

  double cdf(double t) const {
    if (t <= br_.front()) return 0.0;
    if (t >= br_.back()) return 1.0;
    std::size_t k = segment_of(t);
    return cum_[k] + ms_[k] * (t - br_[k]) / (br_[k + 1] - br_[k]);
  }

  bool in_support(double x) const {
    std::size_t k = segment_of(x);
    if (k == ms_.size()) return false;
    if (ms_[k] > 0.0) return true;
    // on a boundary shared with a charged neighbour
    return (x == br_[k] && k > 0 && ms_[k - 1] > 0.0);
  }

  double draw(counter_rng& rng) const {
    double u = rng.uniform();
    auto it = std::upper_bound(cum_.begin() + 1, cum_.end(), u);
    std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - (cum_.begin() + 1)), ms_.size() - 1);
    while (ms_[k] == 0.0 && k > 0) --k;
    double frac = ms_[k] > 0.0 ? (u - cum_[k]) / ms_[k] : 0.5;
    frac = std::clamp(frac, 0.0, 1.0);
    return std::clamp(br_[k] + frac * (br_[k + 1] - br_[k]), br_[k], br_[k + 1]);
  }

  bool operator==(const pw_uniform_measure& o) const { return br_ == o.br_ && ms_ == o.ms_; }

 private:
  std::vector<double> br_, ms_, cum_;
};

class measure {
 public:
  measure(discrete_measure m) : v_(std::move(m)) {}
  measure(pw_uniform_measure m) : v_(std::move(m)) {}

  bool is_discrete() const { return std::holds_alternative<discrete_measure>(v_); }
  const discrete_measure& discrete() const { return std::get<discrete_measure>(v_); }
  const pw_uniform_measure& pw_uniform() const { return std::get<pw_uniform_measure>(v_); }
  const char* kind() const { return is_discrete() ? "discrete" : "pwuniform"; }

  double cdf(double t, cdf_side side = cdf_side::right_closed) const {
    return is_discrete() ? discrete().cdf(t, side) : pw_uniform().cdf(t);
  }

  // t -> cdf(t, side) with an exact polynomial hint
  real_fn cdf_fn(cdf_side side = cdf_side::right_closed) const {
    auto self = *this;
    if (is_discrete())
      return real_fn([self, side](double t) { return self.cdf(t, side); }, poly_hint{0, discrete().locations()});
    return real_fn([self](double t) { return self.cdf(t); }, poly_hint{1, pw_uniform().breaks()});
  }

  bool in_support(double x) const {
    return is_discrete() ? discrete().find(x) < discrete().size() : pw_uniform().in_support(x);
  }

  // breakpoints at which functions built from this measure change shape
  const std::vector<double>& structure_points() const {
    return is_discrete() ? discrete().locations() : pw_uniform().breaks();
  }

  double draw(counter_rng& rng) const { return is_discrete() ? discrete().draw(rng) : pw_uniform().draw(rng); }

  std::vector<double> sample(counter_rng& rng, std::size_t count) const {
    std::vector<double> out(count);
    for (auto& v : out) v = draw(rng);
    return out;
  }

  bool operator==(const measure& o) const { return v_ == o.v_; }

 private:
  std::variant<discrete_measure, pw_uniform_measure> v_;
};

inline double integrate(const measure& m, const real_fn& f) {
  double sum = 0.0;
  if (m.is_discrete()) {
    const auto& d = m.discrete();
    for (std::size_t i = 0; i < d.size(); ++i) {
      double v = f(d.locations()[i]);
      detail::check_finite(v, "integrand");
      sum += v * d.weights()[i];
    }
    return sum;
  }
  const auto& p = m.pw_uniform();
  for (std::size_t k = 0; k < p.segments(); ++k) {
    if (p.masses()[k] == 0.0) continue;
    sum += p.density(k) * detail::integrate_interval(f, p.breaks()[k], p.breaks()[k + 1]);
  }
  detail::check_finite(sum, "integrand");
  return sum;
}

inline double mean(const measure& m) { return integrate(m, real_fn::identity()); }

// y -> ∫ 1{s >= y} u(s) dm(s)
inline real_fn tail_integral(const measure& m, const real_fn& u) {
  if (m.is_discrete()) {
    const auto& d = m.discrete();
    auto suffix = std::make_shared<std::vector<double>>(d.size() + 1, 0.0);
    for (std::size_t i = d.size(); i-- > 0;) {
      double v = u(d.locations()[i]);
      detail::check_finite(v, "integrand");
      (*suffix)[i] = (*suffix)[i + 1] + v * d.weights()[i];
    }
    auto xs = d.locations();
    return real_fn(
        [xs, suffix](double y) {
          auto it = std::lower_bound(xs.begin(), xs.end(), y);
          return (*suffix)[static_cast<std::size_t>(it - xs.begin())];
        },
        poly_hint{0, xs});
  }
  const auto& p = m.pw_uniform();
  auto suffix = std::make_shared<std::vector<double>>(p.segments() + 1, 0.0);
  for (std::size_t k = p.segments(); k-- > 0;) {
    double seg = p.masses()[k] == 0.0 ? 0.0 : p.density(k) * detail::integrate_interval(u, p.breaks()[k], p.breaks()[k + 1]);
    detail::check_finite(seg, "integrand");
    (*suffix)[k] = (*suffix)[k + 1] + seg;
  }
  std::optional<poly_hint> h;
  if (u.hint()) h = poly_hint{u.hint()->degree + 1, merge_breaks(p.breaks(), u.hint()->breaks)};
  return real_fn(
      [p, u, suffix](double y) {
        if (y <= p.breaks().front()) return (*suffix)[0];
        if (y > p.breaks().back()) return 0.0;
        std::size_t k = p.segment_of(y);
        double part = p.masses()[k] == 0.0 ? 0.0 : p.density(k) * detail::integrate_interval(u, y, p.breaks()[k + 1]);
        return part + (*suffix)[k + 1];
      },
      std::move(h));
}

inline double product_integrate(const measure& p, const measure& q, const kernel2& h) {
  if (p.is_discrete() && q.is_discrete()) {
    const auto& a = p.discrete();
    const auto& b = q.discrete();
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < b.size(); ++j) {
        double v = h(a.locations()[i], b.locations()[j]);
        detail::check_finite(v, "kernel");
        row += v * b.weights()[j];
      }
      sum += row * a.weights()[i];
    }
    return sum;
  }
  std::optional<poly_hint> outer_hint;
  if (h.dx && h.dy) {
    int deg = *h.dx;
    std::vector<double> br = h.x_breaks;
    if (h.diagonal) {
      br = merge_breaks(br, q.structure_points());
      if (!q.is_discrete()) deg = *h.dx + *h.dy + 1;
    }
    outer_hint = poly_hint{deg, std::move(br)};
  }
  real_fn inner([q, h](double x) { return integrate(q, h.section_y(x)); }, std::move(outer_hint));
  return integrate(p, inner);
}

namespace detail {

// masses of p and q on the cells of a common dominating decomposition
inline void common_cells(const measure& p, const measure& q, std::vector<double>& pm, std::vector<double>& qm) {
  pm.clear();
  qm.clear();
  if (p.is_discrete()) {
    const auto& a = p.discrete();
    const auto& b = q.discrete();
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
      if (j == b.size() || (i < a.size() && a.locations()[i] < b.locations()[j])) {
        pm.push_back(a.weights()[i++]);
        qm.push_back(0.0);
      } else if (i == a.size() || b.locations()[j] < a.locations()[i]) {
        pm.push_back(0.0);
        qm.push_back(b.weights()[j++]);
      } else {
        pm.push_back(a.weights()[i++]);
        qm.push_back(b.weights()[j++]);
      }
    }
    return;
  }
  auto cells = merge_breaks(p.pw_uniform().breaks(), q.pw_uniform().breaks());
  for (std::size_t k = 0; k + 1 < cells.size(); ++k) {
    pm.push_back(std::max(0.0, p.cdf(cells[k + 1]) - p.cdf(cells[k])));
    qm.push_back(std::max(0.0, q.cdf(cells[k + 1]) - q.cdf(cells[k])));
  }
}

}  // namespace detail

// Atoms are null sets for any piecewise-uniform law, so mixed pairs are
// mutually singular and both distances equal 1.
inline double tv_distance(const measure& p, const measure& q) {
  if (p.is_discrete() != q.is_discrete()) return 1.0;
  std::vector<double> pm, qm;
  detail::common_cells(p, q, pm, qm);
  double s = 0.0;
  for (std::size_t i = 0; i < pm.size(); ++i) s += std::abs(pm[i] - qm[i]);
  return std::clamp(0.5 * s, 0.0, 1.0);
}

inline double hellinger(const measure& p, const measure& q) {
  if (p.is_discrete() != q.is_discrete()) return 1.0;
  std::vector<double> pm, qm;
  detail::common_cells(p, q, pm, qm);
  double s = 0.0;
  for (std::size_t i = 0; i < pm.size(); ++i) {
    double r = std::sqrt(pm[i]) - std::sqrt(qm[i]);
    s += r * r;
  }
  return std::sqrt(std::clamp(0.5 * s, 0.0, 1.0));
}

struct product_sample {
  std::vector<double> x, y;

  product_sample() = default;
  product_sample(std::vector<double> first, std::vector<double> second) : x(std::move(first)), y(std::move(second)) {
    if (x.empty() || y.empty()) fail(errc::too_few_observations, "both samples need at least one observation");
  }
  std::size_t n1() const { return x.size(); }
  std::size_t n2() const { return y.size(); }
  std::size_t n() const { return x.size() + y.size(); }
  double d_hat() const { return static_cast<double>(n2()) / static_cast<double>(n()); }
};

}  // namespace twosample
