#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace twosample {

// A function that is polynomial of degree <= `degree` between consecutive
// `breaks`. Lets integration be exact instead of adaptive.
struct poly_hint {
  int degree = 0;
  std::vector<double> breaks;
};

inline std::vector<double> merge_breaks(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

class real_fn {
 public:
  using fn_type = std::function<double(double)>;

  real_fn() : real_fn(constant(0.0)) {}
  explicit real_fn(fn_type f, std::optional<poly_hint> hint = std::nullopt)
      : f_(std::make_shared<fn_type>(std::move(f))), hint_(std::move(hint)) {
    if (hint_) std::sort(hint_->breaks.begin(), hint_->breaks.end());
  }

  double operator()(double x) const { return (*f_)(x); }
  const std::optional<poly_hint>& hint() const { return hint_; }

  static real_fn constant(double c) {
    return real_fn([c](double) { return c; }, poly_hint{0, {}});
  }
  static real_fn identity() {
    return real_fn([](double x) { return x; }, poly_hint{1, {}});
  }
  static real_fn square() {
    return real_fn([](double x) { return x * x; }, poly_hint{2, {}});
  }
  static real_fn indicator_leq(double q) {
    return real_fn([q](double x) { return x <= q ? 1.0 : 0.0; }, poly_hint{0, {q}});
  }

  // Pointwise transform; `degree_out` describes the result when the input is
  // polynomial of degree `d` (-1 when unknown).
  template <class G>
  real_fn map(G g, std::function<int(int)> degree_out) const {
    auto inner = f_;
    std::optional<poly_hint> h;
    if (hint_) {
      int deg = degree_out(hint_->degree);
      if (deg >= 0) h = poly_hint{deg, hint_->breaks};
    }
    return real_fn([inner, g](double x) { return g((*inner)(x)); }, std::move(h));
  }

  friend real_fn operator+(const real_fn& a, const real_fn& b) {
    auto fa = a.f_, fb = b.f_;
    return real_fn([fa, fb](double x) { return (*fa)(x) + (*fb)(x); }, combine(a, b, false));
  }
  friend real_fn operator-(const real_fn& a, const real_fn& b) {
    auto fa = a.f_, fb = b.f_;
    return real_fn([fa, fb](double x) { return (*fa)(x) - (*fb)(x); }, combine(a, b, false));
  }
  friend real_fn operator*(const real_fn& a, const real_fn& b) {
    auto fa = a.f_, fb = b.f_;
    return real_fn([fa, fb](double x) { return (*fa)(x) * (*fb)(x); }, combine(a, b, true));
  }
  friend real_fn operator*(double c, const real_fn& a) {
    auto fa = a.f_;
    return real_fn([fa, c](double x) { return c * (*fa)(x); }, a.hint_);
  }
  friend real_fn operator+(const real_fn& a, double c) {
    auto fa = a.f_;
    return real_fn([fa, c](double x) { return (*fa)(x) + c; }, a.hint_);
  }
  friend real_fn operator-(const real_fn& a, double c) { return a + (-c); }

 private:
  static std::optional<poly_hint> combine(const real_fn& a, const real_fn& b, bool product) {
    if (!a.hint_ || !b.hint_) return std::nullopt;
    int deg = product ? a.hint_->degree + b.hint_->degree : std::max(a.hint_->degree, b.hint_->degree);
    return poly_hint{deg, merge_breaks(a.hint_->breaks, b.hint_->breaks)};
  }

  std::shared_ptr<fn_type> f_;
  std::optional<poly_hint> hint_;
};

// Kernel on R^2 with optional structure: polynomial of degree dx in x and dy in
// y on the cells cut by x_breaks, y_breaks and (if `diagonal`) the line x = y.
struct kernel2 {
  std::function<double(double, double)> f;
  std::optional<int> dx, dy;
  std::vector<double> x_breaks, y_breaks;
  bool diagonal = false;

  double operator()(double x, double y) const { return f(x, y); }

  // y -> f(x, y) for fixed x
  real_fn section_y(double x) const {
    auto g = f;
    std::optional<poly_hint> h;
    if (dy) {
      auto br = y_breaks;
      if (diagonal) br.push_back(x);
      h = poly_hint{*dy, std::move(br)};
    }
    return real_fn([g, x](double y) { return g(x, y); }, std::move(h));
  }
  // x -> f(x, y) for fixed y
  real_fn section_x(double y) const {
    auto g = f;
    std::optional<poly_hint> h;
    if (dx) {
      auto br = x_breaks;
      if (diagonal) br.push_back(y);
      h = poly_hint{*dx, std::move(br)};
    }
    return real_fn([g, y](double x) { return g(x, y); }, std::move(h));
  }
};

}  // namespace twosample
