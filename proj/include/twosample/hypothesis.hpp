#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "asymptotics.hpp"
#include "functionals.hpp"

namespace twosample {

enum class sidedness { one, two };
enum class cv_source { exact, plugin_sum, plugin_product, ustat_w, permutation };

inline const char* source_name(cv_source s) {
  switch (s) {
    case cv_source::exact: return "exact";
    case cv_source::plugin_sum: return "plugin_sum";
    case cv_source::plugin_product: return "plugin_product";
    case cv_source::ustat_w: return "ustat_w";
    case cv_source::permutation: return "permutation";
  }
  return "?";
}

struct footpoint {
  measure P0, Q0;
};

struct test_spec {
  functional k = wilcoxon{};
  double a = 0.5;
  sidedness sided = sidedness::one;
  double alpha = 0.05;
  cv_source source = cv_source::exact;
  std::size_t B = 100000;
};

struct test_report {
  double statistic = 0.0;
  double critical_value = 0.0;
  double gamma = 0.0;
  bool reject = false;
  double sigma1 = 0.0;
  std::string source;
};

inline void validate(const test_spec& spec) {
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) fail(errc::config_error, "alpha must lie in (0,1)");
  if (spec.source == cv_source::permutation && spec.B < 1000)
    fail(errc::config_error, "permutation source needs B >= 1000");
}

inline double t_statistic(const gradient_pair& gp, const product_sample& s) {
  double s1 = 0.0, s2 = 0.0;
  for (double x : s.x) s1 += gp.k1(x);
  for (double y : s.y) s2 += gp.k2(y);
  double rn = std::sqrt(static_cast<double>(s.n()));
  return rn * (s1 / static_cast<double>(s.n1()) + s2 / static_cast<double>(s.n2()));
}

inline double sigma1_exact(double k1_norm2, double k2_norm2, double d) {
  if (!(d > 0.0 && d < 1.0)) fail(errc::domain_error, "d must lie in (0,1)");
  if (!(k1_norm2 + k2_norm2 > 1e-24)) fail(errc::degenerate_gradient, "canonical gradient vanishes");
  return std::sqrt(k1_norm2 / (1.0 - d) + k2_norm2 / d);
}

inline double sigma1_exact(const gradient_pair& gp, double d) { return sigma1_exact(gp.k1.norm2(), gp.k2.norm2(), d); }

inline double critical_value(double alpha, sidedness sided, double sigma1) {
  require_sigma(sigma1);
  return normal_quantile(sided == sidedness::one ? 1.0 - alpha : 1.0 - alpha / 2.0) * sigma1;
}

namespace detail {

inline void require_sizes(const product_sample& s, std::size_t m1, std::size_t m2) {
  if (s.n1() < m1 || s.n2() < m2)
    fail(errc::too_few_observations, "need n1 >= " + std::to_string(m1) + " and n2 >= " + std::to_string(m2));
}

struct moments {
  double mean, var;  // var with n-1 denominator
};

inline moments sample_moments(const real_fn& f, const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += f(x);
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) {
    double e = f(x) - m;
    ss += e * e;
  }
  return {m, v.size() > 1 ? ss / static_cast<double>(v.size() - 1) : 0.0};
}

}  // namespace detail

inline double sigma1_plugin_sum(const product_sample& s, const real_fn& f1, const real_fn& f2) {
  detail::require_sizes(s, 2, 2);
  auto m1 = detail::sample_moments(f1, s.x), m2 = detail::sample_moments(f2, s.y);
  double n = static_cast<double>(s.n());
  return std::sqrt(n / static_cast<double>(s.n1()) * m1.var + n / static_cast<double>(s.n2()) * m2.var);
}

inline double sigma1_plugin_product(const product_sample& s, const real_fn& f1, const real_fn& f2) {
  detail::require_sizes(s, 2, 2);
  auto m1 = detail::sample_moments(f1, s.x), m2 = detail::sample_moments(f2, s.y);
  double n = static_cast<double>(s.n());
  return std::sqrt(n / static_cast<double>(s.n1()) * m2.mean * m2.mean * m1.var +
                   n / static_cast<double>(s.n2()) * m1.mean * m1.mean * m2.var);
}

// 1/(n1 n2 (n2-1)) Σ_i Σ_{j≠k} h(X_i,Y_k) h(X_i,Y_j)
template <class H>
double u_variance_estimator(const H& h, const product_sample& s) {
  detail::require_sizes(s, 1, 2);
  double total = 0.0;
  for (double x : s.x) {
    double a = 0.0, a2 = 0.0;
    for (double y : s.y) {
      double v = h(x, y);
      a += v;
      a2 += v * v;
    }
    total += a * a - a2;
  }
  double n1 = static_cast<double>(s.n1()), n2 = static_cast<double>(s.n2());
  return total / (n1 * n2 * (n2 - 1.0));
}

// same estimator conditioned on the second sample
template <class H>
double u_variance_estimator_y(const H& h, const product_sample& s) {
  detail::require_sizes(s, 2, 1);
  double total = 0.0;
  for (double y : s.y) {
    double a = 0.0, a2 = 0.0;
    for (double x : s.x) {
      double v = h(x, y);
      a += v;
      a2 += v * v;
    }
    total += a * a - a2;
  }
  double n1 = static_cast<double>(s.n1()), n2 = static_cast<double>(s.n2());
  return total / (n2 * n1 * (n1 - 1.0));
}

enum class indicator_kernel { x_le_y, x_ge_y };

// Both conditional estimators for h = 1{kernel} - center in O(n log n).
inline std::pair<double, double> indicator_w_estimators(const product_sample& s, indicator_kernel kind, double center) {
  detail::require_sizes(s, 2, 2);
  std::vector<double> xs = s.x, ys = s.y;
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  const double hi = 1.0 - center, lo = -center;
  auto accumulate = [&](double count, double m) {
    double sum = count * hi + (m - count) * lo;
    double sum2 = count * hi * hi + (m - count) * lo * lo;
    return sum * sum - sum2;
  };
  const double n1 = static_cast<double>(s.n1()), n2 = static_cast<double>(s.n2());
  double t1 = 0.0, t2 = 0.0;
  for (double x : s.x) {
    // number of y with the indicator equal to 1 at this x
    double c = kind == indicator_kernel::x_le_y
                   ? static_cast<double>(ys.end() - std::lower_bound(ys.begin(), ys.end(), x))
                   : static_cast<double>(std::upper_bound(ys.begin(), ys.end(), x) - ys.begin());
    t1 += accumulate(c, n2);
  }
  for (double y : s.y) {
    double c = kind == indicator_kernel::x_le_y
                   ? static_cast<double>(std::upper_bound(xs.begin(), xs.end(), y) - xs.begin())
                   : static_cast<double>(xs.end() - std::lower_bound(xs.begin(), xs.end(), y));
    t2 += accumulate(c, n1);
  }
  return {t1 / (n1 * n2 * (n2 - 1.0)), t2 / (n2 * n1 * (n1 - 1.0))};
}

inline std::pair<double, double> wilcoxon_w_estimators(const product_sample& s) {
  return indicator_w_estimators(s, indicator_kernel::x_le_y, 0.5);
}

// #{(i,j) : Y_j <= X_i}
inline double pair_count_y_le_x(const product_sample& s) {
  std::vector<double> ys = s.y;
  std::sort(ys.begin(), ys.end());
  double u = 0.0;
  for (double x : s.x) u += static_cast<double>(std::upper_bound(ys.begin(), ys.end(), x) - ys.begin());
  return u;
}

inline double wilcoxon_tilde_statistic(const product_sample& s) {
  double n1 = static_cast<double>(s.n1()), n2 = static_cast<double>(s.n2());
  return std::sqrt(static_cast<double>(s.n())) * (pair_count_y_le_x(s) / (n1 * n2) - 0.5);
}

namespace detail {

// Pooled ranks of the first sample; rejects ties.
inline std::vector<std::size_t> first_sample_ranks(const product_sample& s) {
  std::vector<std::pair<double, std::size_t>> pooled;
  pooled.reserve(s.n());
  for (std::size_t i = 0; i < s.n1(); ++i) pooled.emplace_back(s.x[i], i);
  for (std::size_t j = 0; j < s.n2(); ++j) pooled.emplace_back(s.y[j], s.n1() + j);
  std::sort(pooled.begin(), pooled.end());
  std::vector<std::size_t> ranks;
  for (std::size_t r = 0; r < pooled.size(); ++r) {
    if (r > 0 && pooled[r].first == pooled[r - 1].first)
      fail(errc::tied_observations, "pooled sample has tied values");
    if (pooled[r].second < s.n1()) ranks.push_back(r + 1);
  }
  return ranks;
}

inline std::int64_t rank_sum(const product_sample& s) {
  auto r = first_sample_ranks(s);
  return static_cast<std::int64_t>(std::accumulate(r.begin(), r.end(), std::size_t{0}));
}

}  // namespace detail

inline double rank_statistic(const product_sample& s) {
  auto ranks = detail::first_sample_ranks(s);
  double n = static_cast<double>(s.n()), n1 = static_cast<double>(s.n1()), n2 = static_cast<double>(s.n2());
  double sx = 0.0;
  for (auto r : ranks) sx += static_cast<double>(r);
  double sy = n * (n + 1.0) / 2.0 - sx;
  return sx / (n1 * std::sqrt(n)) - sy / (n2 * std::sqrt(n));
}

// Permutation law of the rank statistic. Without ties it depends on (n1, n2)
// only, so everything is phrased through the integer rank sum W of sample one:
// one-sided key W, two-sided key |2W - n1(n+1)|.
struct rank_permutation_law {
  std::size_t n1 = 0, n2 = 0;
  sidedness sided = sidedness::one;
  std::int64_t key_c = 0;  // threshold on the key
  double c = 0.0;          // the same threshold on the statistic scale
  double gamma = 0.0;
  bool exhaustive = false;

  std::int64_t key(std::int64_t w) const {
    if (sided == sidedness::one) return w;
    std::int64_t v = 2 * w - static_cast<std::int64_t>(n1 * (n1 + n2 + 1));
    return v < 0 ? -v : v;
  }
  double statistic_of_key(std::int64_t k) const {
    double n = static_cast<double>(n1 + n2);
    double scale = n / (static_cast<double>(n1) * static_cast<double>(n2) * std::sqrt(n));
    if (sided == sidedness::one) return (static_cast<double>(k) - static_cast<double>(n1) * (n + 1.0) / 2.0) * scale;
    return 0.5 * static_cast<double>(k) * scale;
  }
  // probability of rejecting given the observed rank sum
  double reject_probability(std::int64_t w) const {
    auto k = key(w);
    return k > key_c ? 1.0 : (k == key_c ? gamma : 0.0);
  }
};

inline double binomial_coefficient(std::size_t n, std::size_t k) {
  k = std::min(k, n - k);
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(c);
}

inline constexpr double exhaustive_limit = 2e5;

namespace detail {

// smallest support key with P(key > κ) <= α, and γ filling the gap to α
inline void randomized_quantile(const std::map<std::int64_t, double>& counts, double total, double alpha,
                                rank_permutation_law& law) {
  double above = 0.0;
  for (auto it = counts.rbegin(); it != counts.rend(); ++it) {
    double here = it->second;
    if (alpha < (above + here) / total || std::next(it) == counts.rend()) {
      law.key_c = it->first;
      law.gamma = std::clamp((alpha - above / total) / (here / total), 0.0, 1.0);
      break;
    }
    above += here;
  }
  law.c = law.statistic_of_key(law.key_c);
}

}  // namespace detail

inline rank_permutation_law rank_permutation_critical(std::size_t n1, std::size_t n2, double alpha, std::size_t B,
                                                      std::uint64_t seed, sidedness sided = sidedness::one,
                                                      bool force_sampling = false) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(errc::domain_error, "alpha must lie in (0,1)");
  if (n1 == 0 || n2 == 0) fail(errc::too_few_observations, "both samples need at least one observation");
  rank_permutation_law law;
  law.n1 = n1;
  law.n2 = n2;
  law.sided = sided;
  const std::size_t n = n1 + n2;
  std::map<std::int64_t, double> counts;
  double total = 0.0;
  if (!force_sampling && binomial_coefficient(n, n1) <= exhaustive_limit) {
    law.exhaustive = true;
    std::vector<std::size_t> idx(n1);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (;;) {
      std::int64_t w = 0;
      for (auto i : idx) w += static_cast<std::int64_t>(i + 1);
      counts[law.key(w)] += 1.0;
      total += 1.0;
      std::size_t pos = n1;
      while (pos > 0 && idx[pos - 1] == n - n1 + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t j = pos; j < n1; ++j) idx[j] = idx[j - 1] + 1;
    }
  } else {
    if (B < 1000) fail(errc::config_error, "permutation source needs B >= 1000");
    // batches are independent streams; counts merge in any order
    const std::size_t batch = 10000;
    const bool draw_first = n1 <= n2;
    const std::size_t m = draw_first ? n1 : n2;
    const std::int64_t all = static_cast<std::int64_t>(n * (n + 1) / 2);
    std::vector<std::size_t> pool(n);
    for (std::size_t b0 = 0, bi = 0; b0 < B; b0 += batch, ++bi) {
      counter_rng rng(seed, bi);
      std::iota(pool.begin(), pool.end(), std::size_t{1});
      std::size_t todo = std::min(batch, B - b0);
      for (std::size_t r = 0; r < todo; ++r) {
        std::int64_t w = 0;
        for (std::size_t i = 0; i < m; ++i) {
          std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
          std::swap(pool[i], pool[j]);
          w += static_cast<std::int64_t>(pool[i]);
        }
        if (!draw_first) w = all - w;
        counts[law.key(w)] += 1.0;
        total += 1.0;
      }
    }
  }
  detail::randomized_quantile(counts, total, alpha, law);
  return law;
}

struct permutation_cv {
  double c;
  double gamma;
  bool exhaustive;
};

inline permutation_cv permutation_critical(const product_sample& s, double alpha, std::size_t B, std::uint64_t seed,
                                           sidedness sided = sidedness::one) {
  detail::first_sample_ranks(s);  // tie check
  auto law = rank_permutation_critical(s.n1(), s.n2(), alpha, B, seed, sided);
  return {law.c, law.gamma, law.exhaustive};
}

inline double one_sample_statistic(const tangent& k_tilde, const std::vector<double>& z) {
  if (z.empty()) fail(errc::too_few_observations, "one-sample statistic needs n >= 1");
  double s = 0.0;
  for (double v : z) s += k_tilde(v);
  return s / std::sqrt(static_cast<double>(z.size()));
}

inline bool one_sample_test(const tangent& k_tilde, const std::vector<double>& z, double alpha) {
  double c = normal_quantile(1.0 - alpha) * k_tilde.norm();
  return one_sample_statistic(k_tilde, z) > c;
}

// Test with everything that does not depend on the data computed once.
class prepared_test {
 public:
  prepared_test(test_spec spec, std::optional<footpoint> fp, std::uint64_t permutation_seed = 0x7065726d75746521ULL)
      : spec_(std::move(spec)), perm_seed_(permutation_seed) {
    validate(spec_);
    switch (spec_.source) {
      case cv_source::exact:
        if (!fp) fail(errc::config_error, "exact source needs a footpoint (P0, Q0)");
        gp_ = gradient(spec_.k, fp->P0, fp->Q0);
        if (gp_->degenerate()) fail(errc::degenerate_gradient, "canonical gradient vanishes at the footpoint");
        break;
      case cv_source::plugin_sum: resolve_additive(); break;
      case cv_source::plugin_product: resolve_product(); break;
      case cv_source::ustat_w: resolve_kernel(); break;
      case cv_source::permutation:
        if (!is_wilcoxon_kernel()) fail(errc::config_error, "permutation source supports the wilcoxon functional only");
        if (std::abs(spec_.a - 0.5) > 1e-12) fail(errc::config_error, "permutation source tests a = 0.5");
        break;
    }
  }

  const test_spec& spec() const { return spec_; }
  const std::optional<gradient_pair>& gradient_at_footpoint() const { return gp_; }

  test_report run(const product_sample& s, counter_rng& aux) const {
    test_report rep;
    rep.source = source_name(spec_.source);
    const double rn = std::sqrt(static_cast<double>(s.n()));
    switch (spec_.source) {
      case cv_source::exact:
        rep.statistic = t_statistic(*gp_, s) + rn * (gp_->value - spec_.a);
        rep.sigma1 = sigma1_exact(*gp_, s.d_hat());
        break;
      case cv_source::plugin_sum: {
        detail::require_sizes(s, 2, 2);
        auto m1 = detail::sample_moments(f1_, s.x), m2 = detail::sample_moments(f2_, s.y);
        rep.statistic = rn * (m1.mean + m2.mean - spec_.a);
        rep.sigma1 = sigma1_plugin_sum(s, f1_, f2_);
        break;
      }
      case cv_source::plugin_product: {
        detail::require_sizes(s, 2, 2);
        auto m1 = detail::sample_moments(f1_, s.x), m2 = detail::sample_moments(f2_, s.y);
        rep.statistic = rn * (m1.mean * m2.mean - spec_.a);
        rep.sigma1 = sigma1_plugin_product(s, f1_, f2_);
        break;
      }
      case cv_source::ustat_w: ustat(s, rep); break;
      case cv_source::permutation: return permutation(s, aux);
    }
    rep.critical_value = critical_value(spec_.alpha, spec_.sided, rep.sigma1);
    double t = spec_.sided == sidedness::one ? rep.statistic : std::abs(rep.statistic);
    rep.reject = t > rep.critical_value;
    return rep;
  }

 private:
  bool is_wilcoxon_kernel() const {
    if (std::holds_alternative<wilcoxon>(spec_.k)) return true;
    auto* v = std::get_if<von_mises>(&spec_.k);
    return v && v->name == "x_ge_y";
  }

  void resolve_additive() {
    if (auto* c = std::get_if<composite>(&spec_.k); c && c->op == composite_op::sum) {
      f1_ = c->f1.f;
      f2_ = c->f2.f;
      return;
    }
    if (auto* v = std::get_if<von_mises>(&spec_.k)) {
      std::string name;
      double q = 0.0;
      detail::split_call(v->name, name, q);
      if (v->name == "x_minus_y") {
        f1_ = real_fn::identity();
        f2_ = -1.0 * real_fn::identity();
        return;
      }
      if (name == "indicator_leq") {
        f1_ = real_fn::indicator_leq(q);
        f2_ = -1.0 * real_fn::indicator_leq(q);
        return;
      }
    }
    fail(errc::config_error, "plugin_sum needs an additive functional (composite sum, x_minus_y, indicator_leq)");
  }

  void resolve_product() {
    if (auto* c = std::get_if<composite>(&spec_.k); c && c->op == composite_op::product) {
      f1_ = c->f1.f;
      f2_ = c->f2.f;
      return;
    }
    if (auto* v = std::get_if<von_mises>(&spec_.k); v && v->name == "product_xy") {
      f1_ = real_fn::identity();
      f2_ = real_fn::identity();
      return;
    }
    fail(errc::config_error, "plugin_product needs a product functional (composite product, product_xy)");
  }

  void resolve_kernel() {
    if (is_wilcoxon_kernel()) return;
    if (auto* v = std::get_if<von_mises>(&spec_.k)) {
      kernel_ = v->h;
      return;
    }
    fail(errc::config_error, "ustat_w needs a kernel functional (wilcoxon or vonmises)");
  }

  void ustat(const product_sample& s, test_report& rep) const {
    detail::require_sizes(s, 2, 2);
    const double n = static_cast<double>(s.n()), n1 = static_cast<double>(s.n1()), n2 = static_cast<double>(s.n2());
    double u = 0.0, w1 = 0.0, w2 = 0.0;
    if (!kernel_) {
      u = pair_count_y_le_x(s) / (n1 * n2);
      std::tie(w1, w2) = indicator_w_estimators(s, indicator_kernel::x_ge_y, spec_.a);
    } else {
      const auto& h = *kernel_;
      for (double x : s.x)
        for (double y : s.y) u += h(x, y);
      u /= n1 * n2;
      auto centred = [&h, a = spec_.a](double x, double y) { return h(x, y) - a; };
      w1 = u_variance_estimator(centred, s);
      w2 = u_variance_estimator_y(centred, s);
    }
    rep.statistic = std::sqrt(n) * (u - spec_.a);
    double v = n / n1 * w1 + n / n2 * w2;
    if (!(v > 0.0)) fail(errc::degenerate_gradient, "estimated variance is not positive");
    rep.sigma1 = std::sqrt(v);
  }

  test_report permutation(const product_sample& s, counter_rng& aux) const {
    std::int64_t w = detail::rank_sum(s);
    rank_permutation_law law = cached_law(s.n1(), s.n2());
    test_report rep;
    rep.source = source_name(cv_source::permutation);
    rep.statistic = law.statistic_of_key(w);
    if (spec_.sided == sidedness::two) {
      rank_permutation_law one = law;
      one.sided = sidedness::one;
      rep.statistic = one.statistic_of_key(w);
    }
    rep.critical_value = law.c;
    rep.gamma = law.gamma;
    double n = static_cast<double>(s.n());
    rep.sigma1 = std::sqrt(n * (n + 1.0) / (12.0 * static_cast<double>(s.n1()) * static_cast<double>(s.n2())));
    double p = law.reject_probability(w);
    rep.reject = p >= 1.0 || (p > 0.0 && aux.uniform() < p);
    return rep;
  }

  rank_permutation_law cached_law(std::size_t n1, std::size_t n2) const {
    std::lock_guard<std::mutex> lock(*mutex_);
    auto key = std::make_pair(n1, n2);
    auto it = laws_->find(key);
    if (it != laws_->end()) return it->second;
    auto law = rank_permutation_critical(n1, n2, spec_.alpha, spec_.B, perm_seed_ ^ (n1 << 32) ^ n2, spec_.sided);
    laws_->emplace(key, law);
    return law;
  }

  test_spec spec_;
  std::uint64_t perm_seed_;
  std::optional<gradient_pair> gp_;
  real_fn f1_, f2_;
  std::optional<kernel2> kernel_;
  std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
  std::shared_ptr<std::map<std::pair<std::size_t, std::size_t>, rank_permutation_law>> laws_ =
      std::make_shared<std::map<std::pair<std::size_t, std::size_t>, rank_permutation_law>>();
};

inline test_report run_test(const test_spec& spec, const product_sample& s, const std::optional<footpoint>& fp,
                            counter_rng& aux) {
  return prepared_test(spec, fp).run(s, aux);
}

}  // namespace twosample
