#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hypothesis.hpp"

namespace twosample {

struct sim_config {
  measure P0 = discrete_measure::point(0.0);
  measure Q0 = discrete_measure::point(0.0);
  functional k = wilcoxon{};
  std::optional<product_tangent> tangent;
  std::vector<std::size_t> n_grid{100, 400, 1600};
  double d = 0.5;
  std::size_t reps = 10000;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  cv_source source = cv_source::exact;
  sidedness sided = sidedness::one;
  std::optional<double> a;  // defaults to k(P0 ⊗ Q0)
  std::size_t B = 100000;
  unsigned workers = 0;  // 0: one per hardware thread
};

struct sim_row {
  std::size_t n = 0;
  double theta_or_d = 0.0;
  double rate = 0.0;
  double se = 0.0;
  double analytic = 0.0;
  double diagnostic = 0.0;
};

struct sim_result {
  std::string kind;
  std::vector<sim_row> rows;
  std::vector<std::pair<std::string, double>> summary;

  double summary_value(const std::string& key) const {
    for (const auto& [k, v] : summary)
      if (k == key) return v;
    fail(errc::domain_error, "no summary entry '" + key + "'");
  }
};

inline std::pair<std::size_t, std::size_t> split_sizes(std::size_t n, double d) {
  auto n2 = static_cast<std::size_t>(std::llround(d * static_cast<double>(n)));
  return {n - std::min(n2, n), n2};
}

inline void validate(const sim_config& cfg) {
  if (cfg.reps < 100) fail(errc::config_error, "reps must be at least 100");
  if (!(cfg.d > 0.0 && cfg.d < 1.0)) fail(errc::config_error, "d must lie in (0,1)");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) fail(errc::config_error, "alpha must lie in (0,1)");
  if (cfg.n_grid.empty()) fail(errc::config_error, "n_grid is empty");
  for (auto n : cfg.n_grid) {
    auto [n1, n2] = split_sizes(n, cfg.d);
    if (n1 < 2 || n2 < 2) fail(errc::config_error, "n = " + std::to_string(n) + " leaves a sample with fewer than 2 points");
  }
}

inline double binomial_se(double rate, std::size_t reps) {
  return std::sqrt(rate * (1.0 - rate) / static_cast<double>(reps));
}

// Runs f(r) for r = 0..R-1 on a pool of threads; results come back in replicate
// order so any aggregation over them is independent of scheduling.
template <class F>
auto run_replicates(std::size_t R, unsigned workers, F f) -> std::vector<decltype(f(std::size_t{0}))> {
  using T = decltype(f(std::size_t{0}));
  std::vector<std::optional<T>> slots(R);
  std::vector<std::exception_ptr> errors(R);
  unsigned w = workers ? workers : std::max(1u, std::thread::hardware_concurrency());
  w = static_cast<unsigned>(std::min<std::size_t>(w, std::max<std::size_t>(R, 1)));
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t r; (r = next.fetch_add(1)) < R;) {
      try {
        slots[r].emplace(f(r));
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  if (w <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < w; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<T> out;
  out.reserve(R);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

namespace detail {

inline product_sample draw_sample(const measure& P, const measure& Q, std::size_t n1, std::size_t n2,
                                  counter_rng& rng) {
  auto x = P.sample(rng, n1);
  auto y = Q.sample(rng, n2);
  return product_sample(std::move(x), std::move(y));
}

inline prepared_test prepare(const sim_config& cfg) {
  test_spec spec;
  spec.k = cfg.k;
  spec.a = cfg.a ? *cfg.a : evaluate(cfg.k, cfg.P0, cfg.Q0);
  spec.sided = cfg.sided;
  spec.alpha = cfg.alpha;
  spec.source = cfg.source;
  spec.B = cfg.B;
  return prepared_test(spec, footpoint{cfg.P0, cfg.Q0}, cfg.seed ^ 0x7065726d75746521ULL);
}

inline const product_tangent& require_tangent(const sim_config& cfg) {
  if (!cfg.tangent) fail(errc::config_error, "this simulation needs a tangent");
  return *cfg.tangent;
}

inline double analytic_power(double theta, double sigma1, double alpha, sidedness sided) {
  return sided == sidedness::one ? power_one_sided(theta, sigma1, alpha) : power_two_sided(theta, sigma1, alpha);
}

struct rejection {
  double reject;
  double statistic;
};

// rejection rate of the configured test at sample sizes (n1, n2) under P ⊗ Q
inline std::pair<double, double> rejection_rate(const sim_config& cfg, const prepared_test& test, const measure& P,
                                                const measure& Q, std::size_t n1, std::size_t n2) {
  auto out = run_replicates(cfg.reps, cfg.workers, [&](std::size_t r) {
    auto rng = replicate_stream(cfg.seed, r);
    auto s = draw_sample(P, Q, n1, n2, rng);
    auto rep = test.run(s, rng);
    return rejection{rep.reject ? 1.0 : 0.0, rep.statistic};
  });
  double hits = 0.0, stat = 0.0;
  for (const auto& o : out) {
    hits += o.reject;
    stat += o.statistic;
  }
  return {hits / static_cast<double>(cfg.reps), stat / static_cast<double>(cfg.reps)};
}

inline double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) return 0.0;
  double pos = p * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, v.size() - 1);
  double f = pos - static_cast<double>(lo);
  return v[lo] + f * (v[hi] - v[lo]);
}

}  // namespace detail

// rows: n, alpha, rate, se, analytic = alpha, diagnostic = mean statistic
inline sim_result simulate_level(const sim_config& cfg) {
  validate(cfg);
  auto test = detail::prepare(cfg);
  sim_result res{"level", {}, {}};
  for (auto n : cfg.n_grid) {
    auto [n1, n2] = split_sizes(n, cfg.d);
    auto [rate, mean_stat] = detail::rejection_rate(cfg, test, cfg.P0, cfg.Q0, n1, n2);
    res.rows.push_back({n, cfg.alpha, rate, binomial_se(rate, cfg.reps), cfg.alpha, mean_stat});
  }
  return res;
}

enum class localization { canonical, direct };

struct power_options {
  localization loc = localization::canonical;
  std::function<double(std::size_t)> t_multiplier;  // optional perturbation of t_n
};

// rows: n, theta, rate, se, analytic power, diagnostic = t_n
inline sim_result simulate_power(const sim_config& cfg, const std::vector<double>& theta_grid,
                                 const power_options& opt = {}) {
  validate(cfg);
  const auto& pt = detail::require_tangent(cfg);
  auto test = detail::prepare(cfg);
  auto gp = gradient(cfg.k, cfg.P0, cfg.Q0);
  double ip = gradient_inner(gp, pt);
  double scale = std::sqrt(gp.k1.norm2() + gp.k2.norm2()) * std::sqrt(pt.g1.norm2() + pt.g2.norm2());
  if (opt.loc == localization::canonical && !(std::abs(ip) > 1e-12 * std::max(scale, 1e-300)))
    fail(errc::orthogonal_tangent, "tangent is orthogonal to the canonical gradient");
  sim_result res{"power", {}, {{"inner_gradient_tangent", ip}}};
  for (auto n : cfg.n_grid) {
    auto [n1, n2] = split_sizes(n, cfg.d);
    double d_hat = static_cast<double>(n2) / static_cast<double>(n);
    double sigma1 = sigma1_exact(gp, d_hat);
    for (double theta : theta_grid) {
      double rn = std::sqrt(static_cast<double>(n));
      double t = opt.loc == localization::canonical ? theta / (rn * ip) : theta / rn;
      double implicit = opt.loc == localization::canonical ? theta : theta * ip;
      if (opt.t_multiplier) t *= opt.t_multiplier(n);
      auto P = curve_measure(cfg.P0, pt.g1, t);
      auto Q = curve_measure(cfg.Q0, pt.g2, t);
      auto [rate, mean_stat] = detail::rejection_rate(cfg, test, P, Q, n1, n2);
      (void)mean_stat;
      res.rows.push_back({n, theta, rate, binomial_se(rate, cfg.reps),
                          detail::analytic_power(implicit, sigma1, cfg.alpha, cfg.sided), t});
    }
  }
  return res;
}

struct joint_moments {
  double var_t, var_x, cov;
  double se_cov;
};

// Null draws of (T_n, X_n) at total size n.
inline std::vector<std::pair<double, double>> sample_joint(const sim_config& cfg, std::size_t n) {
  validate(cfg);
  const auto& pt = detail::require_tangent(cfg);
  auto gp = gradient(cfg.k, cfg.P0, cfg.Q0);
  auto [n1, n2] = split_sizes(n, cfg.d);
  return run_replicates(cfg.reps, cfg.workers, [&](std::size_t r) {
    auto rng = replicate_stream(cfg.seed, r);
    auto s = detail::draw_sample(cfg.P0, cfg.Q0, n1, n2, rng);
    return std::pair{t_statistic(gp, s), central_sequence(pt, s)};
  });
}

inline joint_moments joint_covariance(const std::vector<std::pair<double, double>>& draws) {
  const double R = static_cast<double>(draws.size());
  double mt = 0.0, mx = 0.0;
  for (const auto& [t, x] : draws) {
    mt += t;
    mx += x;
  }
  mt /= R;
  mx /= R;
  double vt = 0.0, vx = 0.0, c = 0.0;
  for (const auto& [t, x] : draws) {
    vt += (t - mt) * (t - mt);
    vx += (x - mx) * (x - mx);
    c += (t - mt) * (x - mx);
  }
  vt /= R - 1.0;
  vx /= R - 1.0;
  c /= R - 1.0;
  double m4 = 0.0;
  for (const auto& [t, x] : draws) {
    double p = (t - mt) * (x - mx) - c;
    m4 += p * p;
  }
  return {vt, vx, c, std::sqrt(m4 / (R - 1.0) / R)};
}

// rows: n, d_hat, empirical Cov(T_n, X_n), its se, analytic σ12, diagnostic = Var(T_n)/σ1²
inline sim_result simulate_joint(const sim_config& cfg) {
  validate(cfg);
  const auto& pt = detail::require_tangent(cfg);
  auto gp = gradient(cfg.k, cfg.P0, cfg.Q0);
  if (gp.degenerate()) fail(errc::degenerate_gradient, "canonical gradient vanishes at the footpoint");
  sim_result res{"joint", {}, {}};
  for (auto n : cfg.n_grid) {
    auto [n1, n2] = split_sizes(n, cfg.d);
    double d_hat = static_cast<double>(n2) / static_cast<double>(n);
    auto m = joint_covariance(sample_joint(cfg, n));
    double a1 = std::sqrt(1.0 - d_hat), a2 = std::sqrt(d_hat);
    double sigma12 = a1 / std::sqrt(1.0 - d_hat) * inner(gp.k1, pt.g1) + a2 / std::sqrt(d_hat) * inner(gp.k2, pt.g2);
    double sigma1 = sigma1_exact(gp, d_hat);
    double sigma2_sq = lan_sigma2(pt, d_hat);
    res.rows.push_back({n, d_hat, m.cov, m.se_cov, sigma12, m.var_t / (sigma1 * sigma1)});
    std::string p = "n=" + std::to_string(n) + ":";
    res.summary.emplace_back(p + "var_t", m.var_t);
    res.summary.emplace_back(p + "var_x", m.var_x);
    res.summary.emplace_back(p + "cov", m.cov);
    res.summary.emplace_back(p + "sigma1_sq", sigma1 * sigma1);
    res.summary.emplace_back(p + "sigma2_sq", sigma2_sq);
    res.summary.emplace_back(p + "sigma12", sigma12);
  }
  return res;
}

// rows: n, theta, median |R|, 0.9-quantile |R| (in the se column), analytic 0,
// diagnostic = frequency of DegenerateDensity events
inline sim_result simulate_lan(const sim_config& cfg, double theta) {
  validate(cfg);
  const auto& pt = detail::require_tangent(cfg);
  if (pt.g1.is_zero() && pt.g2.is_zero()) fail(errc::degenerate_tangent, "LAN diagnostic needs a nonzero tangent");
  sim_result res{"lan", {}, {}};
  for (auto n : cfg.n_grid) {
    auto [n1, n2] = split_sizes(n, cfg.d);
    auto out = run_replicates(cfg.reps, cfg.workers, [&](std::size_t r) -> std::optional<double> {
      auto rng = replicate_stream(cfg.seed, r);
      auto s = detail::draw_sample(cfg.P0, cfg.Q0, n1, n2, rng);
      try {
        return std::abs(lan_remainder(cfg.P0, cfg.Q0, pt, theta, s));
      } catch (const stats_error& e) {
        if (e.code() != errc::degenerate_density) throw;
        return std::nullopt;
      }
    });
    std::vector<double> abs_r;
    for (const auto& o : out)
      if (o) abs_r.push_back(*o);
    std::sort(abs_r.begin(), abs_r.end());
    double degenerate = static_cast<double>(out.size() - abs_r.size()) / static_cast<double>(out.size());
    res.rows.push_back({n, theta, detail::quantile_sorted(abs_r, 0.5), detail::quantile_sorted(abs_r, 0.9), 0.0,
                        degenerate});
  }
  return res;
}

// rows: n, d, empirical power, se, analytic power at d, diagnostic = d_opt
inline sim_result simulate_d_scan(const sim_config& cfg, const std::vector<double>& d_grid, double theta) {
  validate(cfg);
  const auto& pt = detail::require_tangent(cfg);
  if (d_grid.empty()) fail(errc::config_error, "d grid is empty");
  auto gp = gradient(cfg.k, cfg.P0, cfg.Q0);
  double dopt = d_opt(gp.k1.norm(), gp.k2.norm());
  double ip = gradient_inner(gp, pt);
  if (ip == 0.0) fail(errc::orthogonal_tangent, "tangent is orthogonal to the canonical gradient");
  sim_result res{"dscan", {}, {{"d_opt", dopt}}};
  for (auto n : cfg.n_grid) {
    double best_rate = -1.0, best_d = 0.0, best_analytic = -1.0, best_analytic_d = 0.0;
    for (double d : d_grid) {
      sim_config c = cfg;
      c.d = d;
      validate(c);
      auto test = detail::prepare(c);
      auto [n1, n2] = split_sizes(n, d);
      double d_hat = static_cast<double>(n2) / static_cast<double>(n);
      double t = theta / (std::sqrt(static_cast<double>(n)) * ip);
      auto P = curve_measure(cfg.P0, pt.g1, t);
      auto Q = curve_measure(cfg.Q0, pt.g2, t);
      auto [rate, mean_stat] = detail::rejection_rate(c, test, P, Q, n1, n2);
      (void)mean_stat;
      double analytic = detail::analytic_power(theta, sigma1_exact(gp, d_hat), cfg.alpha, cfg.sided);
      res.rows.push_back({n, d, rate, binomial_se(rate, cfg.reps), analytic, dopt});
      if (rate > best_rate) {
        best_rate = rate;
        best_d = d;
      }
      if (analytic > best_analytic) {
        best_analytic = analytic;
        best_analytic_d = d;
      }
    }
    std::string p = "n=" + std::to_string(n) + ":";
    res.summary.emplace_back(p + "argmax_empirical", best_d);
    res.summary.emplace_back(p + "argmax_analytic", best_analytic_d);
  }
  return res;
}

}  // namespace twosample
