#pragma once

// Fixture generators and brute-force oracles shared by the unit tests and the
// acceptance runner. Randomness here comes from std::mt19937_64 so that the
// oracles never share code with the library's own stream.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "twosample/twosample.hpp"

namespace ts_test {

using namespace twosample;

inline discrete_measure random_discrete(std::mt19937_64& gen, std::size_t k, int lo = -5, int hi = 5) {
  std::uniform_int_distribution<int> loc(lo, hi);
  std::uniform_real_distribution<double> w(0.1, 1.0);
  std::set<int> picked;
  while (picked.size() < k) picked.insert(loc(gen));
  std::vector<double> xs, ws;
  double total = 0.0;
  for (int v : picked) {
    xs.push_back(v);
    ws.push_back(w(gen));
    total += ws.back();
  }
  for (double& v : ws) v /= total;
  return discrete_measure(xs, ws);
}

// weights are multiples of 1/64 so every subset sum is exact in binary
inline discrete_measure dyadic_discrete(std::mt19937_64& gen, const std::vector<double>& support) {
  std::vector<int> units(support.size(), 1);
  std::uniform_int_distribution<std::size_t> pick(0, support.size() - 1);
  for (int left = 64 - static_cast<int>(support.size()); left > 0; --left) ++units[pick(gen)];
  std::vector<double> ws;
  for (int u : units) ws.push_back(u / 64.0);
  return discrete_measure(support, ws);
}

inline std::vector<double> random_values(std::mt19937_64& gen, std::size_t k, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> v(k);
  for (auto& x : v) x = nd(gen);
  return v;
}

// max over subsets B of the union support of |P(B) - Q(B)|
inline double brute_force_tv(const discrete_measure& p, const discrete_measure& q) {
  std::map<double, std::pair<double, double>> atoms;
  for (std::size_t i = 0; i < p.size(); ++i) atoms[p.locations()[i]].first = p.weights()[i];
  for (std::size_t i = 0; i < q.size(); ++i) atoms[q.locations()[i]].second = q.weights()[i];
  std::vector<std::pair<double, double>> w;
  for (auto& [x, pq] : atoms) w.push_back(pq);
  double best = 0.0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << w.size()); ++mask) {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (mask >> i & 1) {
        a += w[i].first;
        b += w[i].second;
      }
    best = std::max(best, std::abs(a - b));
  }
  return best;
}

inline double weight_at(const discrete_measure& m, double x) {
  auto i = m.find(x);
  return i < m.size() ? m.weights()[i] : 0.0;
}

}  // namespace ts_test
