#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace twosample;

namespace {

using ts_test::random_discrete;
using ts_test::random_values;

product_tangent random_tangent(std::mt19937_64& gen, const discrete_measure& P, const discrete_measure& Q) {
  return {tangent::from_steps(P, random_values(gen, P.size()), true),
          tangent::from_steps(Q, random_values(gen, Q.size()), true)};
}

// ∫∫h dP dQ and its two sections by plain double loops
struct kernel_oracle {
  double value = 0.0;
  std::vector<double> s1, s2;
};

template <class H>
kernel_oracle double_sum(const discrete_measure& P, const discrete_measure& Q, H h) {
  kernel_oracle o;
  o.s1.assign(P.size(), 0.0);
  o.s2.assign(Q.size(), 0.0);
  for (std::size_t i = 0; i < P.size(); ++i)
    for (std::size_t j = 0; j < Q.size(); ++j) {
      double v = h(P.locations()[i], Q.locations()[j]);
      o.value += P.weights()[i] * Q.weights()[j] * v;
      o.s1[i] += Q.weights()[j] * v;
      o.s2[j] += P.weights()[i] * v;
    }
  return o;
}

std::vector<functional> gradient_family() {
  return {wilcoxon{},
          make_kernel("x_minus_y"),
          make_kernel("product_xy"),
          make_kernel("indicator_leq(0.5)"),
          make_invariant("identity"),
          make_invariant("smoothstep"),
          composite{composite_op::sum, make_one_sample("identity"), make_one_sample("square")},
          composite{composite_op::product, make_one_sample("square"), make_one_sample("identity")},
          composite{composite_op::quotient, make_one_sample("identity"), make_one_sample("square")}};
}

}  // namespace

TEST(Evaluate, WilcoxonTwoPoint) {
  measure u = discrete_measure::uniform({1, 2});
  EXPECT_EQ(evaluate(wilcoxon{}, u, u), 0.75);
}

TEST(Evaluate, MeanDifference) {
  std::mt19937_64 gen(2);
  composite md{composite_op::sum, make_one_sample("identity"), make_one_sample("neg_identity")};
  for (int rep = 0; rep < 20; ++rep) {
    auto P = random_discrete(gen, 4), Q = random_discrete(gen, 3);
    double ep = 0, eq = 0;
    for (std::size_t i = 0; i < P.size(); ++i) ep += P.weights()[i] * P.locations()[i];
    for (std::size_t i = 0; i < Q.size(); ++i) eq += Q.weights()[i] * Q.locations()[i];
    EXPECT_NEAR(evaluate(md, P, Q), ep - eq, 1e-13);
  }
}

TEST(Evaluate, WilcoxonMatchesDoubleSum) {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 50; ++rep) {
    auto P = random_discrete(gen, 5), Q = random_discrete(gen, 4);
    auto o = double_sum(P, Q, [](double x, double y) { return x >= y ? 1.0 : 0.0; });
    EXPECT_NEAR(evaluate(wilcoxon{}, P, Q), o.value, 1e-14);
    EXPECT_NEAR(evaluate(make_kernel("x_ge_y"), P, Q), o.value, 1e-14);
  }
}

TEST(Evaluate, InvariantIdentityIsWilcoxonOnContinuousQ) {
  measure P = discrete_measure::uniform({0.25, 0.5});
  measure Q = pw_uniform_measure::uniform(0, 1);
  EXPECT_NEAR(evaluate(make_invariant("identity"), P, Q), 0.375, 1e-14);
  EXPECT_NEAR(evaluate(wilcoxon{}, P, Q), 0.375, 1e-14);
  measure P2 = pw_uniform_measure({0, 0.5, 2}, {0.3, 0.7});
  measure Q2 = pw_uniform_measure({-1, 0.2, 1, 1.5}, {0.2, 0.5, 0.3});
  double w = evaluate(wilcoxon{}, P2, Q2);
  EXPECT_NEAR(evaluate(make_invariant("identity"), P2, Q2), w, 1e-10);
  // the generic kernel path integrates the indicator numerically
  von_mises generic{"x_ge_y", make_kernel("x_ge_y").h, {}};
  EXPECT_NEAR(evaluate(generic, P2, Q2), w, 1e-9);
}

TEST(Evaluate, InvariantUnderIncreasingTransform) {
  std::mt19937_64 gen(5);
  // T is piecewise linear, strictly increasing, with a kink at 0
  auto T = [](double x) { return x < 0 ? 0.5 * x : 3.0 * x + 1.0 * (x > 2 ? x - 2 : 0.0); };
  for (int rep = 0; rep < 30; ++rep) {
    auto P = random_discrete(gen, 4), Q = random_discrete(gen, 5);
    std::vector<double> px, qx;
    for (double x : P.locations()) px.push_back(T(x));
    for (double x : Q.locations()) qx.push_back(T(x));
    discrete_measure TP(px, P.weights()), TQ(qx, Q.weights());
    for (auto id : {"identity", "square", "smoothstep"})
      EXPECT_NEAR(evaluate(make_invariant(id), P, Q), evaluate(make_invariant(id), TP, TQ), 1e-10);
  }
  // continuous case: T linear on each segment maps piecewise uniform to piecewise uniform
  auto map_breaks = [&](const pw_uniform_measure& m) {
    std::vector<double> b;
    for (double x : m.breaks()) b.push_back(T(x));
    return pw_uniform_measure(b, m.masses());
  };
  // T has kinks at 0 and 2; split segments there so that T stays linear on each
  pw_uniform_measure Ps({-2, -1, 0, 2, 3}, {0.2, 0.5, 0.2, 0.1});
  pw_uniform_measure Qs({-1.5, 0, 1, 2, 4}, {0.4, 0.4, 0.1, 0.1});
  for (auto id : {"identity", "square", "smoothstep"})
    EXPECT_NEAR(evaluate(make_invariant(id), Ps, Qs), evaluate(make_invariant(id), map_breaks(Ps), map_breaks(Qs)),
                1e-10);
}

TEST(Gradient, WilcoxonMatchesDoubleSumSections) {
  std::mt19937_64 gen(7);
  for (int rep = 0; rep < 50; ++rep) {
    auto P = random_discrete(gen, 5), Q = random_discrete(gen, 4);
    auto o = double_sum(P, Q, [](double x, double y) { return x >= y ? 1.0 : 0.0; });
    auto gp = gradient(wilcoxon{}, P, Q);
    for (std::size_t i = 0; i < P.size(); ++i) EXPECT_NEAR(gp.k1(P.locations()[i]), o.s1[i] - o.value, 1e-14);
    for (std::size_t j = 0; j < Q.size(); ++j) EXPECT_NEAR(gp.k2(Q.locations()[j]), o.s2[j] - o.value, 1e-14);
    EXPECT_NEAR(gp.value, o.value, 1e-14);
  }
}

TEST(Gradient, ConditionalExpectationIdentity) {
  std::mt19937_64 gen(8);
  std::vector<std::pair<std::string, std::function<double(double, double)>>> kernels = {
      {"x_ge_y", [](double x, double y) { return x >= y ? 1.0 : 0.0; }},
      {"x_minus_y", [](double x, double y) { return x - y; }},
      {"product_xy", [](double x, double y) { return x * y; }},
      {"indicator_leq(0.5)", [](double x, double y) { return (x <= 0.5) - (y <= 0.5) * 1.0; }}};
  for (int rep = 0; rep < 20; ++rep) {
    auto P = random_discrete(gen, 5), Q = random_discrete(gen, 5);
    for (auto& [id, h] : kernels) {
      auto o = double_sum(P, Q, h);
      auto closed = gradient(make_kernel(id), P, Q);
      von_mises generic{id, make_kernel(id).h, {}};
      auto numeric = gradient(generic, P, Q);
      for (std::size_t i = 0; i < P.size(); ++i) {
        EXPECT_NEAR(closed.k1(P.locations()[i]), o.s1[i] - o.value, 1e-10) << id;
        EXPECT_NEAR(numeric.k1(P.locations()[i]), o.s1[i] - o.value, 1e-10) << id;
      }
      for (std::size_t j = 0; j < Q.size(); ++j) {
        EXPECT_NEAR(closed.k2(Q.locations()[j]), o.s2[j] - o.value, 1e-10) << id;
        EXPECT_NEAR(numeric.k2(Q.locations()[j]), o.s2[j] - o.value, 1e-10) << id;
      }
    }
  }
}

TEST(Gradient, ContinuousClosedFormMatchesGeneric) {
  measure P = pw_uniform_measure({0, 1, 3}, {0.6, 0.4});
  measure Q = pw_uniform_measure({-1, 0.5, 2}, {0.5, 0.5});
  for (auto id : {"x_ge_y", "x_minus_y", "product_xy", "indicator_leq(0.7)"}) {
    auto closed = gradient(make_kernel(id), P, Q);
    auto numeric = gradient(von_mises{id, make_kernel(id).h, {}}, P, Q);
    for (double x : {0.1, 0.5, 0.99, 1.7, 2.9}) EXPECT_NEAR(closed.k1(x), numeric.k1(x), 1e-9) << id;
    for (double y : {-0.9, 0.0, 0.6, 1.9}) EXPECT_NEAR(closed.k2(y), numeric.k2(y), 1e-9) << id;
    EXPECT_NEAR(closed.k1.norm2(), numeric.k1.norm2(), 1e-9) << id;
    EXPECT_NEAR(closed.k2.norm2(), numeric.k2.norm2(), 1e-9) << id;
  }
}

TEST(Gradient, MeanDifferenceKernel) {
  std::mt19937_64 gen(9);
  auto P = random_discrete(gen, 4), Q = random_discrete(gen, 4);
  auto gp = gradient(make_kernel("x_minus_y"), P, Q);
  double ep = mean(P), eq = mean(Q);
  for (double x : P.locations()) EXPECT_NEAR(gp.k1(x), x - ep, 1e-14);
  for (double y : Q.locations()) EXPECT_NEAR(gp.k2(y), -(y - eq), 1e-14);
}

TEST(Gradient, PointMassesAreDegenerate) {
  measure p = discrete_measure::point(1.0);
  auto gp = gradient(wilcoxon{}, p, p);
  EXPECT_TRUE(gp.degenerate());
  EXPECT_EQ(gp.k1(1.0), 0.0);
  EXPECT_EQ(gp.k2(1.0), 0.0);
}

TEST(Gradient, ProductCoefficients) {
  measure P = discrete_measure::uniform({1, 3});   // mean 2
  measure Q = discrete_measure::uniform({2, 4});   // mean 3
  composite c{composite_op::product, make_one_sample("identity"), make_one_sample("identity")};
  auto gp = gradient(c, P, Q);
  EXPECT_EQ(gp.value, 6.0);
  EXPECT_EQ(gp.k1(1.0), 3.0 * (1 - 2));
  EXPECT_EQ(gp.k1(3.0), 3.0 * (3 - 2));
  EXPECT_EQ(gp.k2(2.0), 2.0 * (2 - 3));
  EXPECT_EQ(gp.k2(4.0), 2.0 * (4 - 3));
}

TEST(Gradient, CompositeChainRule) {
  std::mt19937_64 gen(10);
  for (int rep = 0; rep < 30; ++rep) {
    auto P = random_discrete(gen, 4), Q = random_discrete(gen, 4, 1, 9);
    auto f1 = make_one_sample("square"), f2 = make_one_sample("identity");
    auto sum = gradient(composite{composite_op::sum, f1, f2}, P, Q);
    auto one1 = tangent::center(P, f1.f), one2 = tangent::center(Q, f2.f);
    for (double x : P.locations()) EXPECT_NEAR(sum.k1(x), one1(x), 1e-12);
    for (double y : Q.locations()) EXPECT_NEAR(sum.k2(y), one2(y), 1e-12);

    double k1 = integrate(P, f1.f), k2 = integrate(Q, f2.f);
    auto [a, b] = composite_coefficients(composite_op::product, k1, k2);
    EXPECT_NEAR(a, k2, 1e-12);
    EXPECT_NEAR(b, k1, 1e-12);
    auto [qa, qb] = composite_coefficients(composite_op::quotient, k1, k2);
    EXPECT_NEAR(qa, 1.0 / k2, 1e-12);
    EXPECT_NEAR(qb, -k1 / (k2 * k2), 1e-12);
    // numeric partials of f at (k1, k2)
    double h = 1e-6;
    auto f = [](double u, double v) { return u / v; };
    EXPECT_NEAR(qa, (f(k1 + h, k2) - f(k1 - h, k2)) / (2 * h), 1e-6);
    EXPECT_NEAR(qb, (f(k1, k2 + h) - f(k1, k2 - h)) / (2 * h), 1e-6);

    auto quot = gradient(composite{composite_op::quotient, f1, f2}, P, Q);
    for (double x : P.locations()) EXPECT_NEAR(quot.k1(x), qa * one1(x), 1e-12);
    for (double y : Q.locations()) EXPECT_NEAR(quot.k2(y), qb * one2(y), 1e-12);
  }
}

TEST(Gradient, ComponentsAreCentered) {
  std::mt19937_64 gen(11);
  auto P = random_discrete(gen, 5), Q = random_discrete(gen, 5, 1, 8);
  for (const auto& k : gradient_family()) {
    auto gp = gradient(k, P, Q);
    EXPECT_NEAR(gp.k1.mean(), 0.0, 1e-12) << functional_name(k);
    EXPECT_NEAR(gp.k2.mean(), 0.0, 1e-12) << functional_name(k);
  }
}

TEST(Gradient, QuotientByZero) {
  measure P = discrete_measure::uniform({1, 2});
  measure Q = discrete_measure::uniform({-1, 1});
  composite c{composite_op::quotient, make_one_sample("identity"), make_one_sample("identity")};
  try {
    gradient(c, P, Q);
    FAIL();
  } catch (const stats_error& e) {
    EXPECT_EQ(e.code(), errc::quotient_by_zero);
  }
  EXPECT_THROW(evaluate(c, P, Q), stats_error);
}

TEST(DirectionalDerivative, WilcoxonThreeAtoms) {
  std::mt19937_64 gen(12);
  measure u = discrete_measure::uniform({1, 2, 3});
  for (int rep = 0; rep < 30; ++rep) {
    auto pt = random_tangent(gen, u.discrete(), u.discrete());
    auto gp = gradient(wilcoxon{}, u, u);
    double dd = directional_derivative(wilcoxon{}, u, u, pt, 1e-4);
    double norm = std::sqrt(pt.g1.norm2() + pt.g2.norm2());
    EXPECT_LT(std::abs(dd - gradient_inner(gp, pt)), 1e-3 * (1 + norm));
  }
}

TEST(DirectionalDerivative, WholeFamily) {
  std::mt19937_64 gen(13);
  for (int rep = 0; rep < 20; ++rep) {
    auto P = random_discrete(gen, 5), Q = random_discrete(gen, 4, 1, 8);
    auto pt = random_tangent(gen, P, Q);
    for (const auto& k : gradient_family()) {
      auto gp = gradient(k, P, Q);
      double dd = directional_derivative(k, P, Q, pt, 1e-4, fd_scheme::central);
      double scale = 1 + std::abs(gradient_inner(gp, pt));
      EXPECT_LT(std::abs(dd - gradient_inner(gp, pt)), 1e-6 * scale) << functional_name(k);
    }
  }
}

TEST(DirectionalDerivative, InvariantOnAtomicQ) {
  // h ∘ F_Q has jumps when Q has atoms; the same formulas still match the derivative
  std::mt19937_64 gen(14);
  for (int rep = 0; rep < 20; ++rep) {
    auto P = random_discrete(gen, 4), Q = random_discrete(gen, 4);
    auto pt = random_tangent(gen, P, Q);
    for (auto id : {"identity", "square", "smoothstep"}) {
      auto k = make_invariant(id);
      auto gp = gradient(k, P, Q);
      double dd = directional_derivative(k, P, Q, pt, 1e-4, fd_scheme::central);
      EXPECT_NEAR(dd, gradient_inner(gp, pt), 1e-6) << id;
    }
  }
}

TEST(DirectionalDerivative, ForwardErrorIsFirstOrder) {
  std::mt19937_64 gen(15);
  auto P = random_discrete(gen, 4), Q = random_discrete(gen, 4);
  auto pt = random_tangent(gen, P, Q);
  auto gp = gradient(wilcoxon{}, P, Q);
  double e1 = std::abs(directional_derivative(wilcoxon{}, P, Q, pt, 1e-2) - gradient_inner(gp, pt));
  double e2 = std::abs(directional_derivative(wilcoxon{}, P, Q, pt, 1e-3) - gradient_inner(gp, pt));
  EXPECT_LT(e2, 0.2 * e1);
}

TEST(DirectionalDerivative, SameFunctionalTwoWays) {
  std::mt19937_64 gen(16);
  auto P = random_discrete(gen, 4), Q = random_discrete(gen, 5);
  auto pt = random_tangent(gen, P, Q);
  composite md{composite_op::sum, make_one_sample("identity"), make_one_sample("neg_identity")};
  for (double t : {1e-1, 1e-2, 1e-3})
    EXPECT_NEAR(directional_derivative(md, P, Q, pt, t),
                directional_derivative(make_kernel("x_minus_y"), P, Q, pt, t), 1e-9);
  EXPECT_THROW(directional_derivative(md, P, Q, pt, 0.0), stats_error);
}

TEST(Registry, UnknownIdsNameTheRegistry) {
  auto expect_registry = [](auto call, const std::string& needle) {
    try {
      call();
      FAIL();
    } catch (const stats_error& e) {
      EXPECT_EQ(e.code(), errc::config_error);
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_registry([] { make_kernel("nope"); }, "x_ge_y");
  expect_registry([] { make_invariant("cube"); }, "smoothstep");
  expect_registry([] { make_one_sample("cosine"); }, "neg_identity");
  expect_registry([] { make_kernel("indicator_leq(abc)"); }, "indicator_leq(abc)");
}

TEST(Registry, InvariantBounds) {
  for (auto id : {"identity", "square", "smoothstep"}) EXPECT_NO_THROW(check_invariant(make_invariant(id)));
  auto bad = make_invariant("square");
  bad.bound = 1.0;
  EXPECT_THROW(check_invariant(bad), stats_error);
}
