#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "test_support.hpp"

using namespace twosample;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  auto path = std::filesystem::temp_directory_path() / ("twosample_io_" + name);
  std::ofstream(path) << body;
  return path.string();
}

errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const stats_error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return errc::domain_error;
}

}  // namespace

TEST(MeasureJson, DiscreteRoundTripIsBitExact) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> loc(-1e3, 1e3), w(1e-6, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> xs, ws;
    double total = 0;
    for (int i = 0; i < 1 + rep % 7; ++i) {
      xs.push_back(loc(gen));
      ws.push_back(w(gen));
      total += ws.back();
    }
    for (double& v : ws) v /= total;
    std::sort(xs.begin(), xs.end());
    measure m = discrete_measure(xs, ws);
    auto text = measure_to_json(m).dump();
    measure back = measure_from_json(ojson::parse(text));
    EXPECT_TRUE(back == m);
    EXPECT_EQ(measure_to_json(back).dump(), text);
    ASSERT_EQ(back.discrete().size(), m.discrete().size());
    for (std::size_t i = 0; i < m.discrete().size(); ++i) {
      EXPECT_EQ(back.discrete().locations()[i], m.discrete().locations()[i]);
      EXPECT_EQ(back.discrete().weights()[i], m.discrete().weights()[i]);
    }
  }
}

TEST(MeasureJson, PiecewiseUniformRoundTripIsBitExact) {
  measure m = pw_uniform_measure({-1.0 / 3.0, 0.1, 0.7, 2.0 / 7.0 + 1}, {0.1, 0.6000000000000001, 0.3});
  auto text = measure_to_json(m).dump();
  measure back = measure_from_json(ojson::parse(text));
  EXPECT_TRUE(back == m);
  EXPECT_EQ(back.pw_uniform().breaks(), m.pw_uniform().breaks());
  EXPECT_EQ(back.pw_uniform().masses(), m.pw_uniform().masses());
}

TEST(MeasureJson, LiteralFormat) {
  auto m = measure_from_json(ojson::parse(R"({"kind":"discrete","atoms":[[1,0.25],[2,0.75]]})"));
  EXPECT_EQ(m.discrete().weights()[1], 0.75);
  EXPECT_EQ(measure_to_json(m).dump(), R"({"kind":"discrete","atoms":[[1.0,0.25],[2.0,0.75]]})");
  auto p = measure_from_json(ojson::parse(R"({"kind":"pwuniform","breaks":[0,1,3],"masses":[0.5,0.5]})"));
  EXPECT_FALSE(p.is_discrete());
  EXPECT_EQ(code_of([] { measure_from_json(ojson::parse(R"({"kind":"gauss"})")); }), errc::config_error);
  EXPECT_EQ(code_of([] { measure_from_json(ojson::parse(R"({"kind":"discrete","atoms":[[1]]})")); }),
            errc::config_error);
  EXPECT_EQ(code_of([] { measure_from_json(ojson::parse(R"({"kind":"discrete","atoms":[[1,0.5],[2,0.2]]})")); }),
            errc::invalid_measure);
}

TEST(TangentJson, RoundTripAndAlignment) {
  measure base = discrete_measure::uniform({0, 1, 2});
  auto g = tangent_from_json(base, ojson::parse(R"({"values":[-1,0,1]})"));
  EXPECT_EQ(g(2.0), 1.0);
  auto text = tangent_to_json(g).dump();
  EXPECT_EQ(text, R"({"values":[-1.0,0.0,1.0]})");
  auto back = tangent_from_json(base, ojson::parse(text));
  EXPECT_EQ(*back.steps(), *g.steps());
  EXPECT_EQ(code_of([&] { tangent_from_json(base, ojson::parse(R"({"values":[-1,1]})")); }), errc::invalid_measure);
  EXPECT_EQ(code_of([&] { tangent_from_json(base, ojson::parse(R"({"values":[1,1,1]})")); }),
            errc::degenerate_tangent);
  auto c = tangent_from_json(base, ojson::parse(R"({"values":[1,1,4],"center":true})"));
  EXPECT_EQ(*c.steps(), (std::vector<double>{-1, -1, 2}));
  EXPECT_EQ(code_of([&] { tangent_to_json(tangent::center(pw_uniform_measure::uniform(0, 1), real_fn::identity())); }),
            errc::not_step_tangent);
}

TEST(FunctionalJson, Descriptors) {
  EXPECT_EQ(functional_name(functional_from_json(ojson::parse(R"({"kind":"wilcoxon"})"))), "wilcoxon");
  EXPECT_EQ(functional_name(functional_from_json(ojson("wilcoxon"))), "wilcoxon");
  EXPECT_EQ(functional_name(functional_from_json(ojson::parse(R"j({"kind":"vonmises","h":"indicator_leq(0.5)"})j"))),
            "vonmises:indicator_leq(0.5)");
  EXPECT_EQ(functional_name(functional_from_json(ojson::parse(R"({"kind":"invariant","h":"square"})"))),
            "invariant:square");
  EXPECT_EQ(functional_name(functional_from_json(
                ojson::parse(R"j({"kind":"composite","op":"quotient","f1":"identity","f2":"constant(2)"})j"))),
            "composite:quotient(identity,constant(2))");
  try {
    functional_from_json(ojson::parse(R"({"kind":"spline"})"));
    FAIL();
  } catch (const stats_error& e) {
    EXPECT_EQ(e.code(), errc::config_error);
    EXPECT_NE(std::string(e.what()).find("wilcoxon | vonmises | invariant | composite"), std::string::npos);
  }
  EXPECT_EQ(code_of([] { functional_from_json(ojson::parse(R"({"kind":"composite","op":"max","f1":"identity","f2":"identity"})")); }),
            errc::config_error);
}

TEST(ReportJson, FieldOrder) {
  test_report r{1.5, 1.6448536269514722, 0.0, false, 1.0, "exact"};
  EXPECT_EQ(report_to_json(r).dump(),
            R"({"statistic":1.5,"critical_value":1.6448536269514722,"gamma":0.0,"reject":false,"sigma1":1.0,"source":"exact"})");
  EXPECT_EQ(report_to_csv(r),
            "statistic,critical_value,gamma,reject,sigma1,source\n1.5,1.6448536269514722,0,false,1,exact\n");
}

TEST(SimResultFormats, StableColumns) {
  sim_result res{"level", {{100, 0.05, 0.048, 0.002, 0.05, -0.01}}, {{"note", 2.5}}};
  EXPECT_EQ(sim_result_to_csv(res), "n,theta_or_d,rate,se,analytic,diagnostic\n100,0.05,0.048,0.002,0.05,-0.01\n");
  EXPECT_EQ(sim_result_to_json(res).dump(),
            R"({"kind":"level","columns":["n","theta_or_d","rate","se","analytic","diagnostic"],)"
            R"("rows":[{"n":100,"theta_or_d":0.05,"rate":0.048,"se":0.002,"analytic":0.05,"diagnostic":-0.01}],)"
            R"("summary":{"note":2.5}})");
}

TEST(FormatNumber, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 6.0})
    EXPECT_EQ(std::stod(format_number(v)), v);
  EXPECT_EQ(format_number(6.0), "6");
}

TEST(ReadSample, TwoColumnWithHeaderAndComments) {
  auto path = write_temp("two.csv", "sample_id,value\n# a comment\n1,0.5\n2, 1.5\n1,-3\n\n2,4e-1\r\n");
  auto s = read_sample(path);
  EXPECT_EQ(s.x, (std::vector<double>{0.5, -3}));
  EXPECT_EQ(s.y, (std::vector<double>{1.5, 0.4}));
  std::remove(path.c_str());
}

TEST(ReadSample, SeparateColumns) {
  auto px = write_temp("x.csv", "value\n1\n2\n3\n");
  auto py = write_temp("y.csv", "4\n5\n");
  auto s = read_sample(px, py);
  EXPECT_EQ(s.n1(), 3u);
  EXPECT_EQ(s.n2(), 2u);
  EXPECT_DOUBLE_EQ(s.d_hat(), 0.4);
  std::remove(px.c_str());
  std::remove(py.c_str());
}

TEST(ReadSample, Errors) {
  auto bad_id = write_temp("bad_id.csv", "1,0.5\n3,0.2\n");
  EXPECT_EQ(code_of([&] { read_sample(bad_id); }), errc::config_error);
  auto bad_num = write_temp("bad_num.csv", "1,0.5\n2,abc\n");
  EXPECT_EQ(code_of([&] { read_sample(bad_num); }), errc::config_error);
  auto nan = write_temp("nan.csv", "1,0.5\n2,nan\n");
  EXPECT_EQ(code_of([&] { read_sample(nan); }), errc::config_error);
  auto only_x = write_temp("only_x.csv", "1,0.5\n1,0.7\n");
  EXPECT_EQ(code_of([&] { read_sample(only_x); }), errc::too_few_observations);
  EXPECT_EQ(code_of([] { read_sample("/nonexistent/file.csv"); }), errc::config_error);
  for (auto& p : {bad_id, bad_num, nan, only_x}) std::remove(p.c_str());
}
