#include <fstream>
#include <functional>
#include <string>

#include <gtest/gtest.h>

#include "eccbo/scenario.hpp"

using namespace eccbo;
using namespace eccbo::harness;
using nlohmann::json;

namespace {

const std::string kScenarioDir = std::string(ECCBO_SOURCE_DIR) + "/scenarios/";

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.field();
  }
  return "<no error>";
}

// Every object key present in `a` and `b` at the same place, recursively.
void expect_same_keys(const json& a, const json& b, const std::string& path) {
  ASSERT_EQ(a.is_number(), b.is_number()) << path;
  if (!a.is_number()) ASSERT_EQ(a.type(), b.type()) << path;
  if (a.is_object()) {
    ASSERT_EQ(a.size(), b.size()) << path;
    for (auto it = a.begin(); it != a.end(); ++it) {
      ASSERT_TRUE(b.contains(it.key())) << path << "." << it.key();
      expect_same_keys(it.value(), b.at(it.key()), path + "." + it.key());
    }
  } else if (a.is_array() && !a.empty() && a.front().is_object()) {
    ASSERT_EQ(a.size(), b.size()) << path;
    for (std::size_t i = 0; i < a.size(); ++i) expect_same_keys(a[i], b[i], path + "[" + std::to_string(i) + "]");
  }
}

}  // namespace

TEST(Scenario, DefaultIsValid) { EXPECT_NO_THROW(Scenario{}.validate()); }

TEST(Scenario, EmptyObjectParsesToDefaults) { EXPECT_EQ(parse_scenario(json::object()), Scenario{}); }

TEST(Scenario, ShippedFileIsFullyExplicitAndEqualsDefaults) {
  std::ifstream in(kScenarioDir + "williams_otto.json");
  ASSERT_TRUE(in.good());
  const json file = json::parse(in);
  expect_same_keys(file, to_json(Scenario{}), "");
  EXPECT_EQ(parse_scenario(file), Scenario{});
}

TEST(Scenario, NoisyVariantDiffersOnlyInNoise) {
  Scenario s = load_scenario(kScenarioDir + "williams_otto_noisy.json");
  EXPECT_GT(s.plant.cost_noise_std, 0.0);
  s.plant.cost_noise_std = 0.0;
  s.output = Scenario{}.output;
  EXPECT_EQ(s, Scenario{});
}

TEST(Scenario, JsonRoundTrip) {
  Scenario s;
  s.total_duration = 7200;
  s.schedule = {{0.0, 1.2}, {3600.0, 1.7}};
  s.loops[1].auto_tune = false;
  s.loops[1].kc = -3.5;
  s.bo.seed = 42;
  s.bo.hyper_bounds.lengthscale_min = 0.2;
  s.ssd.signals.pop_back();
  s.output.csv = "a b,c.csv";
  EXPECT_EQ(parse_scenario(to_json(s)), s);
  EXPECT_EQ(parse_scenario_text(to_json(s).dump(2)), s);
}

TEST(Scenario, PartialOverrideKeepsOtherDefaults) {
  const auto s = parse_scenario(json{{"bo", {{"beta", 9.0}}}});
  Scenario want;
  want.bo.beta = 9.0;
  EXPECT_EQ(s, want);
}

TEST(ScenarioErrors, UnknownFieldIsNamed) {
  EXPECT_EQ(field_of([] { parse_scenario(json{{"bo", {{"betta", 1.0}}}}); }), "bo.betta");
  EXPECT_EQ(field_of([] { parse_scenario(json{{"extra", 1}}); }), "extra");
  EXPECT_EQ(field_of([] { parse_scenario(json{{"schedule", {{{"time", 0.0}, {"fa", 1.0}}}}}); }),
            "schedule[0].fa");
}

TEST(ScenarioErrors, WrongTypeIsNamed) {
  EXPECT_EQ(field_of([] { parse_scenario(json{{"plant", {{"holdup", "big"}}}}); }), "plant.holdup");
  EXPECT_EQ(field_of([] { parse_scenario(json{{"loops", 3}}); }), "loops");
  EXPECT_EQ(field_of([] { parse_scenario(json{{"ssd", 1}}); }), "ssd");
}

TEST(ScenarioErrors, ScheduleOutOfRange) {
  json j = to_json(Scenario{});
  j["schedule"][2]["time"] = 200000.0;
  EXPECT_EQ(field_of([&] { parse_scenario(j); }), "schedule[2].time");
  j = to_json(Scenario{});
  j["schedule"][1]["time"] = 0.0;
  EXPECT_EQ(field_of([&] { parse_scenario(j); }), "schedule[1].time");
  j = to_json(Scenario{});
  j["schedule"][0]["time"] = 5.0;
  EXPECT_EQ(field_of([&] { parse_scenario(j); }), "schedule[0].time");
}

TEST(ScenarioErrors, BoxesAndLoops) {
  json j = to_json(Scenario{});
  j["loops"][1]["setpoint_max"] = 0.13;
  EXPECT_EQ(field_of([&] { parse_scenario(j); }), "loops[1].setpoint_max");
  j = to_json(Scenario{});
  j["loops"][0]["setpoint_min"] = 0.09;
  EXPECT_EQ(field_of([&] { parse_scenario(j); }), "loops[0].setpoint_min");
  j = to_json(Scenario{});
  j["loops"][1]["mv"] = "t_r";
  EXPECT_EQ(field_of([&] { parse_scenario(j); }), "loops[1].mv");
  j = to_json(Scenario{});
  j["loops"][0]["cv"] = "x_z";
  EXPECT_EQ(field_of([&] { parse_scenario(j); }), "loops[0].cv");
  j = to_json(Scenario{});
  j["bo"]["hyper_bounds"]["noise_variance_min"] = 0.0;
  EXPECT_EQ(field_of([&] { parse_scenario(j); }), "bo.hyper_bounds.noise_variance");
  j = to_json(Scenario{});
  j["plant"]["initial_fractions"] = {0.5, 0.4, 0, 0, 0, 0};
  EXPECT_EQ(field_of([&] { parse_scenario(j); }), "plant.initial_fractions");
}

TEST(ScenarioErrors, MalformedTextAndMissingFile) {
  EXPECT_THROW(parse_scenario_text("{ \"bo\": "), ParseError);
  EXPECT_THROW(load_scenario(kScenarioDir + "does_not_exist.json"), ParseError);
  EXPECT_THROW(parse_scenario(json::array()), ParseError);
}

TEST(Scenario, ScheduleLookup) {
  const Scenario s;
  EXPECT_EQ(s.f_a_at(0.0), 1.0);
  EXPECT_EQ(s.f_a_at(35999.0), 1.0);
  EXPECT_EQ(s.f_a_at(36000.0), 1.9);
  EXPECT_EQ(s.f_a_at(89999.0), 1.9);
  EXPECT_EQ(s.f_a_at(90000.0), 1.0);
}
