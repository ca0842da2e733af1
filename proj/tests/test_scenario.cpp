#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "scenario.hpp"

using namespace levitrap;
using namespace levitrap::cli;

namespace {

std::string scenario_path(const std::string& name) {
    return std::string(LEVITRAP_SCENARIO_DIR) + "/" + name;
}

const char* minimal = R"(name: t
seed: 3
pipeline: ringdown
particle: {mass_kg: 4.3e-17, radius_m: 150e-9, charge_e: 300}
environment: {pressure_mbar: 5.4e-8, f_z_hz: 1280}
damping: {gamma_hz: 59e-6}
ringdown: {a0_m: 200e-6, cadence_s: 600, span_s: 3600, delta_a_m: 3.9e-6, amplitude_jitter_m: 3.9e-6}
estimators: [ringdown_fit]
)";

}  // namespace

TEST(Scenario, BundledFilesParse) {
    std::size_t n = 0;
    for (const auto& e : std::filesystem::directory_iterator(LEVITRAP_SCENARIO_DIR)) {
        if (e.path().extension() != ".yaml") continue;
        EXPECT_NO_THROW(load_scenario(e.path().string())) << e.path();
        ++n;
    }
    EXPECT_GE(n, 6u);
}

TEST(Scenario, MinimalParses) {
    const auto s = parse_scenario(minimal);
    EXPECT_EQ(s.pipeline, Pipeline::Ringdown);
    EXPECT_EQ(s.seed, 3u);
    EXPECT_EQ(s.ringdown.seed, 3u);
    EXPECT_NEAR(s.gamma, 2.0 * 3.141592653589793 * 59e-6, 1e-15);
    EXPECT_EQ(s.estimators, std::vector<std::string>{"ringdown_fit"});
}

TEST(Scenario, RejectsUnknownKeysAndForeignBlocks) {
    std::string t = minimal;
    EXPECT_THROW(parse_scenario(t + "surprise: 1\n"), ConfigError);
    EXPECT_THROW(parse_scenario(t + "heating: {feedback_s: 10}\n"), ConfigError);
    std::string typo = t;
    typo.replace(typo.find("cadence_s"), 9, "cadence_ms");
    EXPECT_THROW(parse_scenario(typo), ConfigError);
}

TEST(Scenario, RejectsMissingAndInvalidFields) {
    std::string t = minimal;
    std::string no_seed = t;
    no_seed.erase(no_seed.find("seed: 3\n"), 8);
    EXPECT_THROW(parse_scenario(no_seed), ConfigError);
    std::string neg = t;
    neg.replace(neg.find("cadence_s: 600"), 14, "cadence_s: -6");
    EXPECT_THROW(parse_scenario(neg), ConfigError);
    EXPECT_THROW(parse_scenario("[1, 2]"), ConfigError);
    EXPECT_THROW(parse_scenario("name: [unterminated"), ConfigError);
}

TEST(Scenario, EstimatorOrderIsChecked) {
    std::string t = minimal;
    t.replace(t.find("[ringdown_fit]"), 14, "[residual_mse, ringdown_fit]");
    EXPECT_THROW(parse_scenario(t), ConfigError);
    std::string other = minimal;
    other.replace(other.find("[ringdown_fit]"), 14, "[heating_fit]");
    EXPECT_THROW(parse_scenario(other), ConfigError);
    for (auto p : {Pipeline::Simulate, Pipeline::Ringup, Pipeline::Heating, Pipeline::Ringdown})
        EXPECT_FALSE(known_estimators(p).empty());
}

TEST(Scenario, RunIsDeterministicAndSeeded) {
    auto s = load_scenario(scenario_path("ringdown_P2.yaml"));
    const auto a = run_scenario(s);
    const auto b = run_scenario(s);
    EXPECT_FALSE(a.any_failed());
    EXPECT_EQ(a.hash, b.hash);
    ASSERT_NE(a.file("amplitudes.csv"), nullptr);
    s.seed = 2;
    s.sync();
    EXPECT_NE(run_scenario(s).hash, a.hash);
}

TEST(Scenario, FormatParsing) {
    EXPECT_EQ(parse_format("csv"), Format::Csv);
    EXPECT_EQ(parse_format("json"), Format::Json);
    EXPECT_THROW(parse_format("xml"), ConfigError);
}

TEST(Scenario, RingdownReportCarriesRateAndMse) {
    const auto r = run_scenario(load_scenario(scenario_path("ringdown_P2.yaml")));
    const auto* report = r.file("report.txt");
    ASSERT_NE(report, nullptr);
    EXPECT_NE(report->content.find("gamma ="), std::string::npos);
    EXPECT_NE(report->content.find("MSE ="), std::string::npos);
    ASSERT_NE(r.file("ringdown_fit.json"), nullptr);
    ASSERT_NE(r.file("mse.csv"), nullptr);
}

TEST(Scenario, EmptyEstimatorChainWritesTracesOnly) {
    std::string t = minimal;
    t.replace(t.find("[ringdown_fit]"), 14, "[]");
    const auto s = parse_scenario(t);
    EXPECT_TRUE(s.estimators.empty());
    const auto r = run_scenario(s);
    EXPECT_NE(r.file("amplitudes.csv"), nullptr);
    EXPECT_EQ(r.file("ringdown_fit.json"), nullptr);
    EXPECT_EQ(r.file("mse.csv"), nullptr);
}
