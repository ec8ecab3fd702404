#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "wair/scenario.hpp"

using namespace wair;

namespace {

std::string field_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<no error>";
}

TEST(Scenario, BuiltInSlopeIsValid) {
    const Scenario s = wair30_scenario();
    EXPECT_NO_THROW(s.validate());
    ASSERT_EQ(s.terrain.segments().size(), 2u);
    EXPECT_NEAR(s.terrain.segments()[1].angle, std::numbers::pi / 6.0, 1e-15);
    EXPECT_DOUBLE_EQ(s.terrain.friction(10.0), 0.35);
    EXPECT_TRUE(s.thrust);
    EXPECT_TRUE(s.sagittal);
}

TEST(Scenario, JsonRoundTripIsExact) {
    Scenario s = wair30_scenario();
    s.seed = 42;
    s.integration.dt = 5e-4;
    s.collocation.nodes = 9;
    const nlohmann::json j = to_json(s);
    const Scenario r = scenario_from_json(j);
    EXPECT_EQ(to_json(r), j);
    EXPECT_EQ(scenario_hash(r), scenario_hash(s));
    // Through text as well.
    EXPECT_EQ(to_json(scenario_from_json(nlohmann::json::parse(j.dump()))), j);
}

TEST(Scenario, HashIgnoresOutputDirButTracksPhysics) {
    Scenario a = wair30_scenario();
    Scenario b = a;
    b.output_dir = "elsewhere";
    EXPECT_EQ(scenario_hash_hex(a), scenario_hash_hex(b));
    EXPECT_EQ(scenario_hash_hex(a).size(), 16u);
    b.seed = 1;
    EXPECT_NE(scenario_hash(a), scenario_hash(b));
    b = a;
    b.robot.body_mass += 1e-9;
    EXPECT_NE(scenario_hash(a), scenario_hash(b));
    b = a;
    b.thrust = false;
    EXPECT_NE(scenario_hash(a), scenario_hash(b));
}

TEST(Scenario, HashIsStableAcrossCalls) {
    const Scenario s = wair30_scenario();
    const auto h = scenario_hash(s);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(scenario_hash(scenario_from_json(to_json(s))), h);
}

TEST(Scenario, NonPositiveFrictionNamesTheSegment) {
    nlohmann::json j = to_json(wair30_scenario());
    j["terrain"]["segments"][1]["friction"] = 0.0;
    EXPECT_EQ(field_of([&] { scenario_from_json(j); }), "terrain.segments[1].friction");
    j["terrain"]["segments"][1]["friction"] = -0.2;
    EXPECT_EQ(field_of([&] { scenario_from_json(j); }), "terrain.segments[1].friction");
}

TEST(Scenario, ValidationNamesOffendingField) {
    Scenario s = wair30_scenario();
    s.integration.dt = 0.0007;
    EXPECT_EQ(field_of([&] { s.validate(); }), "integration.dt");
    s = wair30_scenario();
    s.duration = 5.9;
    EXPECT_EQ(field_of([&] { s.validate(); }), "gait.period");
    s = wair30_scenario();
    s.integration.log_rate = 3000.0;
    EXPECT_EQ(field_of([&] { s.validate(); }), "integration.log_rate");
    s = wair30_scenario();
    s.solver.max_inner = 0;
    EXPECT_EQ(field_of([&] { s.validate(); }), "solver.max_inner");

    nlohmann::json j = to_json(wair30_scenario());
    j["reference"]["speed"] = "fast";
    EXPECT_EQ(field_of([&] { scenario_from_json(j); }), "reference.speed");
    j = to_json(wair30_scenario());
    j["version"] = 2;
    EXPECT_EQ(field_of([&] { scenario_from_json(j); }), "version");
    j = to_json(wair30_scenario());
    j["seed"] = -3;
    EXPECT_EQ(field_of([&] { scenario_from_json(j); }), "seed");
}

TEST(Scenario, MissingKeysFallBackToDefaults) {
    const Scenario s = scenario_from_json(nlohmann::json::object());
    EXPECT_EQ(to_json(s), to_json(Scenario{}));
}

TEST(Scenario, LoadReportsPathOnFailure) {
    const auto dir = std::filesystem::temp_directory_path() / "wair_test_scenario";
    std::filesystem::create_directories(dir);
    try {
        load_scenario((dir / "absent.json").string());
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("absent.json"), std::string::npos);
    }
    const auto bad = dir / "bad.json";
    std::ofstream(bad) << "{ not json";
    try {
        load_scenario(bad.string());
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.json"), std::string::npos);
    }
    const auto good = dir / "good.json";
    std::ofstream(good) << to_json(wair30_scenario()).dump(2);
    EXPECT_EQ(scenario_hash(load_scenario(good.string())), scenario_hash(wair30_scenario()));
    std::filesystem::remove_all(dir);
}

}  // namespace
