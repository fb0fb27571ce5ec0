#include "amar/config.hpp"
#include "amar/error.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace amar;
using amar::testing::TempDir;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorKind::Io;
}

}  // namespace

TEST(EngineConfig, DefaultsAreValid) {
    auto c = EngineConfig::defaults();
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.retrieval.k_coarse, 10u);
    EXPECT_EQ(c.retrieval.m_fine, 5u);
    EXPECT_DOUBLE_EQ(c.retrieval.lambda, 0.5);
    EXPECT_EQ(c.chunking.window, 1000u);
    EXPECT_EQ(c.chunking.overlap, 100u);
    EXPECT_DOUBLE_EQ(c.dedup_threshold, 0.95);
    EXPECT_EQ(c.backends.size(), std::size(kBackendRoles));
}

TEST(EngineConfig, FixtureLoadsAndRoundTrips) {
    auto c = load_engine_config(amar::testing::fixture("amar.mock.json"));
    EXPECT_EQ(c.seed, 7);
    EXPECT_EQ(c.backends.at("embedder").embedding_dim, 64u);
    EXPECT_EQ(c.backends.at("judge").model_id, "mock-judge");
    EXPECT_EQ(c.base_dir, amar::testing::fixture("amar.mock.json").parent_path());
    EXPECT_EQ(c.resolve("work/graph.jsonl"), c.base_dir / "work/graph.jsonl");
    EXPECT_EQ(c.resolve("/abs/x"), std::filesystem::path("/abs/x"));

    auto back = engine_config_from_json(nlohmann::json::parse(to_json(c).dump()));
    back.base_dir = c.base_dir;
    EXPECT_EQ(back, c);
}

TEST(EngineConfig, UnknownKeysRejected) {
    EXPECT_EQ(kind_of([] { engine_config_from_json({{"colour", 1}}); }), ErrorKind::Config);
    EXPECT_EQ(kind_of([] { engine_config_from_json({{"paths", {{"graphs", "x"}}}}); }), ErrorKind::Config);
    EXPECT_EQ(kind_of([] { engine_config_from_json({{"planner_backend", {{"modle_id", "x"}}}}); }), ErrorKind::Config);
}

TEST(EngineConfig, InvalidValuesRejected) {
    EXPECT_EQ(kind_of([] { engine_config_from_json({{"parallelism", 0}}); }), ErrorKind::Config);
    EXPECT_EQ(kind_of([] { engine_config_from_json({{"dedup_threshold", 1.5}}); }), ErrorKind::Config);
    EXPECT_EQ(kind_of([] { engine_config_from_json({{"chunking", {{"window", 100}, {"overlap", 100}}}}); }),
              ErrorKind::Config);
    EXPECT_EQ(kind_of([] { engine_config_from_json({{"retrieval", {{"lambda", 2.0}}}}); }), ErrorKind::Config);
    EXPECT_EQ(kind_of([] { engine_config_from_json({{"seed", "seven"}}); }), ErrorKind::Config);
}

TEST(EngineConfig, SeedInheritance) {
    auto c = engine_config_from_json({{"seed", 11}, {"judge_backend", {{"seed", 3}}}});
    EXPECT_EQ(c.backend_for("planner").seed, 11);
    EXPECT_EQ(c.backend_for("judge").seed, 3);

    auto unseeded = engine_config_from_json(nlohmann::json::object());
    EXPECT_EQ(kind_of([&] { unseeded.backend_for("planner"); }), ErrorKind::Config);
    EXPECT_EQ(kind_of([&] { unseeded.backend_for("painter"); }), ErrorKind::Config);
}

TEST(EngineConfig, PartialBackendKeepsDefaults) {
    auto c = engine_config_from_json({{"generator_backend", {{"model_id", "gen-x"}}}});
    EXPECT_EQ(c.backends.at("generator").model_id, "gen-x");
    EXPECT_EQ(c.backends.at("generator").kind, BackendKind::Mock);
    EXPECT_EQ(c.backends.at("planner").model_id, "mock-planner");
}

TEST(EngineConfig, FileErrors) {
    TempDir dir;
    EXPECT_EQ(kind_of([&] { load_engine_config(dir / "missing.json"); }), ErrorKind::Config);
    amar::testing::write_file(dir / "bad.json", "{not json");
    EXPECT_EQ(kind_of([&] { load_engine_config(dir / "bad.json"); }), ErrorKind::Config);
}
