#include "cli.hpp"

#include "amar/benchmark.hpp"
#include "amar/pipeline.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sstream>

using amar::testing::TempDir;
using amar::testing::fixture;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        std::filesystem::copy_file(fixture("amar.mock.json"), dir_ / "amar.json");
        std::filesystem::copy_file(fixture("artcot_fixture.jsonl"), dir_ / "artcot_fixture.jsonl");
    }

    Result run(std::vector<std::string> args) {
        args.insert(args.begin(), {"--config", (dir_ / "amar.json").string()});
        std::ostringstream out, err;
        int code = amar::cli::run(args, out, err);
        return {code, out.str(), err.str()};
    }

    void build_graph_and_index() {
        auto ingest = run({"ingest", fixture("corpus").string()});
        ASSERT_EQ(ingest.code, 0) << ingest.err;
        auto index = run({"index"});
        ASSERT_EQ(index.code, 0) << index.err;
    }

    Result ask(const std::string& mode, const std::filesystem::path& out_dir) {
        return run({"ask", "--artwork", fixture("artwork.json").string(), "--question",
                    "How does the wooded setting shape the travellers' journey?", "--mode", mode, "--out-dir",
                    out_dir.string()});
    }

    TempDir dir_;
};

nlohmann::json last_json_line(const std::string& s) {
    auto trimmed = s.substr(0, s.find_last_not_of('\n') + 1);
    auto pos = trimmed.find_last_of('\n');
    return nlohmann::json::parse(pos == std::string::npos ? trimmed : trimmed.substr(pos + 1));
}

}  // namespace

TEST_F(CliTest, HelpExitsZero) {
    std::ostringstream out, err;
    EXPECT_EQ(amar::cli::run({"--help"}, out, err), 0);
    EXPECT_NE(out.str().find("ingest"), std::string::npos);
    EXPECT_NE(out.str().find("construct-qa"), std::string::npos);
}

TEST_F(CliTest, UnknownFlagIsConfigError) {
    auto r = run({"stats", "--bogus"});
    EXPECT_EQ(r.code, 1);
    auto e = last_json_line(r.err);
    EXPECT_EQ(e["error"]["code"], 1);
    EXPECT_EQ(e["error"]["kind"], "config");
}

TEST_F(CliTest, MissingConfigIsConfigError) {
    std::ostringstream out, err;
    int code = amar::cli::run({"--config", (dir_ / "none.json").string(), "index"}, out, err);
    EXPECT_EQ(code, 1);
    EXPECT_EQ(last_json_line(err.str())["error"]["kind"], "config");
}

TEST_F(CliTest, IngestAndIndex) {
    auto ingest = run({"ingest", fixture("corpus").string()});
    ASSERT_EQ(ingest.code, 0) << ingest.err;
    auto stats = last_json_line(ingest.out);
    EXPECT_EQ(stats["docs"], 5);
    EXPECT_GT(stats["nodes"].get<int>(), 0);
    EXPECT_TRUE(std::filesystem::exists(dir_ / "work/graph.jsonl"));

    auto first = amar::testing::read_file(dir_ / "work/graph.jsonl");
    ASSERT_EQ(run({"ingest", fixture("corpus").string()}).code, 0);
    EXPECT_EQ(amar::testing::read_file(dir_ / "work/graph.jsonl"), first);

    auto index = run({"index"});
    ASSERT_EQ(index.code, 0) << index.err;
    EXPECT_EQ(last_json_line(index.out)["dimension"], 64);
    EXPECT_EQ(last_json_line(index.out)["entries"], stats["nodes"]);
}

TEST_F(CliTest, MissingCorpusIsIoError) {
    auto r = run({"ingest", (dir_ / "nowhere").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(last_json_line(r.err)["error"]["kind"], "io");
}

TEST_F(CliTest, PlanPrintsPlanAndIntent) {
    auto r = run({"plan", "--artwork", fixture("artwork.json").string(), "--question", "Why the travellers?"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = nlohmann::json::parse(r.out);
    EXPECT_GE(j["plan"]["steps"].size(), 4u);
    EXPECT_TRUE(j["violations"].empty());
    EXPECT_FALSE(j["intent"]["text"].get<std::string>().empty());
}

TEST_F(CliTest, PlanWithoutImageFailsUnlessTextOnly) {
    auto art = fixture("artwork_no_image.json").string();
    auto r = run({"plan", "--artwork", art, "--question", "Why?"});
    EXPECT_NE(r.code, 0);
    EXPECT_TRUE(last_json_line(r.err).contains("error"));
    EXPECT_EQ(run({"plan", "--artwork", art, "--question", "Why?", "--text-only"}).code, 0);
}

TEST_F(CliTest, AskIsByteIdentical) {
    build_graph_and_index();
    auto a = ask("amar", dir_ / "runs_a");
    auto b = ask("amar", dir_ / "runs_b");
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    auto id = last_json_line(a.out)["run_id"].get<std::string>();
    EXPECT_EQ(id, last_json_line(b.out)["run_id"].get<std::string>());
    auto ra = amar::testing::read_file(dir_ / "runs_a" / (id + ".json"));
    EXPECT_EQ(ra, amar::testing::read_file(dir_ / "runs_b" / (id + ".json")));
    auto record = amar::load_run_record(dir_ / "runs_a" / (id + ".json"));
    EXPECT_TRUE(amar::check_record_consistency(record).ok());
    EXPECT_TRUE(record.config.contains("retrieval"));
}

TEST_F(CliTest, AskWithoutIndexIsIoError) {
    auto r = ask("amar", dir_ / "runs");
    EXPECT_EQ(r.code, 2);
    auto cot = ask("mllm-cot", dir_ / "runs");
    EXPECT_EQ(cot.code, 0) << cot.err;
}

TEST_F(CliTest, AskUnknownMode) {
    build_graph_and_index();
    auto r = ask("best", dir_ / "runs");
    EXPECT_EQ(r.code, 1);
}

TEST_F(CliTest, AskMissingImageNamesStage) {
    build_graph_and_index();
    auto r = run({"ask", "--artwork", fixture("artwork_no_image.json").string(), "--question", "Why?", "--mode", "amar"});
    EXPECT_NE(r.code, 0);
    EXPECT_EQ(last_json_line(r.err)["error"]["stage"], "plan");
}

TEST_F(CliTest, BenchThenEvaluate) {
    build_graph_and_index();
    auto bench = run({"bench", "--modes", "all"});
    ASSERT_EQ(bench.code, 0) << bench.err;
    auto summary = last_json_line(bench.out);
    EXPECT_EQ(summary["items"], 5);
    EXPECT_EQ(summary["modes"], 4);
    EXPECT_EQ(summary["records"], 20);
    EXPECT_TRUE(summary["failures"].empty());
    EXPECT_TRUE(std::filesystem::exists(dir_ / "work/runs/manifest.jsonl"));

    auto eval = run({"evaluate"});
    ASSERT_EQ(eval.code, 0) << eval.err;
    EXPECT_NE(eval.out.find("BLEU-1"), std::string::npos);
    auto report = nlohmann::json::parse(amar::testing::read_file(dir_ / "work/runs/report.json"));
    EXPECT_EQ(report["rows"].size(), 20u);
    EXPECT_EQ(report["config"]["judge_model_id"], "mock-judge");
}

TEST_F(CliTest, EvaluateWithGeneratorAsJudgeRefused) {
    build_graph_and_index();
    ASSERT_EQ(run({"bench", "--modes", "mllm-cot"}).code, 0);
    auto config = nlohmann::json::parse(amar::testing::read_file(dir_ / "amar.json"));
    config["judge_backend"]["model_id"] = "mock-generator";
    amar::testing::write_file(dir_ / "amar.json", config.dump());
    auto r = run({"evaluate"});
    EXPECT_EQ(r.code, 1);
    EXPECT_FALSE(std::filesystem::exists(dir_ / "work/runs/report.json"));
}

TEST_F(CliTest, StatsMatchesExpected) {
    auto r = run({"stats", "--json"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto expected = nlohmann::json::parse(amar::testing::read_file(fixture("artcot_fixture.expected.json")));
    EXPECT_EQ(last_json_line(r.out), expected);
    auto table = run({"stats"});
    EXPECT_NE(table.out.find("4 / 5 / 4.6"), std::string::npos) << table.out;
}

TEST_F(CliTest, StatsOnBadDataset) {
    amar::testing::write_file(dir_ / "bad.jsonl", "{}\n");
    auto r = run({"stats", "--dataset", (dir_ / "bad.jsonl").string()});
    EXPECT_EQ(r.code, 4);
}

TEST_F(CliTest, ConstructQa) {
    auto out = dir_ / "constructed.jsonl";
    auto r = run({"construct-qa", fixture("paintings.jsonl").string(), out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = last_json_line(r.out);
    EXPECT_EQ(j["records"], 4);
    EXPECT_EQ(j["passed_filter"], 1);
    EXPECT_EQ(j["items"], 1);
    auto items = amar::load_dataset(out);
    ASSERT_EQ(items.size(), 1u);
    EXPECT_TRUE(amar::validate_item(items[0], amar::construction_allowed_tags(), {}).ok());
}
