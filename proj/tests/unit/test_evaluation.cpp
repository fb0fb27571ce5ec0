#include "amar/error.hpp"
#include "amar/evaluation.hpp"
#include "metric_oracles.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace amar;
using amar::testing::CountingBackend;
using amar::testing::ScriptedBackend;

namespace {

std::string random_sentence(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
    static const char* kVocab[] = {"the", "light", "falls", "on", "a", "quiet", "room", "where", "woman", "pours",
                                   "milk", "bread", "window", "blue", "The", "LIGHT"};
    std::size_t n = min_len + rng() % (max_len - min_len + 1);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += std::string(i ? " " : "") + kVocab[rng() % std::size(kVocab)];
    return s;
}

BenchmarkItem item_for(const std::string& painting, const std::string& question) {
    BenchmarkItem item;
    item.painting_id = painting;
    item.question = question;
    item.reference_answer = "the light falls on the woman";
    item.cot_steps = {{"look", "Visual"}, {"date", "Metadata"}, {"school", "KG-Background"}, {"mean", "Common-Knowledge"}};
    item.evidence_types = {"Visual", "Metadata", "KG-Background", "Common-Knowledge"};
    item.difficulty = "High";
    item.planning_complexity = "multi-hop";
    return item;
}

RunRecord record_for(const BenchmarkItem& item, PipelineMode mode, const std::string& generator = "gen") {
    RunRecord r;
    r.mode = mode;
    r.run_id = std::string(to_label(mode)) + "-" + item.painting_id;
    r.artwork.painting_id = item.painting_id;
    r.question = item.question;
    r.answer.final_text = "the light falls on a woman";
    r.answer.steps = {{1, "look at light", EvidenceType::Visual}};
    r.backends["generator"] = {"mock", generator};
    if (uses_retrieval(mode)) {
        RetrievedContext c;
        c.rendered_text = "Vermeer (Artist): Delft painter [s=1.0000]\n";
        r.final_context = c;
    }
    return r;
}

EvaluationRow row(const std::string& id, PipelineMode mode, double bleu1, std::optional<int> quality) {
    EvaluationRow r;
    r.item_id = id;
    r.mode = mode;
    r.overlap.bleu = {bleu1, 0, 0, 0};
    r.judge.answer_quality = quality;
    return r;
}

}  // namespace

TEST(Bleu, HandCases) {
    EXPECT_DOUBLE_EQ(bleu_n("the cat sat on the mat", {"the cat sat on the mat"}, 4), 1.0);
    EXPECT_DOUBLE_EQ(bleu_n("dog", {"the cat"}, 1), 0.0);
    EXPECT_NEAR(bleu_n("the cat sat", {"the cat sat on mat"}, 1), std::exp(1.0 - 5.0 / 3.0), 1e-12);
    // clipping: "the" appears twice in the reference at most
    EXPECT_NEAR(bleu_n("the the the the", {"the cat the mat"}, 1), 0.5, 1e-12);
    EXPECT_DOUBLE_EQ(bleu_n("The Cat", {"the cat"}, 2), 1.0);
    EXPECT_DOUBLE_EQ(bleu_n("the cat", {"the cat"}, 3), 0.0);
}

TEST(Bleu, ClosestReferenceLength) {
    // candidate length 3; references of length 2 and 6: closest is 2, no penalty
    EXPECT_DOUBLE_EQ(bleu_n("a b c", {"a b", "a b c d e f"}, 1), 1.0);
    // lengths 2 and 4 tie around 3; the shorter one wins
    EXPECT_DOUBLE_EQ(bleu_n("a b c", {"a b c d", "a b"}, 1), 1.0);
}

TEST(Bleu, Errors) {
    EXPECT_THROW(bleu_n("a", {"a"}, 0), Error);
    EXPECT_THROW(bleu_n("a", {"a"}, 5), Error);
    EXPECT_THROW(bleu_n("a", {}, 1), Error);
    EXPECT_THROW(bleu_n("  ", {"a"}, 1), Error);
}

TEST(RougeL, HandCases) {
    EXPECT_EQ(rouge_l("the cat sat", "the cat sat on mat"), 0.75);
    EXPECT_DOUBLE_EQ(rouge_l("a b c", "a b c"), 1.0);
    EXPECT_DOUBLE_EQ(rouge_l("x y", "a b"), 0.0);
    EXPECT_THROW(rouge_l("", "a"), Error);
}

TEST(Metrics, MatchOracles) {
    std::mt19937_64 rng(123);
    for (int i = 0; i < 300; ++i) {
        auto cand = random_sentence(rng, 1, 20);
        auto ref = random_sentence(rng, 1, 20);
        for (int n = 1; n <= 4; ++n) EXPECT_NEAR(bleu_n(cand, {ref}, n), amar::testing::oracle_bleu(cand, {ref}, n), 1e-12);
        EXPECT_NEAR(rouge_l(cand, ref), amar::testing::oracle_rouge_l(cand, ref), 1e-12);
    }
}

TEST(Metrics, Properties) {
    std::mt19937_64 rng(321);
    for (int i = 0; i < 300; ++i) {
        auto a = random_sentence(rng, 1, 15);
        auto b = random_sentence(rng, 1, 15);
        EXPECT_DOUBLE_EQ(rouge_l(a, b), rouge_l(b, a));
        double r = rouge_l(a, b);
        EXPECT_GE(r, 0.0);
        EXPECT_LE(r, 1.0);
        EXPECT_DOUBLE_EQ(rouge_l(a, a), 1.0);
        for (int n = 1; n <= 4; ++n) {
            double v = bleu_n(a, {b}, n);
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0 + 1e-12);
            EXPECT_NEAR(bleu_n(a, {a}, n), amar::testing::oracle_tokens(a).size() >= static_cast<std::size_t>(n) ? 1.0 : 0.0, 1e-12);
        }
    }
}

TEST(Metrics, OverlapScoresEmptyAnswerIsZero) {
    EXPECT_EQ(overlap_scores("", "reference"), OverlapScores{});
    auto s = overlap_scores("the cat sat", "the cat sat on mat");
    EXPECT_EQ(s.rouge_l, 0.75);
    EXPECT_DOUBLE_EQ(s.bleu[0], bleu_n("the cat sat", {"the cat sat on mat"}, 1));
}

TEST(JudgeFamilies, RetrievalSkippedWithoutRetrieval) {
    EXPECT_EQ(applicable_families(PipelineMode::MllmCot).size(), 2u);
    EXPECT_EQ(applicable_families(PipelineMode::Amar).size(), 3u);
    EXPECT_EQ(to_key(JudgeDimension::SubgraphRelevance), "subgraph_relevance");
}

TEST(JudgeParse, Strict) {
    std::vector<JudgeDimension> dims{JudgeDimension::StepCompleteness, JudgeDimension::Faithfulness};
    auto ok = parse_judge_output(R"({"step_completeness":4,"faithfulness":2})", dims);
    EXPECT_EQ(ok.at(JudgeDimension::Faithfulness), 2);
    EXPECT_THROW(parse_judge_output(R"({"step_completeness":4})", dims), Error);
    EXPECT_THROW(parse_judge_output(R"({"step_completeness":4,"faithfulness":6})", dims), Error);
    EXPECT_THROW(parse_judge_output(R"({"step_completeness":4,"faithfulness":2.5})", dims), Error);
    EXPECT_THROW(parse_judge_output(R"({"step_completeness":4,"faithfulness":2,"extra":1})", dims), Error);
    EXPECT_THROW(parse_judge_output("four", dims), Error);
}

TEST(Judge, SameModelRejectedBeforeAnyCall) {
    auto item = item_for("p", "Why?");
    auto rec = record_for(item, PipelineMode::Amar, "shared-model");
    CountingBackend judge_backend(std::make_shared<MockBackend>(1, "shared-model"));
    try {
        judge(item, rec, judge_backend);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Config);
    }
    EXPECT_EQ(judge_backend.completes.load(), 0);
}

TEST(Judge, MockScoresAllApplicableDimensions) {
    auto item = item_for("p", "Why?");
    MockBackend m(2, "judge");
    auto amar = judge(item, record_for(item, PipelineMode::Amar), m);
    for (auto d : kAllJudgeDimensions) {
        ASSERT_TRUE(amar.scores.at(d));
        EXPECT_GE(*amar.scores.at(d), 1);
        EXPECT_LE(*amar.scores.at(d), 5);
    }
    EXPECT_EQ(amar.requests.size(), 3u);

    auto cot = judge(item, record_for(item, PipelineMode::MllmCot), m);
    EXPECT_FALSE(cot.scores.subgraph_relevance);
    EXPECT_FALSE(cot.scores.evidence_coverage);
    EXPECT_TRUE(cot.scores.answer_quality);
    for (const auto& r : cot.requests) EXPECT_EQ(r.joined_text().find("subgraph_relevance"), std::string::npos);
}

TEST(Judge, RetriesThenFails) {
    auto item = item_for("p", "Why?");
    auto rec = record_for(item, PipelineMode::MllmCot);
    ScriptedBackend flaky({"great answer", R"({"step_completeness":3,"faithfulness":4})", R"({"answer_quality":5})"}, "j");
    auto out = judge(item, rec, flaky);
    EXPECT_EQ(out.scores.step_completeness, 3);
    EXPECT_EQ(out.scores.answer_quality, 5);
    EXPECT_EQ(flaky.requests.size(), 3u);

    ScriptedBackend broken({"no"}, "j");
    EXPECT_THROW(judge(item, rec, broken), Error);
    EXPECT_EQ(broken.requests.size(), 3u);
}

TEST(Aggregate, MeansAndBest) {
    std::vector<EvaluationRow> rows{row("b", PipelineMode::Amar, 0.5, 4), row("a", PipelineMode::Amar, 0.25, 5),
                                    row("a", PipelineMode::MllmCot, 0.75, std::nullopt)};
    auto report = aggregate(rows, "judge");
    ASSERT_EQ(report.rows.size(), 3u);
    EXPECT_EQ(report.rows[0].item_id, "a");
    EXPECT_EQ(report.rows[0].mode, PipelineMode::MllmCot);
    EXPECT_EQ(report.rows[2].item_id, "b");
    ASSERT_EQ(report.summaries.size(), 2u);
    const auto& cot = report.summaries[0];
    const auto& amar = report.summaries[1];
    EXPECT_EQ(cot.mode, PipelineMode::MllmCot);
    EXPECT_EQ(amar.mode, PipelineMode::Amar);
    EXPECT_EQ(amar.rows, 2u);
    EXPECT_DOUBLE_EQ(*amar.means[0], 37.5);
    EXPECT_DOUBLE_EQ(*amar.means[9], 4.5);
    EXPECT_FALSE(cot.means[9]);
    EXPECT_FALSE(cot.means[5]);
    EXPECT_EQ(report.best[0], std::vector<PipelineMode>{PipelineMode::MllmCot});
    EXPECT_EQ(report.best[9], std::vector<PipelineMode>{PipelineMode::Amar});
    EXPECT_TRUE(report.best[5].empty());
}

TEST(Aggregate, TiesAllMarkedAndSingleRow) {
    auto report = aggregate({row("a", PipelineMode::Amar, 0.5, 3), row("a", PipelineMode::StaticRetrieval, 0.5, 3)}, "j");
    EXPECT_EQ(report.best[0].size(), 2u);
    auto single = aggregate({row("a", PipelineMode::Amar, 0.123456, 2)}, "j");
    EXPECT_DOUBLE_EQ(*single.summaries[0].means[0], 12.35);
    EXPECT_THROW(aggregate({}, "j"), Error);
}

TEST(Aggregate, TableAndJsonRender) {
    auto report = aggregate({row("a", PipelineMode::Amar, 0.5, 3)}, "judge-x");
    auto table = render_table(report);
    EXPECT_NE(table.find("BLEU-1"), std::string::npos);
    EXPECT_NE(table.find("50.00"), std::string::npos);
    auto j = to_json(report);
    EXPECT_EQ(j.at("config").at("judge_model_id"), "judge-x");
    EXPECT_EQ(j.at("rows").size(), 1u);
}

TEST(Evaluate, PairsRecordsAndWarns) {
    EvaluationInputs in;
    in.items = {item_for("p1", "Why the light?"), item_for("p2", "Why the bread?")};
    in.records = {record_for(in.items[0], PipelineMode::Amar), record_for(in.items[1], PipelineMode::MllmCot)};
    auto stray = record_for(item_for("p9", "Unknown?"), PipelineMode::Amar);
    in.records.push_back(stray);
    MockBackend m(4, "judge");
    auto report = evaluate(in, m, 2);
    EXPECT_EQ(report.rows.size(), 2u);
    ASSERT_EQ(report.warnings.size(), 1u);
    EXPECT_NE(report.warnings[0].find(stray.run_id), std::string::npos);
    EXPECT_EQ(report.judge_model_id, "judge");
    EXPECT_EQ(report.rows[0].item_id, "p1");
    EXPECT_DOUBLE_EQ(report.rows[0].overlap.rouge_l,
                     rouge_l(in.records[0].answer.final_text, in.items[0].reference_answer));
    EXPECT_EQ(report.rows[0].judge_prompts.size(), 3u);
    EXPECT_EQ(report.rows[1].judge_prompts.size(), 2u);
}

TEST(Evaluate, GuardCheckedForAllRecordsFirst) {
    EvaluationInputs in;
    in.items = {item_for("p1", "Why the light?"), item_for("p2", "Why the bread?")};
    in.records = {record_for(in.items[0], PipelineMode::Amar), record_for(in.items[1], PipelineMode::Amar, "judge")};
    CountingBackend b(std::make_shared<MockBackend>(4, "judge"));
    EXPECT_THROW(evaluate(in, b, 1), Error);
    EXPECT_EQ(b.completes.load(), 0);
}

TEST(Evaluate, NothingMatches) {
    EvaluationInputs in;
    in.items = {item_for("p1", "Why?")};
    in.records = {record_for(item_for("p2", "Other?"), PipelineMode::Amar)};
    MockBackend m(4, "judge");
    EXPECT_THROW(evaluate(in, m, 1), Error);
}
