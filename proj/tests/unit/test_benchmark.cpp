#include "amar/benchmark.hpp"
#include "amar/error.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>

using namespace amar;
using amar::testing::ScriptedBackend;
using amar::testing::TempDir;

namespace {

std::vector<BenchmarkItem> fixture_items() { return load_dataset(amar::testing::fixture("artcot_fixture.jsonl")); }

BenchmarkItem valid_item() {
    BenchmarkItem item;
    item.question = "What does the empty road in the foreground suggest about the travellers' journey?";
    item.reference_answer = "The road leads the eye into the forest.";
    item.cot_steps = {{"Look at the road", "Visual"},
                      {"Check the date", "Metadata"},
                      {"Recall pastoral ideals", "KG-Background"},
                      {"Interpret the journey", "Common-Knowledge"}};
    item.evidence_types = {"Visual", "Metadata", "KG-Background", "Common-Knowledge"};
    item.difficulty = "High";
    item.planning_complexity = "multi-hop";
    item.painting_id = "p1";
    return item;
}

std::vector<PaintingRecord> painting_fixture() { return load_painting_records(amar::testing::fixture("paintings.jsonl")); }

const PaintingRecord& painting(const std::vector<PaintingRecord>& all, const std::string& id) {
    return *std::find_if(all.begin(), all.end(), [&](const auto& p) { return p.painting_id == id; });
}

std::string construct_reply(const std::string& question) {
    auto j = to_json(valid_item());
    j["question"] = question;
    return j.dump();
}

}  // namespace

TEST(ValidateItem, ValidItemPasses) {
    EXPECT_TRUE(validate_item(valid_item(), default_allowed_tags(), {}).ok());
    for (const auto& item : fixture_items()) {
        auto r = validate_item(item, default_allowed_tags(), {});
        EXPECT_TRUE(r.ok()) << item.painting_id << ": " << (r.ok() ? "" : r.violations.front());
    }
}

TEST(ValidateItem, ThreeStepsRejected) {
    auto item = valid_item();
    item.cot_steps.pop_back();
    item.evidence_types.pop_back();
    auto r = validate_item(item, default_allowed_tags(), {4, 5});
    ASSERT_EQ(r.violations.size(), 1u);
    EXPECT_EQ(r.violations[0], "3 steps outside [4, 5]");
}

TEST(ValidateItem, TagRules) {
    auto missing = valid_item();
    missing.cot_steps[1].grounding.reset();
    EXPECT_FALSE(validate_item(missing, default_allowed_tags(), {}).ok());

    auto unknown = valid_item();
    unknown.cot_steps[1].grounding = "Hunch";
    EXPECT_FALSE(validate_item(unknown, default_allowed_tags(), {}).ok());

    auto description = valid_item();
    description.cot_steps[1].grounding = "Description";
    description.evidence_types[1] = "Description";
    EXPECT_TRUE(validate_item(description, default_allowed_tags(), {}).ok());
    EXPECT_FALSE(validate_item(description, construction_allowed_tags(), {}).ok());

    auto undeclared = valid_item();
    undeclared.evidence_types.pop_back();
    EXPECT_FALSE(validate_item(undeclared, default_allowed_tags(), {}).ok());

    auto difficulty = valid_item();
    difficulty.difficulty = "Easy";
    EXPECT_FALSE(validate_item(difficulty, default_allowed_tags(), {}).ok());
}

TEST(Dataset, JsonRoundTrip) {
    TempDir dir;
    auto items = fixture_items();
    save_dataset(items, dir / "d.jsonl");
    EXPECT_EQ(load_dataset(dir / "d.jsonl"), items);
}

TEST(Dataset, BadLineNamed) {
    auto line = to_json(valid_item()).dump();
    try {
        parse_dataset(line + "\n\n{\"question\": 3}\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(load_dataset("/nonexistent/d.jsonl"), Error);
}

TEST(Dataset, ItemIdsNumberRepeats) {
    auto a = valid_item();
    auto b = valid_item();
    b.painting_id = "p2";
    EXPECT_EQ(item_ids({a, b, a, a}), (std::vector<std::string>{"p1", "p2", "p1#2", "p1#3"}));
}

TEST(Stats, MatchesFixtureExpectation) {
    std::ifstream in(amar::testing::fixture("artcot_fixture.expected.json"));
    auto expected = nlohmann::ordered_json::parse(in);
    auto stats = compute_stats(fixture_items());
    EXPECT_EQ(to_json(stats), expected);
}

TEST(Stats, EmptyDatasetRejected) { EXPECT_THROW(compute_stats({}), Error); }

TEST(Stats, PermutationInvariant) {
    auto items = fixture_items();
    auto base = compute_stats(items);
    std::mt19937_64 rng(5);
    for (int i = 0; i < 20; ++i) {
        std::shuffle(items.begin(), items.end(), rng);
        EXPECT_EQ(compute_stats(items), base);
    }
}

TEST(Stats, SingleItem) {
    auto s = compute_stats({valid_item()});
    EXPECT_EQ(s.steps, (LengthSummary{4, 4, 4.0}));
    EXPECT_EQ(s.question_words.min, s.question_words.max);
    EXPECT_EQ(s.multi_hop, 1u);
    EXPECT_EQ(s.difficulty_counts.at("High"), 1u);
}

TEST(Filter, FixturePaintings) {
    auto all = painting_fixture();
    ASSERT_EQ(all.size(), 4u);
    FilterThresholds t;
    EXPECT_FALSE(filter_rejection(painting(all, "del-mazza-virgin-angels"), t));
    EXPECT_NE(filter_rejection(painting(all, "no-technique"), t)->find("technique"), std::string::npos);
    EXPECT_NE(filter_rejection(painting(all, "content-only"), t)->find("context"), std::string::npos);
    EXPECT_NE(filter_rejection(painting(all, "short-description"), t)->find("words"), std::string::npos);
    auto kept = filter_paintings(all, t);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].painting_id, "del-mazza-virgin-angels");
}

TEST(Filter, ExactlyMinimumWordsIncluded) {
    PaintingRecord r;
    r.painting_id = "x";
    r.metadata = {"t", "a", "oil", "1600", "tags"};
    std::string body;
    for (int i = 0; i < 99; ++i) body += "word ";
    r.sections = {{"content", body + "symbolism"}, {"context", ""}};
    FilterThresholds t;
    EXPECT_FALSE(filter_rejection(r, t));
    t.min_desc_words = 101;
    EXPECT_TRUE(filter_rejection(r, t));
}

TEST(Filter, MonotoneInThreshold) {
    auto all = painting_fixture();
    std::size_t prev = all.size() + 1;
    for (std::size_t w : {0u, 50u, 100u, 110u, 120u, 500u}) {
        FilterThresholds t;
        t.min_desc_words = w;
        auto kept = filter_paintings(all, t);
        EXPECT_LE(kept.size(), prev);
        prev = kept.size();
    }
    FilterThresholds loose;
    loose.required_keywords.clear();
    loose.required_perspectives.clear();
    loose.min_desc_words = 0;
    auto strict = filter_paintings(all, FilterThresholds{});
    auto relaxed = filter_paintings(all, loose);
    for (const auto& p : strict) {
        EXPECT_TRUE(std::any_of(relaxed.begin(), relaxed.end(), [&](const auto& q) { return q.painting_id == p.painting_id; }));
    }
}

TEST(PaintingRecord, PlainDescriptionForm) {
    auto r = painting_record_from_json(nlohmann::ordered_json::parse(
        R"({"painting_id":"x","metadata":{"title":"t","author":"a","technique":"oil","timeframe":"1600","tags":"x"},
            "description":"body text about meaning","perspectives":["content","context"]})"));
    EXPECT_EQ(r.description(), "body text about meaning");
    FilterThresholds t;
    t.min_desc_words = 0;
    EXPECT_FALSE(filter_rejection(r, t));
    t.required_perspectives.push_back("form");
    EXPECT_EQ(filter_rejection(r, t), "missing the 'form' perspective");
}

TEST(DirectFactual, Heuristic) {
    EXPECT_TRUE(looks_like_direct_factual("Who painted this work of art in the museum?"));
    EXPECT_TRUE(looks_like_direct_factual("What year was it made?"));
    EXPECT_TRUE(looks_like_direct_factual("Why?"));
    EXPECT_FALSE(looks_like_direct_factual(valid_item().question));
}

TEST(ConstructQa, MockItemIsValid) {
    auto all = painting_fixture();
    MockBackend m(7, "mock-annotator");
    auto item = construct_qa(painting(all, "del-mazza-virgin-angels"), m);
    EXPECT_TRUE(validate_item(item, construction_allowed_tags(), {}).ok());
    EXPECT_EQ(item.painting_id, "del-mazza-virgin-angels");
    EXPECT_FALSE(looks_like_direct_factual(item.question));
    auto again = construct_qa(painting(all, "del-mazza-virgin-angels"), m);
    EXPECT_EQ(item, again);
}

TEST(ConstructQa, DirectFactualRetried) {
    auto all = painting_fixture();
    ScriptedBackend b({construct_reply("Who painted this panel of the Virgin and angels?"),
                       construct_reply(valid_item().question)});
    auto item = construct_qa(painting(all, "del-mazza-virgin-angels"), b);
    EXPECT_EQ(b.requests.size(), 2u);
    EXPECT_EQ(item.question, valid_item().question);
    EXPECT_NE(b.requests[1].joined_text().find("direct factual"), std::string::npos);
}

TEST(ConstructQa, ThreeBadOutputsFail) {
    auto all = painting_fixture();
    ScriptedBackend b({"I would ask about the angels."});
    EXPECT_THROW(construct_qa(painting(all, "del-mazza-virgin-angels"), b), Error);
    EXPECT_EQ(b.requests.size(), 3u);
}

TEST(ConstructQa, FilteredPaintingIsPreconditionError) {
    auto all = painting_fixture();
    ScriptedBackend b({construct_reply(valid_item().question)});
    try {
        construct_qa(painting(all, "short-description"), b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Validation);
    }
    EXPECT_TRUE(b.requests.empty());
}

TEST(ConstructionRequest, ListsAllowedTagsAndImage) {
    auto all = painting_fixture();
    auto r = build_construction_request(painting(all, "del-mazza-virgin-angels"), {});
    EXPECT_TRUE(r.has_image());
    EXPECT_EQ(r.purpose, Purpose::Construct);
    EXPECT_EQ(find_marked_line(r.joined_text(), prompt_marker::kAllowedTags),
              "Visual, Metadata, KG-Background, Common-Knowledge");
}
