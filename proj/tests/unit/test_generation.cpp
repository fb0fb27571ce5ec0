#include "amar/error.hpp"
#include "amar/generation.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace amar;
using amar::testing::ScriptedBackend;

namespace {

ArtworkRecord artwork() {
    ArtworkRecord a;
    a.painting_id = "p1";
    a.image_ref = "images/p1.jpg";
    a.metadata.title = "The Milkmaid";
    a.metadata.author = "Johannes Vermeer";
    a.description = "HIDDEN-DESCRIPTION";
    return a;
}

ReasoningPlan plan() {
    return {{{1, "Observe the light from the window", EvidenceType::Visual},
             {2, "Use the dating of the canvas", EvidenceType::Metadata},
             {3, "Recall Delft genre painting", EvidenceType::KGBackground},
             {4, "Interpret the domestic virtue", EvidenceType::CommonKnowledge}}};
}

RetrievedContext context() {
    RetrievedContext c;
    c.rendered_text = "Delft School (Art Movement & School): genre scenes [s=0.5000]\n";
    return c;
}

std::string answer_json(const std::vector<std::string>& tags) {
    nlohmann::json steps = nlohmann::json::array();
    for (std::size_t i = 0; i < tags.size(); ++i) {
        steps.push_back({{"step", i + 1}, {"text", "step text " + std::to_string(i + 1)}, {"grounding", tags[i]}});
    }
    return nlohmann::json{{"steps", steps}, {"final_answer", "done"}}.dump();
}

}  // namespace

TEST(PipelineMode, Labels) {
    for (auto m : kAllModes) EXPECT_EQ(parse_pipeline_mode(to_label(m)), m);
    EXPECT_THROW(parse_pipeline_mode("best"), Error);
    EXPECT_FALSE(uses_retrieval(PipelineMode::MllmCot));
    EXPECT_FALSE(uses_plan(PipelineMode::StaticRetrieval));
    EXPECT_TRUE(uses_plan(PipelineMode::TextOnlyPlanner));
}

TEST(GenerationPrompt, AmarContainsPlanStepsInOrder) {
    auto c = context();
    auto p = plan();
    std::string prompt = build_generation_prompt(artwork(), "Why the bread?", &c, &p, PipelineMode::Amar);
    std::size_t last = 0;
    for (const auto& s : p.steps) {
        auto pos = prompt.find(s.sub_goal);
        ASSERT_NE(pos, std::string::npos) << s.sub_goal;
        EXPECT_GT(pos, last);
        last = pos;
    }
    EXPECT_NE(prompt.find(c.rendered_text), std::string::npos);
    EXPECT_EQ(find_marked_line(prompt, prompt_marker::kGroundingSequence),
              "Visual, Metadata, KG-Background, Common-Knowledge");
    EXPECT_EQ(prompt.find("HIDDEN-DESCRIPTION"), std::string::npos);
}

TEST(GenerationPrompt, MllmCotHasNoContext) {
    std::string prompt = build_generation_prompt(artwork(), "Why?", nullptr, nullptr, PipelineMode::MllmCot);
    EXPECT_EQ(prompt.find("Retrieved context"), std::string::npos);
    EXPECT_EQ(prompt.find("Reasoning plan"), std::string::npos);
    EXPECT_NE(prompt.find("step by step"), std::string::npos);
}

TEST(GenerationPrompt, StaticRetrievalHasContextNoPlan) {
    auto c = context();
    std::string prompt = build_generation_prompt(artwork(), "Why?", &c, nullptr, PipelineMode::StaticRetrieval);
    EXPECT_NE(prompt.find("Retrieved context"), std::string::npos);
    EXPECT_EQ(prompt.find("Reasoning plan"), std::string::npos);
}

TEST(GenerationPrompt, ModeInputMismatchRejected) {
    auto c = context();
    auto p = plan();
    EXPECT_THROW(build_generation_prompt(artwork(), "q", &c, nullptr, PipelineMode::MllmCot), Error);
    EXPECT_THROW(build_generation_prompt(artwork(), "q", &c, nullptr, PipelineMode::Amar), Error);
    EXPECT_THROW(build_generation_prompt(artwork(), "q", nullptr, &p, PipelineMode::Amar), Error);
    EXPECT_THROW(build_generation_prompt(artwork(), "q", &c, &p, PipelineMode::StaticRetrieval), Error);
}

TEST(GenerationRequest, CarriesImage) {
    auto r = build_generation_request(artwork(), "q", nullptr, nullptr, PipelineMode::MllmCot);
    EXPECT_TRUE(r.has_image());
    auto a = artwork();
    a.image_ref.clear();
    EXPECT_FALSE(build_generation_request(a, "q", nullptr, nullptr, PipelineMode::MllmCot).has_image());
}

TEST(ParseStepwise, Examples) {
    auto ok = parse_stepwise(answer_json({"Visual", "Metadata", "KG-Background", "Common-Knowledge"}), 4);
    EXPECT_EQ(ok.steps.size(), 4u);
    EXPECT_EQ(ok.final_text, "done");
    EXPECT_THROW(parse_stepwise(answer_json({"Visual", "Metadata", "Visual"}), 4), Error);
    EXPECT_THROW(parse_stepwise(answer_json({"Visual", "Guesswork"})), Error);
}

TEST(ParseStepwise, Rejections) {
    EXPECT_THROW(parse_stepwise("It is about virtue."), Error);
    EXPECT_THROW(parse_stepwise(R"({"steps":[]})"), Error);
    EXPECT_THROW(parse_stepwise(R"({"steps":[{"step":1,"text":"x"}]})"), Error);
    EXPECT_THROW(parse_stepwise(R"({"steps":[{"step":1,"text":" ","grounding":"Visual"}]})"), Error);
}

TEST(ParseStepwise, FinalTextDefaultsToSteps) {
    auto a = parse_stepwise(R"({"steps":[{"text":"One.","grounding":"Visual"},{"text":"Two.","grounding":"Metadata"}]})");
    EXPECT_EQ(a.final_text, "One. Two.");
    EXPECT_EQ(a.steps[1].index, 2u);
}

TEST(StepwiseAnswer, JsonRoundTrip) {
    auto a = parse_stepwise(answer_json({"Visual", "Description"}));
    EXPECT_EQ(stepwise_answer_from_json(nlohmann::json::parse(to_json(a).dump())), a);
}

TEST(GenerateAnswer, MockFollowsGroundingSequence) {
    auto c = context();
    auto p = plan();
    MockBackend m(3);
    auto req = build_generation_request(artwork(), "Why the bread?", &c, &p, PipelineMode::Amar);
    auto out = generate_answer(req, m, p.size());
    ASSERT_EQ(out.answer.steps.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out.answer.steps[i].grounding, p.steps[i].evidence);
    EXPECT_EQ(out.attempts, 1);
    EXPECT_FALSE(out.answer.parse_failed);
}

TEST(GenerateAnswer, RetriesThenFallsBack) {
    ScriptedBackend b({"not json", "still not", "give up"});
    auto req = build_generation_request(artwork(), "q", nullptr, nullptr, PipelineMode::MllmCot);
    auto out = generate_answer(req, b, std::nullopt);
    EXPECT_TRUE(out.answer.parse_failed);
    EXPECT_TRUE(out.answer.steps.empty());
    EXPECT_EQ(out.answer.final_text, "give up");
    EXPECT_EQ(b.requests.size(), 3u);
    EXPECT_EQ(out.request, req);
}

TEST(GenerateAnswer, WrongStepCountIsRetried) {
    ScriptedBackend b({answer_json({"Visual"}), answer_json({"Visual", "Metadata"})});
    auto req = build_generation_request(artwork(), "q", nullptr, nullptr, PipelineMode::MllmCot);
    auto out = generate_answer(req, b, 2);
    EXPECT_EQ(out.attempts, 2);
    EXPECT_EQ(out.answer.steps.size(), 2u);
}
