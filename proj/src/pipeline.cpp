#include "amar/pipeline.hpp"

#include "amar/parallel.hpp"
#include "amar/text.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

namespace amar {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json request_json(const ModelRequest& r) {
    ordered_json parts = ordered_json::array();
    for (const auto& p : r.parts) {
        parts.push_back({{"type", p.kind == RequestPart::Kind::Text ? "text" : "image"}, {"data", p.data}});
    }
    return {{"purpose", to_string(r.purpose)}, {"parts", std::move(parts)}};
}

template <class T, class F>
ordered_json optional_json(const std::optional<T>& v, F&& convert) {
    return v ? convert(*v) : ordered_json(nullptr);
}

class StageClock {
public:
    explicit StageClock(bool enabled) : enabled_(enabled) {}

    template <class Fn>
    auto run(const std::string& stage, Fn&& fn) -> decltype(fn()) {
        auto start = std::chrono::steady_clock::now();
        auto record = [&] {
            if (!enabled_) return;
            std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
            timings_[stage] += elapsed.count();
        };
        try {
            if constexpr (std::is_void_v<decltype(fn())>) {
                fn();
                record();
            } else {
                auto out = fn();
                record();
                return out;
            }
        } catch (const PipelineError&) {
            throw;
        } catch (const Error& e) {
            throw PipelineError(e.kind(), stage, e.what());
        } catch (const std::exception& e) {
            throw PipelineError(ErrorKind::Backend, stage, e.what());
        }
    }

    std::optional<std::map<std::string, double>> timings() const {
        if (!enabled_) return std::nullopt;
        return timings_;
    }

private:
    bool enabled_;
    std::map<std::string, double> timings_;
};

BackendIdentity identity(const std::shared_ptr<ModelBackend>& b) {
    return {std::string(b->kind()), b->model_id()};
}

void require(const std::shared_ptr<ModelBackend>& b, const char* role) {
    if (!b) throw PipelineError(ErrorKind::Config, "setup", std::string("no ") + role + " backend configured");
}

}  // namespace

std::string make_run_id(PipelineMode mode, const std::string& painting_id, const std::string& question,
                        std::int64_t seed) {
    std::string material = std::string(to_label(mode)) + '\n' + painting_id + '\n' + question + '\n' +
                           std::to_string(seed);
    return std::string(to_label(mode)) + "-" + text::sha256_hex(material).substr(0, 16);
}

RunRecord run_pipeline(const ArtworkRecord& artwork, const std::string& question, const KnowledgeGraph* graph,
                       const VectorIndex* index, const PipelineOptions& options, PipelineMode mode,
                       const PipelineBackends& backends) {
    StageClock clock(options.record_timings);
    RunRecord rec;
    rec.mode = mode;
    rec.seed = options.seed;
    rec.artwork = artwork;
    rec.question = question;
    rec.run_id = make_run_id(mode, artwork.painting_id, question, options.seed);
    rec.config = options.config_echo;

    if (text::trim(question).empty()) throw PipelineError(ErrorKind::Validation, "setup", "question is empty");
    require(backends.generator, "generator");
    rec.backends["generator"] = identity(backends.generator);
    if (uses_retrieval(mode)) {
        if (!graph || !index) {
            throw PipelineError(ErrorKind::Config, "setup",
                                std::string("mode ") + std::string(to_label(mode)) + " needs a graph and an index");
        }
        clock.run("setup", [&] { options.retrieval.validate(); });
        require(backends.embedder, "embedder");
        rec.backends["embedder"] = identity(backends.embedder);
        if (options.retrieval.scorer == ScorerKind::Remote) {
            require(backends.scorer, "scorer");
            rec.backends["scorer"] = identity(backends.scorer);
        }
    }

    if (uses_plan(mode)) {
        require(backends.planner, "planner");
        rec.backends["planner"] = identity(backends.planner);
        PlannerOptions popts;
        popts.multimodal = mode == PipelineMode::Amar;
        popts.include_description = options.planner_sees_description;
        PlanOutcome outcome = clock.run("plan", [&] { return generate_plan(artwork, question, *backends.planner, popts); });
        rec.plan = outcome.plan;
        rec.planning_request = outcome.request;
        rec.plan_attempts = outcome.attempts;
        rec.intent = derive_retrieval_intent(*rec.plan, artwork);
    } else if (mode == PipelineMode::StaticRetrieval) {
        rec.intent = RetrievalIntent{question, {}};
    }

    if (uses_retrieval(mode)) {
        const auto& rc = options.retrieval;
        rec.coarse_candidates =
            clock.run("coarse_retrieve", [&] { return coarse_retrieve(*rec.intent, *index, *backends.embedder, rc.k_coarse); });
        rec.retrieval_events = 1;
        RerankOutcome reranked = clock.run("rerank", [&] {
            if (rc.scorer == ScorerKind::Remote) {
                ModelScorer scorer(*backends.scorer, mode != PipelineMode::TextOnlyPlanner);
                return rerank(rec.coarse_candidates, artwork, *rec.intent, *graph, scorer, rc);
            }
            EmbeddingScorer scorer(*backends.embedder);
            return rerank(rec.coarse_candidates, artwork, *rec.intent, *graph, scorer, rc);
        });
        rec.scoring_requests = std::move(reranked.scoring_requests);
        rec.reranked_candidates = reranked.all_scored;
        rec.final_context =
            clock.run("assemble_context", [&] { return assemble_context(reranked.ranked, *graph, rc.expansion_hops); });
    }

    const RetrievedContext* ctx = rec.final_context ? &*rec.final_context : nullptr;
    const ReasoningPlan* plan = rec.plan ? &*rec.plan : nullptr;
    rec.generation_request =
        clock.run("generate", [&] { return build_generation_request(artwork, question, ctx, plan, mode); });
    rec.generation_prompt = rec.generation_request.parts.front().data;
    std::optional<std::size_t> expected;
    if (plan) expected = plan->size();
    GenerationOutcome gen = clock.run("generate", [&] { return generate_answer(rec.generation_request, *backends.generator, expected); });
    rec.answer = std::move(gen.answer);
    rec.generation_attempts = gen.attempts;

    if (plan && !rec.answer.parse_failed) {
        std::size_t n = std::min(plan->size(), rec.answer.steps.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (rec.answer.steps[i].grounding != plan->steps[i].evidence) {
                rec.grounding_violations.push_back({i + 1, plan->steps[i].evidence, rec.answer.steps[i].grounding});
            }
        }
    }
    rec.timings_ms = clock.timings();
    return rec;
}

ValidationReport check_record_consistency(const RunRecord& r) {
    ValidationReport report;
    const std::string mode(to_label(r.mode));
    if (uses_plan(r.mode)) {
        if (!r.plan) report.add(mode + " record has no plan");
        if (!r.intent) report.add(mode + " record has no intent");
    } else {
        if (r.plan) report.add(mode + " record has a plan");
        if (r.planning_request) report.add(mode + " record has a planning request");
    }
    if (uses_retrieval(r.mode)) {
        if (!r.final_context) report.add(mode + " record has no context");
        if (!r.intent) report.add(mode + " record has no intent");
        if (r.retrieval_events != 1) {
            report.add(mode + " record logs " + std::to_string(r.retrieval_events) + " retrieval events, expected 1");
        }
        if (r.reranked_candidates.size() != r.coarse_candidates.size()) {
            report.add(mode + " record scores " + std::to_string(r.reranked_candidates.size()) + " of " +
                       std::to_string(r.coarse_candidates.size()) + " coarse candidates");
        }
        if (r.final_context) {
            for (const auto& c : r.final_context->candidates) {
                bool in_coarse = std::any_of(r.coarse_candidates.begin(), r.coarse_candidates.end(),
                                             [&](const RankedUnit& u) { return u.unit_id == c.unit_id; });
                if (!in_coarse) report.add("final candidate " + c.unit_id + " is not a coarse candidate");
            }
        }
    } else {
        if (r.intent) report.add(mode + " record has an intent");
        if (r.final_context) report.add(mode + " record has a context");
        if (!r.coarse_candidates.empty()) report.add(mode + " record has coarse candidates");
        if (!r.reranked_candidates.empty()) report.add(mode + " record has reranked candidates");
        if (r.retrieval_events != 0) report.add(mode + " record logs retrieval events");
    }
    if (r.mode == PipelineMode::StaticRetrieval && r.intent && r.intent->text != r.question) {
        report.add("static-retrieval intent differs from the question");
    }
    if (r.plan && !r.answer.parse_failed && r.answer.steps.size() != r.plan->size()) {
        report.add("answer has " + std::to_string(r.answer.steps.size()) + " steps for a " +
                   std::to_string(r.plan->size()) + "-step plan");
    }
    return report;
}

ordered_json to_json(const RunRecord& r) {
    ordered_json j;
    j["run_id"] = r.run_id;
    j["mode"] = to_label(r.mode);
    j["seed"] = r.seed;
    j["artwork"] = to_json(r.artwork);
    j["question"] = r.question;
    j["plan"] = optional_json(r.plan, [](const ReasoningPlan& p) { return to_json(p); });
    j["planning_request"] = optional_json(r.planning_request, request_json);
    j["plan_attempts"] = r.plan_attempts;
    j["intent"] = optional_json(r.intent, [](const RetrievalIntent& i) { return to_json(i); });
    j["retrieval_events"] = r.retrieval_events;
    ordered_json coarse = ordered_json::array();
    for (const auto& u : r.coarse_candidates) coarse.push_back({{"unit_id", u.unit_id}, {"score", u.score}});
    j["coarse_candidates"] = std::move(coarse);
    ordered_json reranked = ordered_json::array();
    for (const auto& c : r.reranked_candidates) reranked.push_back(to_json(c));
    j["reranked_candidates"] = std::move(reranked);
    j["final_context"] = optional_json(r.final_context, [](const RetrievedContext& c) { return to_json(c); });
    ordered_json scoring = ordered_json::array();
    for (const auto& s : r.scoring_requests) scoring.push_back(request_json(s));
    j["scoring_requests"] = std::move(scoring);
    j["generation_prompt"] = r.generation_prompt;
    j["generation_request"] = request_json(r.generation_request);
    j["generation_attempts"] = r.generation_attempts;
    j["answer"] = to_json(r.answer);
    ordered_json violations = ordered_json::array();
    for (const auto& v : r.grounding_violations) {
        violations.push_back({{"step", v.step}, {"expected", to_label(v.expected)}, {"actual", to_label(v.actual)}});
    }
    j["grounding_violations"] = std::move(violations);
    if (r.timings_ms) {
        ordered_json t = ordered_json::object();
        for (const auto& [k, v] : *r.timings_ms) t[k] = v;
        j["timings_ms"] = std::move(t);
    } else {
        j["timings_ms"] = nullptr;
    }
    ordered_json b = ordered_json::object();
    for (const auto& [role, id] : r.backends) b[role] = {{"kind", id.kind}, {"model_id", id.model_id}};
    j["backends"] = std::move(b);
    j["config"] = r.config.is_null() ? ordered_json::object() : r.config;
    return j;
}

RunRecord run_record_from_json(const nlohmann::json& j) {
    RunRecord r;
    try {
        r.run_id = j.at("run_id").get<std::string>();
        r.mode = parse_pipeline_mode(j.at("mode").get<std::string>());
        r.seed = j.at("seed").get<std::int64_t>();
        r.artwork = artwork_from_json(j.at("artwork"));
        r.question = j.at("question").get<std::string>();
        if (!j.at("plan").is_null()) r.plan = parse_plan(j.at("plan").dump());
        if (!j.at("planning_request").is_null()) r.planning_request = request_from_json(j.at("planning_request"));
        r.plan_attempts = j.at("plan_attempts").get<int>();
        if (!j.at("intent").is_null()) {
            RetrievalIntent intent;
            intent.text = j.at("intent").at("text").get<std::string>();
            for (const auto& e : j.at("intent").at("evidence_mix")) {
                intent.evidence_mix.push_back(parse_evidence_type(e.get<std::string>()));
            }
            r.intent = std::move(intent);
        }
        r.retrieval_events = j.at("retrieval_events").get<std::size_t>();
        for (const auto& u : j.at("coarse_candidates")) {
            r.coarse_candidates.push_back({u.at("unit_id").get<std::string>(), u.at("score").get<double>()});
        }
        for (const auto& c : j.at("reranked_candidates")) r.reranked_candidates.push_back(scored_candidate_from_json(c));
        if (!j.at("final_context").is_null()) r.final_context = retrieved_context_from_json(j.at("final_context"));
        for (const auto& s : j.at("scoring_requests")) r.scoring_requests.push_back(request_from_json(s));
        r.generation_prompt = j.at("generation_prompt").get<std::string>();
        r.generation_request = request_from_json(j.at("generation_request"));
        r.generation_attempts = j.at("generation_attempts").get<int>();
        r.answer = stepwise_answer_from_json(j.at("answer"));
        for (const auto& v : j.at("grounding_violations")) {
            r.grounding_violations.push_back({v.at("step").get<std::size_t>(),
                                              parse_evidence_type(v.at("expected").get<std::string>()),
                                              parse_evidence_type(v.at("actual").get<std::string>())});
        }
        if (j.contains("timings_ms") && !j.at("timings_ms").is_null()) {
            r.timings_ms = j.at("timings_ms").get<std::map<std::string, double>>();
        }
        for (const auto& [role, id] : j.at("backends").items()) {
            r.backends[role] = {id.at("kind").get<std::string>(), id.at("model_id").get<std::string>()};
        }
        r.config = ordered_json::parse(j.value("config", nlohmann::json::object()).dump());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Validation, std::string("malformed run record: ") + e.what());
    }
    return r;
}

BatchResult run_batch(const std::vector<BatchItem>& items, const KnowledgeGraph* graph, const VectorIndex* index,
                      const PipelineOptions& options, PipelineMode mode, const PipelineBackends& backends,
                      std::size_t parallelism) {
    if (parallelism == 0) fail(ErrorKind::Config, "parallelism must be >= 1");
    struct Outcome {
        std::optional<RunRecord> record;
        std::optional<BatchFailure> failure;
    };
    auto outcomes = parallel_map(items.size(), parallelism, [&](std::size_t i) {
        const auto& item = items[i];
        Outcome out;
        try {
            out.record = run_pipeline(item.artwork, item.question, graph, index, options, mode, backends);
        } catch (const PipelineError& e) {
            out.failure = BatchFailure{i, item.item_id, e.stage(), e.what()};
        } catch (const std::exception& e) {
            out.failure = BatchFailure{i, item.item_id, "unknown", e.what()};
        }
        return out;
    });
    BatchResult result;
    for (auto& o : outcomes) {
        if (o.record) result.records.push_back(std::move(*o.record));
        if (o.failure) result.failures.push_back(std::move(*o.failure));
    }
    return result;
}

std::string serialize_run_record(const RunRecord& record) { return to_json(record).dump(2) + "\n"; }

std::filesystem::path write_run_record(const RunRecord& record, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create directory " + dir.string() + ": " + ec.message());
    auto path = dir / (record.run_id + ".json");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << serialize_run_record(record);
    if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
    return path;
}

RunRecord load_run_record(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot read run record " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Io, "run record " + path.string() + " is not JSON: " + e.what());
    }
    return run_record_from_json(j);
}

std::vector<RunRecord> load_run_records(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) fail(ErrorKind::Io, "runs directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<RunRecord> out;
    for (const auto& f : files) {
        try {
            out.push_back(load_run_record(f));
        } catch (const Error&) {
            // not a run record (e.g. a report file); skipped
        }
    }
    return out;
}

}  // namespace amar
