#include "amar/evaluation.hpp"

#include "amar/parallel.hpp"
#include "amar/text.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <spdlog/spdlog.h>

namespace amar {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::array<std::string_view, kReportColumns> kColumnNames = {
    "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L", "StepComp", "Faithful", "SubgRel", "EvidCov", "AnsQual"};

constexpr std::array<std::string_view, kReportColumns> kColumnKeys = {
    "bleu_1", "bleu_2", "bleu_3", "bleu_4", "rouge_l", "step_completeness", "faithfulness",
    "subgraph_relevance", "evidence_coverage", "answer_quality"};

constexpr std::size_t kOverlapColumns = 5;

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
    std::map<Ngram, std::size_t> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[Ngram(tokens.begin() + i, tokens.begin() + i + n)];
    return counts;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::string render_steps(const std::vector<std::pair<std::string, std::string>>& steps) {
    std::string out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        out += std::to_string(i + 1) + ". [" + steps[i].second + "] " + steps[i].first + "\n";
    }
    return out.empty() ? "(none)\n" : out;
}

std::string reference_steps(const BenchmarkItem& item) {
    std::vector<std::pair<std::string, std::string>> steps;
    for (const auto& s : item.cot_steps) steps.emplace_back(s.text, s.grounding.value_or("?"));
    return render_steps(steps);
}

std::string candidate_steps(const RunRecord& record) {
    std::vector<std::pair<std::string, std::string>> steps;
    for (const auto& s : record.answer.steps) steps.emplace_back(s.text, std::string(to_label(s.grounding)));
    return render_steps(steps);
}

ordered_json optional_number(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json optional_int(const std::optional<int>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

}  // namespace

std::vector<std::string> metric_tokens(std::string_view t) {
    auto tokens = text::split_whitespace(t);
    for (auto& tok : tokens) tok = text::to_lower_ascii(tok);
    return tokens;
}

double bleu_n(std::string_view candidate, const std::vector<std::string>& references, int n) {
    if (n < 1 || n > 4) fail(ErrorKind::Validation, "BLEU order must be in 1..4, got " + std::to_string(n));
    if (references.empty()) fail(ErrorKind::Validation, "BLEU needs at least one reference");
    const auto cand = metric_tokens(candidate);
    if (cand.empty()) fail(ErrorKind::Validation, "BLEU candidate is empty");
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : references) refs.push_back(metric_tokens(r));

    double log_sum = 0.0;
    for (int k = 1; k <= n; ++k) {
        auto cand_counts = ngram_counts(cand, static_cast<std::size_t>(k));
        std::map<Ngram, std::size_t> max_ref;
        for (const auto& r : refs) {
            for (const auto& [g, c] : ngram_counts(r, static_cast<std::size_t>(k))) max_ref[g] = std::max(max_ref[g], c);
        }
        std::size_t clipped = 0, total = 0;
        for (const auto& [g, c] : cand_counts) {
            total += c;
            auto it = max_ref.find(g);
            if (it != max_ref.end()) clipped += std::min(c, it->second);
        }
        if (clipped == 0 || total == 0) return 0.0;
        log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
    }

    const double c = static_cast<double>(cand.size());
    double r = static_cast<double>(refs.front().size());
    for (const auto& ref : refs) {
        double len = static_cast<double>(ref.size());
        if (std::abs(len - c) < std::abs(r - c) || (std::abs(len - c) == std::abs(r - c) && len < r)) r = len;
    }
    double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
    return bp * std::exp(log_sum / n);
}

double rouge_l(std::string_view candidate, std::string_view reference) {
    const auto a = metric_tokens(candidate);
    const auto b = metric_tokens(reference);
    if (a.empty() || b.empty()) fail(ErrorKind::Validation, "ROUGE-L inputs must be non-empty");
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    // 2PR / (P + R) reduces to 2 * lcs / (|a| + |b|) for beta = 1.
    const std::size_t lcs = prev[b.size()];
    if (lcs == 0) return 0.0;
    return 2.0 * static_cast<double>(lcs) / static_cast<double>(a.size() + b.size());
}

OverlapScores overlap_scores(std::string_view candidate, std::string_view reference) {
    OverlapScores s;
    if (metric_tokens(candidate).empty() || metric_tokens(reference).empty()) return s;
    const std::vector<std::string> refs{std::string(reference)};
    for (int n = 1; n <= 4; ++n) s.bleu[static_cast<std::size_t>(n - 1)] = bleu_n(candidate, refs, n);
    s.rouge_l = rouge_l(candidate, reference);
    return s;
}

std::string_view to_key(JudgeDimension d) { return kColumnKeys[kOverlapColumns + static_cast<std::size_t>(d)]; }

std::optional<int>& JudgeScores::at(JudgeDimension d) {
    switch (d) {
        case JudgeDimension::StepCompleteness: return step_completeness;
        case JudgeDimension::Faithfulness: return faithfulness;
        case JudgeDimension::SubgraphRelevance: return subgraph_relevance;
        case JudgeDimension::EvidenceCoverage: return evidence_coverage;
        case JudgeDimension::AnswerQuality: break;
    }
    return answer_quality;
}

const std::optional<int>& JudgeScores::at(JudgeDimension d) const { return const_cast<JudgeScores*>(this)->at(d); }

std::vector<JudgeDimension> dimensions_of(JudgeFamily family) {
    switch (family) {
        case JudgeFamily::Reasoning: return {JudgeDimension::StepCompleteness, JudgeDimension::Faithfulness};
        case JudgeFamily::Retrieval: return {JudgeDimension::SubgraphRelevance, JudgeDimension::EvidenceCoverage};
        case JudgeFamily::Answer: break;
    }
    return {JudgeDimension::AnswerQuality};
}

std::vector<JudgeFamily> applicable_families(PipelineMode mode) {
    if (uses_retrieval(mode)) return {JudgeFamily::Reasoning, JudgeFamily::Retrieval, JudgeFamily::Answer};
    return {JudgeFamily::Reasoning, JudgeFamily::Answer};
}

ModelRequest build_judge_request(JudgeFamily family, const BenchmarkItem& item, const RunRecord& record) {
    std::string prompt = "You are an impartial judge of answers about artworks. Score each listed dimension with an "
                         "integer from 1 (poor) to 5 (excellent).\n\n";
    prompt += "Question: " + item.question + "\n\n";
    switch (family) {
        case JudgeFamily::Reasoning:
            prompt += "Reference reasoning steps with grounding tags:\n" + reference_steps(item) + "\n";
            prompt += "Model reasoning steps with grounding tags:\n" + candidate_steps(record) + "\n";
            prompt +=
                "step_completeness: does the model cover every step the reference needs, in a sensible order?\n"
                "faithfulness: is each model step supported by evidence of its tagged type, without invention?\n";
            break;
        case JudgeFamily::Retrieval: {
            std::string context = record.final_context ? record.final_context->rendered_text : "(none)\n";
            std::vector<std::string> ref_tags(item.evidence_types.begin(), item.evidence_types.end());
            prompt += "Retrieved context:\n" + context + "\n";
            prompt += "Reference evidence types: " + text::join(ref_tags, ", ") + "\n";
            prompt += "Model reasoning steps with grounding tags:\n" + candidate_steps(record) + "\n";
            prompt +=
                "subgraph_relevance: how relevant is the retrieved context to the question and the artwork?\n"
                "evidence_coverage: how much of the evidence the reference reasoning needs does the context supply?\n";
            break;
        }
        case JudgeFamily::Answer:
            prompt += "Reference answer:\n" + item.reference_answer + "\n\n";
            prompt += "Model answer:\n" + record.answer.final_text + "\n\n";
            prompt += "answer_quality: how correct, complete and well supported is the model answer?\n";
            break;
    }
    std::vector<std::string> keys;
    for (auto d : dimensions_of(family)) keys.emplace_back(to_key(d));
    prompt += std::string(prompt_marker::kJudgeDimensions) + " " + text::join(keys, ", ") + "\n";
    prompt += "Output format: reply with only a JSON object mapping each dimension name to its integer score.";
    return {Purpose::Judge, {RequestPart::text(std::move(prompt))}};
}

std::map<JudgeDimension, int> parse_judge_output(std::string_view raw, const std::vector<JudgeDimension>& dims) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text::strip_code_fence(raw));
    } catch (const nlohmann::json::exception&) {
        fail(ErrorKind::Validation, "judge output is not JSON");
    }
    if (!j.is_object()) fail(ErrorKind::Validation, "judge output must be a JSON object");
    if (j.size() != dims.size()) {
        fail(ErrorKind::Validation, "judge output has " + std::to_string(j.size()) + " keys, expected " +
                                        std::to_string(dims.size()));
    }
    std::map<JudgeDimension, int> out;
    for (auto d : dims) {
        std::string key(to_key(d));
        if (!j.contains(key)) fail(ErrorKind::Validation, "judge output lacks '" + key + "'");
        const auto& v = j.at(key);
        if (!v.is_number_integer()) fail(ErrorKind::Validation, "judge score '" + key + "' is not an integer");
        auto score = v.get<std::int64_t>();
        if (score < 1 || score > 5) {
            fail(ErrorKind::Validation, "judge score '" + key + "' = " + std::to_string(score) + " is outside 1..5");
        }
        out[d] = static_cast<int>(score);
    }
    return out;
}

JudgeOutcome judge(const BenchmarkItem& item, const RunRecord& record, ModelBackend& judge_backend) {
    auto gen = record.backends.find("generator");
    if (gen == record.backends.end()) {
        fail(ErrorKind::Validation, "run record " + record.run_id + " does not name its generator model");
    }
    if (gen->second.model_id == judge_backend.model_id()) {
        fail(ErrorKind::Config, "judge model '" + judge_backend.model_id() +
                                    "' is the generator model; use a different judge to avoid self-evaluation");
    }
    JudgeOutcome outcome;
    for (auto family : applicable_families(record.mode)) {
        const auto dims = dimensions_of(family);
        ModelRequest request = build_judge_request(family, item, record);
        outcome.requests.push_back(request);
        std::string last_error;
        std::optional<std::map<JudgeDimension, int>> parsed;
        for (int attempt = 0; attempt <= 2 && !parsed; ++attempt) {
            ModelRequest r = request;
            if (attempt > 0) {
                r.parts.push_back(RequestPart::text("Your previous reply could not be parsed (" + last_error +
                                                    "). Reply again with only the JSON object of integer scores."));
            }
            try {
                parsed = parse_judge_output(judge_backend.complete(r), dims);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Validation) throw;
                last_error = e.what();
            }
        }
        if (!parsed) fail(ErrorKind::Validation, "judge output unparseable after 3 attempts: " + last_error);
        for (const auto& [d, v] : *parsed) outcome.scores.at(d) = v;
    }
    return outcome;
}

std::array<std::string_view, kReportColumns> report_column_names() { return kColumnNames; }

std::array<std::optional<double>, kReportColumns> row_values(const EvaluationRow& row) {
    std::array<std::optional<double>, kReportColumns> v{};
    for (std::size_t i = 0; i < 4; ++i) v[i] = row.overlap.bleu[i];
    v[4] = row.overlap.rouge_l;
    for (auto d : kAllJudgeDimensions) {
        if (const auto& s = row.judge.at(d)) v[kOverlapColumns + static_cast<std::size_t>(d)] = *s;
    }
    return v;
}

EvaluationReport aggregate(std::vector<EvaluationRow> rows, std::string judge_model_id) {
    if (rows.empty()) fail(ErrorKind::Validation, "cannot aggregate an empty set of rows");
    std::stable_sort(rows.begin(), rows.end(), [](const EvaluationRow& a, const EvaluationRow& b) {
        if (a.item_id != b.item_id) return a.item_id < b.item_id;
        return static_cast<int>(a.mode) < static_cast<int>(b.mode);
    });
    EvaluationReport report;
    report.judge_model_id = std::move(judge_model_id);

    for (auto mode : kAllModes) {
        ModeSummary summary;
        summary.mode = mode;
        std::array<double, kReportColumns> sums{};
        std::array<std::size_t, kReportColumns> counts{};
        for (const auto& row : rows) {
            if (row.mode != mode) continue;
            ++summary.rows;
            auto values = row_values(row);
            for (std::size_t c = 0; c < kReportColumns; ++c) {
                if (values[c]) {
                    sums[c] += *values[c];
                    ++counts[c];
                }
            }
        }
        if (summary.rows == 0) continue;
        for (std::size_t c = 0; c < kReportColumns; ++c) {
            if (counts[c] == 0) continue;
            double mean = sums[c] / static_cast<double>(counts[c]);
            if (c < kOverlapColumns) mean *= 100.0;
            summary.means[c] = round2(mean);
        }
        report.summaries.push_back(summary);
    }

    for (std::size_t c = 0; c < kReportColumns; ++c) {
        std::optional<double> best;
        for (const auto& s : report.summaries) {
            if (s.means[c] && (!best || *s.means[c] > *best)) best = s.means[c];
        }
        if (!best) continue;
        for (const auto& s : report.summaries) {
            if (s.means[c] && *s.means[c] == *best) report.best[c].push_back(s.mode);
        }
    }
    report.rows = std::move(rows);
    return report;
}

ordered_json to_json(const EvaluationReport& report) {
    ordered_json rows = ordered_json::array();
    for (const auto& r : report.rows) {
        ordered_json row;
        row["item_id"] = r.item_id;
        row["mode"] = to_label(r.mode);
        row["run_id"] = r.run_id;
        ordered_json overlap;
        for (std::size_t n = 0; n < 4; ++n) overlap["bleu_" + std::to_string(n + 1)] = r.overlap.bleu[n];
        overlap["rouge_l"] = r.overlap.rouge_l;
        row["overlap"] = std::move(overlap);
        ordered_json judge_json;
        for (auto d : kAllJudgeDimensions) judge_json[std::string(to_key(d))] = optional_int(r.judge.at(d));
        row["judge"] = std::move(judge_json);
        row["judge_prompts"] = r.judge_prompts;
        rows.push_back(std::move(row));
    }
    ordered_json summaries = ordered_json::array();
    for (const auto& s : report.summaries) {
        ordered_json m;
        m["mode"] = to_label(s.mode);
        m["rows"] = s.rows;
        ordered_json means;
        for (std::size_t c = 0; c < kReportColumns; ++c) means[std::string(kColumnKeys[c])] = optional_number(s.means[c]);
        m["means"] = std::move(means);
        summaries.push_back(std::move(m));
    }
    ordered_json best;
    for (std::size_t c = 0; c < kReportColumns; ++c) {
        ordered_json modes = ordered_json::array();
        for (auto m : report.best[c]) modes.push_back(to_label(m));
        best[std::string(kColumnKeys[c])] = std::move(modes);
    }
    ordered_json j;
    j["config"] = {{"judge_model_id", report.judge_model_id}, {"overlap_scale", 100}};
    j["summaries"] = std::move(summaries);
    j["best"] = std::move(best);
    j["rows"] = std::move(rows);
    j["warnings"] = report.warnings;
    return j;
}

std::string render_table(const EvaluationReport& report) {
    const std::size_t mode_width = 18;
    const std::size_t col_width = 10;
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.insert(0, w - s.size(), ' ');
        return s;
    };
    std::string out = "Mode";
    out.append(mode_width - 4, ' ');
    for (auto name : kColumnNames) out += pad(std::string(name), col_width);
    out += "\n";
    for (const auto& s : report.summaries) {
        std::string label(to_label(s.mode));
        out += label;
        out.append(mode_width > label.size() ? mode_width - label.size() : 1, ' ');
        for (std::size_t c = 0; c < kReportColumns; ++c) {
            std::string cell = "--";
            if (s.means[c]) {
                cell = text::format_fixed(*s.means[c], 2);
                bool is_best = std::find(report.best[c].begin(), report.best[c].end(), s.mode) != report.best[c].end();
                if (is_best) cell = "*" + cell;
            }
            out += pad(cell, col_width);
        }
        out += "\n";
    }
    out += "(* best per column; BLEU and ROUGE-L x100; judge scores on a 1-5 scale; judge model " +
           report.judge_model_id + ")\n";
    return out;
}

EvaluationReport evaluate(const EvaluationInputs& inputs, ModelBackend& judge_backend, std::size_t parallelism) {
    const auto ids = item_ids(inputs.items);
    std::map<std::pair<std::string, std::string>, std::size_t> by_key;
    for (std::size_t i = 0; i < inputs.items.size(); ++i) {
        by_key.emplace(std::make_pair(inputs.items[i].painting_id, inputs.items[i].question), i);
    }
    std::vector<std::string> warnings;
    std::vector<std::pair<const RunRecord*, std::size_t>> pairs;
    for (const auto& rec : inputs.records) {
        auto it = by_key.find({rec.artwork.painting_id, rec.question});
        if (it == by_key.end()) {
            warnings.push_back("run " + rec.run_id + " matches no dataset item; skipped");
            spdlog::warn("run {} matches no dataset item; skipped", rec.run_id);
            continue;
        }
        pairs.emplace_back(&rec, it->second);
    }
    if (pairs.empty()) fail(ErrorKind::Validation, "no run record matches a dataset item");

    // Enforce the self-evaluation guard for every record before any judge call.
    for (const auto& [rec, _] : pairs) {
        auto gen = rec->backends.find("generator");
        if (gen != rec->backends.end() && gen->second.model_id == judge_backend.model_id()) {
            fail(ErrorKind::Config, "judge model '" + judge_backend.model_id() + "' is the generator model of run " +
                                        rec->run_id + "; use a different judge to avoid self-evaluation");
        }
    }

    auto rows = parallel_map(pairs.size(), parallelism, [&](std::size_t i) {
        const auto& [rec, item_index] = pairs[i];
        const auto& item = inputs.items[item_index];
        EvaluationRow row;
        row.item_id = ids[item_index];
        row.mode = rec->mode;
        row.run_id = rec->run_id;
        row.overlap = overlap_scores(rec->answer.final_text, item.reference_answer);
        JudgeOutcome outcome = judge(item, *rec, judge_backend);
        row.judge = outcome.scores;
        for (const auto& r : outcome.requests) row.judge_prompts.push_back(r.joined_text());
        return row;
    });
    EvaluationReport report = aggregate(std::move(rows), judge_backend.model_id());
    report.warnings = std::move(warnings);
    return report;
}

}  // namespace amar
