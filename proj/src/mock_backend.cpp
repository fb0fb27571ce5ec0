#include "amar/backend.hpp"

#include "amar/error.hpp"
#include "amar/text.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

namespace amar {

namespace {

using ordered_json = nlohmann::ordered_json;

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Uniform in [-1, 1) from the top 53 bits.
double unit_signed(std::uint64_t x) {
    return 2.0 * (static_cast<double>(x >> 11) * 0x1.0p-53) - 1.0;
}

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& pool, std::uint64_t& state) {
    return pool[splitmix64(state) % N];
}

constexpr std::array<std::string_view, 3> kVisualGoals = {
    "Identify the salient visual elements, figures and composition of the artwork",
    "Describe the depicted scene, its colour palette and the arrangement of forms",
    "Examine the visible motifs and gestures that carry the painting's meaning",
};
constexpr std::array<std::string_view, 3> kMetadataGoals = {
    "Situate the work using its artist, date and technique",
    "Relate the recorded technique and timeframe to the visual choices",
    "Use the title and authorship to narrow the interpretive context",
};
constexpr std::array<std::string_view, 3> kKgGoals = {
    "Retrieve the movement, school and cultural history connected to the artist",
    "Gather background on the themes and conventions linked to this subject",
    "Collect contextual knowledge about the period's artistic and religious practices",
};
constexpr std::array<std::string_view, 3> kCommonGoals = {
    "Synthesize the evidence into an interpretation that answers the question",
    "Combine visual and contextual findings into a coherent explanation",
    "Draw the final interpretive conclusion from the gathered evidence",
};

constexpr std::array<std::string_view, 5> kAllEvidence = {"Visual", "Metadata", "Description",
                                                          "KG-Background", "Common-Knowledge"};
constexpr std::array<std::string_view, 22> kEntityStopwords = {
    "The", "A", "An", "This", "That", "These", "In", "On", "At", "His", "Her", "Its",
    "Their", "It", "He", "She", "They", "During", "After", "Before", "As", "When"};

constexpr std::array<std::string_view, 5> kNodeTypeLabels = {
    "Artist", "Theme", "Culture & History", "Art Style & Technique", "Art Movement & School"};

std::string step_text_for(std::string_view tag, std::uint64_t& state) {
    static constexpr std::array<std::string_view, 3> kVisual = {
        "The composition places the main figures in the foreground, and their gestures guide the viewer's eye",
        "Visible brushwork and a restrained palette emphasise the central motif of the scene",
        "The arrangement of light and shadow isolates the subject from its surroundings",
    };
    static constexpr std::array<std::string_view, 3> kMetadata = {
        "The recorded artist and date place the work within a specific regional tradition",
        "The technique listed in the metadata explains the surface qualities seen in the image",
        "The title and timeframe indicate the intended subject and its audience",
    };
    static constexpr std::array<std::string_view, 3> kDescription = {
        "The curated description notes the commission and the symbolic programme of the work",
        "According to the description the painting was admired for its narrative clarity",
        "The description highlights the relation between the figures and the setting",
    };
    static constexpr std::array<std::string_view, 3> kKg = {
        "Retrieved background links the artist to a movement that valued symbolic detail",
        "The knowledge graph connects the theme to devotional practices of the period",
        "Contextual knowledge relates the style to contemporary workshops and patrons",
    };
    static constexpr std::array<std::string_view, 3> kCommon = {
        "Taken together these observations show how form and context create the work's meaning",
        "Combining the evidence suggests the painting invites reflection on its central theme",
        "The synthesis indicates that the visual choices serve the interpretive message",
    };
    if (tag == "Visual") return std::string(pick(kVisual, state));
    if (tag == "Metadata") return std::string(pick(kMetadata, state));
    if (tag == "Description") return std::string(pick(kDescription, state));
    if (tag == "KG-Background") return std::string(pick(kKg, state));
    return std::string(pick(kCommon, state));
}

std::vector<std::string> split_list(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            if (auto t = text::trim(cur); !t.empty()) out.push_back(t);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (auto t = text::trim(cur); !t.empty()) out.push_back(t);
    return out;
}

std::string strip_punct(std::string token) {
    auto is_p = [](char c) { return std::string_view(".,;:!?\"'()[]{}").find(c) != std::string_view::npos; };
    while (!token.empty() && is_p(token.back())) token.pop_back();
    std::size_t b = 0;
    while (b < token.size() && is_p(token[b])) ++b;
    return token.substr(b);
}

bool is_capitalized(const std::string& token) {
    return !token.empty() && token[0] >= 'A' && token[0] <= 'Z';
}

bool ends_sentence(const std::string& token) {
    return !token.empty() && (token.back() == '.' || token.back() == '!' || token.back() == '?');
}

ordered_json mock_plan(std::uint64_t state) {
    ordered_json steps = ordered_json::array();
    const std::array<std::pair<std::string_view, std::string_view>, 4> plan = {{
        {pick(kVisualGoals, state), "Visual"},
        {pick(kMetadataGoals, state), "Metadata"},
        {pick(kKgGoals, state), "KG-Background"},
        {pick(kCommonGoals, state), "Common-Knowledge"},
    }};
    int idx = 1;
    for (const auto& [goal, evidence] : plan) {
        steps.push_back({{"step", idx++}, {"goal", goal}, {"evidence", evidence}});
    }
    return {{"steps", std::move(steps)}};
}

// Capitalized word runs of up to three tokens become entities; entities that
// share a sentence are related.
ordered_json mock_extraction(const std::string& document, std::int64_t seed) {
    auto tokens = text::split_whitespace(document);
    std::vector<std::pair<std::string, std::size_t>> mentions;  // (name, sentence)
    std::size_t sentence = 0;
    std::vector<std::string> sentence_text(1);
    std::vector<std::string> run;
    auto flush = [&] {
        while (!run.empty() &&
               std::find(kEntityStopwords.begin(), kEntityStopwords.end(), run.front()) != kEntityStopwords.end()) {
            run.erase(run.begin());
        }
        if (!run.empty()) mentions.emplace_back(text::join(run, " "), sentence);
        run.clear();
    };
    for (const auto& raw : tokens) {
        if (!sentence_text.back().empty()) sentence_text.back() += ' ';
        sentence_text.back() += raw;
        std::string tok = strip_punct(raw);
        if (is_capitalized(tok)) {
            if (run.size() == 3) flush();
            run.push_back(tok);
        } else {
            flush();
        }
        if (ends_sentence(raw) || raw.back() == ',' || raw.back() == ';') flush();
        if (ends_sentence(raw)) {
            ++sentence;
            sentence_text.emplace_back();
        }
    }
    flush();

    ordered_json entities = ordered_json::array();
    ordered_json relations = ordered_json::array();
    std::vector<std::pair<std::string, std::size_t>> kept;
    std::set<std::string> seen;
    for (const auto& [name, sent] : mentions) {
        if (kept.size() >= 8) break;
        if (!seen.insert(text::to_lower_ascii(name)).second) continue;
        kept.emplace_back(name, sent);
        auto type_index = text::hash64(std::to_string(seed) + "|type|" + text::to_lower_ascii(name)) %
                          kNodeTypeLabels.size();
        entities.push_back({{"entity_name", name},
                            {"entity_type", kNodeTypeLabels[type_index]},
                            {"entity_description", sentence_text[sent]}});
    }
    for (std::size_t i = 1; i < kept.size(); ++i) {
        if (kept[i].second == kept[i - 1].second) {
            relations.push_back({{"source_entity", kept[i - 1].first},
                                 {"target_entity", kept[i].first},
                                 {"relationship_description",
                                  kept[i - 1].first + " is mentioned together with " + kept[i].first}});
        }
    }
    return {{"entities", std::move(entities)}, {"relationships", std::move(relations)}};
}

ordered_json mock_answer(const std::string& prompt, std::uint64_t state) {
    std::vector<std::string> tags;
    if (auto seq = find_marked_line(prompt, prompt_marker::kGroundingSequence)) {
        tags = split_list(*seq);
    }
    if (tags.empty()) {
        std::size_t lo = 3;
        std::size_t hi = 5;
        if (auto range = find_marked_line(prompt, prompt_marker::kStepRange)) {
            auto dash = range->find('-');
            if (dash != std::string::npos) {
                lo = std::stoul(range->substr(0, dash));
                hi = std::stoul(range->substr(dash + 1));
            }
        }
        std::size_t n = lo + splitmix64(state) % (hi - lo + 1);
        for (std::size_t i = 0; i < n; ++i) {
            tags.emplace_back(i == 0 ? "Visual" : i + 1 == n ? "Common-Knowledge" : pick(kAllEvidence, state));
        }
    }
    ordered_json steps = ordered_json::array();
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        std::string t = step_text_for(tags[i], state) + ".";
        texts.push_back(t);
        steps.push_back({{"step", i + 1}, {"text", t}, {"grounding", tags[i]}});
    }
    return {{"steps", std::move(steps)}, {"final_answer", text::join(texts, " ")}};
}

ordered_json mock_judge(const std::string& prompt, std::uint64_t state) {
    ordered_json out = ordered_json::object();
    auto dims = find_marked_line(prompt, prompt_marker::kJudgeDimensions);
    if (!dims) return out;
    for (const auto& d : split_list(*dims)) out[d] = 1 + static_cast<int>(splitmix64(state) % 5);
    return out;
}

ordered_json mock_construct(const std::string& prompt, std::uint64_t state) {
    std::string title = find_marked_line(prompt, prompt_marker::kTitle).value_or("this painting");
    if (title.empty()) title = "this painting";
    std::vector<std::string> allowed;
    if (auto line = find_marked_line(prompt, prompt_marker::kAllowedTags)) allowed = split_list(*line);
    if (allowed.empty()) allowed = {"Visual", "Metadata", "KG-Background", "Common-Knowledge"};

    static constexpr std::array<std::string_view, 3> kOpeners = {
        "What visual elements in", "In what way does the composition of", "What evidence in"};
    std::string question = std::string(pick(kOpeners, state)) + " \"" + title +
                           "\" reveal how the artist connects the depicted subject to the religious, "
                           "cultural and stylistic context of its period?";

    std::size_t n_steps = 4 + splitmix64(state) % 2;
    std::vector<std::string> tags;
    for (std::size_t i = 0; i < n_steps; ++i) {
        tags.push_back(i < allowed.size() ? allowed[i] : allowed[splitmix64(state) % allowed.size()]);
    }
    ordered_json cot = ordered_json::array();
    std::vector<std::string> sentences;
    std::set<std::string> evidence;
    for (const auto& tag : tags) {
        std::string t = step_text_for(tag, state) + ".";
        cot.push_back({{"text", t}, {"grounding", tag}});
        sentences.push_back(t);
        evidence.insert(tag);
    }
    std::string answer = "In \"" + title + "\" the interpretation unfolds in several steps. " +
                         text::join(sentences, " ") +
                         " Read together, the visual evidence, the recorded metadata and the wider "
                         "historical background show that the painting is not a simple record of a "
                         "scene but a deliberate statement shaped by the expectations of its patrons, "
                         "the conventions of its school and the beliefs of its audience.";
    return {{"question", question},
            {"reference_answer", answer},
            {"cot_steps", std::move(cot)},
            {"evidence_types", std::vector<std::string>(evidence.begin(), evidence.end())},
            {"difficulty", n_steps >= 5 ? "High" : "Medium"},
            {"planning_complexity", "multi-hop"}};
}

}  // namespace

MockBackend::MockBackend(std::int64_t seed, std::string model_id, std::size_t embedding_dim)
    : seed_(seed), model_id_(std::move(model_id)), embedding_dim_(embedding_dim) {
    if (embedding_dim_ == 0) fail(ErrorKind::Config, "mock embedding_dim must be positive");
}

std::uint64_t MockBackend::digest(const ModelRequest& request) const {
    return text::hash64(std::to_string(seed_) + "|" + canonical_json(request));
}

std::string MockBackend::complete(const ModelRequest& request) {
    validate_request(request);
    std::uint64_t state = digest(request);
    const std::string prompt = request.joined_text();
    switch (request.purpose) {
        case Purpose::Plan:
            return mock_plan(state).dump();
        case Purpose::Extract: {
            std::string document;
            for (const auto& p : request.parts) {
                if (p.kind == RequestPart::Kind::Text) document = p.data;
            }
            return mock_extraction(document, seed_).dump();
        }
        case Purpose::Generate:
            return mock_answer(prompt, state).dump();
        case Purpose::Score:
            return text::format_fixed(static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53, 4);
        case Purpose::Judge:
            return mock_judge(prompt, state).dump();
        case Purpose::Construct:
            return mock_construct(prompt, state).dump();
        case Purpose::Embed:
            break;
    }
    fail(ErrorKind::Validation, "embed requests must go through embed()");
}

Embedding MockBackend::embed(std::string_view input) {
    validate_request({Purpose::Embed, {RequestPart::text(std::string(input))}});
    Embedding v(embedding_dim_, 0.0);
    for (const auto& raw : text::split_whitespace(input)) {
        std::string token = text::to_lower_ascii(strip_punct(raw));
        if (token.empty()) token = raw;
        std::uint64_t state = text::hash64(std::to_string(seed_) + "|tok|" + token);
        for (auto& x : v) x += unit_signed(splitmix64(state));
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) fail(ErrorKind::Backend, "mock embedding degenerated to the zero vector");
    for (auto& x : v) x /= norm;
    return v;
}

}  // namespace amar
