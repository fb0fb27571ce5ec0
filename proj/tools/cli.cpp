#include "cli.hpp"

#include "amar/benchmark.hpp"
#include "amar/config.hpp"
#include "amar/evaluation.hpp"
#include "amar/ingestion.hpp"
#include "amar/parallel.hpp"
#include "amar/pipeline.hpp"
#include "amar/text.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace amar::cli {

namespace {

using ordered_json = nlohmann::ordered_json;

struct GlobalOptions {
    std::string config_path = "amar.json";
    std::optional<std::int64_t> seed;
    bool verbose = false;
};

EngineConfig load_config(const GlobalOptions& g) {
    EngineConfig c = load_engine_config(g.config_path);
    if (g.seed) c.seed = g.seed;
    return c;
}

std::shared_ptr<ModelBackend> backend(const EngineConfig& c, std::string_view role) {
    std::optional<std::filesystem::path> cache;
    if (!c.paths.cache.empty()) cache = c.resolve(c.paths.cache) / (std::string(role) + ".jsonl");
    return make_backend(c.backend_for(role), cache);
}

bool any_remote(const EngineConfig& c, std::initializer_list<std::string_view> roles) {
    return std::any_of(roles.begin(), roles.end(),
                       [&](std::string_view r) { return c.backends.at(std::string(r)).kind == BackendKind::Remote; });
}

ArtworkRecord read_artwork(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot read artwork file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return artwork_from_json(nlohmann::json::parse(buf.str()));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Validation, "artwork file " + path + " is not valid JSON: " + e.what());
    }
}

std::vector<PipelineMode> parse_modes(const std::string& list) {
    std::vector<PipelineMode> modes;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = text::trim(item);
        if (item.empty()) continue;
        if (item == "all") {
            modes.assign(std::begin(kAllModes), std::end(kAllModes));
            continue;
        }
        auto m = parse_pipeline_mode(item);
        if (std::find(modes.begin(), modes.end(), m) == modes.end()) modes.push_back(m);
    }
    if (modes.empty()) fail(ErrorKind::Config, "no modes given");
    return modes;
}

PipelineBackends pipeline_backends(const EngineConfig& c, const std::vector<PipelineMode>& modes) {
    PipelineBackends b;
    b.generator = backend(c, "generator");
    bool plan = std::any_of(modes.begin(), modes.end(), uses_plan);
    bool retrieval = std::any_of(modes.begin(), modes.end(), uses_retrieval);
    if (plan) b.planner = backend(c, "planner");
    if (retrieval) {
        b.embedder = backend(c, "embedder");
        if (c.retrieval.scorer == ScorerKind::Remote) b.scorer = backend(c, "scorer");
    }
    return b;
}

PipelineOptions pipeline_options(const EngineConfig& c) {
    PipelineOptions o;
    o.retrieval = c.retrieval;
    o.planner_sees_description = c.planner_sees_description;
    o.seed = c.seed.value_or(0);
    o.record_timings = any_remote(c, {"planner", "generator", "embedder", "scorer"});
    o.config_echo = to_json(c);
    return o;
}

struct Resources {
    std::optional<KnowledgeGraph> graph;
    std::optional<VectorIndex> index;
};

Resources load_resources(const EngineConfig& c, const std::vector<PipelineMode>& modes) {
    Resources r;
    if (std::any_of(modes.begin(), modes.end(), uses_retrieval)) {
        r.graph = load_graph(c.resolve(c.paths.graph));
        r.index = load_index(c.resolve(c.paths.index));
    }
    return r;
}

void write_text(const std::filesystem::path& path, const std::string& body) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << body;
    if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

std::string error_kind_name(ErrorKind k) { return std::string(to_string(k)); }

void print_error(std::ostream& err, const std::string& kind, int code, const std::string& message,
                 const std::string& stage = {}) {
    ordered_json e;
    e["kind"] = kind;
    e["code"] = code;
    if (!stage.empty()) e["stage"] = stage;
    e["message"] = message;
    err << ordered_json{{"error", e}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"A-MAR engine: plan, retrieve from an art knowledge graph, answer and evaluate"};
    app.name("amar");
    app.require_subcommand(1);
    GlobalOptions g;
    std::int64_t seed_value = 0;
    app.add_option("--config", g.config_path, "Engine config file")->capture_default_str();
    auto* seed_opt = app.add_option("--seed", seed_value, "Seed override for mock backends");
    app.add_flag("-v,--verbose", g.verbose, "Log progress to stderr");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Chunk, extract and merge a text corpus into a knowledge graph");
    std::string corpus, graph_out;
    ingest->add_option("corpus", corpus, "Directory of .txt files or a JSON Lines manifest")->required();
    ingest->add_option("--out", graph_out, "Output graph file (default: paths.graph)");

    // index
    auto* index_cmd = app.add_subcommand("index", "Embed every graph node and save the vector index");
    std::string graph_in, index_out;
    index_cmd->add_option("--graph", graph_in, "Input graph file (default: paths.graph)");
    index_cmd->add_option("--out", index_out, "Output index file (default: paths.index)");

    // plan
    auto* plan_cmd = app.add_subcommand("plan", "Produce a reasoning plan and retrieval intent");
    std::string artwork_path, question;
    bool text_only = false;
    plan_cmd->add_option("--artwork", artwork_path, "Artwork record JSON file")->required();
    plan_cmd->add_option("--question", question, "Question about the artwork")->required();
    plan_cmd->add_flag("--text-only", text_only, "Plan without the image");

    // ask
    auto* ask = app.add_subcommand("ask", "Run the pipeline for one question and write its run record");
    std::string mode_label = "amar", runs_out;
    ask->add_option("--artwork", artwork_path, "Artwork record JSON file")->required();
    ask->add_option("--question", question, "Question about the artwork")->required();
    ask->add_option("--mode", mode_label, "mllm-cot, static-retrieval, text-only-planner or amar")->capture_default_str();
    ask->add_option("--out-dir", runs_out, "Run record directory (default: paths.runs)");

    // bench
    auto* bench = app.add_subcommand("bench", "Run every dataset item through one or more modes");
    std::string dataset_path, modes_list = "all";
    std::size_t parallelism = 0;
    bench->add_option("--dataset", dataset_path, "Dataset file (default: paths.dataset)");
    bench->add_option("--modes", modes_list, "Comma-separated modes, or 'all'")->capture_default_str();
    bench->add_option("--parallelism", parallelism, "Concurrent items (default: config parallelism)");
    bench->add_option("--out-dir", runs_out, "Run record directory (default: paths.runs)");

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score run records against a dataset");
    std::string runs_in, report_out;
    evaluate_cmd->add_option("--dataset", dataset_path, "Dataset file (default: paths.dataset)");
    evaluate_cmd->add_option("--runs", runs_in, "Run record directory (default: paths.runs)");
    evaluate_cmd->add_option("--out", report_out, "Report file (default: <runs>/report.json)");
    evaluate_cmd->add_option("--parallelism", parallelism, "Concurrent judge items (default: config parallelism)");

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "Print dataset statistics");
    bool stats_json = false;
    stats_cmd->add_option("--dataset", dataset_path, "Dataset file (default: paths.dataset)");
    stats_cmd->add_flag("--json", stats_json, "Print JSON instead of a table");

    // construct-qa
    auto* construct = app.add_subcommand("construct-qa", "Filter painting records and build benchmark items");
    std::string records_path, dataset_out;
    construct->add_option("records", records_path, "Painting records (JSON Lines)")->required();
    construct->add_option("out", dataset_out, "Output dataset file")->required();
    construct->add_option("--parallelism", parallelism, "Concurrent records (default: config parallelism)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        print_error(err, "config", 1, e.what());
        return 1;
    }
    if (*seed_opt) g.seed = seed_value;
    spdlog::set_level(g.verbose ? spdlog::level::info : spdlog::level::warn);

    try {
        if (*ingest) {
            EngineConfig c = load_config(g);
            auto extractor = backend(c, "extractor");
            auto docs = load_corpus(corpus);
            KnowledgeGraph graph;
            IngestStats stats = ingest_corpus(docs, graph, *extractor, {c.chunking, c.parallelism});
            stats.merged_duplicates = graph.merge_duplicates(c.dedup_threshold).merges();
            stats.nodes = graph.node_count();
            stats.edges = graph.edge_count();
            auto path = graph_out.empty() ? c.resolve(c.paths.graph) : std::filesystem::path(graph_out);
            save_graph(graph, path);
            ordered_json j = stats.to_json();
            j["graph"] = path.string();
            out << j.dump() << '\n';
        } else if (*index_cmd) {
            EngineConfig c = load_config(g);
            auto graph = load_graph(graph_in.empty() ? c.resolve(c.paths.graph) : std::filesystem::path(graph_in));
            auto embedder = backend(c, "embedder");
            VectorIndex index = build_index(graph, *embedder, c.parallelism);
            auto path = index_out.empty() ? c.resolve(c.paths.index) : std::filesystem::path(index_out);
            save_index(index, path);
            out << ordered_json{{"entries", index.size()}, {"dimension", index.dimension()}, {"index", path.string()}}.dump()
                << '\n';
        } else if (*plan_cmd) {
            EngineConfig c = load_config(g);
            ArtworkRecord artwork = read_artwork(artwork_path);
            auto planner = backend(c, "planner");
            PlannerOptions popts{!text_only, c.planner_sees_description};
            PlanOutcome outcome = generate_plan(artwork, question, *planner, popts);
            RetrievalIntent intent = derive_retrieval_intent(outcome.plan, artwork);
            ordered_json j;
            j["plan"] = to_json(outcome.plan);
            j["intent"] = to_json(intent);
            j["violations"] = validate_plan(outcome.plan, {}).violations;
            j["attempts"] = outcome.attempts;
            out << j.dump(2) << '\n';
        } else if (*ask) {
            EngineConfig c = load_config(g);
            PipelineMode mode = parse_pipeline_mode(mode_label);
            ArtworkRecord artwork = read_artwork(artwork_path);
            Resources res = load_resources(c, {mode});
            PipelineBackends backends = pipeline_backends(c, {mode});
            RunRecord record = run_pipeline(artwork, question, res.graph ? &*res.graph : nullptr,
                                            res.index ? &*res.index : nullptr, pipeline_options(c), mode, backends);
            auto dir = runs_out.empty() ? c.resolve(c.paths.runs) : std::filesystem::path(runs_out);
            auto path = write_run_record(record, dir);
            out << ordered_json{{"run_id", record.run_id}, {"record", path.string()},
                                {"grounding_violations", record.grounding_violations.size()}}.dump()
                << '\n';
        } else if (*bench) {
            EngineConfig c = load_config(g);
            auto modes = parse_modes(modes_list);
            auto items = load_dataset(dataset_path.empty() ? c.resolve(c.paths.dataset) : std::filesystem::path(dataset_path));
            auto ids = item_ids(items);
            std::vector<BatchItem> batch;
            for (std::size_t i = 0; i < items.size(); ++i) batch.push_back({ids[i], artwork_of(items[i]), items[i].question});
            Resources res = load_resources(c, modes);
            PipelineBackends backends = pipeline_backends(c, modes);
            PipelineOptions opts = pipeline_options(c);
            auto dir = runs_out.empty() ? c.resolve(c.paths.runs) : std::filesystem::path(runs_out);
            std::size_t par = parallelism ? parallelism : c.parallelism;

            std::string manifest;
            ordered_json failures = ordered_json::array();
            std::size_t written = 0;
            for (auto mode : modes) {
                BatchResult result = run_batch(batch, res.graph ? &*res.graph : nullptr,
                                               res.index ? &*res.index : nullptr, opts, mode, backends, par);
                std::size_t next_record = 0;
                for (std::size_t i = 0; i < batch.size(); ++i) {
                    auto failed = std::find_if(result.failures.begin(), result.failures.end(),
                                               [&](const BatchFailure& f) { return f.index == i; });
                    ordered_json line;
                    line["item_id"] = batch[i].item_id;
                    line["mode"] = to_label(mode);
                    if (failed != result.failures.end()) {
                        line["status"] = "failed";
                        line["stage"] = failed->stage;
                        line["message"] = failed->message;
                        failures.push_back(line);
                    } else {
                        const RunRecord& rec = result.records[next_record++];
                        auto path = write_run_record(rec, dir);
                        line["status"] = "ok";
                        line["run_id"] = rec.run_id;
                        line["record"] = path.filename().string();
                        ++written;
                    }
                    manifest += line.dump() + "\n";
                }
            }
            write_text(dir / "manifest.jsonl", manifest);
            out << ordered_json{{"items", batch.size()}, {"modes", modes.size()}, {"records", written},
                                {"failures", failures}, {"runs", dir.string()}}.dump()
                << '\n';
        } else if (*evaluate_cmd) {
            EngineConfig c = load_config(g);
            EvaluationInputs inputs;
            inputs.items = load_dataset(dataset_path.empty() ? c.resolve(c.paths.dataset) : std::filesystem::path(dataset_path));
            auto dir = runs_in.empty() ? c.resolve(c.paths.runs) : std::filesystem::path(runs_in);
            inputs.records = load_run_records(dir);
            auto judge_backend = backend(c, "judge");
            EvaluationReport report = evaluate(inputs, *judge_backend, parallelism ? parallelism : c.parallelism);
            auto path = report_out.empty() ? dir / "report.json" : std::filesystem::path(report_out);
            write_text(path, to_json(report).dump(2) + "\n");
            out << render_table(report);
            out << "report: " << path.string() << '\n';
        } else if (*stats_cmd) {
            std::filesystem::path path;
            if (!dataset_path.empty()) {
                path = dataset_path;
            } else {
                EngineConfig c = load_config(g);
                path = c.resolve(c.paths.dataset);
            }
            DatasetStats stats = compute_stats(load_dataset(path));
            if (stats_json) {
                out << to_json(stats).dump() << '\n';
            } else {
                out << render_stats(stats);
            }
        } else if (*construct) {
            EngineConfig c = load_config(g);
            auto records = load_painting_records(records_path);
            ConstructionConstraints constraints;
            constraints.filter.min_desc_words = c.min_desc_words;
            auto kept = filter_paintings(records, constraints.filter);
            auto annotator = backend(c, "annotator");
            struct Built {
                std::optional<BenchmarkItem> item;
                std::string error;
            };
            auto built = parallel_map(kept.size(), parallelism ? parallelism : c.parallelism, [&](std::size_t i) {
                Built b;
                try {
                    b.item = construct_qa(kept[i], *annotator, constraints);
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::Validation) throw;
                    b.error = e.what();
                }
                return b;
            });
            std::vector<BenchmarkItem> items;
            ordered_json failed = ordered_json::array();
            for (std::size_t i = 0; i < built.size(); ++i) {
                if (built[i].item) {
                    items.push_back(std::move(*built[i].item));
                } else {
                    failed.push_back({{"painting_id", kept[i].painting_id}, {"message", built[i].error}});
                }
            }
            save_dataset(items, dataset_out);
            out << ordered_json{{"records", records.size()}, {"passed_filter", kept.size()}, {"items", items.size()},
                                {"discarded", failed}, {"dataset", dataset_out}}.dump()
                << '\n';
        }
    } catch (const PipelineError& e) {
        print_error(err, error_kind_name(e.kind()), static_cast<int>(e.kind()), e.what(), e.stage());
        return static_cast<int>(e.kind());
    } catch (const Error& e) {
        print_error(err, error_kind_name(e.kind()), static_cast<int>(e.kind()), e.what());
        return static_cast<int>(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        print_error(err, "io", 2, e.what());
        return 2;
    } catch (const nlohmann::json::exception& e) {
        print_error(err, "validation", 4, e.what());
        return 4;
    } catch (const std::exception& e) {
        print_error(err, "backend", 3, e.what());
        return 3;
    }
    return 0;
}

}  // namespace amar::cli
