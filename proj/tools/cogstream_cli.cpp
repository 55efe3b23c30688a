// cogstream command-line entry point.
//
//   cogstream make-synthetic --out data/session
//   cogstream simulate --manifest data/session/manifest.json --stream 0 --out report.jsonl
//   cogstream eval report.jsonl
//
// Every subcommand prints JSON on success. Failures exit non-zero with
// {"error": {"kind": ..., "message": ...}} on stderr.

#include "cogstream/context_assembly.hpp"
#include "cogstream/dataset_pipeline.hpp"
#include "cogstream/dialogue_retrieval.hpp"
#include "cogstream/engine_config.hpp"
#include "cogstream/error.hpp"
#include "cogstream/feature_store.hpp"
#include "cogstream/log.hpp"
#include "cogstream/simulator.hpp"
#include "cogstream/stream_compress.hpp"
#include "cogstream/synthetic.hpp"
#include "cogstream/tsc_cluster.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cogstream;

namespace {

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool verbose = false;
};

EngineConfig resolve_config(const GlobalOptions& g) {
    EngineConfig c = g.config_path.empty() ? EngineConfig{} : load_config(g.config_path);
    if (g.seed) {
        c.seed = *g.seed;
        c.paths.seed = *g.seed;
    }
    validate(c);
    return c;
}

void emit(const GlobalOptions& g, const std::string& text) {
    if (g.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(g.out, std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open " + g.out + " for writing");
    out << text;
    if (!out) throw Error(ErrorKind::io, "failed writing " + g.out);
}

void emit(const GlobalOptions& g, const json& doc) { emit(g, doc.dump(2) + "\n"); }

void emit_manifest(const GlobalOptions& g, const SessionManifest& m) {
    if (g.out.empty()) {
        std::cout << manifest_to_json(m).dump(2) << '\n';
        return;
    }
    save_manifest(g.out, m);
}

fs::path base_dir_of(const std::string& manifest_path) {
    fs::path parent = fs::path(manifest_path).parent_path();
    return parent.empty() ? fs::path(".") : parent;
}

const QARecord& require_qa(const SessionManifest& m, int qa_id) {
    const QARecord* q = m.find_qa(qa_id);
    if (!q) throw Error(ErrorKind::invalid_argument, "manifest has no qa " + std::to_string(qa_id));
    return *q;
}

// Frames for a standalone subcommand: an embedding file, or every segment of
// a manifest that has ended by `until`.
std::vector<FrameFeature> gather_frames(const std::string& embeddings, const std::string& manifest_path,
                                        std::optional<double> until) {
    if (!embeddings.empty()) return load_embeddings(embeddings);
    if (manifest_path.empty()) throw Error(ErrorKind::invalid_argument, "give --embeddings or --manifest");
    const SessionManifest m = load_manifest(manifest_path);
    FrameStore store(m, base_dir_of(manifest_path));
    const double t = until.value_or(m.segments.empty() ? 0.0 : m.segments.back().end_s);
    return store.frames_until(t);
}

ClusterConfig cluster_config(const EngineConfig& c, std::size_t num_frames, std::optional<std::size_t> k) {
    ClusterConfig cc;
    cc.k = k.value_or(choose_k(num_frames, c.cluster_ratio));
    cc.alpha_time = c.alpha_time;
    cc.max_iters = c.max_iters;
    cc.epsilon = c.epsilon;
    cc.seed = c.seed;
    return cc;
}

int report_error(ErrorKind kind, const std::string& message) {
    const json err{{"error", {{"kind", std::string(to_string(kind))}, {"message", message}}}};
    std::cerr << err.dump() << '\n';
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming video context engine: event clustering, question-aware compression, dialogue retrieval"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config_path, "Engine config (JSON)")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Override the configured seed");
    app.add_option("--out", g.out, "Output file (stdout when omitted)");
    app.add_flag("-v,--verbose", g.verbose, "Log info messages to stderr");

    // cluster
    std::string embeddings, manifest_path;
    std::optional<double> until;
    std::optional<std::size_t> k_override;
    auto* cluster_cmd = app.add_subcommand("cluster", "Time-weighted k-means over frame embeddings");
    cluster_cmd->add_option("--embeddings", embeddings, "Embedding file")->check(CLI::ExistingFile);
    cluster_cmd->add_option("--manifest", manifest_path, "Session manifest")->check(CLI::ExistingFile);
    cluster_cmd->add_option("--until", until, "Use manifest segments that ended by this time (s)");
    cluster_cmd->add_option("--k", k_override, "Cluster count (default: ratio of frame count)");

    // compress
    std::string question;
    std::optional<int> qa_id;
    auto* compress_cmd = app.add_subcommand("compress", "Question-aware compression of the clustered stream");
    compress_cmd->add_option("--embeddings", embeddings, "Embedding file")->check(CLI::ExistingFile);
    compress_cmd->add_option("--manifest", manifest_path, "Session manifest")->check(CLI::ExistingFile);
    compress_cmd->add_option("--question", question, "Question text");
    compress_cmd->add_option("--qa-id", qa_id, "Take the question (and ask time) from the manifest");

    // retrieve
    int stream_id = 0;
    auto* retrieve_cmd = app.add_subcommand("retrieve", "Select relevant dialogue history for one question");
    retrieve_cmd->add_option("--manifest", manifest_path, "Session manifest")->required()->check(CLI::ExistingFile);
    retrieve_cmd->add_option("--stream", stream_id, "Dialogue stream id");
    retrieve_cmd->add_option("--qa-id", qa_id, "Question to answer")->required();

    // score-relevance
    auto* score_cmd = app.add_subcommand("score-relevance", "Fill the relevance-score table of a manifest");
    score_cmd->add_option("--manifest", manifest_path, "Session manifest")->required()->check(CLI::ExistingFile);

    // build-paths
    double threshold = kRelevanceThreshold;
    auto* paths_cmd = app.add_subcommand("build-paths", "Rebuild relevant sets and generate dialogue streams");
    paths_cmd->add_option("--manifest", manifest_path, "Session manifest")->required()->check(CLI::ExistingFile);
    paths_cmd->add_option("--threshold", threshold, "Relevance threshold (strict)");

    // simulate
    bool all_streams = false;
    std::size_t workers = 1;
    auto* sim_cmd = app.add_subcommand("simulate", "Replay dialogue streams through the full pipeline");
    sim_cmd->add_option("--manifest", manifest_path, "Session manifest")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--stream", stream_id, "Dialogue stream id");
    sim_cmd->add_flag("--all-streams", all_streams, "Simulate every stream in the manifest");
    sim_cmd->add_option("--workers", workers, "Parallel streams");

    // eval
    std::vector<std::string> report_paths;
    auto* eval_cmd = app.add_subcommand("eval", "Corpus metrics over simulation reports");
    eval_cmd->add_option("reports", report_paths, "Report files (JSON lines)")->required()->check(CLI::ExistingFile);

    // make-synthetic
    SyntheticSpec spec;
    auto* synth_cmd = app.add_subcommand("make-synthetic", "Write a synthetic session with planted structure");
    synth_cmd->add_option("--segments", spec.segments);
    synth_cmd->add_option("--frames-per-segment", spec.frames_per_segment);
    synth_cmd->add_option("--patches", spec.patches);
    synth_cmd->add_option("--dim", spec.dim);
    synth_cmd->add_option("--events-per-segment", spec.events_per_segment);
    synth_cmd->add_option("--basic-per-segment", spec.basic_per_segment);
    synth_cmd->add_option("--streaming-per-segment", spec.streaming_per_segment);
    synth_cmd->add_option("--global-qas", spec.global_qas);
    synth_cmd->add_option("--paths", spec.num_paths);
    synth_cmd->add_option("--segment-seconds", spec.segment_seconds);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        const json err{{"error", {{"kind", "usage"}, {"message", e.what()}}}};
        std::cerr << err.dump() << '\n';
        return 2;
    }

    log::set_level(g.verbose ? log::Level::info : log::Level::warn);

    try {
        const EngineConfig config = resolve_config(g);

        if (*cluster_cmd) {
            const auto frames = gather_frames(embeddings, manifest_path, until);
            const auto cc = cluster_config(config, frames.size(), k_override);
            const auto result = cluster(frames, cc);
            json doc = to_json(result);
            doc["frames"] = frames.size();
            doc["alpha_time"] = cc.alpha_time;
            doc["events"] = json::array();
            for (const auto& e : events_from(result, frames)) doc["events"].push_back(to_json(e));
            emit(g, doc);
        } else if (*compress_cmd) {
            std::optional<double> ask_time = until;
            if (qa_id) {
                if (manifest_path.empty()) throw Error(ErrorKind::invalid_argument, "--qa-id needs --manifest");
                const SessionManifest m = load_manifest(manifest_path);
                const QARecord& qa = require_qa(m, *qa_id);
                question = qa.question;
                ask_time = m.find_segment(qa.segment_id)->end_s;
            }
            if (question.empty()) throw Error(ErrorKind::invalid_argument, "give --question or --qa-id");
            const auto frames = gather_frames(embeddings, manifest_path, ask_time);
            const auto cc = cluster_config(config, frames.size(), std::nullopt);
            const auto result = cluster(frames, cc);
            const auto events = events_from(result, frames);

            ProviderSet providers = make_providers(config.providers);
            std::vector<EventEmbedding> embs;
            for (const auto& e : events)
                embs.push_back(embed_event(e, frames, providers.summarizer.get(), providers.fallback_on_failure));
            const Vector q = embed_question(question, embs.front().vector.size(), providers.embedder.get(),
                                            providers.fallback_on_failure);
            const auto units = compress_stream(events, embs, frames, q, config.compression);

            const auto tokens_in = uncompressed_token_count(events, frames);
            const auto tokens_out = token_count(units);
            json doc{{"question", question},
                     {"theta", config.compression.theta},
                     {"k", cc.k},
                     {"tokens_in", tokens_in},
                     {"tokens_out", tokens_out},
                     {"compression_ratio", static_cast<double>(tokens_out) / static_cast<double>(tokens_in)},
                     {"units", json::array()}};
            for (const auto& u : units) doc["units"].push_back(to_json(u));
            emit(g, doc);
        } else if (*retrieve_cmd) {
            const SessionManifest m = load_manifest(manifest_path);
            const DialoguePath* path = nullptr;
            for (const auto& p : m.dialogue_streams)
                if (p.path_id == stream_id) path = &p;
            if (!path) throw Error(ErrorKind::invalid_argument, "manifest has no stream " + std::to_string(stream_id));

            DialogueHistory history;
            const PathEntry* target = nullptr;
            for (const auto& e : path->entries) {
                if (e.qa_id == *qa_id) {
                    target = &e;
                    break;
                }
                const QARecord& prior = require_qa(m, e.qa_id);
                history.append({prior.qa_id, prior.question, prior.answer, e.ask_time});
            }
            if (!target)
                throw Error(ErrorKind::invalid_argument,
                            "qa " + std::to_string(*qa_id) + " is not in stream " + std::to_string(stream_id));
            const QARecord& qa = require_qa(m, *qa_id);

            RetrievalOutput out;
            if (config.retrieval_mode == RetrievalMode::oracle) {
                out.selected_ids = target->gold_relevant_ids;
                out.delta = qa.qa_type == QaType::dialogue_recalling ? 1 : 0;
            } else {
                ProviderSet providers = make_providers(config.providers);
                RetrievalModel* model =
                    config.retrieval_mode == RetrievalMode::provider ? providers.retriever.get() : nullptr;
                out = retrieve(history, qa.question, model, config.lexical);
            }
            json doc = to_json(out);
            doc["qa_id"] = qa.qa_id;
            doc["history_size"] = history.size();
            doc["gold_relevant_ids"] = target->gold_relevant_ids;
            doc["metrics"] = to_json(score_retrieval(out, target->gold_relevant_ids, history.ids()));
            emit(g, doc);
        } else if (*score_cmd) {
            SessionManifest m = load_manifest(manifest_path);
            ProviderSet providers = make_providers(config.providers);
            const auto pairs = score_pool(m, providers.scorer.get());
            log::info("scored " + std::to_string(pairs.size()) + " relevance pairs");
            emit_manifest(g, m);
        } else if (*paths_cmd) {
            SessionManifest m = load_manifest(manifest_path);
            build_relevant_sets(m.qa_pool, threshold);
            m.dialogue_streams = generate_paths(m, config.paths);
            emit_manifest(g, m);
        } else if (*sim_cmd) {
            const SessionManifest m = load_manifest(manifest_path);
            std::vector<int> ids;
            if (all_streams) {
                for (const auto& p : m.dialogue_streams) ids.push_back(p.path_id);
            } else {
                ids.push_back(stream_id);
            }
            const auto reports = simulate_streams(m, ids, config, base_dir_of(manifest_path), workers);
            std::string text;
            for (const auto& r : reports) text += render_report(r);
            emit(g, text);
        } else if (*eval_cmd) {
            std::vector<QuestionRecord> records;
            for (const auto& p : report_paths) {
                auto part = read_report(p);
                records.insert(records.end(), part.begin(), part.end());
            }
            json doc = to_json(evaluate(records));
            doc["reports"] = report_paths.size();
            emit(g, doc);
        } else if (*synth_cmd) {
            if (g.out.empty()) throw Error(ErrorKind::invalid_argument, "make-synthetic needs --out <directory>");
            if (g.seed) spec.seed = *g.seed;
            const auto session = make_synthetic(spec);
            const auto manifest_file = write_synthetic(session, g.out);
            std::size_t frames = 0;
            for (const auto& [id, f] : session.frames) frames += f.size();
            std::cout << json{{"manifest", manifest_file.string()},
                              {"segments", session.manifest.segments.size()},
                              {"frames", frames},
                              {"qa_pairs", session.manifest.qa_pool.size()},
                              {"streams", session.manifest.dialogue_streams.size()}}
                             .dump(2)
                      << '\n';
        }
    } catch (const Error& e) {
        return report_error(e.kind(), e.what());
    } catch (const std::exception& e) {
        return report_error(ErrorKind::io, e.what());
    }
    return 0;
}
