#include "cogstream/simulator.hpp"

#include "cogstream/context_assembly.hpp"
#include "cogstream/error.hpp"
#include "cogstream/log.hpp"
#include "cogstream/stream_compress.hpp"
#include "cogstream/tsc_cluster.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace cogstream {

using nlohmann::json;

// --- FrameStore -------------------------------------------------------------

FrameStore::FrameStore(const SessionManifest& manifest, std::filesystem::path base_dir)
    : manifest_(&manifest), base_dir_(std::move(base_dir)) {}

FrameStore::FrameStore(const SessionManifest& manifest, std::map<int, std::vector<FrameFeature>> frames)
    : manifest_(&manifest), cache_(std::move(frames)) {}

const std::vector<FrameFeature>& FrameStore::segment_frames(int segment_id, double ask_time) {
    const SegmentMeta* seg = manifest_->find_segment(segment_id);
    if (!seg) throw Error(ErrorKind::invalid_argument, "unknown segment " + std::to_string(segment_id));
    ++reads_;
    if (seg->end_s > ask_time) {
        ++leakage_violations_;
        log::error("segment " + std::to_string(segment_id) + " read for a question asked before it ended");
    }
    auto it = cache_.find(segment_id);
    if (it == cache_.end()) {
        if (base_dir_.empty())
            throw Error(ErrorKind::io, "no frames for segment " + std::to_string(segment_id));
        std::filesystem::path file = seg->embedding_ref;
        if (file.is_relative()) file = base_dir_ / file;
        it = cache_.emplace(segment_id, load_embeddings(file)).first;
    }
    return it->second;
}

std::vector<FrameFeature> FrameStore::frames_until(double ask_time) {
    std::vector<FrameFeature> out;
    for (const auto& seg : manifest_->segments) {
        if (seg.end_s > ask_time) continue;
        const auto& frames = segment_frames(seg.segment_id, ask_time);
        out.insert(out.end(), frames.begin(), frames.end());
    }
    return out;
}

// --- simulation -------------------------------------------------------------

namespace {

const DialoguePath& find_stream(const SessionManifest& manifest, int stream_id) {
    for (const auto& p : manifest.dialogue_streams)
        if (p.path_id == stream_id) return p;
    throw Error(ErrorKind::invalid_argument, "manifest has no dialogue stream " + std::to_string(stream_id));
}

void run_visual_stage(QuestionRecord& rec, const std::vector<FrameFeature>& frames, const QARecord& qa,
                      const EngineConfig& config, ProviderSet& providers, std::uint64_t seed,
                      std::vector<VisualUnit>& units) {
    rec.num_frames = frames.size();
    if (frames.empty()) return;

    ClusterConfig cc;
    cc.k = choose_k(frames.size(), config.cluster_ratio);
    cc.alpha_time = config.alpha_time;
    cc.max_iters = config.max_iters;
    cc.epsilon = config.epsilon;
    cc.seed = seed;
    const ClusterResult result = cluster(frames, cc);
    const auto events = events_from(result, frames);
    rec.k = cc.k;
    rec.iterations = result.iterations;
    rec.cluster_delta = result.final_delta;
    rec.converged = result.converged;
    rec.events = events.size();

    std::vector<EventEmbedding> embeddings;
    embeddings.reserve(events.size());
    for (const auto& e : events)
        embeddings.push_back(embed_event(e, frames, providers.summarizer.get(), providers.fallback_on_failure));
    const Vector q = embed_question(qa.question, embeddings.front().vector.size(), providers.embedder.get(),
                                    providers.fallback_on_failure);

    units = compress_stream(events, embeddings, frames, q, config.compression);
    rec.tokens_in = uncompressed_token_count(events, frames);
    rec.tokens_out = token_count(units);
    rec.compression_ratio = static_cast<double>(rec.tokens_out) / static_cast<double>(rec.tokens_in);
    for (const auto& u : units) rec.preserved_events += u.preserved() ? 1 : 0;
}

} // namespace

SimulationReport simulate(const SessionManifest& manifest, int stream_id, const EngineConfig& config,
                          FrameStore& frames, ProviderSet& providers) {
    validate(config);
    const DialoguePath& path = find_stream(manifest, stream_id);
    const PoolIndex index(manifest);

    SimulationReport report;
    report.video_id = manifest.video_id;
    report.stream_id = stream_id;
    report.config = to_json(config);

    DialogueHistory history;
    const std::size_t leaks_before = frames.leakage_violations();

    for (std::size_t i = 0; i < path.entries.size(); ++i) {
        const PathEntry& entry = path.entries[i];
        const QARecord& qa = index.qa(entry.qa_id);
        const auto started = std::chrono::steady_clock::now();

        QuestionRecord rec;
        rec.qa_id = qa.qa_id;
        rec.qa_type = std::string(to_string(qa.qa_type));
        rec.segment_id = entry.segment_id;
        rec.ask_time = entry.ask_time;
        rec.gold_relevant_ids = entry.gold_relevant_ids;
        rec.history_size = history.size();

        try {
            std::vector<VisualUnit> units;
            run_visual_stage(rec, frames.frames_until(entry.ask_time), qa, config, providers,
                             derive_seed(config.seed, i), units);

            switch (config.retrieval_mode) {
            case RetrievalMode::oracle:
                rec.retrieval.selected_ids = entry.gold_relevant_ids;
                rec.retrieval.delta = qa.qa_type == QaType::dialogue_recalling ? 1 : 0;
                break;
            case RetrievalMode::fallback:
                rec.retrieval = retrieve(history, qa.question, nullptr, config.lexical);
                break;
            case RetrievalMode::provider:
                rec.retrieval = retrieve(history, qa.question, providers.retriever.get(), config.lexical);
                break;
            }
            rec.confusion = confusion(rec.retrieval.selected_ids, entry.gold_relevant_ids, history.ids());

            std::vector<TextUnit> texts;
            for (int id : rec.retrieval.selected_ids) {
                const HistoryItem* item = history.find(id);
                texts.push_back({item->qa_id, item->question, item->answer, item->ask_time});
            }
            const ContextPackage package = assemble(units, texts, rec.retrieval.delta, qa.question);
            const AnswerRecord ans = answer(package, qa.qa_id, providers.generator.get());
            rec.answer = ans.answer;
            rec.answer_provider = ans.provider;
            rec.visual_tokens = ans.visual_tokens;
            rec.text_tokens = ans.text_tokens;
        } catch (const Error& e) {
            rec.ok = false;
            rec.error_kind = std::string(to_string(e.kind()));
            rec.error_message = e.what();
            log::warn("question " + std::to_string(qa.qa_id) + " failed: " + e.what());
        }

        if (config.record_timing) {
            rec.wall_time_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        }
        history.append({qa.qa_id, qa.question, config.history_uses_gold_answers ? qa.answer : rec.answer,
                        entry.ask_time});
        report.records.push_back(std::move(rec));
    }

    report.leakage_violations = frames.leakage_violations() - leaks_before;
    if (!report.records.empty()) report.summary = evaluate(report.records);
    return report;
}

std::vector<SimulationReport> simulate_streams(const SessionManifest& manifest, const std::vector<int>& stream_ids,
                                               const EngineConfig& config, const std::filesystem::path& base_dir,
                                               std::size_t workers) {
    std::vector<SimulationReport> reports(stream_ids.size());
    std::vector<std::exception_ptr> errors(stream_ids.size());
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t job = next++; job < stream_ids.size(); job = next++) {
            try {
                FrameStore store(manifest, base_dir);
                ProviderSet providers = make_providers(config.providers);
                reports[job] = simulate(manifest, stream_ids[job], config, store, providers);
            } catch (...) {
                errors[job] = std::current_exception();
            }
        }
    };

    const std::size_t n = std::max<std::size_t>(1, std::min(workers, stream_ids.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < n; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return reports;
}

// --- evaluation -------------------------------------------------------------

CorpusSummary evaluate(const std::vector<QuestionRecord>& records) {
    if (records.empty()) throw Error(ErrorKind::invalid_argument, "evaluate: no question records");
    CorpusSummary s;
    ConfusionCounts total;
    double ratio_sum = 0.0;
    double token_sum = 0.0;
    for (const auto& r : records) {
        if (!r.ok) {
            ++s.failures;
            continue;
        }
        ++s.questions;
        total += r.confusion;
        ratio_sum += r.compression_ratio;
        token_sum += static_cast<double>(r.visual_tokens + r.text_tokens);
    }
    s.metrics = metrics_from(total);
    if (s.questions > 0) {
        s.mean_compression_ratio = ratio_sum / static_cast<double>(s.questions);
        s.mean_tokens_per_question = token_sum / static_cast<double>(s.questions);
    }
    return s;
}

json to_json(const QuestionRecord& r) {
    json out{{"qa_id", r.qa_id},
             {"qa_type", r.qa_type},
             {"segment_id", r.segment_id},
             {"ask_time", r.ask_time},
             {"status", r.ok ? "ok" : "error"}};
    if (!r.ok) out["error"] = {{"kind", r.error_kind}, {"message", r.error_message}};
    out["cluster"] = {{"frames", r.num_frames},
                      {"k", r.k},
                      {"iterations", r.iterations},
                      {"delta", r.cluster_delta},
                      {"converged", r.converged},
                      {"events", r.events},
                      {"preserved_events", r.preserved_events}};
    out["compression"] = {{"tokens_in", r.tokens_in}, {"tokens_out", r.tokens_out}, {"ratio", r.compression_ratio}};
    out["retrieval"] = {{"history_size", r.history_size},
                        {"selected_ids", r.retrieval.selected_ids},
                        {"delta", r.retrieval.delta},
                        {"gold_relevant_ids", r.gold_relevant_ids},
                        {"tp", r.confusion.tp},
                        {"fp", r.confusion.fp},
                        {"fn", r.confusion.fn},
                        {"tn", r.confusion.tn}};
    out["answer"] = {{"text", r.answer},
                     {"provider", r.answer_provider},
                     {"visual_tokens", r.visual_tokens},
                     {"text_tokens", r.text_tokens}};
    if (r.wall_time_ms) out["wall_time_ms"] = *r.wall_time_ms;
    return out;
}

QuestionRecord question_record_from_json(const json& doc) {
    const auto problems = report_line_errors(doc);
    if (!problems.empty()) throw Error(ErrorKind::schema, "report line: " + problems.front());
    QuestionRecord r;
    r.qa_id = doc.at("qa_id").get<int>();
    r.qa_type = doc.at("qa_type").get<std::string>();
    r.segment_id = doc.at("segment_id").get<int>();
    r.ask_time = doc.at("ask_time").get<double>();
    r.ok = doc.at("status") == "ok";
    if (!r.ok) {
        r.error_kind = doc.at("error").at("kind").get<std::string>();
        r.error_message = doc.at("error").at("message").get<std::string>();
    }
    const auto& c = doc.at("cluster");
    r.num_frames = c.at("frames").get<std::size_t>();
    r.k = c.at("k").get<std::size_t>();
    r.iterations = c.at("iterations").get<std::size_t>();
    r.cluster_delta = c.at("delta").get<double>();
    r.converged = c.at("converged").get<bool>();
    r.events = c.at("events").get<std::size_t>();
    r.preserved_events = c.at("preserved_events").get<std::size_t>();
    const auto& z = doc.at("compression");
    r.tokens_in = z.at("tokens_in").get<std::size_t>();
    r.tokens_out = z.at("tokens_out").get<std::size_t>();
    r.compression_ratio = z.at("ratio").get<double>();
    const auto& rt = doc.at("retrieval");
    r.history_size = rt.at("history_size").get<std::size_t>();
    r.retrieval.selected_ids = rt.at("selected_ids").get<std::set<int>>();
    r.retrieval.delta = rt.at("delta").get<int>();
    r.gold_relevant_ids = rt.at("gold_relevant_ids").get<std::set<int>>();
    r.confusion = {rt.at("tp").get<std::size_t>(), rt.at("fp").get<std::size_t>(), rt.at("fn").get<std::size_t>(),
                   rt.at("tn").get<std::size_t>()};
    const auto& a = doc.at("answer");
    r.answer = a.at("text").get<std::string>();
    r.answer_provider = a.at("provider").get<std::string>();
    r.visual_tokens = a.at("visual_tokens").get<std::size_t>();
    r.text_tokens = a.at("text_tokens").get<std::size_t>();
    if (doc.contains("wall_time_ms")) r.wall_time_ms = doc.at("wall_time_ms").get<double>();
    return r;
}

json to_json(const CorpusSummary& s) {
    json out = to_json(s.metrics);
    out["questions"] = s.questions;
    out["failures"] = s.failures;
    out["mean_compression_ratio"] = s.mean_compression_ratio;
    out["mean_tokens_per_question"] = s.mean_tokens_per_question;
    return out;
}

std::string render_report(const SimulationReport& report) {
    std::string out;
    for (const auto& r : report.records) out += to_json(r).dump() + "\n";
    const json summary{{"summary",
                        {{"video_id", report.video_id},
                         {"stream_id", report.stream_id},
                         {"records", report.records.size()},
                         {"leakage_violations", report.leakage_violations},
                         {"metrics", to_json(report.summary)},
                         {"config", report.config}}}};
    out += summary.dump() + "\n";
    return out;
}

std::vector<QuestionRecord> read_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::vector<QuestionRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (doc.contains("summary")) {
            const auto problems = report_line_errors(doc);
            if (!problems.empty())
                throw Error(ErrorKind::schema, path.string() + ":" + std::to_string(line_no) + ": " + problems.front());
            continue;
        }
        records.push_back(question_record_from_json(doc));
    }
    return records;
}

namespace {

struct SchemaChecker {
    std::vector<std::string> errors;

    bool require(const json& obj, const std::string& where, const char* key, json::value_t type) {
        if (!obj.is_object() || !obj.contains(key)) {
            errors.push_back(where + "." + key + " is missing");
            return false;
        }
        const auto& v = obj.at(key);
        bool ok = v.type() == type;
        // Unsigned and signed integers are interchangeable; integers satisfy numbers.
        if (type == json::value_t::number_integer || type == json::value_t::number_unsigned)
            ok = v.is_number_integer();
        if (type == json::value_t::number_float) ok = v.is_number();
        if (!ok) errors.push_back(where + "." + key + " has the wrong type");
        return ok;
    }

    void require_int_array(const json& obj, const std::string& where, const char* key) {
        if (!require(obj, where, key, json::value_t::array)) return;
        for (const auto& v : obj.at(key))
            if (!v.is_number_integer()) errors.push_back(where + "." + key + " must hold integers");
    }
};

} // namespace

std::vector<std::string> report_line_errors(const json& line) {
    using vt = json::value_t;
    SchemaChecker c;
    if (!line.is_object()) return {"report line is not an object"};

    if (line.contains("summary")) {
        const auto& s = line.at("summary");
        if (c.require(line, "", "summary", vt::object)) {
            c.require(s, "summary", "video_id", vt::string);
            c.require(s, "summary", "stream_id", vt::number_integer);
            c.require(s, "summary", "records", vt::number_integer);
            c.require(s, "summary", "leakage_violations", vt::number_integer);
            c.require(s, "summary", "config", vt::object);
            if (c.require(s, "summary", "metrics", vt::object)) {
                const auto& m = s.at("metrics");
                for (const char* key : {"accuracy", "precision", "recall", "f1", "mean_compression_ratio",
                                        "mean_tokens_per_question"})
                    c.require(m, "summary.metrics", key, vt::number_float);
                for (const char* key : {"tp", "fp", "fn", "tn", "questions", "failures"})
                    c.require(m, "summary.metrics", key, vt::number_integer);
            }
        }
        return c.errors;
    }

    c.require(line, "", "qa_id", vt::number_integer);
    c.require(line, "", "qa_type", vt::string);
    c.require(line, "", "segment_id", vt::number_integer);
    c.require(line, "", "ask_time", vt::number_float);
    if (c.require(line, "", "status", vt::string)) {
        const auto status = line.at("status").get<std::string>();
        if (status != "ok" && status != "error") c.errors.push_back(".status must be ok or error");
        if (status == "error" && c.require(line, "", "error", vt::object)) {
            c.require(line.at("error"), "error", "kind", vt::string);
            c.require(line.at("error"), "error", "message", vt::string);
        }
    }
    if (c.require(line, "", "cluster", vt::object)) {
        const auto& o = line.at("cluster");
        for (const char* key : {"frames", "k", "iterations", "events", "preserved_events"})
            c.require(o, "cluster", key, vt::number_integer);
        c.require(o, "cluster", "delta", vt::number_float);
        c.require(o, "cluster", "converged", vt::boolean);
    }
    if (c.require(line, "", "compression", vt::object)) {
        const auto& o = line.at("compression");
        c.require(o, "compression", "tokens_in", vt::number_integer);
        c.require(o, "compression", "tokens_out", vt::number_integer);
        if (c.require(o, "compression", "ratio", vt::number_float)) {
            const double ratio = o.at("ratio").get<double>();
            if (!(ratio > 0.0 && ratio <= 1.0)) c.errors.push_back("compression.ratio must lie in (0, 1]");
        }
    }
    if (c.require(line, "", "retrieval", vt::object)) {
        const auto& o = line.at("retrieval");
        c.require(o, "retrieval", "history_size", vt::number_integer);
        c.require_int_array(o, "retrieval", "selected_ids");
        c.require_int_array(o, "retrieval", "gold_relevant_ids");
        if (c.require(o, "retrieval", "delta", vt::number_integer)) {
            const auto d = o.at("delta").get<int>();
            if (d != 0 && d != 1) c.errors.push_back("retrieval.delta must be 0 or 1");
        }
        for (const char* key : {"tp", "fp", "fn", "tn"}) c.require(o, "retrieval", key, vt::number_integer);
    }
    if (c.require(line, "", "answer", vt::object)) {
        const auto& o = line.at("answer");
        c.require(o, "answer", "text", vt::string);
        c.require(o, "answer", "provider", vt::string);
        c.require(o, "answer", "visual_tokens", vt::number_integer);
        c.require(o, "answer", "text_tokens", vt::number_integer);
    }
    if (line.contains("wall_time_ms")) c.require(line, "", "wall_time_ms", vt::number_float);
    return c.errors;
}

} // namespace cogstream
