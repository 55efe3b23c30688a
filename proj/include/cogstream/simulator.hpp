#pragma once

#include "cogstream/dialogue_retrieval.hpp"
#include "cogstream/engine_config.hpp"
#include "cogstream/feature_store.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace cogstream {

// Per-segment frame access for a session. Every read states the ask time it
// serves; reading a segment that ends after that time is counted as a
// future-leak violation.
class FrameStore {
public:
    // Loads embedding files lazily, resolving embedding_ref against base_dir.
    FrameStore(const SessionManifest& manifest, std::filesystem::path base_dir);
    // In-memory frames keyed by segment_id.
    FrameStore(const SessionManifest& manifest, std::map<int, std::vector<FrameFeature>> frames);

    const std::vector<FrameFeature>& segment_frames(int segment_id, double ask_time);

    // Concatenated frames of every segment with end_s <= ask_time, in order.
    std::vector<FrameFeature> frames_until(double ask_time);

    std::size_t leakage_violations() const noexcept { return leakage_violations_; }
    std::size_t reads() const noexcept { return reads_; }

private:
    const SessionManifest* manifest_;
    std::filesystem::path base_dir_;
    std::map<int, std::vector<FrameFeature>> cache_;
    std::size_t leakage_violations_ = 0;
    std::size_t reads_ = 0;
};

struct QuestionRecord {
    int qa_id = 0;
    std::string qa_type;
    int segment_id = 0;
    double ask_time = 0.0;
    bool ok = true;
    std::string error_kind;
    std::string error_message;

    std::size_t num_frames = 0;
    std::size_t k = 0;
    std::size_t iterations = 0;
    double cluster_delta = 0.0;
    bool converged = false;
    std::size_t events = 0;
    std::size_t preserved_events = 0;
    std::size_t tokens_in = 0;
    std::size_t tokens_out = 0;
    double compression_ratio = 1.0;

    std::size_t history_size = 0;
    RetrievalOutput retrieval;
    std::set<int> gold_relevant_ids;
    ConfusionCounts confusion;

    std::string answer;
    std::string answer_provider;
    std::size_t visual_tokens = 0;
    std::size_t text_tokens = 0;
    std::optional<double> wall_time_ms;
};

struct CorpusSummary {
    RetrievalMetrics metrics;
    double mean_compression_ratio = 0.0;
    double mean_tokens_per_question = 0.0;
    std::size_t questions = 0;
    std::size_t failures = 0;
};

struct SimulationReport {
    std::string video_id;
    int stream_id = 0;
    std::vector<QuestionRecord> records;
    CorpusSummary summary;
    std::size_t leakage_violations = 0;
    nlohmann::json config;
};

// Replays one dialogue stream question by question: cluster the frames seen
// so far, compress against the question, retrieve from the dialogue so far,
// assemble, answer. A failing question is recorded and the stream continues.
SimulationReport simulate(const SessionManifest& manifest, int stream_id, const EngineConfig& config,
                          FrameStore& frames, ProviderSet& providers);

// Runs several streams on a worker pool; each stream gets its own frame store
// and providers. Results follow the order of stream_ids.
std::vector<SimulationReport> simulate_streams(const SessionManifest& manifest, const std::vector<int>& stream_ids,
                                               const EngineConfig& config, const std::filesystem::path& base_dir,
                                               std::size_t workers);

// Micro-aggregated retrieval metrics plus compression and context-size means
// over successful records. Throws invalid_argument on an empty set.
CorpusSummary evaluate(const std::vector<QuestionRecord>& records);

nlohmann::json to_json(const QuestionRecord& record);
QuestionRecord question_record_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const CorpusSummary& summary);

// JSON lines: one object per question, then {"summary": {...}}.
std::string render_report(const SimulationReport& report);

// Question records from a report file (summary line skipped). Each line is
// checked against the report schema.
std::vector<QuestionRecord> read_report(const std::filesystem::path& path);

// Structural schema check of one report line; returns human-readable
// violations (empty when valid).
std::vector<std::string> report_line_errors(const nlohmann::json& line);

} // namespace cogstream
