#pragma once

#include "cogstream/dataset_pipeline.hpp"
#include "cogstream/dialogue_retrieval.hpp"
#include "cogstream/providers.hpp"
#include "cogstream/stream_compress.hpp"
#include "cogstream/tsc_cluster.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

namespace cogstream {

enum class RetrievalMode { fallback, provider, oracle };

std::string_view to_string(RetrievalMode mode);
RetrievalMode parse_retrieval_mode(std::string_view name);

struct ProviderEndpoints {
    std::string summarizer;
    std::string embedder;
    std::string retriever;
    std::string scorer;
    std::string generator;
    bool fallback_on_failure = true;
    std::int64_t timeout_ms = 60000;
};

struct EngineConfig {
    KRatio cluster_ratio{1, 15};
    double alpha_time = 1.0;
    double epsilon = 1e-4;
    std::size_t max_iters = 100;
    CompressionConfig compression;
    RetrievalMode retrieval_mode = RetrievalMode::fallback;
    LexicalRetrievalConfig lexical;
    bool history_uses_gold_answers = false;
    PathConfig paths;
    std::uint64_t seed = 0;
    ProviderEndpoints providers;
    // Adds per-question wall time to reports (makes them non-reproducible).
    bool record_timing = false;
};

void validate(const EngineConfig& config);

nlohmann::json to_json(const EngineConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
EngineConfig config_from_json(const nlohmann::json& doc);
EngineConfig load_config(const std::filesystem::path& path);

// Providers built from configured endpoints; empty endpoints stay null so the
// owning stage uses its local fallback.
struct ProviderSet {
    std::unique_ptr<EventSummarizer> summarizer;
    std::unique_ptr<TextEmbedder> embedder;
    std::unique_ptr<RetrievalModel> retriever;
    std::unique_ptr<RelevanceScorer> scorer;
    std::unique_ptr<AnswerGenerator> generator;
    bool fallback_on_failure = true;
};

ProviderSet make_providers(const ProviderEndpoints& endpoints, JsonTransport transport);
ProviderSet make_providers(const ProviderEndpoints& endpoints);

} // namespace cogstream
