#pragma once

#include "cogstream/feature_store.hpp"
#include "cogstream/providers.hpp"
#include "cogstream/tsc_cluster.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cogstream {

struct CompressionConfig {
    double theta = 0.45;
};

void validate(const CompressionConfig& config);

inline constexpr std::string_view kFallbackMeanpool = "fallback-meanpool";
inline constexpr std::string_view kFallbackTermHash = "fallback-termhash";

struct EventEmbedding {
    Vector vector;
    std::string provenance;
};

struct PreservedFrames {
    std::vector<FrameFeature> frames;
};

// One mean-pooled token per member frame, timestamps kept alongside.
struct PooledTokens {
    std::vector<Vector> tokens;
    std::vector<double> timestamps;
};

struct VisualUnit {
    std::size_t event_id = 0;
    double start_time = 0.0;
    double time_centroid = 0.0;
    double relevance = 0.0;
    bool degenerate = false; // zero-norm embedding, forced to pooled
    std::variant<PreservedFrames, PooledTokens> content;

    bool preserved() const { return std::holds_alternative<PreservedFrames>(content); }
    std::size_t frame_count() const;
    std::size_t token_count() const;
    std::vector<double> timestamps() const;
};

// Event embedding: provider hidden states mean-pooled over tokens, or the
// mean of every patch row in the event when no summarizer is given.
EventEmbedding embed_event(const Event& event, std::span<const FrameFeature> frames,
                           EventSummarizer* summarizer = nullptr, bool fallback_on_failure = true);

// Signed feature hashing of normalized terms into `dim` buckets.
Vector term_hash_embedding(std::string_view text, std::size_t dim);

Vector embed_question(std::string_view question, std::size_t dim, TextEmbedder* embedder = nullptr,
                      bool fallback_on_failure = true);

// Scores every event against q and keeps it whole (s >= theta) or pools each
// frame to one token. Output follows event time-centroid order.
std::vector<VisualUnit> compress_stream(std::span<const Event> events, std::span<const EventEmbedding> embeddings,
                                        std::span<const FrameFeature> frames, std::span<const double> question,
                                        const CompressionConfig& config);

std::size_t token_count(std::span<const VisualUnit> units);

// Tokens the events would occupy uncompressed (frames x P).
std::size_t uncompressed_token_count(std::span<const Event> events, std::span<const FrameFeature> frames);

nlohmann::json to_json(const VisualUnit& unit);

} // namespace cogstream
