#include "cogstream/stream_compress.hpp"

#include "cogstream/error.hpp"
#include "cogstream/log.hpp"
#include "cogstream/text_terms.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cogstream {

void validate(const CompressionConfig& config) {
    if (!(config.theta >= -1.0 && config.theta <= 1.0))
        throw Error(ErrorKind::invalid_config, "theta must lie in [-1, 1]");
}

std::size_t VisualUnit::frame_count() const {
    if (const auto* p = std::get_if<PreservedFrames>(&content)) return p->frames.size();
    return std::get<PooledTokens>(content).tokens.size();
}

std::size_t VisualUnit::token_count() const {
    if (const auto* p = std::get_if<PreservedFrames>(&content)) {
        std::size_t n = 0;
        for (const auto& f : p->frames) n += f.patch_count();
        return n;
    }
    return std::get<PooledTokens>(content).tokens.size();
}

std::vector<double> VisualUnit::timestamps() const {
    if (const auto* p = std::get_if<PreservedFrames>(&content)) {
        std::vector<double> out;
        for (const auto& f : p->frames) out.push_back(f.timestamp());
        return out;
    }
    return std::get<PooledTokens>(content).timestamps;
}

namespace {

std::vector<FeatureMatrix> member_matrices(const Event& event, std::span<const FrameFeature> frames) {
    std::vector<FeatureMatrix> out;
    out.reserve(event.members.size());
    for (std::size_t idx : event.members) {
        if (idx >= frames.size()) throw Error(ErrorKind::invalid_argument, "event member index out of range");
        out.push_back(frames[idx].patches());
    }
    return out;
}

FeatureMatrix concatenate(std::span<const FeatureMatrix> blocks) {
    const std::size_t cols = blocks.front().cols();
    std::size_t rows = 0;
    std::vector<float> values;
    for (const auto& b : blocks) {
        rows += b.rows();
        values.insert(values.end(), b.flat().begin(), b.flat().end());
    }
    return FeatureMatrix(rows, cols, std::move(values));
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace

EventEmbedding embed_event(const Event& event, std::span<const FrameFeature> frames, EventSummarizer* summarizer,
                           bool fallback_on_failure) {
    if (event.members.empty()) throw Error(ErrorKind::invalid_argument, "embed_event: empty event");
    const auto blocks = member_matrices(event, frames);

    if (summarizer) {
        try {
            const auto states = summarizer->hidden_states(concatenate(blocks), kEventSummaryPrompt);
            if (states.empty()) throw Error(ErrorKind::provider, summarizer->id() + ": no hidden states returned");
            Vector h = mean_pool(states);
            if (!all_finite(h)) throw Error(ErrorKind::provider, summarizer->id() + ": non-finite hidden state");
            return {std::move(h), summarizer->id()};
        } catch (const Error& e) {
            if (!fallback_on_failure) throw;
            log::warn(std::string("event summarizer failed, using mean-pool fallback: ") + e.what());
        }
    }
    return {mean_pool(blocks), std::string(kFallbackMeanpool)};
}

Vector term_hash_embedding(std::string_view text, std::size_t dim) {
    if (dim == 0) throw Error(ErrorKind::invalid_argument, "term_hash_embedding: dim must be positive");
    const auto tokens = terms::tokenize(text);
    if (tokens.empty()) throw Error(ErrorKind::invalid_argument, "question text has no terms");
    Vector v(dim, 0.0);
    for (const auto& tok : tokens) {
        const std::uint64_t h = fnv1a(tok);
        const double sign = (h >> 63) ? -1.0 : 1.0;
        v[(h & 0x7fffffffffffffffULL) % dim] += sign;
    }
    return v;
}

Vector embed_question(std::string_view question, std::size_t dim, TextEmbedder* embedder, bool fallback_on_failure) {
    if (terms::tokenize(question).empty()) throw Error(ErrorKind::invalid_argument, "embed_question: empty text");
    if (embedder) {
        try {
            Vector q = embedder->embed(question);
            if (q.empty() || !all_finite(q)) throw Error(ErrorKind::provider, embedder->id() + ": invalid embedding");
            return q;
        } catch (const Error& e) {
            if (!fallback_on_failure) throw;
            log::warn(std::string("question embedder failed, using term-hash fallback: ") + e.what());
        }
    }
    return term_hash_embedding(question, dim);
}

std::vector<VisualUnit> compress_stream(std::span<const Event> events, std::span<const EventEmbedding> embeddings,
                                        std::span<const FrameFeature> frames, std::span<const double> question,
                                        const CompressionConfig& config) {
    validate(config);
    if (events.size() != embeddings.size())
        throw Error(ErrorKind::invalid_argument, "compress_stream: one embedding per event required");
    for (const auto& e : embeddings)
        if (e.vector.size() != question.size()) {
            std::ostringstream msg;
            msg << "compress_stream: event embedding dim " << e.vector.size() << " vs question dim " << question.size();
            throw Error(ErrorKind::dimension_mismatch, msg.str());
        }

    const bool question_degenerate = l2_norm(question) == 0.0;
    if (question_degenerate) log::warn("compress_stream: zero-norm question embedding, every event pooled");

    std::vector<std::size_t> order(events.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return events[a].time_centroid < events[b].time_centroid;
    });

    std::vector<VisualUnit> units;
    units.reserve(events.size());
    for (std::size_t idx : order) {
        const Event& ev = events[idx];
        VisualUnit unit;
        unit.event_id = ev.event_id;
        unit.start_time = ev.start_time;
        unit.time_centroid = ev.time_centroid;

        if (question_degenerate || l2_norm(embeddings[idx].vector) == 0.0) {
            if (!question_degenerate)
                log::warn("compress_stream: zero-norm embedding for event " + std::to_string(ev.event_id) +
                          ", pooled");
            unit.relevance = -1.0;
            unit.degenerate = true;
        } else {
            unit.relevance = cosine(embeddings[idx].vector, question);
        }

        if (!unit.degenerate && unit.relevance >= config.theta) {
            PreservedFrames kept;
            for (std::size_t m : ev.members) kept.frames.push_back(frames[m]);
            unit.content = std::move(kept);
        } else {
            PooledTokens pooled;
            for (std::size_t m : ev.members) {
                pooled.tokens.push_back(mean_pool(frames[m].patches()));
                pooled.timestamps.push_back(frames[m].timestamp());
            }
            unit.content = std::move(pooled);
        }
        units.push_back(std::move(unit));
    }
    return units;
}

std::size_t token_count(std::span<const VisualUnit> units) {
    std::size_t n = 0;
    for (const auto& u : units) n += u.token_count();
    return n;
}

std::size_t uncompressed_token_count(std::span<const Event> events, std::span<const FrameFeature> frames) {
    std::size_t n = 0;
    for (const auto& e : events)
        for (std::size_t m : e.members) n += frames[m].patch_count();
    return n;
}

nlohmann::json to_json(const VisualUnit& unit) {
    return {{"event_id", unit.event_id},
            {"mode", unit.preserved() ? "preserved" : "pooled"},
            {"relevance", unit.relevance},
            {"degenerate", unit.degenerate},
            {"start_time", unit.start_time},
            {"time_centroid", unit.time_centroid},
            {"frames", unit.frame_count()},
            {"tokens", unit.token_count()},
            {"timestamps", unit.timestamps()}};
}

} // namespace cogstream
