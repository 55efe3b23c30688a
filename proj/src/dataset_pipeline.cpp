#include "cogstream/dataset_pipeline.hpp"

#include "cogstream/error.hpp"
#include "cogstream/log.hpp"
#include "cogstream/text_terms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cogstream {

void validate(const PathConfig& config) {
    if (!(config.alpha_len >= 0.0) || !std::isfinite(config.alpha_len))
        throw Error(ErrorKind::invalid_config, "alpha_len must be finite and >= 0");
    if (config.num_paths < 1) throw Error(ErrorKind::invalid_config, "num_paths must be >= 1");
}

double score_relevance(const QARecord& current, const QARecord& prior, RelevanceScorer* scorer) {
    if (!scorer) {
        const double overlap = terms::tf_cosine(current.question + " " + current.answer,
                                                prior.question + " " + prior.answer);
        return std::clamp(kMaxRelevance * overlap, kMinRelevance, kMaxRelevance);
    }
    const double raw = scorer->score(current, prior);
    if (!std::isfinite(raw)) throw Error(ErrorKind::provider, scorer->id() + ": non-finite relevance score");
    const double clipped = std::clamp(raw, kMinRelevance, kMaxRelevance);
    if (clipped != raw) {
        std::ostringstream msg;
        msg << scorer->id() << ": relevance " << raw << " for (" << current.qa_id << ", " << prior.qa_id
            << ") clipped to " << clipped;
        log::warn(msg.str());
    }
    return clipped;
}

std::vector<RelevancePair> score_pool(SessionManifest& manifest, RelevanceScorer* scorer) {
    std::map<int, std::size_t> position;
    for (std::size_t i = 0; i < manifest.segments.size(); ++i) position[manifest.segments[i].segment_id] = i;
    auto pos_of = [&](const QARecord& q) {
        auto it = position.find(q.segment_id);
        if (it == position.end())
            throw Error(ErrorKind::schema, "qa " + std::to_string(q.qa_id) + " references a missing segment");
        return it->second;
    };

    std::vector<RelevancePair> pairs;
    for (auto& current : manifest.qa_pool) {
        const std::size_t cur_pos = pos_of(current);
        for (const auto& prior : manifest.qa_pool) {
            if (pos_of(prior) >= cur_pos) continue;
            const double s = score_relevance(current, prior, scorer);
            current.relevance_scores[prior.qa_id] = s;
            pairs.push_back({current.qa_id, prior.qa_id, s});
        }
    }
    return pairs;
}

std::set<int> relevant_set(const std::map<int, double>& scores, double threshold) {
    std::set<int> out;
    for (const auto& [id, score] : scores)
        if (score > threshold) out.insert(id);
    return out;
}

void build_relevant_sets(std::vector<QARecord>& pool, double threshold) {
    for (auto& q : pool) q.relevant_ids = relevant_set(q.relevance_scores, threshold);
}

double composite_score(std::span<const PathNeighbor> path, double alpha_len) {
    if (path.empty()) return 0.0;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& n : path) {
        const double rs = n.relevance.value_or(0.0);
        best = std::max(best, rs + alpha_len * static_cast<double>(n.relevant_set_size));
    }
    return best;
}

PoolIndex::PoolIndex(const SessionManifest& manifest) {
    for (const auto& q : manifest.qa_pool) by_id_[q.qa_id] = &q;
}

const QARecord& PoolIndex::qa(int qa_id) const {
    auto it = by_id_.find(qa_id);
    if (it == by_id_.end()) throw Error(ErrorKind::invalid_argument, "unknown qa " + std::to_string(qa_id));
    return *it->second;
}

std::optional<double> PoolIndex::relevance(int current_id, int prior_id) const {
    const auto& scores = qa(current_id).relevance_scores;
    if (auto it = scores.find(prior_id); it != scores.end()) return it->second;
    return std::nullopt;
}

std::size_t PoolIndex::relevant_set_size(int qa_id) const { return qa(qa_id).relevant_ids.size(); }

double PoolIndex::composite_score(int candidate_id, std::span<const int> path_ids, double alpha_len) const {
    std::vector<PathNeighbor> neighbors;
    neighbors.reserve(path_ids.size());
    for (int id : path_ids) {
        PathNeighbor n{id, relevance(candidate_id, id), relevant_set_size(id)};
        if (!n.relevance)
            log::debug("no relevance score for (" + std::to_string(candidate_id) + ", " + std::to_string(id) +
                       "), using 0");
        neighbors.push_back(n);
    }
    return cogstream::composite_score(neighbors, alpha_len);
}

std::vector<double> selection_probabilities(std::span<const double> scores) {
    if (scores.empty()) throw Error(ErrorKind::invalid_argument, "selection_probabilities: no scores");
    const double top = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - top);
        total += out[i];
    }
    for (double& p : out) p /= total;
    return out;
}

namespace {

struct PathBuilder {
    const PoolIndex& index;
    const PathConfig& config;
    Rng& rng;
    DialoguePath path;
    std::vector<int> ids;

    void append(int qa_id, const SegmentMeta& segment) {
        PathEntry e;
        e.qa_id = qa_id;
        e.segment_id = segment.segment_id;
        e.ask_time = segment.end_s;
        const auto& relevant = index.qa(qa_id).relevant_ids;
        for (int prior : ids)
            if (relevant.count(prior)) e.gold_relevant_ids.insert(prior);
        path.entries.push_back(std::move(e));
        ids.push_back(qa_id);
    }

    void sample_uniform(std::vector<int> candidates, std::size_t count, const SegmentMeta& segment) {
        for (std::size_t n = 0; n < count && !candidates.empty(); ++n) {
            const std::size_t pick = rng.uniform_index(candidates.size());
            append(candidates[pick], segment);
            candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
        }
    }

    void sample_composite(std::vector<int> candidates, std::size_t count, const SegmentMeta& segment) {
        for (std::size_t n = 0; n < count && !candidates.empty(); ++n) {
            std::vector<double> sc;
            sc.reserve(candidates.size());
            for (int c : candidates) sc.push_back(index.composite_score(c, ids, config.alpha_len));
            const auto probs = selection_probabilities(sc);
            const std::size_t pick = rng.categorical(probs);
            append(candidates[pick], segment);
            candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
        }
    }
};

} // namespace

DialoguePath generate_path(const SessionManifest& manifest, const PathConfig& config, Rng& rng) {
    validate(config);
    const PoolIndex index(manifest);
    PathBuilder builder{index, config, rng, {}, {}};

    std::vector<int> globals;
    for (const auto& q : manifest.qa_pool)
        if (q.tier() == QaTier::global) globals.push_back(q.qa_id);

    for (std::size_t s = 0; s < manifest.segments.size(); ++s) {
        const auto& segment = manifest.segments[s];
        const bool last = s + 1 == manifest.segments.size();
        std::vector<int> basic, streaming;
        for (const auto& q : manifest.qa_pool) {
            if (q.segment_id != segment.segment_id) continue;
            if (q.tier() == QaTier::basic) basic.push_back(q.qa_id);
            else if (q.tier() == QaTier::streaming) streaming.push_back(q.qa_id);
        }
        if (basic.empty() && streaming.empty() && !(last && !globals.empty())) {
            log::info("segment " + std::to_string(segment.segment_id) + " has no QA pairs, skipped");
            continue;
        }
        builder.sample_uniform(std::move(basic), config.basic_per_segment, segment);
        builder.sample_composite(std::move(streaming), config.complex_per_segment, segment);
        if (last && !globals.empty()) {
            if (config.force_global_inclusion) {
                for (int id : globals) builder.append(id, segment);
            } else {
                builder.sample_composite(globals, config.complex_per_segment, segment);
            }
        }
    }
    return std::move(builder.path);
}

std::vector<DialoguePath> generate_paths(const SessionManifest& manifest, const PathConfig& config) {
    validate(config);
    std::vector<DialoguePath> paths;
    paths.reserve(config.num_paths);
    for (std::size_t p = 0; p < config.num_paths; ++p) {
        const std::uint64_t seed = derive_seed(config.seed, p);
        Rng rng(seed);
        DialoguePath path = generate_path(manifest, config, rng);
        path.path_id = static_cast<int>(p);
        path.seed = seed;
        paths.push_back(std::move(path));
    }
    return paths;
}

} // namespace cogstream
