#pragma once

#include "cogstream/feature_store.hpp"
#include "cogstream/providers.hpp"
#include "cogstream/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

namespace cogstream {

inline constexpr double kMinRelevance = 0.0;
inline constexpr double kMaxRelevance = 7.0;
inline constexpr double kRelevanceThreshold = 4.0;

struct RelevancePair {
    int current_id = 0;
    int prior_id = 0;
    double score = 0.0;
};

struct PathConfig {
    double alpha_len = 0.3;
    std::size_t num_paths = 3;
    std::size_t basic_per_segment = 2;
    std::size_t complex_per_segment = 2;
    // Append every global QA at the end instead of sampling them.
    bool force_global_inclusion = false;
    std::uint64_t seed = 0;
};

void validate(const PathConfig& config);

// Relevance of a prior QA pair to a current one on the closed [0, 7] scale.
// The fallback is 7 x term-frequency cosine of the two "question answer"
// texts; provider scores outside the range are clipped.
double score_relevance(const QARecord& current, const QARecord& prior, RelevanceScorer* scorer = nullptr);

// Scores every (current, prior) pair where prior sits in a strictly earlier
// segment and stores the result in current.relevance_scores.
std::vector<RelevancePair> score_pool(SessionManifest& manifest, RelevanceScorer* scorer = nullptr);

// {p : score(p) > threshold}; the comparison is strict.
std::set<int> relevant_set(const std::map<int, double>& scores, double threshold = kRelevanceThreshold);
void build_relevant_sets(std::vector<QARecord>& pool, double threshold = kRelevanceThreshold);

// One existing path entry as seen from a candidate: RS(candidate, entry) if
// scored, and the size of the entry's own relevant set.
struct PathNeighbor {
    int qa_id = 0;
    std::optional<double> relevance;
    std::size_t relevant_set_size = 0;
};

// max over neighbors of RS + alpha_len * |relevant set|; 0 for an empty path.
// Unscored pairs count as RS = 0.
double composite_score(std::span<const PathNeighbor> path, double alpha_len);

// Lookup of RS entries and relevant-set sizes over a QA pool.
class PoolIndex {
public:
    explicit PoolIndex(const SessionManifest& manifest);

    const QARecord& qa(int qa_id) const;
    std::optional<double> relevance(int current_id, int prior_id) const;
    std::size_t relevant_set_size(int qa_id) const;

    double composite_score(int candidate_id, std::span<const int> path_ids, double alpha_len) const;

private:
    std::map<int, const QARecord*> by_id_;
};

// Softmax with the maximum subtracted first.
std::vector<double> selection_probabilities(std::span<const double> scores);

DialoguePath generate_path(const SessionManifest& manifest, const PathConfig& config, Rng& rng);

// config.num_paths paths; path p uses derive_seed(config.seed, p).
std::vector<DialoguePath> generate_paths(const SessionManifest& manifest, const PathConfig& config);

} // namespace cogstream
