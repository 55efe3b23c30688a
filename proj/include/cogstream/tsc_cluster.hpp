#pragma once

#include "cogstream/feature_store.hpp"
#include "cogstream/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

namespace cogstream {

// Cluster count as a fraction of the frame count (K/F).
struct KRatio {
    std::uint32_t num = 1;
    std::uint32_t den = 15;
};

struct ClusterConfig {
    std::size_t k = 1;
    double alpha_time = 1.0;
    std::size_t max_iters = 100;
    double epsilon = 1e-4;
    std::uint64_t seed = 0;
};

// Throws Error(invalid_config) when the config cannot run on `num_frames`.
void validate(const ClusterConfig& config, std::size_t num_frames);

// Centroids in flattened P*D feature space plus their time centroids.
struct Centroids {
    std::vector<Vector> features;
    std::vector<double> times;

    std::size_t size() const noexcept { return times.size(); }
};

struct ClusterResult {
    std::size_t patch_count = 0;
    std::size_t dim = 0;
    std::vector<FeatureMatrix> feature_centroids;
    std::vector<double> time_centroids;
    // 0-based cluster index per frame (the CLI prints 1-based labels).
    std::vector<std::size_t> assignments;
    std::size_t iterations = 0;
    double final_delta = 0.0;
    bool converged = false;
};

struct Event {
    std::size_t event_id = 0;      // position in time order
    std::size_t cluster_index = 0; // index into ClusterResult centroids
    std::vector<std::size_t> members;
    double start_time = 0.0;
    double end_time = 0.0;
    double time_centroid = 0.0;
};

// max(1, floor(F * num / den)), never above F.
std::size_t choose_k(std::size_t num_frames, KRatio ratio = {});

// Composite distance from one frame to every centroid: Euclidean feature
// distance and absolute time distance, each min-max normalized across the
// k centroids, blended as sqrt(f^2 + alpha * t^2).
std::vector<double> composite_distances(const FrameFeature& frame, const Centroids& centroids, double alpha_time);

// Nearest centroid by composite distance; ties go to the lowest index.
std::size_t nearest_centroid(const FrameFeature& frame, const Centroids& centroids, double alpha_time);

// k-means++ seeding on flattened features only; each seed frame contributes
// its timestamp as the initial time centroid. Seeds are distinct frames.
Centroids kmeanspp_init(std::span<const FrameFeature> frames, std::size_t k, Rng& rng);

// Frame indices picked by kmeanspp_init for the same rng state.
std::vector<std::size_t> kmeanspp_seed_indices(std::span<const FrameFeature> frames, std::size_t k, Rng& rng);

// Time-weighted k-means from a k-means++ start.
ClusterResult cluster(std::span<const FrameFeature> frames, const ClusterConfig& config);

// Same loop from caller-provided centroids (rng still drives empty-cluster
// reseeding).
ClusterResult cluster_from(std::span<const FrameFeature> frames, Centroids initial, const ClusterConfig& config);
ClusterResult cluster_from(std::span<const FrameFeature> frames, Centroids initial, const ClusterConfig& config,
                           Rng& rng);

std::vector<Event> events_from(const ClusterResult& result, std::span<const FrameFeature> frames);

nlohmann::json to_json(const ClusterResult& result);
nlohmann::json to_json(const Event& event);

} // namespace cogstream
