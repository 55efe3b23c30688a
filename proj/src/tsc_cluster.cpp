#include "cogstream/tsc_cluster.hpp"

#include "cogstream/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace cogstream {

namespace {

Vector flatten(const FrameFeature& frame) {
    const auto flat = frame.patches().flat();
    return Vector(flat.begin(), flat.end());
}

std::vector<Vector> flatten_all(std::span<const FrameFeature> frames) {
    std::vector<Vector> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(flatten(f));
    return out;
}

double euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

void check_frames(std::span<const FrameFeature> frames) {
    if (frames.empty()) throw Error(ErrorKind::invalid_config, "clustering needs at least one frame");
    const auto p = frames.front().patch_count();
    const auto d = frames.front().dim();
    for (const auto& f : frames)
        if (f.patch_count() != p || f.dim() != d)
            throw Error(ErrorKind::dimension_mismatch, "clustering frames differ in P or D");
}

std::vector<double> composite_from_flat(std::span<const double> x, double t, const Centroids& c, double alpha) {
    const std::size_t k = c.size();
    std::vector<double> feat(k), time(k);
    for (std::size_t j = 0; j < k; ++j) {
        feat[j] = euclidean(x, c.features[j]);
        time[j] = std::abs(t - c.times[j]);
    }
    const auto nf = minmax_normalize(feat);
    const auto nt = minmax_normalize(time);
    std::vector<double> out(k);
    for (std::size_t j = 0; j < k; ++j) out[j] = std::sqrt(nf[j] * nf[j] + alpha * nt[j] * nt[j]);
    return out;
}

std::size_t argmin_lowest(const std::vector<double>& d) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < d.size(); ++j)
        if (d[j] < d[best]) best = j;
    return best;
}

} // namespace

void validate(const ClusterConfig& config, std::size_t num_frames) {
    if (config.k < 1) throw Error(ErrorKind::invalid_config, "k must be >= 1");
    if (config.k > num_frames)
        throw Error(ErrorKind::invalid_config,
                    "k=" + std::to_string(config.k) + " exceeds frame count " + std::to_string(num_frames));
    if (!(config.alpha_time >= 0.0) || !std::isfinite(config.alpha_time))
        throw Error(ErrorKind::invalid_config, "alpha_time must be finite and >= 0");
    if (config.max_iters < 1) throw Error(ErrorKind::invalid_config, "max_iters must be >= 1");
    if (!(config.epsilon >= 0.0)) throw Error(ErrorKind::invalid_config, "epsilon must be >= 0");
}

std::size_t choose_k(std::size_t num_frames, KRatio ratio) {
    if (ratio.den == 0) throw Error(ErrorKind::invalid_config, "cluster ratio denominator is zero");
    if (num_frames == 0) return 0;
    const std::uint64_t k = static_cast<std::uint64_t>(num_frames) * ratio.num / ratio.den;
    return static_cast<std::size_t>(std::clamp<std::uint64_t>(k, 1, num_frames));
}

std::vector<double> composite_distances(const FrameFeature& frame, const Centroids& centroids, double alpha_time) {
    if (centroids.size() == 0) throw Error(ErrorKind::invalid_argument, "composite_distances: no centroids");
    const Vector x = flatten(frame);
    for (const auto& c : centroids.features)
        if (c.size() != x.size()) throw Error(ErrorKind::dimension_mismatch, "centroid size differs from frame");
    return composite_from_flat(x, frame.timestamp(), centroids, alpha_time);
}

std::size_t nearest_centroid(const FrameFeature& frame, const Centroids& centroids, double alpha_time) {
    return argmin_lowest(composite_distances(frame, centroids, alpha_time));
}

std::vector<std::size_t> kmeanspp_seed_indices(std::span<const FrameFeature> frames, std::size_t k, Rng& rng) {
    check_frames(frames);
    const std::size_t n = frames.size();
    if (k < 1 || k > n) throw Error(ErrorKind::invalid_config, "k-means++ needs 1 <= k <= N");

    const auto flat = flatten_all(frames);
    std::vector<std::size_t> chosen;
    std::vector<bool> taken(n, false);
    std::vector<double> nearest_sq(n, std::numeric_limits<double>::infinity());

    auto take = [&](std::size_t idx) {
        chosen.push_back(idx);
        taken[idx] = true;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = euclidean(flat[i], flat[idx]);
            nearest_sq[i] = std::min(nearest_sq[i], d * d);
        }
    };

    take(rng.uniform_index(n));
    while (chosen.size() < k) {
        std::vector<double> weights(n, 0.0);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            weights[i] = nearest_sq[i];
            total += weights[i];
        }
        if (total > 0.0) {
            take(rng.categorical(weights));
        } else {
            // Every remaining frame duplicates a seed; pick uniformly among them.
            std::vector<std::size_t> free;
            for (std::size_t i = 0; i < n; ++i)
                if (!taken[i]) free.push_back(i);
            take(free[rng.uniform_index(free.size())]);
        }
    }
    return chosen;
}

Centroids kmeanspp_init(std::span<const FrameFeature> frames, std::size_t k, Rng& rng) {
    Centroids c;
    for (std::size_t idx : kmeanspp_seed_indices(frames, k, rng)) {
        c.features.push_back(flatten(frames[idx]));
        c.times.push_back(frames[idx].timestamp());
    }
    return c;
}

ClusterResult cluster(std::span<const FrameFeature> frames, const ClusterConfig& config) {
    check_frames(frames);
    validate(config, frames.size());
    Rng rng(config.seed);
    Centroids init = kmeanspp_init(frames, config.k, rng);
    return cluster_from(frames, std::move(init), config, rng);
}

ClusterResult cluster_from(std::span<const FrameFeature> frames, Centroids initial, const ClusterConfig& config) {
    Rng rng(config.seed);
    return cluster_from(frames, std::move(initial), config, rng);
}

ClusterResult cluster_from(std::span<const FrameFeature> frames, Centroids current, const ClusterConfig& config,
                           Rng& rng) {
    check_frames(frames);
    validate(config, frames.size());
    const std::size_t n = frames.size();
    const std::size_t k = config.k;
    const std::size_t width = frames.front().patch_count() * frames.front().dim();
    if (current.size() != k || current.features.size() != k)
        throw Error(ErrorKind::invalid_config, "initial centroid count differs from k");
    for (const auto& c : current.features)
        if (c.size() != width) throw Error(ErrorKind::dimension_mismatch, "initial centroid size differs from frames");

    const auto flat = flatten_all(frames);
    std::vector<std::size_t> assign(n, 0);
    ClusterResult result;
    result.patch_count = frames.front().patch_count();
    result.dim = frames.front().dim();

    auto assign_all = [&] {
        for (std::size_t i = 0; i < n; ++i)
            assign[i] = argmin_lowest(composite_from_flat(flat[i], frames[i].timestamp(), current, config.alpha_time));
    };

    auto mean_of = [&](std::size_t j, Vector& feat, double& time) {
        feat.assign(width, 0.0);
        time = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (assign[i] != j) continue;
            for (std::size_t c = 0; c < width; ++c) feat[c] += flat[i][c];
            time += frames[i].timestamp();
            ++count;
        }
        if (count == 0) return false;
        for (double& v : feat) v /= static_cast<double>(count);
        time /= static_cast<double>(count);
        return true;
    };

    std::size_t iter = 0;
    while (iter < config.max_iters) {
        assign_all();

        Centroids next;
        next.features.resize(k);
        next.times.resize(k);
        for (std::size_t j = 0; j < k; ++j) {
            if (!mean_of(j, next.features[j], next.times[j])) {
                const std::size_t r = rng.uniform_index(n);
                next.features[j] = flat[r];
                next.times[j] = frames[r].timestamp();
            }
        }

        double delta = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            delta += euclidean(next.features[j], current.features[j]) + std::abs(next.times[j] - current.times[j]);

        current = std::move(next);
        ++iter;
        result.final_delta = delta;
        if (delta <= config.epsilon) {
            result.converged = true;
            break;
        }
    }
    result.iterations = iter;

    // The last update may have reseeded a cluster that no frame is assigned
    // to. Move the frame farthest (composite distance) from its own centroid
    // out of a cluster with at least two members until none are empty.
    for (;;) {
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t a : assign) ++sizes[a];
        const auto empty = std::find(sizes.begin(), sizes.end(), std::size_t{0});
        if (empty == sizes.end()) break;
        const std::size_t j = static_cast<std::size_t>(empty - sizes.begin());

        std::size_t pick = n;
        double worst = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (sizes[assign[i]] < 2) continue;
            const double d =
                composite_from_flat(flat[i], frames[i].timestamp(), current, config.alpha_time)[assign[i]];
            if (d > worst) {
                worst = d;
                pick = i;
            }
        }
        const std::size_t donor = assign[pick];
        assign[pick] = j;
        mean_of(j, current.features[j], current.times[j]);
        mean_of(donor, current.features[donor], current.times[donor]);
    }

    for (std::size_t j = 0; j < k; ++j) {
        std::vector<float> vals(current.features[j].begin(), current.features[j].end());
        result.feature_centroids.emplace_back(result.patch_count, result.dim, std::move(vals));
    }
    result.time_centroids = current.times;
    result.assignments = std::move(assign);
    return result;
}

std::vector<Event> events_from(const ClusterResult& result, std::span<const FrameFeature> frames) {
    if (result.assignments.size() != frames.size())
        throw Error(ErrorKind::invalid_argument, "events_from: assignment count differs from frame count");
    const std::size_t k = result.time_centroids.size();
    std::vector<Event> events(k);
    for (std::size_t j = 0; j < k; ++j) {
        events[j].cluster_index = j;
        events[j].time_centroid = result.time_centroids[j];
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const std::size_t j = result.assignments[i];
        if (j >= k) throw Error(ErrorKind::invalid_argument, "events_from: assignment out of range");
        events[j].members.push_back(i);
    }
    for (auto& e : events) {
        if (e.members.empty()) throw Error(ErrorKind::invalid_argument, "events_from: empty cluster");
        std::stable_sort(e.members.begin(), e.members.end(), [&](std::size_t a, std::size_t b) {
            return frames[a].timestamp() < frames[b].timestamp();
        });
        e.start_time = frames[e.members.front()].timestamp();
        e.end_time = frames[e.members.back()].timestamp();
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.time_centroid < b.time_centroid; });
    for (std::size_t i = 0; i < events.size(); ++i) events[i].event_id = i;
    return events;
}

nlohmann::json to_json(const ClusterResult& result) {
    std::vector<std::size_t> labels;
    labels.reserve(result.assignments.size());
    std::vector<std::size_t> sizes(result.time_centroids.size(), 0);
    for (std::size_t a : result.assignments) {
        labels.push_back(a + 1);
        ++sizes[a];
    }
    return {{"k", result.time_centroids.size()},
            {"assignments", labels},
            {"time_centroids", result.time_centroids},
            {"cluster_sizes", sizes},
            {"iterations", result.iterations},
            {"delta", result.final_delta},
            {"converged", result.converged}};
}

nlohmann::json to_json(const Event& event) {
    return {{"event_id", event.event_id},
            {"cluster_index", event.cluster_index},
            {"members", event.members},
            {"start_time", event.start_time},
            {"end_time", event.end_time},
            {"time_centroid", event.time_centroid}};
}

} // namespace cogstream
