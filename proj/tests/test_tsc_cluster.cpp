#include "cogstream/error.hpp"
#include "cogstream/rng.hpp"
#include "cogstream/tsc_cluster.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

using namespace cogstream;

namespace {

FrameFeature frame_of(std::vector<float> values, double t, std::size_t p = 1) {
    const std::size_t d = values.size() / p;
    return FrameFeature(FeatureMatrix(p, d, std::move(values)), t);
}

std::vector<FrameFeature> random_frames(Rng& rng, std::size_t n, std::size_t p, std::size_t d) {
    std::vector<FrameFeature> out;
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> v(p * d);
        for (auto& x : v) x = static_cast<float>(rng.uniform01() * 4.0 - 2.0);
        t += rng.uniform01();
        out.push_back(frame_of(std::move(v), t, p));
    }
    return out;
}

std::vector<double> flat(const FrameFeature& f) {
    const auto s = f.patches().flat();
    return {s.begin(), s.end()};
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// Plain feature-space nearest centroid, lowest index on ties.
std::size_t plain_nearest(const std::vector<double>& x, const std::vector<std::vector<double>>& centroids) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centroids.size(); ++j) {
        const double d = dist(x, centroids[j]);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

// Normalized partition label: clusters renumbered by first appearance.
std::vector<std::size_t> canonical(const std::vector<std::size_t>& labels) {
    std::vector<std::size_t> map(labels.size() + 1, SIZE_MAX), out;
    std::size_t next = 0;
    for (auto l : labels) {
        if (map[l] == SIZE_MAX) map[l] = next++;
        out.push_back(map[l]);
    }
    return out;
}

} // namespace

TEST_CASE("choose_k") {
    CHECK(choose_k(150, {1, 15}) == 10);
    CHECK(choose_k(150) == 10);
    CHECK(choose_k(10, {1, 15}) == 1);
    CHECK(choose_k(30, {1, 5}) == 6);
    CHECK(choose_k(3, {2, 1}) == 3);
    CHECK_THROWS_AS(choose_k(10, {1, 0}), Error);
}

TEST_CASE("config validation") {
    ClusterConfig c;
    c.k = 5;
    CHECK_THROWS_AS(validate(c, 4), Error);
    c.k = 2;
    c.alpha_time = -0.5;
    CHECK_THROWS_AS(validate(c, 4), Error);
    c.alpha_time = 1.0;
    c.max_iters = 0;
    CHECK_THROWS_AS(validate(c, 4), Error);
    c.max_iters = 5;
    c.epsilon = -1.0;
    CHECK_THROWS_AS(validate(c, 4), Error);

    Rng rng(1);
    auto frames = random_frames(rng, 3, 1, 2);
    ClusterConfig too_many;
    too_many.k = 4;
    try {
        cluster(frames, too_many);
        FAIL("k > N accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::invalid_config);
    }
}

TEST_CASE("composite distance with one centroid is zero") {
    Centroids c{{{1.0, 2.0}}, {5.0}};
    const auto d = composite_distances(frame_of({9, 9}, 100.0), c, 1.0);
    REQUIRE(d.size() == 1);
    CHECK(d[0] == 0.0);
}

TEST_CASE("composite distance prefers the time-near centroid on a feature tie") {
    // (0,0) is at distance 1 from both (1,0) and (-1,0).
    Centroids c{{{1.0, 0.0}, {-1.0, 0.0}}, {100.0, 0.0}};
    const auto d = composite_distances(frame_of({0, 0}, 0.0), c, 1.0);
    // normalized feature distances (0,0); normalized time distances (1,0)
    CHECK(d[0] == doctest::Approx(1.0));
    CHECK(d[1] == 0.0);
    CHECK(d[1] < d[0]);
    CHECK(nearest_centroid(frame_of({0, 0}, 0.0), c, 1.0) == 1);
    // Without time weight the tie goes to the lowest index.
    CHECK(nearest_centroid(frame_of({0, 0}, 0.0), c, 0.0) == 0);
}

TEST_CASE("composite distance hand evaluation") {
    // features: distances 3, 1, 5 -> normalized 0.5, 0, 1
    // times:    distances 2, 6, 4 -> normalized 0, 1, 0.5
    Centroids c{{{3.0}, {1.0}, {5.0}}, {2.0, 6.0, 4.0}};
    const auto d = composite_distances(frame_of({0}, 0.0), c, 0.5);
    CHECK(d[0] == doctest::Approx(std::sqrt(0.25)));
    CHECK(d[1] == doctest::Approx(std::sqrt(0.5)));
    CHECK(d[2] == doctest::Approx(std::sqrt(1.0 + 0.5 * 0.25)));
}

TEST_CASE("alpha zero reduces to feature nearest centroid") {
    Rng rng(2024);
    std::size_t mismatches = 0;
    for (int instance = 0; instance < 100; ++instance) {
        const std::size_t p = 1 + rng.uniform_index(4), d = 1 + rng.uniform_index(16);
        const std::size_t n = 2 + rng.uniform_index(63);
        const auto frames = random_frames(rng, n, p, d);
        const std::size_t k = 1 + rng.uniform_index(std::min<std::size_t>(n, 8));
        Centroids c;
        std::vector<std::vector<double>> plain;
        for (std::size_t j = 0; j < k; ++j) {
            std::vector<double> v(p * d);
            for (auto& x : v) x = rng.uniform01() * 4.0 - 2.0;
            c.features.push_back(v);
            c.times.push_back(rng.uniform01() * 50.0);
            plain.push_back(v);
        }
        for (const auto& f : frames)
            if (nearest_centroid(f, c, 0.0) != plain_nearest(flat(f), plain)) ++mismatches;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("alpha zero matches plain k-means step by step") {
    Rng rng(77);
    int compared = 0;
    for (int instance = 0; instance < 30; ++instance) {
        const auto frames = random_frames(rng, 24, 2, 3);
        const std::size_t k = 3;
        Rng init_rng(instance);
        const Centroids init = kmeanspp_init(frames, k, init_rng);

        std::vector<std::vector<double>> cents = init.features;
        for (std::size_t step = 1; step <= 6; ++step) {
            std::vector<std::size_t> expected;
            for (const auto& f : frames) expected.push_back(plain_nearest(flat(f), cents));
            std::vector<std::size_t> counts(k, 0);
            for (auto a : expected) ++counts[a];
            if (std::count(counts.begin(), counts.end(), 0u) > 0) break; // reseeding diverges from plain k-means

            ClusterConfig cfg;
            cfg.k = k;
            cfg.alpha_time = 0.0;
            cfg.max_iters = step;
            cfg.epsilon = 0.0;
            const auto got = cluster_from(frames, init, cfg);
            CHECK(got.assignments == expected);
            ++compared;

            for (std::size_t j = 0; j < k; ++j) {
                std::vector<double> mean(frames[0].patches().size(), 0.0);
                for (std::size_t i = 0; i < frames.size(); ++i)
                    if (expected[i] == j) {
                        const auto x = flat(frames[i]);
                        for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += x[c];
                    }
                for (auto& v : mean) v /= static_cast<double>(counts[j]);
                cents[j] = mean;
            }
        }
    }
    CHECK(compared > 60);
}

TEST_CASE("k-means++ exhausts frames when k equals N") {
    Rng data(4);
    const auto frames = random_frames(data, 7, 2, 2);
    Rng rng(9);
    auto idx = kmeanspp_seed_indices(frames, 7, rng);
    std::sort(idx.begin(), idx.end());
    CHECK(idx == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
}

TEST_CASE("k-means++ is deterministic per seed") {
    Rng data(4);
    const auto frames = random_frames(data, 20, 2, 2);
    Rng a(123), b(123);
    CHECK(kmeanspp_seed_indices(frames, 5, a) == kmeanspp_seed_indices(frames, 5, b));
    Rng c(123);
    const auto init = kmeanspp_init(frames, 5, c);
    CHECK(init.size() == 5);
}

TEST_CASE("k-means++ picks one seed per separated group") {
    std::vector<FrameFeature> frames;
    Rng data(8);
    for (int i = 0; i < 10; ++i)
        frames.push_back(frame_of({static_cast<float>(data.uniform01()), static_cast<float>(data.uniform01())}, i));
    for (int i = 0; i < 10; ++i)
        frames.push_back(
            frame_of({100.0f + static_cast<float>(data.uniform01()), 100.0f + static_cast<float>(data.uniform01())},
                     10 + i));
    int split = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        Rng rng(derive_seed(555, trial));
        const auto idx = kmeanspp_seed_indices(frames, 2, rng);
        if ((idx[0] < 10) != (idx[1] < 10)) ++split;
    }
    CHECK(split >= 950);
}

TEST_CASE("k=1 gives the global mean") {
    const std::vector<FrameFeature> frames{frame_of({1, 2}, 0.0), frame_of({3, 6}, 2.0), frame_of({5, 1}, 7.0)};
    ClusterConfig cfg;
    cfg.k = 1;
    const auto r = cluster(frames, cfg);
    CHECK(r.assignments == std::vector<std::size_t>{0, 0, 0});
    CHECK(r.feature_centroids[0].at(0, 0) == doctest::Approx(3.0));
    CHECK(r.feature_centroids[0].at(0, 1) == doctest::Approx(3.0));
    CHECK(r.time_centroids[0] == doctest::Approx(3.0));
    CHECK(r.iterations <= 2);
    CHECK(r.converged);
    const auto events = events_from(r, frames);
    REQUIRE(events.size() == 1);
    CHECK(events[0].members == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("identical features split by time") {
    const std::vector<FrameFeature> frames{frame_of({1, 1}, 0.0), frame_of({1, 1}, 1.0), frame_of({1, 1}, 100.0),
                                           frame_of({1, 1}, 101.0)};
    // Brute-force oracle: the 2-partition minimizing within-cluster time spread.
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_labels;
    for (unsigned mask = 1; mask < 15; ++mask) {
        std::vector<std::size_t> labels(4);
        double cost = 0.0;
        for (std::size_t g = 0; g < 2; ++g) {
            double sum = 0.0, n = 0.0;
            for (std::size_t i = 0; i < 4; ++i) {
                labels[i] = (mask >> i) & 1u;
                if (labels[i] == g) {
                    sum += frames[i].timestamp();
                    n += 1.0;
                }
            }
            for (std::size_t i = 0; i < 4; ++i)
                if (labels[i] == g) cost += std::abs(frames[i].timestamp() - sum / n);
        }
        if (cost < best) {
            best = cost;
            best_labels = labels;
        }
    }
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ClusterConfig cfg;
        cfg.k = 2;
        cfg.seed = seed;
        const auto r = cluster(frames, cfg);
        CHECK(canonical(r.assignments) == canonical(best_labels));
        const auto events = events_from(r, frames);
        REQUIRE(events.size() == 2);
        CHECK(events[0].end_time < events[1].start_time);
    }
}

TEST_CASE("clustering invariants") {
    Rng rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 5 + rng.uniform_index(40);
        const auto frames = random_frames(rng, n, 1 + rng.uniform_index(3), 1 + rng.uniform_index(6));
        ClusterConfig cfg;
        cfg.k = 1 + rng.uniform_index(std::min<std::size_t>(n, 6));
        cfg.alpha_time = rng.uniform01() * 2.0;
        cfg.max_iters = 1 + rng.uniform_index(20);
        cfg.seed = trial;
        const auto r = cluster(frames, cfg);
        CHECK(r.assignments.size() == n);
        CHECK(r.iterations <= cfg.max_iters);
        std::vector<std::size_t> sizes(cfg.k, 0);
        for (auto a : r.assignments) {
            REQUIRE(a < cfg.k);
            ++sizes[a];
        }
        CHECK(std::count(sizes.begin(), sizes.end(), 0u) == 0);
        if (r.converged) CHECK(r.final_delta <= cfg.epsilon);

        const auto again = cluster(frames, cfg);
        CHECK(again.assignments == r.assignments);
        CHECK(again.time_centroids == r.time_centroids);
        CHECK(again.feature_centroids == r.feature_centroids);
        CHECK(again.final_delta == r.final_delta);

        const auto events = events_from(r, frames);
        std::size_t total = 0;
        std::set<std::size_t> seen;
        for (std::size_t e = 0; e < events.size(); ++e) {
            total += events[e].members.size();
            seen.insert(events[e].members.begin(), events[e].members.end());
            CHECK(std::is_sorted(events[e].members.begin(), events[e].members.end(), [&](auto a, auto b) {
                return frames[a].timestamp() < frames[b].timestamp();
            }));
            if (e > 0) CHECK(events[e - 1].time_centroid <= events[e].time_centroid);
            CHECK(events[e].event_id == e);
        }
        CHECK(total == n);
        CHECK(seen.size() == n);
    }
}

TEST_CASE("cluster json uses one-based labels") {
    const std::vector<FrameFeature> frames{frame_of({0}, 0.0), frame_of({0}, 1.0), frame_of({9}, 50.0)};
    ClusterConfig cfg;
    cfg.k = 2;
    const auto r = cluster(frames, cfg);
    const auto doc = to_json(r);
    CHECK(doc.at("k") == 2);
    for (const auto& a : doc.at("assignments")) {
        CHECK(a.get<int>() >= 1);
        CHECK(a.get<int>() <= 2);
    }
    CHECK(doc.at("assignments")[0] == doc.at("assignments")[1]);
    CHECK(doc.at("assignments")[0] != doc.at("assignments")[2]);
}
