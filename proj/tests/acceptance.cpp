// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include "cogstream/dataset_pipeline.hpp"
#include "cogstream/dialogue_retrieval.hpp"
#include "cogstream/engine_config.hpp"
#include "cogstream/rng.hpp"
#include "cogstream/simulator.hpp"
#include "cogstream/stream_compress.hpp"
#include "cogstream/tsc_cluster.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace cogstream;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << std::fixed << v;
    return s.str();
}

std::vector<double> flat(const FrameFeature& f) {
    const auto s = f.patches().flat();
    return {s.begin(), s.end()};
}

std::size_t plain_nearest(const std::vector<double>& x, const std::vector<std::vector<double>>& centroids) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centroids.size(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - centroids[j][i]) * (x[i] - centroids[j][i]);
        if (s < best_d) {
            best_d = s;
            best = j;
        }
    }
    return best;
}

Outcome clustering_reduction() {
    const auto start = Clock::now();
    Rng rng(20240601);
    std::size_t mismatches = 0, checked = 0;
    for (int instance = 0; instance < 100; ++instance) {
        const std::size_t n = 1 + rng.uniform_index(64);
        const std::size_t p = 1 + rng.uniform_index(4);
        const std::size_t d = 1 + rng.uniform_index(16);
        std::vector<FrameFeature> frames;
        double t = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<float> v(p * d);
            for (auto& x : v) x = static_cast<float>(rng.uniform01() * 2.0 - 1.0);
            t += rng.uniform01();
            frames.emplace_back(FeatureMatrix(p, d, std::move(v)), t);
        }
        const std::size_t k = 1 + rng.uniform_index(std::min<std::size_t>(n, 10));
        // Shared centroids: k-means++ seeds with a small jitter.
        Rng init_rng(derive_seed(99, instance));
        Centroids c = kmeanspp_init(frames, k, init_rng);
        for (std::size_t j = 0; j < k; ++j)
            for (auto& x : c.features[j]) x += 0.05 * (rng.uniform01() - 0.5);
        std::vector<std::vector<double>> plain = c.features;
        for (const auto& f : frames) {
            if (nearest_centroid(f, c, 0.0) != plain_nearest(flat(f), plain)) ++mismatches;
            ++checked;
        }
    }
    const double elapsed = seconds_since(start);
    return {mismatches == 0 && elapsed < 5.0, std::to_string(mismatches) + " mismatches over " +
                                                  std::to_string(checked) + " frames in 100 instances, " +
                                                  fmt(elapsed, 3) + " s (limit 5 s)"};
}

Outcome temporal_split() {
    const auto start = Clock::now();
    int recovered = 0;
    for (int trial = 0; trial < 50; ++trial) {
        Rng rng(derive_seed(7, trial));
        const std::size_t p = 1 + rng.uniform_index(4), d = 1 + rng.uniform_index(16);
        std::vector<float> shared(p * d);
        for (auto& x : shared) x = static_cast<float>(rng.uniform01());
        const std::size_t na = 3 + rng.uniform_index(10), nb = 3 + rng.uniform_index(10);
        std::vector<FrameFeature> frames;
        std::vector<double> times;
        for (std::size_t i = 0; i < na; ++i) times.push_back(rng.uniform01() * 10.0);
        std::sort(times.begin(), times.end());
        std::vector<double> later;
        for (std::size_t i = 0; i < nb; ++i) later.push_back(100.0 + rng.uniform01() * 10.0);
        std::sort(later.begin(), later.end());
        times.insert(times.end(), later.begin(), later.end());
        for (double t : times) frames.emplace_back(FeatureMatrix(p, d, shared), t);

        ClusterConfig cfg;
        cfg.k = 2;
        cfg.alpha_time = 1.0;
        cfg.seed = static_cast<std::uint64_t>(trial);
        const auto r = cluster(frames, cfg);
        bool ok = true;
        for (std::size_t i = 0; i < frames.size(); ++i) {
            const bool same_as_first = r.assignments[i] == r.assignments[0];
            if (same_as_first != (i < na)) ok = false;
        }
        if (ok) ++recovered;
    }
    const double elapsed = seconds_since(start);
    return {recovered == 50 && elapsed < 2.0,
            std::to_string(recovered) + "/50 planted partitions recovered, " + fmt(elapsed, 3) + " s (limit 2 s)"};
}

Outcome hyperparameter_fidelity() {
    const std::size_t k = choose_k(150, {1, 15});
    const json cfg = to_json(EngineConfig{});
    const double theta = cfg.at("compression").at("theta");
    const auto n = cfg.at("paths").at("num_paths").get<std::size_t>();
    const double alpha = cfg.at("paths").at("alpha_len");
    const bool pass = k == 10 && theta == 0.45 && n == 3 && alpha == 0.3;
    return {pass, "choose_k(150, 1/15)=" + std::to_string(k) + ", theta=" + fmt(theta, 2) +
                      ", N=" + std::to_string(n) + ", alpha_len=" + fmt(alpha, 1)};
}

Outcome compression_accounting() {
    // Event 0 lies along the question, event 1 is orthogonal to it.
    std::vector<FrameFeature> frames;
    for (int i = 0; i < 10; ++i) {
        std::vector<float> v(4 * 3, 0.0f);
        for (std::size_t r = 0; r < 4; ++r) v[r * 3 + (i < 5 ? 0 : 1)] = 1.0f + static_cast<float>(r);
        frames.emplace_back(FeatureMatrix(4, 3, std::move(v)), static_cast<double>(i));
    }
    std::vector<Event> events(2);
    for (std::size_t e = 0; e < 2; ++e) {
        events[e].event_id = e;
        events[e].cluster_index = e;
        for (std::size_t i = 0; i < 5; ++i) events[e].members.push_back(e * 5 + i);
        events[e].start_time = static_cast<double>(e * 5);
        events[e].end_time = static_cast<double>(e * 5 + 4);
        events[e].time_centroid = static_cast<double>(e * 5) + 2.0;
    }
    std::vector<EventEmbedding> embs;
    for (const auto& e : events) embs.push_back(embed_event(e, frames));
    const Vector q{1.0, 0.0, 0.0};
    const auto units = compress_stream(events, embs, frames, q, CompressionConfig{});
    const std::size_t out = token_count(units), in = uncompressed_token_count(events, frames);
    const double ratio = static_cast<double>(out) / static_cast<double>(in);
    const bool shape = units.size() == 2 && units[0].preserved() && !units[1].preserved();
    return {shape && out == 25 && in == 40 && ratio == 25.0 / 40.0,
            "token_count=" + std::to_string(out) + ", uncompressed=" + std::to_string(in) + ", ratio=" +
                fmt(ratio, 6) + " (expected 25, 0.625000)"};
}

Outcome retrieval_metrics() {
    const auto m = score_retrieval({{1, 2}, 0}, {2, 3}, {1, 2, 3, 4, 5});
    const bool hand = m.accuracy == 0.6 && m.precision == 0.5 && m.recall == 0.5 && m.f1 == 0.5;

    const fs::path dir = COGSTREAM_DATA_DIR;
    const SessionManifest manifest = load_manifest(dir / "manifest.json");
    EngineConfig cfg;
    cfg.retrieval_mode = RetrievalMode::oracle;
    std::vector<int> ids;
    for (const auto& p : manifest.dialogue_streams) ids.push_back(p.path_id);
    std::vector<QuestionRecord> records;
    for (const auto& r : simulate_streams(manifest, ids, cfg, dir, 1))
        records.insert(records.end(), r.records.begin(), r.records.end());
    const auto corpus = evaluate(records);
    return {hand && corpus.metrics.f1 == 1.0 && corpus.failures == 0,
            "hand example acc=" + fmt(m.accuracy, 2) + " P=" + fmt(m.precision, 2) + " R=" + fmt(m.recall, 2) +
                " F1=" + fmt(m.f1, 2) + "; oracle corpus F1=" + fmt(corpus.metrics.f1, 4) + " over " +
                std::to_string(corpus.questions) + " questions"};
}

Outcome sampling_law() {
    SessionManifest m;
    m.video_id = "sampling";
    m.segments = {{1, 0.0, 10.0, "segment_1.cgse"}};
    for (int id = 1; id <= 2; ++id) {
        QARecord q;
        q.qa_id = id;
        q.segment_id = 1;
        q.qa_type = id == 1 ? QaType::causal_reasoning : QaType::object_tracking;
        q.question = "q";
        q.answer = "a";
        m.qa_pool.push_back(q);
    }
    PathConfig cfg;
    cfg.basic_per_segment = 0;
    cfg.complex_per_segment = 2;
    Rng rng(12345);
    const int draws = 100000;
    int first = 0;
    for (int i = 0; i < draws; ++i)
        if (generate_path(m, cfg, rng).entries.at(0).qa_id == 1) ++first;
    const double f1 = static_cast<double>(first) / draws, f2 = 1.0 - f1;
    const auto p = selection_probabilities(std::vector<double>{1.0, 2.0});
    const bool freq_ok = std::abs(f1 - 0.5) <= 0.03 && std::abs(f2 - 0.5) <= 0.03;
    const bool soft_ok = std::abs(p[0] - 0.2689) <= 1e-4 && std::abs(p[1] - 0.7311) <= 1e-4;
    return {freq_ok && soft_ok, "first-choice frequencies " + fmt(f1) + " / " + fmt(f2) +
                                    " over 100000 draws (0.5 +/- 0.03); softmax[1,2]=[" + fmt(p[0], 6) + ", " +
                                    fmt(p[1], 6) + "]"};
}

Outcome relevance_rule() {
    const bool at = relevant_set({{1, 4.0}}).empty();
    const bool above = relevant_set({{1, 4.0 + 1e-9}}) == std::set<int>{1};
    std::vector<QARecord> pool(3);
    for (int i = 0; i < 3; ++i) {
        pool[i].qa_id = i + 1;
        pool[i].segment_id = i + 1;
    }
    pool[2].relevance_scores = {{1, 4.0}, {2, 4.0 + 1e-9}};
    build_relevant_sets(pool);
    const bool pooled = pool[2].relevant_ids == std::set<int>{2};
    return {at && above && pooled, std::string("RS=4.0 ") + (at ? "excluded" : "INCLUDED") + ", RS=4.0+1e-9 " +
                                       (above ? "included" : "EXCLUDED") + ", pool rebuild " +
                                       (pooled ? "consistent" : "INCONSISTENT")};
}

struct Run {
    int code = -1;
    std::string out;
    double seconds = 0.0;
};

Run simulate_cli(const fs::path& out) {
    const std::string cmd = std::string(COGSTREAM_CLI) + " simulate --manifest " +
                            (fs::path(COGSTREAM_DATA_DIR) / "manifest.json").string() + " --seed 7 --out " +
                            out.string() + " 2>/dev/null";
    const auto start = Clock::now();
    const int status = std::system(cmd.c_str());
    Run r;
    r.seconds = seconds_since(start);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out);
    std::stringstream s;
    s << in.rdbuf();
    r.out = s.str();
    return r;
}

Outcome end_to_end() {
    const SessionManifest manifest = load_manifest(fs::path(COGSTREAM_DATA_DIR) / "manifest.json");
    const bool bundle_shape = manifest.segments.size() == 5 && manifest.qa_pool.size() == 20;

    const fs::path tmp = fs::temp_directory_path();
    const Run a = simulate_cli(tmp / "cogstream_acceptance_a.jsonl");
    const Run b = simulate_cli(tmp / "cogstream_acceptance_b.jsonl");
    std::size_t schema_errors = 0, records = 0, leaks = SIZE_MAX;
    std::istringstream lines(a.out);
    std::string line;
    while (std::getline(lines, line)) {
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception&) {
            ++schema_errors;
            continue;
        }
        schema_errors += report_line_errors(doc).size();
        if (doc.contains("summary")) {
            leaks = doc.at("summary").at("leakage_violations").get<std::size_t>();
        } else {
            ++records;
        }
    }
    const bool pass = bundle_shape && a.code == 0 && b.code == 0 && a.seconds < 10.0 && b.seconds < 10.0 &&
                      !a.out.empty() && a.out == b.out && schema_errors == 0 && records > 0 && leaks == 0;
    fs::remove(tmp / "cogstream_acceptance_a.jsonl");
    fs::remove(tmp / "cogstream_acceptance_b.jsonl");
    return {pass, std::to_string(manifest.segments.size()) + " segments, " + std::to_string(manifest.qa_pool.size()) +
                      " QAs; runs " + fmt(a.seconds, 3) + " s / " + fmt(b.seconds, 3) + " s (limit 10 s), exit " +
                      std::to_string(a.code) + "/" + std::to_string(b.code) + ", " + std::to_string(records) +
                      " records, " + std::to_string(schema_errors) + " schema errors, byte-identical: " +
                      (a.out == b.out ? "yes" : "no") + ", leakage violations: " +
                      (leaks == SIZE_MAX ? std::string("missing") : std::to_string(leaks))};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"clustering-reduction", clustering_reduction},
        {"temporal-split-recovery", temporal_split},
        {"hyperparameter-fidelity", hyperparameter_fidelity},
        {"compression-accounting", compression_accounting},
        {"retrieval-metrics", retrieval_metrics},
        {"sampling-law", sampling_law},
        {"relevance-set-rule", relevance_rule},
        {"end-to-end-simulate", end_to_end},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
              << " acceptance criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
