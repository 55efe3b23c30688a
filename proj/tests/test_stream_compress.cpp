#include "cogstream/error.hpp"
#include "cogstream/providers.hpp"
#include "cogstream/rng.hpp"
#include "cogstream/stream_compress.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace cogstream;

namespace {

// Two events of five frames each, P=4, D=3.
struct TwoEvents {
    std::vector<FrameFeature> frames;
    std::vector<Event> events;
};

TwoEvents two_events() {
    TwoEvents s;
    for (int i = 0; i < 10; ++i) {
        std::vector<float> v(12);
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 3; ++c)
                v[r * 3 + c] = i < 5 ? (c == 0 ? 1.0f + 0.1f * static_cast<float>(r) : 0.0f)
                                     : (c == 1 ? 2.0f + 0.5f * static_cast<float>(r) : 0.0f);
        s.frames.emplace_back(FeatureMatrix(4, 3, std::move(v)), static_cast<double>(i));
    }
    Event a;
    a.event_id = 0;
    a.members = {0, 1, 2, 3, 4};
    a.start_time = 0.0;
    a.end_time = 4.0;
    a.time_centroid = 2.0;
    Event b;
    b.event_id = 1;
    b.cluster_index = 1;
    b.members = {5, 6, 7, 8, 9};
    b.start_time = 5.0;
    b.end_time = 9.0;
    b.time_centroid = 7.0;
    s.events = {a, b};
    return s;
}

std::vector<EventEmbedding> embeddings_of(const TwoEvents& s) {
    std::vector<EventEmbedding> out;
    for (const auto& e : s.events) out.push_back(embed_event(e, s.frames));
    return out;
}

class MeanStub : public EventSummarizer {
public:
    std::string id() const override { return "mean-stub"; }
    std::vector<Vector> hidden_states(const FeatureMatrix& tokens, std::string_view prompt) override {
        last_prompt = std::string(prompt);
        rows = tokens.rows();
        return {mean_pool(tokens)};
    }
    std::string last_prompt;
    std::size_t rows = 0;
};

class FailingSummarizer : public EventSummarizer {
public:
    std::string id() const override { return "failing"; }
    std::vector<Vector> hidden_states(const FeatureMatrix&, std::string_view) override {
        throw Error(ErrorKind::provider, "down");
    }
};

class ConstEmbedder : public TextEmbedder {
public:
    std::string id() const override { return "const"; }
    Vector embed(std::string_view) override { return {0.5, 0.5, 0.0}; }
};

} // namespace

TEST_CASE("fallback event embedding of equal rows is that row") {
    std::vector<FrameFeature> frames{FrameFeature(FeatureMatrix(3, 2, std::vector<float>{4, -1, 4, -1, 4, -1}), 0.0)};
    Event e;
    e.members = {0};
    const auto h = embed_event(e, frames);
    CHECK(h.vector == Vector{4, -1});
    CHECK(h.provenance == kFallbackMeanpool);
}

TEST_CASE("fallback event embedding averages frames") {
    std::vector<FrameFeature> frames{FrameFeature(FeatureMatrix(2, 2, std::vector<float>{0, 0, 2, 2}), 0.0),
                                     FrameFeature(FeatureMatrix(2, 2, std::vector<float>{3, 3, 3, 3}), 1.0)};
    Event e;
    e.members = {0, 1};
    CHECK(embed_event(e, frames).vector == Vector{2, 2});
}

TEST_CASE("mean stub provider matches fallback") {
    const auto s = two_events();
    MeanStub stub;
    for (const auto& e : s.events) {
        const auto via_stub = embed_event(e, s.frames, &stub);
        const auto fallback = embed_event(e, s.frames);
        REQUIRE(via_stub.vector.size() == fallback.vector.size());
        for (std::size_t i = 0; i < fallback.vector.size(); ++i)
            CHECK(via_stub.vector[i] == doctest::Approx(fallback.vector[i]));
        CHECK(via_stub.provenance == "mean-stub");
        CHECK(stub.last_prompt == kEventSummaryPrompt);
        CHECK(stub.rows == 20); // 5 frames x 4 patches
    }
}

TEST_CASE("summarizer failure falls back only when allowed") {
    const auto s = two_events();
    FailingSummarizer bad;
    CHECK(embed_event(s.events[0], s.frames, &bad, true).provenance == kFallbackMeanpool);
    CHECK_THROWS_AS(embed_event(s.events[0], s.frames, &bad, false), Error);
    Event empty;
    CHECK_THROWS_AS(embed_event(empty, s.frames), Error);
}

TEST_CASE("question embedding fallback") {
    const auto a = embed_question("Where is the red knife?", 64);
    CHECK(a == embed_question("Where is the red knife?", 64));
    CHECK(a == embed_question("  where   is the\tRED knife ", 64));
    CHECK(a.size() == 64);
    CHECK_THROWS_AS(embed_question("", 64), Error);
    CHECK_THROWS_AS(embed_question("?!", 64), Error);

    ConstEmbedder provider;
    CHECK(embed_question("anything", 3, &provider) == Vector{0.5, 0.5, 0.0});
}

TEST_CASE("question embedding of disjoint vocabularies is near orthogonal") {
    Rng rng(99);
    auto word = [&](char prefix) {
        std::string w(1, prefix);
        for (int i = 0; i < 6; ++i) w += static_cast<char>('a' + rng.uniform_index(26));
        return w;
    };
    double sum_abs = 0.0;
    const int pairs = 1000;
    for (int i = 0; i < pairs; ++i) {
        std::string a, b;
        const std::size_t na = 3 + rng.uniform_index(8), nb = 3 + rng.uniform_index(8);
        for (std::size_t t = 0; t < na; ++t) a += word('x') + " ";
        for (std::size_t t = 0; t < nb; ++t) b += word('q') + " ";
        const auto va = term_hash_embedding(a, 64), vb = term_hash_embedding(b, 64);
        if (l2_norm(va) == 0.0 || l2_norm(vb) == 0.0) continue;
        sum_abs += std::abs(cosine(va, vb));
    }
    CHECK(sum_abs / pairs < 0.2);
}

TEST_CASE("identical question and event is preserved, orthogonal is pooled") {
    const auto s = two_events();
    const auto embs = embeddings_of(s);
    CompressionConfig cfg;
    const auto units = compress_stream(s.events, embs, s.frames, embs[0].vector, cfg);
    REQUIRE(units.size() == 2);
    CHECK(units[0].preserved());
    CHECK(units[0].relevance == doctest::Approx(1.0));
    CHECK_FALSE(units[1].preserved()); // event 1 lies on a different axis
    CHECK(units[1].relevance == doctest::Approx(0.0));
    CHECK(units[1].token_count() == 5);
    CHECK(units[1].frame_count() == 5);
    CHECK(units[1].timestamps() == std::vector<double>{5, 6, 7, 8, 9});
    CHECK(units[0].timestamps() == std::vector<double>{0, 1, 2, 3, 4});

    const auto& pooled = std::get<PooledTokens>(units[1].content);
    REQUIRE(pooled.tokens.size() == 5);
    CHECK(pooled.tokens[0] == mean_pool(s.frames[5].patches()));
}

TEST_CASE("token accounting") {
    const auto s = two_events();
    const auto embs = embeddings_of(s);
    const auto units = compress_stream(s.events, embs, s.frames, embs[0].vector, {});
    CHECK(units[0].token_count() == 20);
    CHECK(units[1].token_count() == 5);
    CHECK(token_count(units) == 25);
    CHECK(uncompressed_token_count(s.events, s.frames) == 40);
}

TEST_CASE("threshold boundary sweep") {
    const auto s = two_events();
    const auto embs = embeddings_of(s);
    const Vector q = embs[0].vector;

    CompressionConfig all;
    all.theta = -1.0;
    for (const auto& u : compress_stream(s.events, embs, s.frames, q, all)) CHECK(u.preserved());

    CompressionConfig exact;
    exact.theta = 1.0;
    const auto units = compress_stream(s.events, embs, s.frames, q, exact);
    CHECK(units[0].preserved());
    CHECK_FALSE(units[1].preserved());

    // Sweep theta across the direct cosine of each event.
    const double s0 = cosine(embs[0].vector, q), s1 = cosine(embs[1].vector, q);
    for (double theta = -1.0; theta <= 1.0; theta += 0.05) {
        CompressionConfig cfg;
        cfg.theta = theta;
        const auto u = compress_stream(s.events, embs, s.frames, q, cfg);
        CHECK(u[0].preserved() == (s0 >= theta));
        CHECK(u[1].preserved() == (s1 >= theta));
    }

    CompressionConfig bad;
    bad.theta = 1.5;
    CHECK_THROWS_AS(validate(bad), Error);
}

TEST_CASE("raising theta never preserves more") {
    Rng rng(6);
    auto s = two_events();
    auto embs = embeddings_of(s);
    for (int trial = 0; trial < 50; ++trial) {
        Vector q(3);
        for (auto& v : q) v = rng.uniform01() * 2.0 - 1.0;
        std::size_t prev = SIZE_MAX;
        for (double theta = -1.0; theta <= 1.0; theta += 0.1) {
            CompressionConfig cfg;
            cfg.theta = theta;
            const auto units = compress_stream(s.events, embs, s.frames, q, cfg);
            const std::size_t tokens = token_count(units);
            CHECK(tokens <= prev);
            CHECK(tokens <= uncompressed_token_count(s.events, s.frames));
            prev = tokens;
        }
    }
}

TEST_CASE("zero-norm embeddings are always pooled") {
    const auto s = two_events();
    auto embs = embeddings_of(s);
    embs[1].vector.assign(3, 0.0);
    CompressionConfig cfg;
    cfg.theta = -1.0;
    const auto units = compress_stream(s.events, embs, s.frames, embs[0].vector, cfg);
    CHECK(units[0].preserved());
    CHECK_FALSE(units[1].preserved());
    CHECK(units[1].degenerate);
    CHECK(units[1].relevance == -1.0);

    const Vector zero_q(3, 0.0);
    for (const auto& u : compress_stream(s.events, embs, s.frames, zero_q, cfg)) CHECK_FALSE(u.preserved());
}

TEST_CASE("compression rejects mismatched dimensions") {
    const auto s = two_events();
    const auto embs = embeddings_of(s);
    const Vector q{1.0, 0.0};
    try {
        compress_stream(s.events, embs, s.frames, q, {});
        FAIL("accepted a mismatched question");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::dimension_mismatch);
    }
}

TEST_CASE("units are ordered by event time centroid") {
    auto s = two_events();
    std::swap(s.events[0], s.events[1]);
    const auto embs = embeddings_of(s);
    const auto units = compress_stream(s.events, embs, s.frames, embs[0].vector, {});
    CHECK(units[0].time_centroid < units[1].time_centroid);
    CHECK(units[0].start_time == 0.0);
    const auto doc = to_json(units[1]);
    CHECK(doc.at("mode") == "preserved");
    CHECK(doc.at("tokens") == 20);
}
