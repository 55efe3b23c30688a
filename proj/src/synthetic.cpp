#include "cogstream/synthetic.hpp"

#include "cogstream/dataset_pipeline.hpp"
#include "cogstream/error.hpp"
#include "cogstream/rng.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace cogstream {

namespace {

constexpr std::array<const char*, 24> kTopics{
    "knife", "pot",   "onion",  "butter", "bowl",  "spatula", "pan",   "egg",  "bread",  "cheese", "tomato", "garlic",
    "oven",  "plate", "whisk",  "flour",  "sugar", "lemon",   "carrot", "rice", "towel", "cup",    "spoon",  "ladle"};
constexpr std::array<const char*, 8> kActions{"chopping", "stirring", "pouring", "slicing",
                                              "mixing",   "frying",   "washing", "placing"};
constexpr std::array<const char*, 6> kColors{"red", "green", "orange", "black", "white", "yellow"};

constexpr std::array<QaType, 4> kBasicCycle{QaType::objects, QaType::actions, QaType::attributes,
                                            QaType::co_reference};
constexpr std::array<QaType, 5> kStreamingCycle{QaType::sequence_perception, QaType::object_tracking,
                                                QaType::causal_reasoning, QaType::dynamic_updating,
                                                QaType::dialogue_recalling};

double gaussian(Rng& rng) {
    const double u1 = 1.0 - rng.uniform01();
    const double u2 = rng.uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Rounded to one decimal so manifests stay readable.
double round1(double v) { return std::round(v * 10.0) / 10.0; }

std::string topic_of(std::size_t event) { return kTopics[event % kTopics.size()]; }
std::string action_of(std::size_t event) { return kActions[(event * 3 + 1) % kActions.size()]; }

QARecord basic_qa(int id, int segment_id, std::size_t b, std::size_t event, std::size_t scene) {
    QARecord q;
    q.qa_id = id;
    q.segment_id = segment_id;
    q.qa_type = kBasicCycle[b % kBasicCycle.size()];
    const std::string topic = topic_of(event);
    const std::string action = action_of(event);
    switch (q.qa_type) {
    case QaType::objects:
        q.question = "What object is on the counter in scene " + std::to_string(scene) + "?";
        q.answer = "A " + topic + " is on the counter.";
        break;
    case QaType::actions:
        q.question = "What is the cook doing with the " + topic + "?";
        q.answer = "The cook is " + action + " the " + topic + ".";
        break;
    case QaType::attributes:
        q.question = "What color is the " + topic + "?";
        q.answer = "The " + topic + " is " + kColors[event % kColors.size()] + ".";
        break;
    default:
        q.question = "How is it used right after that?";
        q.answer = "It is used for " + action + " the " + topic + ".";
        break;
    }
    return q;
}

} // namespace

void validate(const SyntheticSpec& spec) {
    if (spec.segments < 1 || spec.frames_per_segment < 1 || spec.patches < 1 || spec.dim < 1 ||
        spec.events_per_segment < 1 || spec.num_paths < 1)
        throw Error(ErrorKind::invalid_config, "synthetic counts must be >= 1");
    if (spec.events_per_segment > spec.frames_per_segment)
        throw Error(ErrorKind::invalid_config, "more events than frames per segment");
    if (!(spec.segment_seconds > 0.0)) throw Error(ErrorKind::invalid_config, "segment_seconds must be positive");
}

SyntheticSession make_synthetic(const SyntheticSpec& spec) {
    validate(spec);
    SyntheticSession out;
    SessionManifest& m = out.manifest;
    m.video_id = "synthetic-" + std::to_string(spec.seed);

    // Frames: each event is a tight cloud around its own mean.
    Rng feature_rng(derive_seed(spec.seed, 0));
    const std::size_t width = spec.patches * spec.dim;
    std::vector<std::size_t> segment_events; // global event index of each segment's first event
    for (std::size_t s = 0; s < spec.segments; ++s) {
        SegmentMeta seg;
        seg.segment_id = static_cast<int>(s + 1);
        seg.start_s = static_cast<double>(s) * spec.segment_seconds;
        seg.end_s = static_cast<double>(s + 1) * spec.segment_seconds;
        seg.embedding_ref = "segment_" + std::to_string(seg.segment_id) + ".cgse";

        std::vector<Vector> means(spec.events_per_segment, Vector(width));
        for (auto& mean : means)
            for (double& v : mean) v = 4.0 * gaussian(feature_rng);

        std::vector<FrameFeature> frames;
        const double step = spec.segment_seconds / static_cast<double>(spec.frames_per_segment);
        for (std::size_t i = 0; i < spec.frames_per_segment; ++i) {
            const std::size_t local_event = i * spec.events_per_segment / spec.frames_per_segment;
            std::vector<float> vals(width);
            for (std::size_t c = 0; c < width; ++c)
                vals[c] = static_cast<float>(means[local_event][c] + 0.05 * gaussian(feature_rng));
            frames.emplace_back(FeatureMatrix(spec.patches, spec.dim, std::move(vals)),
                                seg.start_s + (static_cast<double>(i) + 0.5) * step);
            out.event_labels.push_back(s * spec.events_per_segment + local_event);
        }
        out.frames.emplace(seg.segment_id, std::move(frames));
        segment_events.push_back(s * spec.events_per_segment);
        m.segments.push_back(std::move(seg));
    }

    // QA pool with planted relevant sets.
    Rng qa_rng(derive_seed(spec.seed, 1));
    int next_id = 1;
    std::vector<std::size_t> qa_segment; // segment position per pool entry
    auto earlier_ids = [&](std::size_t s) {
        std::vector<int> ids;
        for (std::size_t i = 0; i < m.qa_pool.size(); ++i)
            if (qa_segment[i] < s) ids.push_back(m.qa_pool[i].qa_id);
        return ids;
    };
    auto pick = [&](std::vector<int> from, std::size_t count) {
        std::set<int> chosen;
        while (chosen.size() < count && !from.empty()) {
            const std::size_t idx = qa_rng.uniform_index(from.size());
            chosen.insert(from[idx]);
            from.erase(from.begin() + static_cast<std::ptrdiff_t>(idx));
        }
        return chosen;
    };
    auto qa_by_id = [&](int id) -> const QARecord& { return *m.find_qa(id); };

    for (std::size_t s = 0; s < spec.segments; ++s) {
        const int segment_id = static_cast<int>(s + 1);
        std::vector<QARecord> added;
        for (std::size_t b = 0; b < spec.basic_per_segment; ++b)
            added.push_back(
                basic_qa(next_id++, segment_id, b, segment_events[s] + b % spec.events_per_segment, s + 1));

        const auto prior = earlier_ids(s);
        for (std::size_t j = 0; j < spec.streaming_per_segment; ++j) {
            QARecord q;
            q.qa_id = next_id++;
            q.segment_id = segment_id;
            q.qa_type = kStreamingCycle[(s * spec.streaming_per_segment + j) % kStreamingCycle.size()];
            if (prior.empty() && q.qa_type == QaType::dialogue_recalling) q.qa_type = QaType::sequence_perception;

            const std::string here = topic_of(segment_events[s] + j % spec.events_per_segment);
            if (q.qa_type == QaType::dialogue_recalling) {
                q.relevant_ids = pick(prior, 1);
                const QARecord& p = qa_by_id(*q.relevant_ids.begin());
                q.question = "What did I ask about " + p.question;
                q.answer = "You asked " + p.question + " and I said " + p.answer;
            } else if (prior.empty()) {
                q.question = "What happens to the " + here + " in this scene?";
                q.answer = "The " + here + " is being " + action_of(segment_events[s]) + ".";
            } else {
                q.relevant_ids = pick(prior, 1 + qa_rng.uniform_index(2));
                std::string mentioned;
                for (int id : q.relevant_ids) {
                    const auto& p = qa_by_id(id);
                    mentioned += (mentioned.empty() ? "" : " and ") + p.answer.substr(0, p.answer.size() - 1);
                }
                q.question = "Given that " + mentioned + ", what changes with the " + here + " now?";
                q.answer = "Earlier " + mentioned + "; now the " + here + " is being " +
                           action_of(segment_events[s] + 1) + ".";
            }
            added.push_back(std::move(q));
        }
        for (auto& q : added) {
            qa_segment.push_back(s);
            m.qa_pool.push_back(std::move(q));
        }
    }

    const std::size_t last = spec.segments - 1;
    for (std::size_t g = 0; g < spec.global_qas; ++g) {
        QARecord q;
        q.qa_id = next_id++;
        q.segment_id = static_cast<int>(last + 1);
        q.qa_type = g % 2 == 0 ? QaType::overall_summary : QaType::global_analysis;
        q.relevant_ids = pick(earlier_ids(last), 2 + qa_rng.uniform_index(2));
        q.question = g % 2 == 0 ? "Could you summarize the entire cooking process?"
                                : "Why did the cook change tools between the scenes?";
        q.answer = "The cook worked through " + std::to_string(spec.segments) + " scenes.";
        qa_segment.push_back(last);
        m.qa_pool.push_back(std::move(q));
    }

    // Scores: planted relevant pairs land in [4.5, 7], everything else in
    // [0, 3.5], so the RS > 4 rule recovers the planted sets exactly.
    for (std::size_t i = 0; i < m.qa_pool.size(); ++i) {
        auto& q = m.qa_pool[i];
        for (std::size_t p = 0; p < m.qa_pool.size(); ++p) {
            if (qa_segment[p] >= qa_segment[i]) continue;
            const int pid = m.qa_pool[p].qa_id;
            q.relevance_scores[pid] = q.relevant_ids.count(pid) ? round1(4.5 + 2.5 * qa_rng.uniform01())
                                                                : round1(3.5 * qa_rng.uniform01());
        }
    }

    PathConfig paths;
    paths.num_paths = spec.num_paths;
    paths.basic_per_segment = spec.basic_per_segment;
    paths.complex_per_segment = spec.streaming_per_segment;
    paths.seed = derive_seed(spec.seed, 2);
    m.dialogue_streams = generate_paths(m, paths);

    validate_manifest(m);
    return out;
}

std::filesystem::path write_synthetic(const SyntheticSession& session, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& seg : session.manifest.segments)
        save_embeddings(dir / seg.embedding_ref, session.frames.at(seg.segment_id));
    const auto manifest_path = dir / "manifest.json";
    save_manifest(manifest_path, session.manifest);
    return manifest_path;
}

} // namespace cogstream
