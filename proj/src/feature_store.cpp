#include "cogstream/feature_store.hpp"

#include "cogstream/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace cogstream {

using nlohmann::json;

// --- FeatureMatrix / FrameFeature ------------------------------------------

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
        std::ostringstream msg;
        msg << "feature matrix " << rows_ << "x" << cols_ << " given " << values_.size() << " values";
        throw Error(ErrorKind::dimension_mismatch, msg.str());
    }
}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, float fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

FrameFeature::FrameFeature(FeatureMatrix patches, double timestamp)
    : patches_(std::move(patches)), timestamp_(timestamp) {
    if (patches_.rows() == 0 || patches_.cols() == 0)
        throw Error(ErrorKind::invalid_argument, "frame feature needs P >= 1 and D >= 1");
    if (!std::isfinite(timestamp_))
        throw Error(ErrorKind::non_finite, "frame timestamp is not finite");
    if (timestamp_ < 0.0)
        throw Error(ErrorKind::invalid_argument, "frame timestamp is negative");
    for (float v : patches_.flat()) {
        if (!std::isfinite(v)) throw Error(ErrorKind::non_finite, "frame feature contains a non-finite value");
    }
}

// --- vector primitives ------------------------------------------------------

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorKind::dimension_mismatch, "dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        std::ostringstream msg;
        msg << "cosine: dimensions " << a.size() << " and " << b.size();
        throw Error(ErrorKind::dimension_mismatch, msg.str());
    }
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::degenerate_vector, "cosine: zero-norm vector");
    const double c = dot(a, b) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

Vector mean_pool(std::span<const Vector> rows) {
    if (rows.empty()) throw Error(ErrorKind::invalid_argument, "mean_pool: no rows");
    Vector acc(rows.front().size(), 0.0);
    for (const auto& r : rows) {
        if (r.size() != acc.size()) throw Error(ErrorKind::dimension_mismatch, "mean_pool: ragged rows");
        for (std::size_t i = 0; i < r.size(); ++i) acc[i] += r[i];
    }
    const double n = static_cast<double>(rows.size());
    for (double& v : acc) v /= n;
    return acc;
}

Vector mean_pool(const FeatureMatrix& matrix) {
    return mean_pool(std::span<const FeatureMatrix>(&matrix, 1));
}

Vector mean_pool(std::span<const FeatureMatrix> matrices) {
    std::size_t total_rows = 0;
    std::size_t cols = 0;
    for (const auto& m : matrices) {
        if (m.rows() == 0) continue;
        if (total_rows == 0) cols = m.cols();
        else if (m.cols() != cols) throw Error(ErrorKind::dimension_mismatch, "mean_pool: column mismatch");
        total_rows += m.rows();
    }
    if (total_rows == 0) throw Error(ErrorKind::invalid_argument, "mean_pool: no rows");
    Vector acc(cols, 0.0);
    for (const auto& m : matrices) {
        for (std::size_t r = 0; r < m.rows(); ++r) {
            auto row = m.row(r);
            for (std::size_t c = 0; c < cols; ++c) acc[c] += row[c];
        }
    }
    const double n = static_cast<double>(total_rows);
    for (double& v : acc) v /= n;
    return acc;
}

std::vector<double> minmax_normalize(std::span<const double> values) {
    if (values.empty()) return {};
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double min = *lo;
    const double range = *hi - min;
    std::vector<double> out(values.size(), 0.0);
    if (range > 0.0) {
        for (std::size_t i = 0; i < values.size(); ++i)
            out[i] = std::clamp((values[i] - min) / range, 0.0, 1.0);
    }
    return out;
}

// --- embedding files --------------------------------------------------------

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'C', 'G', 'S', 'E'};

template <typename UInt>
void put_le(std::vector<std::uint8_t>& out, UInt value) {
    for (std::size_t i = 0; i < sizeof(UInt); ++i)
        out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename UInt>
UInt get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
    UInt value = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i)
        value |= static_cast<UInt>(bytes[offset + i]) << (8 * i);
    return value;
}

} // namespace

std::vector<std::uint8_t> encode_embeddings(std::span<const FrameFeature> frames) {
    if (frames.empty()) throw Error(ErrorKind::invalid_argument, "encode_embeddings: no frames");
    const std::size_t p = frames.front().patch_count();
    const std::size_t d = frames.front().dim();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].patch_count() != p || frames[i].dim() != d)
            throw Error(ErrorKind::dimension_mismatch, "encode_embeddings: frames differ in P or D");
        if (i > 0 && frames[i].timestamp() < frames[i - 1].timestamp())
            throw Error(ErrorKind::decreasing_timestamps, "encode_embeddings: timestamps decrease");
    }

    std::vector<std::uint8_t> out;
    out.reserve(kEmbeddingHeaderBytes + frames.size() * (8 + p * d * 4));
    for (std::uint8_t b : kMagic) out.push_back(b);
    put_le<std::uint32_t>(out, kEmbeddingFormatVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(frames.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (const auto& f : frames) put_le(out, std::bit_cast<std::uint64_t>(f.timestamp()));
    for (const auto& f : frames)
        for (float v : f.patches().flat()) put_le(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

std::vector<FrameFeature> decode_embeddings(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kMagic.size())
        throw Error(ErrorKind::truncated, "embedding file shorter than its magic");
    if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
        throw Error(ErrorKind::bad_magic, "embedding file magic is not CGSE");
    if (bytes.size() < kEmbeddingHeaderBytes)
        throw Error(ErrorKind::truncated, "embedding file header is truncated");

    const auto version = get_le<std::uint32_t>(bytes, 4);
    if (version != kEmbeddingFormatVersion) {
        throw Error(ErrorKind::version_mismatch,
                    "embedding file version " + std::to_string(version) + ", expected " +
                        std::to_string(kEmbeddingFormatVersion));
    }
    const std::uint64_t n = get_le<std::uint32_t>(bytes, 8);
    const std::uint64_t p = get_le<std::uint32_t>(bytes, 12);
    const std::uint64_t d = get_le<std::uint32_t>(bytes, 16);
    if (p == 0 || d == 0) throw Error(ErrorKind::schema, "embedding file declares P or D of zero");

    // n, p, d < 2^32 so the products fit comfortably in 64 bits except for
    // n*p*d, which is checked against the actual size before multiplying by 4.
    const std::uint64_t available = bytes.size() - kEmbeddingHeaderBytes;
    const std::uint64_t ts_bytes = n * 8;
    if (ts_bytes > available) throw Error(ErrorKind::truncated, "embedding file timestamps truncated");
    const std::uint64_t floats = n * p;
    if (p != 0 && floats / p != n) throw Error(ErrorKind::truncated, "embedding payload size overflows");
    const std::uint64_t values = floats * d;
    if (d != 0 && values / d != floats) throw Error(ErrorKind::truncated, "embedding payload size overflows");
    if (values > (available - ts_bytes) / 4)
        throw Error(ErrorKind::truncated, "embedding file payload truncated");
    if (ts_bytes + values * 4 != available)
        throw Error(ErrorKind::schema, "embedding file has trailing bytes");

    std::vector<FrameFeature> frames;
    frames.reserve(n);
    std::size_t offset = kEmbeddingHeaderBytes + ts_bytes;
    double previous = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
        const double t = std::bit_cast<double>(get_le<std::uint64_t>(bytes, kEmbeddingHeaderBytes + i * 8));
        if (!std::isfinite(t)) throw Error(ErrorKind::non_finite, "embedding file timestamp is not finite");
        if (i > 0 && t < previous)
            throw Error(ErrorKind::decreasing_timestamps,
                        "embedding file timestamps decrease at frame " + std::to_string(i));
        previous = t;

        std::vector<float> vals(p * d);
        for (auto& v : vals) {
            v = std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset));
            offset += 4;
            if (!std::isfinite(v))
                throw Error(ErrorKind::non_finite, "embedding file value is not finite at frame " + std::to_string(i));
        }
        frames.emplace_back(FeatureMatrix(p, d, std::move(vals)), t);
    }
    return frames;
}

void save_embeddings(const std::filesystem::path& path, std::span<const FrameFeature> frames) {
    const auto bytes = encode_embeddings(frames);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

std::vector<FrameFeature> load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_embeddings(bytes);
}

// --- QA types ---------------------------------------------------------------

namespace {

struct QaTypeName {
    QaType type;
    std::string_view name;
    QaTier tier;
};

constexpr std::array<QaTypeName, 11> kQaTypes{{
    {QaType::attributes, "attributes", QaTier::basic},
    {QaType::objects, "objects", QaTier::basic},
    {QaType::actions, "actions", QaTier::basic},
    {QaType::co_reference, "co-reference", QaTier::basic},
    {QaType::sequence_perception, "sequence-perception", QaTier::streaming},
    {QaType::dialogue_recalling, "dialogue-recalling", QaTier::streaming},
    {QaType::dynamic_updating, "dynamic-updating", QaTier::streaming},
    {QaType::object_tracking, "object-tracking", QaTier::streaming},
    {QaType::causal_reasoning, "causal-reasoning", QaTier::streaming},
    {QaType::global_analysis, "global-analysis", QaTier::global},
    {QaType::overall_summary, "overall-summary", QaTier::global},
}};

const QaTypeName& lookup(QaType type) {
    for (const auto& entry : kQaTypes)
        if (entry.type == type) return entry;
    throw Error(ErrorKind::invalid_argument, "unknown qa type");
}

} // namespace

QaTier tier_of(QaType type) { return lookup(type).tier; }
std::string_view to_string(QaType type) { return lookup(type).name; }

std::string_view to_string(QaTier tier) {
    switch (tier) {
    case QaTier::basic: return "basic";
    case QaTier::streaming: return "streaming";
    case QaTier::global: return "global";
    }
    return "unknown";
}

QaType parse_qa_type(std::string_view name) {
    for (const auto& entry : kQaTypes)
        if (entry.name == name) return entry.type;
    throw Error(ErrorKind::schema, "unknown qa_type '" + std::string(name) + "'");
}

// --- manifest ---------------------------------------------------------------

const SegmentMeta* SessionManifest::find_segment(int segment_id) const {
    for (const auto& s : segments)
        if (s.segment_id == segment_id) return &s;
    return nullptr;
}

const QARecord* SessionManifest::find_qa(int qa_id) const {
    for (const auto& q : qa_pool)
        if (q.qa_id == qa_id) return &q;
    return nullptr;
}

namespace {

[[noreturn]] void schema_error(const std::string& message) {
    throw Error(ErrorKind::schema, "manifest: " + message);
}

std::size_t segment_position(const SessionManifest& m, int segment_id) {
    for (std::size_t i = 0; i < m.segments.size(); ++i)
        if (m.segments[i].segment_id == segment_id) return i;
    schema_error("unknown segment_id " + std::to_string(segment_id));
}

} // namespace

void validate_manifest(const SessionManifest& m) {
    std::set<int> segment_ids;
    for (std::size_t i = 0; i < m.segments.size(); ++i) {
        const auto& s = m.segments[i];
        if (s.segment_id < 1) schema_error("segment_id must be >= 1");
        if (!segment_ids.insert(s.segment_id).second)
            schema_error("duplicate segment_id " + std::to_string(s.segment_id));
        if (!(std::isfinite(s.start_s) && std::isfinite(s.end_s)) || s.start_s < 0.0 || !(s.start_s < s.end_s))
            schema_error("segment " + std::to_string(s.segment_id) + " needs 0 <= start_s < end_s");
        if (i > 0 && s.start_s < m.segments[i - 1].end_s)
            schema_error("segment " + std::to_string(s.segment_id) + " overlaps or precedes its predecessor");
    }

    std::map<int, std::size_t> qa_segment_pos;
    for (const auto& q : m.qa_pool) {
        if (!m.find_segment(q.segment_id))
            schema_error("qa " + std::to_string(q.qa_id) + " references missing segment " + std::to_string(q.segment_id));
        if (!qa_segment_pos.emplace(q.qa_id, segment_position(m, q.segment_id)).second)
            schema_error("duplicate qa_id " + std::to_string(q.qa_id));
    }
    for (const auto& q : m.qa_pool) {
        const std::size_t pos = qa_segment_pos.at(q.qa_id);
        auto earlier = [&](int id) {
            auto it = qa_segment_pos.find(id);
            return it != qa_segment_pos.end() && it->second < pos;
        };
        for (int id : q.relevant_ids)
            if (!earlier(id))
                schema_error("qa " + std::to_string(q.qa_id) + " lists relevant id " + std::to_string(id) +
                             " that is not an earlier qa");
        for (const auto& [id, score] : q.relevance_scores) {
            if (!earlier(id))
                schema_error("qa " + std::to_string(q.qa_id) + " scores id " + std::to_string(id) +
                             " that is not an earlier qa");
            if (!std::isfinite(score) || score < 0.0 || score > 7.0)
                schema_error("qa " + std::to_string(q.qa_id) + " has relevance score outside [0,7]");
        }
    }

    for (const auto& path : m.dialogue_streams) {
        std::set<int> seen;
        std::size_t last_pos = 0;
        for (const auto& e : path.entries) {
            auto it = qa_segment_pos.find(e.qa_id);
            if (it == qa_segment_pos.end())
                schema_error("stream " + std::to_string(path.path_id) + " references missing qa " + std::to_string(e.qa_id));
            const std::size_t entry_pos = segment_position(m, e.segment_id);
            if (entry_pos < it->second)
                schema_error("stream " + std::to_string(path.path_id) + " asks qa " + std::to_string(e.qa_id) +
                             " before its segment");
            if (!seen.empty() && entry_pos < last_pos)
                schema_error("stream " + std::to_string(path.path_id) + " is not chronological");
            for (int id : e.gold_relevant_ids)
                if (!seen.count(id))
                    schema_error("stream " + std::to_string(path.path_id) + " gold id " + std::to_string(id) +
                                 " is not an earlier path entry");
            if (!seen.insert(e.qa_id).second)
                schema_error("stream " + std::to_string(path.path_id) + " repeats qa " + std::to_string(e.qa_id));
            last_pos = entry_pos;
        }
    }
}

json path_to_json(const DialoguePath& path) {
    json entries = json::array();
    for (const auto& e : path.entries) {
        entries.push_back({{"qa_id", e.qa_id},
                           {"segment_id", e.segment_id},
                           {"ask_time", e.ask_time},
                           {"gold_relevant_ids", e.gold_relevant_ids}});
    }
    return {{"path_id", path.path_id}, {"seed", path.seed}, {"entries", std::move(entries)}};
}

DialoguePath path_from_json(const json& doc) {
    DialoguePath path;
    path.path_id = doc.at("path_id").get<int>();
    path.seed = doc.value("seed", std::uint64_t{0});
    for (const auto& e : doc.at("entries")) {
        PathEntry entry;
        entry.qa_id = e.at("qa_id").get<int>();
        entry.segment_id = e.at("segment_id").get<int>();
        entry.ask_time = e.at("ask_time").get<double>();
        entry.gold_relevant_ids = e.value("gold_relevant_ids", std::set<int>{});
        path.entries.push_back(std::move(entry));
    }
    return path;
}

json manifest_to_json(const SessionManifest& m) {
    json segments = json::array();
    for (const auto& s : m.segments) {
        segments.push_back({{"segment_id", s.segment_id},
                            {"start_s", s.start_s},
                            {"end_s", s.end_s},
                            {"embedding_ref", s.embedding_ref}});
    }
    json pool = json::array();
    for (const auto& q : m.qa_pool) {
        json scores = json::object();
        for (const auto& [id, score] : q.relevance_scores) scores[std::to_string(id)] = score;
        pool.push_back({{"qa_id", q.qa_id},
                        {"segment_id", q.segment_id},
                        {"qa_type", std::string(to_string(q.qa_type))},
                        {"question", q.question},
                        {"answer", q.answer},
                        {"relevant_ids", q.relevant_ids},
                        {"relevance_scores", std::move(scores)}});
    }
    json streams = json::array();
    for (const auto& p : m.dialogue_streams) streams.push_back(path_to_json(p));
    return {{"schema_version", kManifestSchemaVersion},
            {"video_id", m.video_id},
            {"segments", std::move(segments)},
            {"qa_pool", std::move(pool)},
            {"dialogue_streams", std::move(streams)}};
}

SessionManifest manifest_from_json(const json& doc) {
    try {
        const int version = doc.at("schema_version").get<int>();
        if (version != kManifestSchemaVersion)
            throw Error(ErrorKind::version_mismatch, "manifest schema_version " + std::to_string(version) +
                                                         ", expected " + std::to_string(kManifestSchemaVersion));
        SessionManifest m;
        m.video_id = doc.at("video_id").get<std::string>();
        for (const auto& s : doc.at("segments")) {
            m.segments.push_back({s.at("segment_id").get<int>(), s.at("start_s").get<double>(),
                                  s.at("end_s").get<double>(), s.at("embedding_ref").get<std::string>()});
        }
        for (const auto& q : doc.value("qa_pool", json::array())) {
            QARecord r;
            r.qa_id = q.at("qa_id").get<int>();
            r.segment_id = q.at("segment_id").get<int>();
            r.qa_type = parse_qa_type(q.at("qa_type").get<std::string>());
            r.question = q.at("question").get<std::string>();
            r.answer = q.at("answer").get<std::string>();
            r.relevant_ids = q.value("relevant_ids", std::set<int>{});
            const json scores = q.value("relevance_scores", json::object());
            for (const auto& [key, score] : scores.items()) {
                std::size_t used = 0;
                int id = 0;
                try {
                    id = std::stoi(key, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != key.size() || key.empty())
                    schema_error("relevance_scores key '" + key + "' is not an integer qa_id");
                r.relevance_scores[id] = score.get<double>();
            }
            m.qa_pool.push_back(std::move(r));
        }
        for (const auto& p : doc.value("dialogue_streams", json::array())) m.dialogue_streams.push_back(path_from_json(p));
        validate_manifest(m);
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::schema, std::string("manifest: ") + e.what());
    }
}

SessionManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::parse, "manifest " + path.string() + ": " + e.what());
    }
    return manifest_from_json(doc);
}

void save_manifest(const std::filesystem::path& path, const SessionManifest& manifest) {
    validate_manifest(manifest);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");
    out << manifest_to_json(manifest).dump(2) << '\n';
    if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

} // namespace cogstream
