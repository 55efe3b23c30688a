#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cogstream {

using Vector = std::vector<double>;

// Row-major P x D block of 32-bit embedding values.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> values);
    FeatureMatrix(std::size_t rows, std::size_t cols, float fill = 0.0f);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }

    std::span<const float> row(std::size_t r) const {
        return {values_.data() + r * cols_, cols_};
    }
    std::span<const float> flat() const noexcept { return values_; }

    float at(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> values_;
};

// One sampled frame: its patch-token features and the time it was sampled.
class FrameFeature {
public:
    // Throws Error if the matrix is empty, any value is non-finite, or the
    // timestamp is negative / non-finite.
    FrameFeature(FeatureMatrix patches, double timestamp);

    const FeatureMatrix& patches() const noexcept { return patches_; }
    double timestamp() const noexcept { return timestamp_; }
    std::size_t patch_count() const noexcept { return patches_.rows(); }
    std::size_t dim() const noexcept { return patches_.cols(); }

    friend bool operator==(const FrameFeature&, const FrameFeature&) = default;

private:
    FeatureMatrix patches_;
    double timestamp_ = 0.0;
};

// --- vector primitives ------------------------------------------------------

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// dot(a,b)/(|a||b|). Throws dimension_mismatch or degenerate_vector.
double cosine(std::span<const double> a, std::span<const double> b);

// Element-wise arithmetic mean of equal-length rows.
Vector mean_pool(std::span<const Vector> rows);
// Mean over the rows of one matrix (one token per frame).
Vector mean_pool(const FeatureMatrix& matrix);
// Mean over every row of every matrix, as if they were stacked.
Vector mean_pool(std::span<const FeatureMatrix> matrices);

// (v - min)/(max - min); all zeros when max == min.
std::vector<double> minmax_normalize(std::span<const double> values);

// --- embedding files --------------------------------------------------------

inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 20;

std::vector<std::uint8_t> encode_embeddings(std::span<const FrameFeature> frames);
std::vector<FrameFeature> decode_embeddings(std::span<const std::uint8_t> bytes);

void save_embeddings(const std::filesystem::path& path, std::span<const FrameFeature> frames);
std::vector<FrameFeature> load_embeddings(const std::filesystem::path& path);

// --- session manifest -------------------------------------------------------

enum class QaType {
    attributes,
    objects,
    actions,
    co_reference,
    sequence_perception,
    dialogue_recalling,
    dynamic_updating,
    object_tracking,
    causal_reasoning,
    global_analysis,
    overall_summary,
};

enum class QaTier { basic, streaming, global };

QaTier tier_of(QaType type);
std::string_view to_string(QaType type);
std::string_view to_string(QaTier tier);
QaType parse_qa_type(std::string_view name);

struct SegmentMeta {
    int segment_id = 0;
    double start_s = 0.0;
    double end_s = 0.0;
    std::string embedding_ref;
};

struct QARecord {
    int qa_id = 0;
    int segment_id = 0;
    QaType qa_type = QaType::objects;
    std::string question;
    std::string answer;
    std::set<int> relevant_ids;
    std::map<int, double> relevance_scores;

    QaTier tier() const { return tier_of(qa_type); }
};

struct PathEntry {
    int qa_id = 0;
    int segment_id = 0;
    double ask_time = 0.0;
    std::set<int> gold_relevant_ids;
};

struct DialoguePath {
    int path_id = 0;
    std::uint64_t seed = 0;
    std::vector<PathEntry> entries;
};

inline constexpr int kManifestSchemaVersion = 1;

struct SessionManifest {
    std::string video_id;
    std::vector<SegmentMeta> segments;
    std::vector<QARecord> qa_pool;
    std::vector<DialoguePath> dialogue_streams;

    const SegmentMeta* find_segment(int segment_id) const;
    const QARecord* find_qa(int qa_id) const;
};

// Throws Error(schema) describing the first violated invariant.
void validate_manifest(const SessionManifest& manifest);

nlohmann::json manifest_to_json(const SessionManifest& manifest);
SessionManifest manifest_from_json(const nlohmann::json& doc);

SessionManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const SessionManifest& manifest);

nlohmann::json path_to_json(const DialoguePath& path);
DialoguePath path_from_json(const nlohmann::json& doc);

} // namespace cogstream
