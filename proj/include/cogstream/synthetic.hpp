#pragma once

#include "cogstream/feature_store.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

namespace cogstream {

struct SyntheticSpec {
    std::size_t segments = 5;
    std::size_t frames_per_segment = 10;
    std::size_t patches = 2;
    std::size_t dim = 8;
    std::size_t events_per_segment = 2;
    std::size_t basic_per_segment = 2;
    std::size_t streaming_per_segment = 2;
    std::size_t global_qas = 0;
    std::size_t num_paths = 1;
    double segment_seconds = 10.0;
    std::uint64_t seed = 7;
};

void validate(const SyntheticSpec& spec);

struct SyntheticSession {
    SessionManifest manifest;
    std::map<int, std::vector<FrameFeature>> frames; // by segment_id
    // Planted event label for every frame of the cumulative stream.
    std::vector<std::size_t> event_labels;
};

// Desk-scale session with planted structure: each event is a tight feature
// cluster around its own mean, QA relevance scores put exactly the planted
// relevant pairs above the inclusion threshold, and the dialogue streams are
// generated from that pool.
SyntheticSession make_synthetic(const SyntheticSpec& spec);

// Writes manifest.json plus one embedding file per segment into dir.
std::filesystem::path write_synthetic(const SyntheticSession& session, const std::filesystem::path& dir);

} // namespace cogstream
