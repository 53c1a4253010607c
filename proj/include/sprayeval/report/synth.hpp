#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "sprayeval/report/dataset.hpp"

namespace sprayeval {

enum class SynthFormat { tnsr, png };

struct SynthConfig {
    int images = 5;
    Index height = 64;
    Index width = 64;
    std::uint64_t seed = 1;
    int train_images = 0;  // the first N ids go to train, the rest to test
    int max_blobs_per_class = 2;
    Index min_blob_px = 8;
    Index max_blob_px = 16;
    SynthFormat format = SynthFormat::tnsr;

    void validate() const;
};

/// Writes a dataset in the ingest layout: rectangular blobs per class with a
/// one-pixel gap between blobs, one to two keypoints planted in every sprayed
/// blob, and manifest.json holding the statistics the generator planted.
/// Returns the manifest.
nlohmann::ordered_json synthesize_dataset(const SynthConfig& cfg, const fs::path& root);

/// Statistics section of a manifest, for comparison with ingest.
DatasetStats manifest_stats(const nlohmann::ordered_json& manifest);

}  // namespace sprayeval
