#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sprayeval/tensor.hpp"
#include "sprayeval/wsde.hpp"

namespace sprayeval {

namespace fs = std::filesystem;

/// Directory names inside a dataset root. `dataset.map` (lines of
/// `key = value`, keys images/masks/keypoints/split) overrides them.
struct DatasetLayout {
    std::string images = "images";
    std::string masks = "masks";
    std::string keypoints = "keypoints";
    std::string split = "split.txt";

    static DatasetLayout load(const fs::path& root);
};

enum class Split { train, test };
std::string to_string(Split s);

struct DatasetEntry {
    std::string id;
    Split split = Split::test;
    fs::path image;  // .tnsr (3, H, W) or RGB .png
    fs::path mask;   // .lmsk or 8-bit gray .png
    std::optional<fs::path> keypoints;
};

struct KeypointRecord {
    std::string image_id;
    int class_id = 0;
    PixelPoint point;
    friend bool operator==(const KeypointRecord&, const KeypointRecord&) = default;
};

/// Per-class totals over the ground truth. Instances are 8-connected
/// components per foreground class.
struct DatasetStats {
    int train_images = 0;
    int test_images = 0;
    std::array<long long, kDatasetClassCount> pixels{};
    std::array<long long, kDatasetClassCount> instances{};
    std::array<long long, kDatasetClassCount> keypoints{};

    long long annotations() const;
    nlohmann::ordered_json to_json() const;
    friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

struct DatasetIndex {
    fs::path root;
    DatasetLayout layout;
    std::vector<DatasetEntry> entries;  // split-file order
    DatasetStats stats;

    std::vector<DatasetEntry> test_entries() const;
};

/// Validates the layout, every mask (labels, size against the image) and every
/// keypoint file. A missing root is a ConfigError; everything else that is
/// wrong with the data is a DataError naming the offending files.
DatasetIndex ingest(const fs::path& root);

Tensor load_image(const fs::path& path);
LabelMask load_mask(const fs::path& path);

/// CSV with header `image_id,class_id,row,col`.
std::vector<KeypointRecord> read_keypoints_csv(const fs::path& path);
void write_keypoints_csv(const fs::path& path, const std::vector<KeypointRecord>& records);
std::vector<PixelPoint> points_of_class(const std::vector<KeypointRecord>& records, int class_id);

/// Foreground instance counts of one mask.
std::array<long long, kDatasetClassCount> count_instances(const LabelMask& mask);

}  // namespace sprayeval
