#include "sprayeval/report/synth.hpp"

#include <cstdio>
#include <fstream>

#include "sprayeval/engine.hpp"
#include "sprayeval/report/png.hpp"
#include "sprayeval/tensor_io.hpp"

namespace sprayeval {
namespace {

struct Blob {
    int class_id;
    Index row, col, height, width;

    bool touches(const Blob& o) const {
        return row - 1 < o.row + o.height && o.row < row + height + 1 && col - 1 < o.col + o.width &&
               o.col < col + width + 1;
    }
};

// background soil, three crops/weeds and their sprayed variants
constexpr float kPalette[kDatasetClassCount][3] = {
    {0.45f, 0.33f, 0.22f}, {0.30f, 0.75f, 0.25f}, {0.55f, 0.85f, 0.35f}, {0.20f, 0.55f, 0.20f},
    {0.25f, 0.65f, 0.70f}, {0.50f, 0.75f, 0.80f}, {0.15f, 0.45f, 0.65f},
};

Index draw(std::uint64_t& state, Index lo, Index hi) {
    return lo + static_cast<Index>(splitmix64(state) % static_cast<std::uint64_t>(hi - lo + 1));
}

std::string image_id(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "img_%03d", i);
    return buf;
}

void make_dirs(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

}  // namespace

void SynthConfig::validate() const {
    if (images < 0) throw ConfigError("synth: image count must be non-negative");
    if (train_images < 0 || train_images > images) throw ConfigError("synth: train count must be within [0, images]");
    if (min_blob_px < 2 || max_blob_px < min_blob_px) throw ConfigError("synth: blob size range is invalid");
    if (height < max_blob_px + 2 || width < max_blob_px + 2) throw ConfigError("synth: image too small for the blob size");
    if (max_blobs_per_class < 1) throw ConfigError("synth: need at least one blob per class");
}

nlohmann::ordered_json synthesize_dataset(const SynthConfig& cfg, const fs::path& root) {
    cfg.validate();
    const auto& table = ClassTable::dataset();
    make_dirs(root / "images");
    make_dirs(root / "masks");
    make_dirs(root / "keypoints");
    std::ofstream split(root / "split.txt", std::ios::binary);
    if (!split) throw IoError("cannot write " + (root / "split.txt").string());

    DatasetStats stats;
    std::uint64_t state = cfg.seed;
    for (int i = 0; i < cfg.images; ++i) {
        const std::string id = image_id(i);
        const bool train = i < cfg.train_images;
        (train ? stats.train_images : stats.test_images)++;
        split << id << ' ' << (train ? "train" : "test") << '\n';

        std::vector<Blob> blobs;
        auto place = [&](int c) {
            for (int attempt = 0; attempt < 100; ++attempt) {
                Blob b{c, 0, 0, draw(state, cfg.min_blob_px, cfg.max_blob_px), draw(state, cfg.min_blob_px, cfg.max_blob_px)};
                b.row = draw(state, 0, cfg.height - b.height);
                b.col = draw(state, 0, cfg.width - b.width);
                bool ok = true;
                for (const auto& o : blobs) ok = ok && !b.touches(o);
                if (ok) {
                    blobs.push_back(b);
                    return;
                }
            }
        };
        for (int c = 1; c < kDatasetClassCount; ++c) {
            const Index n = draw(state, 0, cfg.max_blobs_per_class);
            for (Index k = 0; k < n; ++k) place(c);
        }
        bool any_sprayed = false;
        for (const auto& b : blobs) any_sprayed = any_sprayed || table.is_sprayed(b.class_id);
        if (!any_sprayed) place(table.sprayed_classes()[static_cast<std::size_t>(draw(state, 0, 2))]);

        Tensor image(3, cfg.height, cfg.width);
        LabelMask mask(cfg.height, cfg.width);
        std::vector<KeypointRecord> keypoints;
        for (const auto& b : blobs) {
            for (Index y = b.row; y < b.row + b.height; ++y)
                for (Index x = b.col; x < b.col + b.width; ++x) mask.set(y, x, b.class_id);
            stats.instances[static_cast<std::size_t>(b.class_id)] += 1;
            stats.pixels[static_cast<std::size_t>(b.class_id)] += b.height * b.width;
            if (!table.is_sprayed(b.class_id)) continue;
            const int row = static_cast<int>(b.row + b.height / 2);
            if (b.width >= 12 && splitmix64(state) % 2 == 0) {
                keypoints.push_back({id, b.class_id, {row, static_cast<int>(b.col + b.width / 4)}});
                keypoints.push_back({id, b.class_id, {row, static_cast<int>(b.col + 3 * b.width / 4)}});
                stats.keypoints[static_cast<std::size_t>(b.class_id)] += 2;
            } else {
                keypoints.push_back({id, b.class_id, {row, static_cast<int>(b.col + b.width / 2)}});
                stats.keypoints[static_cast<std::size_t>(b.class_id)] += 1;
            }
        }
        long long fg = 0;
        for (int c = 1; c < kDatasetClassCount; ++c) fg += stats.pixels[static_cast<std::size_t>(c)];
        stats.pixels[0] = static_cast<long long>(i + 1) * cfg.height * cfg.width - fg;

        for (Index y = 0; y < cfg.height; ++y)
            for (Index x = 0; x < cfg.width; ++x) {
                const int c = mask(y, x);
                for (Index ch = 0; ch < 3; ++ch) {
                    const double noise = (splitmix_unit(state) - 0.5) * 0.1;
                    image(ch, y, x) = static_cast<float>(kPalette[c][ch] + noise);
                }
            }

        if (cfg.format == SynthFormat::png) {
            write_png(to_raster(image), root / "images" / (id + ".png"));
            Raster gray{cfg.height, cfg.width, 1, std::vector<std::uint8_t>(mask.labels().data(), mask.labels().data() + mask.size())};
            write_png(gray, root / "masks" / (id + ".png"));
        } else {
            write_tensor(image, root / "images" / (id + ".tnsr"));
            write_mask(mask, root / "masks" / (id + ".lmsk"));
        }
        write_keypoints_csv(root / "keypoints" / (id + ".csv"), keypoints);
    }
    if (!split) throw IoError("write failed for " + (root / "split.txt").string());

    nlohmann::ordered_json manifest = {{"generator", "sprayeval synth"},
                                       {"seed", cfg.seed},
                                       {"images", cfg.images},
                                       {"height", cfg.height},
                                       {"width", cfg.width},
                                       {"format", cfg.format == SynthFormat::png ? "png" : "tnsr"},
                                       {"statistics", stats.to_json()}};
    std::ofstream out(root / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + (root / "manifest.json").string());
    return manifest;
}

DatasetStats manifest_stats(const nlohmann::ordered_json& manifest) {
    try {
        const auto& j = manifest.at("statistics");
        DatasetStats s;
        s.train_images = j.at("train_images").get<int>();
        s.test_images = j.at("test_images").get<int>();
        for (const auto& row : j.at("classes")) {
            const int c = row.at("class_id").get<int>();
            if (c < 0 || c >= kDatasetClassCount) throw DataError("manifest: class id out of range");
            const auto i = static_cast<std::size_t>(c);
            s.pixels[i] = row.at("pixels").get<long long>();
            s.instances[i] = row.at("instances").get<long long>();
            s.keypoints[i] = row.at("keypoints").get<long long>();
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("manifest: ") + e.what());
    }
}

}  // namespace sprayeval
