#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "sprayeval/cam.hpp"
#include "sprayeval/faithfulness.hpp"
#include "sprayeval/report/dataset.hpp"
#include "sprayeval/seg_metrics.hpp"
#include "sprayeval/wsde.hpp"

namespace sprayeval {

struct RunConfig {
    fs::path dataset;
    std::string engine = "toy:0";  // toy:<seed> or exec:<command line>
    FusionConfig fusion;
    CamMethod cam = CamMethod::ablation;
    ClusterMethod cluster = ClusterMethod::affinity;
    TopMode top_mode = TopMode::percentile;
    AffinityPreference ap_preference = AffinityPreference::spacing;
    Index min_island_px = kDefaultMinIslandPx;
    SprayerSpec sprayer{20.9, 0.16, 8.0, 4.0, 0.01};
    HitRatePooling hit_rate = HitRatePooling::pooled;
    bool include_background = false;
    bool faithfulness = true;
    bool wsde = true;
    bool overlays = true;
    int jobs = 1;
    std::size_t cache_capacity = 64;

    /// Throws ConfigError on non-positive sprayer values, jobs < 1 or an
    /// unknown engine scheme.
    void validate() const;
    /// Everything that affects report numbers; no paths, no job count.
    nlohmann::ordered_json to_json() const;
    /// Inverse of to_json for the fields it carries.
    static RunConfig from_json(const nlohmann::ordered_json& j);
};

using EngineFactory = std::function<std::shared_ptr<InferenceEngine>()>;

/// toy:<seed> builds the in-process toy model, exec:<cmd> spawns a protocol
/// server per call. Anything else is a ConfigError.
EngineFactory make_engine_factory(const std::string& spec);

struct ClassFaithfulness {
    int class_id = 0;
    double deletion_auc = 0.0;
    double insertion_auc = 0.0;
};

struct ClassWsde {
    int class_id = 0;  // sprayed class
    std::vector<PixelPoint> predicted;
    std::vector<PixelPoint> ground_truth;
    PointingResult pointing;
    bool converged = true;
    Index islands = 0;
};

/// Numbers one image contributes to the report.
struct ImageSummary {
    std::string id;
    ConfusionTally tally;
    LabelMask pred;
    LabelMask gt;
    std::vector<ClassFaithfulness> faithfulness;  // ascending class id
    std::vector<int> faithfulness_skipped;
    std::vector<ClassWsde> wsde;  // every sprayed class when the stage runs
};

/// Intermediates persisted next to the report.
struct ImageArtifacts {
    Tensor image;
    Tensor fused;
    std::map<int, Cam> cams;
    std::map<int, std::array<FaithfulnessCurve, 2>> curves;  // deletion, insertion
    std::map<int, std::vector<Island>> islands;
};

struct ImageResult {
    ImageSummary summary;
    ImageArtifacts artifacts;
};

struct RunResult {
    RunConfig config;
    EngineDescriptor engine;
    std::vector<ImageResult> images;  // split-file order of the test images
};

/// One test image through forward, fusion, tally, CAM, curves and WSDE.
ImageResult process_image(InferenceEngine& engine, const DatasetEntry& entry, const RunConfig& cfg);

/// Runs every test image on a pool of cfg.jobs workers, each with its own
/// cached engine. Results come back in image order. The first failing image
/// aborts the run with its id in the message and the original error category.
RunResult run_pipeline(const RunConfig& cfg, const DatasetIndex& index, const EngineFactory& factory);
RunResult run_pipeline(const RunConfig& cfg);

}  // namespace sprayeval
