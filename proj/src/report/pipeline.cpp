#include "sprayeval/report/pipeline.hpp"

#include <atomic>
#include <charconv>
#include <exception>
#include <set>
#include <thread>

#include "sprayeval/protocol.hpp"

namespace sprayeval {
namespace {

std::string pooling_name(HitRatePooling p) { return p == HitRatePooling::pooled ? "pooled" : "per-image"; }

HitRatePooling parse_pooling(const std::string& s) {
    if (s == "pooled") return HitRatePooling::pooled;
    if (s == "per-image") return HitRatePooling::per_image;
    throw ConfigError("unknown hit-rate pooling '" + s + "'");
}

std::uint64_t parse_seed(const std::string& text) {
    std::uint64_t seed = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, seed);
    if (text.empty() || ec != std::errc{} || ptr != end) throw ConfigError("toy engine seed must be an unsigned integer, got '" + text + "'");
    return seed;
}

[[noreturn]] void rethrow_for_image(std::exception_ptr error, const std::string& id) {
    const std::string at = "image '" + id + "': ";
    try {
        std::rethrow_exception(error);
    } catch (const EngineLostError& e) {
        throw EngineLostError(at + e.what());
    } catch (const TransportError& e) {
        throw TransportError(at + e.what());
    } catch (const ContractError& e) {
        throw ContractError(at + e.what());
    } catch (const FormatError& e) {
        throw FormatError(at + e.what());
    } catch (const CorruptionError& e) {
        throw CorruptionError(at + e.what());
    } catch (const DataError& e) {
        throw DataError(at + e.what());
    } catch (const IoError& e) {
        throw IoError(at + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(at + e.what());
    } catch (const ArgumentError& e) {
        throw ArgumentError(at + e.what());
    } catch (const ClassAbsentError& e) {
        throw ContractError(at + e.what());
    } catch (const Error& e) {
        throw Error(at + e.what());
    }
}

}  // namespace

void RunConfig::validate() const {
    sprayer.validate();
    if (jobs < 1) throw ConfigError("--jobs must be at least 1");
    if (min_island_px < 1) throw ConfigError("minimum island size must be at least 1 pixel");
    if (engine.rfind("toy:", 0) != 0 && engine.rfind("exec:", 0) != 0) {
        throw ConfigError("engine must be toy:<seed> or exec:<cmdline>, got '" + engine + "'");
    }
}

nlohmann::ordered_json RunConfig::to_json() const {
    return {{"fusion", to_string(fusion.mode)},
            {"fusion_space", to_string(fusion.space)},
            {"cam", to_string(cam)},
            {"cluster", to_string(cluster)},
            {"top_mode", to_string(top_mode)},
            {"ap_preference", to_string(ap_preference)},
            {"min_island_px", min_island_px},
            {"unit_ul", sprayer.unit_deposit_ul},
            {"deposit_std_ul", sprayer.deposit_std_ul},
            {"min_dist_px", sprayer.min_point_distance_px},
            {"box_halfwidth_px", sprayer.box_halfwidth_px},
            {"cm2_per_px", sprayer.cm2_per_pixel},
            {"hit_rate", pooling_name(hit_rate)},
            {"include_background", include_background},
            {"stages", {{"segmentation", true}, {"faithfulness", faithfulness}, {"wsde", wsde}}}};
}

RunConfig RunConfig::from_json(const nlohmann::ordered_json& j) {
    try {
        RunConfig c;
        c.fusion.mode = parse_fusion_mode(j.at("fusion").get<std::string>());
        c.fusion.space = parse_fusion_space(j.at("fusion_space").get<std::string>());
        c.cam = parse_cam_method(j.at("cam").get<std::string>());
        c.cluster = parse_cluster_method(j.at("cluster").get<std::string>());
        c.top_mode = parse_top_mode(j.at("top_mode").get<std::string>());
        c.ap_preference = parse_affinity_preference(j.at("ap_preference").get<std::string>());
        c.min_island_px = j.at("min_island_px").get<Index>();
        c.sprayer.unit_deposit_ul = j.at("unit_ul").get<double>();
        c.sprayer.deposit_std_ul = j.at("deposit_std_ul").get<double>();
        c.sprayer.min_point_distance_px = j.at("min_dist_px").get<double>();
        c.sprayer.box_halfwidth_px = j.at("box_halfwidth_px").get<double>();
        c.sprayer.cm2_per_pixel = j.at("cm2_per_px").get<double>();
        c.hit_rate = parse_pooling(j.at("hit_rate").get<std::string>());
        c.include_background = j.at("include_background").get<bool>();
        c.faithfulness = j.at("stages").at("faithfulness").get<bool>();
        c.wsde = j.at("stages").at("wsde").get<bool>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("report config: ") + e.what());
    }
}

EngineFactory make_engine_factory(const std::string& spec) {
    if (spec.rfind("toy:", 0) == 0) {
        const std::uint64_t seed = parse_seed(spec.substr(4));
        return [seed] { return std::make_shared<ToyFcn>(seed); };
    }
    if (spec.rfind("exec:", 0) == 0) {
        const std::string cmd = spec.substr(5);
        if (cmd.empty()) throw ConfigError("exec engine needs a command line");
        return [cmd] { return std::make_shared<ExternalEngine>(cmd); };
    }
    throw ConfigError("engine must be toy:<seed> or exec:<cmdline>, got '" + spec + "'");
}

ImageResult process_image(InferenceEngine& engine, const DatasetEntry& entry, const RunConfig& cfg) {
    ImageResult result;
    ImageSummary& s = result.summary;
    ImageArtifacts& a = result.artifacts;
    s.id = entry.id;
    a.image = load_image(entry.image);
    s.gt = load_mask(entry.mask);
    if (s.gt.height() != a.image.height() || s.gt.width() != a.image.width()) {
        throw DataError(entry.mask.string() + ": mask size differs from the image");
    }

    const ModelOutput out = engine.forward(a.image);
    check_output_contract(out, engine.descriptor(), a.image);
    a.fused = fused_logits(out, cfg.fusion);
    s.pred = argmax_mask(a.fused);
    s.tally = tally(s.pred, s.gt);

    const auto& table = ClassTable::dataset();
    std::set<int> faith_classes, wsde_classes;
    for (int c = 1; c < kDatasetClassCount; ++c) {
        if (s.pred.count(c) == 0) continue;
        if (cfg.faithfulness) faith_classes.insert(c);
        if (cfg.wsde && table.is_sprayed(c)) wsde_classes.insert(c);
    }
    std::set<int> cam_classes = faith_classes;
    cam_classes.insert(wsde_classes.begin(), wsde_classes.end());

    std::map<int, ClusterOutcome> clustered;
    for (int c : cam_classes) {
        Cam cam;
        try {
            cam = compute_cam(cfg.cam, engine, a.image, c, cfg.fusion);
        } catch (const ClassAbsentError&) {
            if (faith_classes.count(c)) s.faithfulness_skipped.push_back(c);
            continue;
        }
        if (faith_classes.count(c)) {
            const FaithfulnessCurve del = deletion_curve(engine, a.image, cam.map, c, cfg.fusion);
            const FaithfulnessCurve ins = insertion_curve(engine, a.image, cam.map, c, cfg.fusion);
            s.faithfulness.push_back({c, auc(del), auc(ins)});
            a.curves[c] = {del, ins};
        }
        if (wsde_classes.count(c)) {
            std::vector<Island> islands = extract_islands(cam.map, s.pred, c, cfg.top_mode, cfg.min_island_px);
            clustered[c] = cluster_islands(cfg.cluster, islands, c, cfg.sprayer, cfg.ap_preference);
            a.islands[c] = std::move(islands);
        }
        a.cams[c] = std::move(cam);
    }

    if (cfg.wsde) {
        const std::vector<KeypointRecord> records =
            entry.keypoints ? read_keypoints_csv(*entry.keypoints) : std::vector<KeypointRecord>{};
        for (int c : table.sprayed_classes()) {
            ClassWsde w;
            w.class_id = c;
            w.ground_truth = points_of_class(records, c);
            if (auto it = clustered.find(c); it != clustered.end()) {
                w.predicted = it->second.keypoints.points;
                w.converged = it->second.converged;
                w.islands = static_cast<Index>(a.islands[c].size());
            }
            w.pointing = pointing_game(w.predicted, w.ground_truth, cfg.sprayer.box_halfwidth_px);
            s.wsde.push_back(std::move(w));
        }
    }
    return result;
}

RunResult run_pipeline(const RunConfig& cfg, const DatasetIndex& index, const EngineFactory& factory) {
    cfg.validate();
    const std::vector<DatasetEntry> entries = index.test_entries();
    if (cfg.wsde) {
        std::vector<std::string> missing;
        for (const auto& e : entries)
            if (!e.keypoints) missing.push_back(e.id);
        if (!missing.empty()) {
            std::string list;
            for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
            throw DataError("WSDE needs keypoints for every test image; missing for: " + list);
        }
    }

    RunResult run;
    run.config = cfg;
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), entries.size()));
    std::vector<std::shared_ptr<InferenceEngine>> engines;
    for (std::size_t i = 0; i < workers; ++i) engines.push_back(cached_engine(factory(), cfg.cache_capacity));
    run.engine = engines.front()->descriptor();
    if (run.engine.num_classes != kDatasetClassCount) {
        throw ContractError("engine reports " + std::to_string(run.engine.num_classes) + " classes, expected " +
                            std::to_string(kDatasetClassCount));
    }

    std::vector<std::optional<ImageResult>> results(entries.size());
    std::vector<std::exception_ptr> errors(entries.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    auto work = [&](InferenceEngine& engine) {
        for (std::size_t i = next++; i < entries.size() && !failed; i = next++) {
            try {
                results[i] = process_image(engine, entries[i], cfg);
            } catch (...) {
                errors[i] = std::current_exception();
                failed = true;
            }
        }
    };
    if (workers == 1) {
        work(*engines.front());
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back([&, w] { work(*engines[w]); });
    }

    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (errors[i]) rethrow_for_image(errors[i], entries[i].id);
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!results[i]) throw Error("image '" + entries[i].id + "' was not processed");
        run.images.push_back(std::move(*results[i]));
    }
    return run;
}

RunResult run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    const EngineFactory factory = make_engine_factory(cfg.engine);
    return run_pipeline(cfg, ingest(cfg.dataset), factory);
}

}  // namespace sprayeval
