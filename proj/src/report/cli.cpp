#include "sprayeval/report/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "sprayeval/report/report.hpp"
#include "sprayeval/report/synth.hpp"

namespace sprayeval {
namespace {

struct PipelineOptions {
    std::string dataset;
    std::string engine = "toy:0";
    std::string fusion = "out";
    std::string fusion_space = "logit";
    std::string cam = "ablation";
    std::string cluster = "affinity";
    std::string top_mode = "percentile";
    std::string ap_preference = "spacing";
    std::string hit_rate = "pooled";
    Index min_island_px = kDefaultMinIslandPx;
    double unit_ul = 20.9;
    double min_dist_px = 8.0;
    double box_halfwidth_px = 4.0;
    double cm2_per_px = 0.01;
    bool include_background = false;
    bool no_overlays = false;
    int jobs = 1;
    std::size_t cache = 64;
    std::string out = "sprayeval-out";
};

void add_pipeline_options(CLI::App* sub, PipelineOptions& o) {
    sub->add_option("dataset", o.dataset, "dataset root")->required();
    sub->add_option("--engine", o.engine, "toy:<seed> or exec:<cmdline>")->capture_default_str();
    sub->add_option("--fusion", o.fusion, "out|aux|add|multi (report: comma-separated list)")->capture_default_str();
    sub->add_option("--fusion-space", o.fusion_space, "logit|prob")->capture_default_str();
    sub->add_option("--cam", o.cam, "ablation|score")->capture_default_str();
    sub->add_option("--cluster", o.cluster, "centres|affinity|threshold")->capture_default_str();
    sub->add_option("--top-mode", o.top_mode, "percentile|value")->capture_default_str();
    sub->add_option("--ap-preference", o.ap_preference, "spacing|median")->capture_default_str();
    sub->add_option("--min-island-px", o.min_island_px, "smallest island kept")->capture_default_str();
    sub->add_option("--unit-ul", o.unit_ul, "deposit per actuation in microlitres")->capture_default_str();
    sub->add_option("--min-dist-px", o.min_dist_px, "minimum distance between actuations")->capture_default_str();
    sub->add_option("--box-halfwidth-px", o.box_halfwidth_px, "pointing-game box half-width")->capture_default_str();
    sub->add_option("--cm2-per-px", o.cm2_per_px, "ground area of one pixel")->capture_default_str();
    sub->add_option("--hit-rate", o.hit_rate, "pooled|per-image")->capture_default_str();
    sub->add_flag("--include-background", o.include_background, "count background in mIoU and micro-F1");
    sub->add_flag("--no-overlays", o.no_overlays, "skip PNG overlays");
    sub->add_option("--jobs", o.jobs, "worker threads")->capture_default_str();
    sub->add_option("--cache", o.cache, "cached forward passes per worker")->capture_default_str();
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
}

HitRatePooling parse_pooling(const std::string& s) {
    if (s == "pooled") return HitRatePooling::pooled;
    if (s == "per-image") return HitRatePooling::per_image;
    throw ConfigError("unknown hit-rate pooling '" + s + "'");
}

RunConfig make_config(const PipelineOptions& o, bool faithfulness, bool wsde) {
    RunConfig c;
    c.dataset = o.dataset;
    c.engine = o.engine;
    c.fusion = {parse_fusion_mode(o.fusion), parse_fusion_space(o.fusion_space)};
    c.cam = parse_cam_method(o.cam);
    c.cluster = parse_cluster_method(o.cluster);
    c.top_mode = parse_top_mode(o.top_mode);
    c.ap_preference = parse_affinity_preference(o.ap_preference);
    c.min_island_px = o.min_island_px;
    c.sprayer.unit_deposit_ul = o.unit_ul;
    c.sprayer.min_point_distance_px = o.min_dist_px;
    c.sprayer.box_halfwidth_px = o.box_halfwidth_px;
    c.sprayer.cm2_per_pixel = o.cm2_per_px;
    c.hit_rate = parse_pooling(o.hit_rate);
    c.include_background = o.include_background;
    c.faithfulness = faithfulness;
    c.wsde = wsde;
    c.overlays = !o.no_overlays;
    c.jobs = o.jobs;
    c.cache_capacity = o.cache;
    c.validate();
    return c;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    if (out.empty()) throw ConfigError("empty list '" + s + "'");
    return out;
}

std::string fmt(const nlohmann::ordered_json& v) {
    if (v.is_null()) return "n/a";
    if (!v.is_number()) return v.dump();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v.get<double>());
    return buf;
}

void print_summary(const nlohmann::ordered_json& report, std::ostream& out) {
    const auto& seg = report.at("segmentation");
    out << "images: " << report.at("images").at("count").get<std::size_t>() << "\n"
        << "segmentation: mIoU " << fmt(seg.at("miou")) << ", micro-F1 " << fmt(seg.at("micro_f1")) << "\n";
    if (const auto& f = report.at("faithfulness"); !f.is_null()) {
        out << "faithfulness (" << f.at("cam").get<std::string>() << ", " << f.at("fusion").get<std::string>()
            << "): deletion " << fmt(f.at("mean_deletion")) << ", insertion " << fmt(f.at("mean_insertion"))
            << ", skipped " << f.at("skipped").get<long long>() << "\n";
    }
    if (const auto& d = report.at("deposition"); !d.is_null()) {
        for (const auto& c : d.at("classes")) {
            out << "deposition " << c.at("name").get<std::string>() << ": predicted " << fmt(c.at("predicted_ul"))
                << " uL, gt " << fmt(c.at("gt_ul")) << " uL, hit rate " << fmt(c.at("hit_rate")) << "\n";
        }
        out << "deposition total: predicted " << fmt(d.at("total_predicted_ul")) << " uL, gt "
            << fmt(d.at("total_gt_ul")) << " uL, mean |difference| " << fmt(d.at("total_difference_ul")) << " uL\n";
    }
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) throw IoError("cannot write " + path.string());
}

void print_stats(const DatasetStats& stats, std::ostream& out) {
    const auto& table = ClassTable::dataset();
    out << "images: " << stats.train_images + stats.test_images << " (train " << stats.train_images << ", test "
        << stats.test_images << ")\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-18s %12s %10s %10s\n", "class", "pixels", "instances", "keypoints");
    out << line;
    for (int c = 0; c < kDatasetClassCount; ++c) {
        const auto i = static_cast<std::size_t>(c);
        std::snprintf(line, sizeof line, "%-18s %12lld %10lld %10lld\n", table.name(c).c_str(), stats.pixels[i],
                      stats.instances[i], stats.keypoints[i]);
        out << line;
    }
    out << "annotations: " << stats.annotations() << "\n";
}

int run_report(const PipelineOptions& o, bool faithfulness, bool wsde, bool allow_modes, std::ostream& out) {
    const std::vector<std::string> modes = allow_modes ? split_list(o.fusion) : std::vector<std::string>{o.fusion};
    std::vector<RunConfig> configs;
    for (const auto& m : modes) {
        PipelineOptions one = o;
        one.fusion = m;
        configs.push_back(make_config(one, faithfulness, wsde));
    }
    const DatasetIndex index = ingest(configs.front().dataset);
    const EngineFactory factory = make_engine_factory(configs.front().engine);
    if (configs.size() == 1) {
        const auto report = write_bundle(run_pipeline(configs.front(), index, factory), o.out);
        print_summary(report, out);
        out << "wrote " << o.out << "\n";
        return kExitOk;
    }
    std::vector<FaithfulnessBar> bars;
    nlohmann::ordered_json summaries = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const fs::path dir = fs::path(o.out) / modes[i];
        const auto report = write_bundle(run_pipeline(configs[i], index, factory), dir);
        out << "[" << modes[i] << "]\n";
        print_summary(report, out);
        const auto summary = faithfulness_summary(report);
        summaries.push_back(summary);
        if (!summary.is_null() && !summary.at("mean_deletion").is_null()) {
            bars.push_back({modes[i], summary.at("mean_deletion").get<double>(), summary.at("mean_insertion").get<double>()});
        }
    }
    if (faithfulness) {
        write_file(fs::path(o.out) / "faithfulness_summary.json", summaries.dump(2) + "\n");
        write_file(fs::path(o.out) / "faithfulness.svg", faithfulness_svg(bars));
    }
    out << "wrote " << o.out << "\n";
    return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Evaluation of segmentation CAMs and weed-spray deposition estimates"};
    app.name("sprayeval");
    app.require_subcommand(1);

    std::string ingest_root, ingest_out;
    bool ingest_json = false;
    auto* ingest_cmd = app.add_subcommand("ingest", "validate a dataset and print its statistics");
    ingest_cmd->add_option("dataset", ingest_root, "dataset root")->required();
    ingest_cmd->add_flag("--json", ingest_json, "print statistics as JSON");
    ingest_cmd->add_option("--out", ingest_out, "also write stats.json into this directory");

    SynthConfig synth;
    std::string synth_out, synth_format = "tnsr";
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    synth_cmd->add_option("--out", synth_out, "dataset root to create")->required();
    synth_cmd->add_option("--images", synth.images, "number of images")->capture_default_str();
    synth_cmd->add_option("--train", synth.train_images, "images assigned to the train split")->capture_default_str();
    synth_cmd->add_option("--height", synth.height, "image height")->capture_default_str();
    synth_cmd->add_option("--width", synth.width, "image width")->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
    synth_cmd->add_option("--max-blobs", synth.max_blobs_per_class, "blobs per class at most")->capture_default_str();
    synth_cmd->add_option("--format", synth_format, "tnsr|png")->capture_default_str();

    PipelineOptions seg_opts, cam_opts, wsde_opts, report_opts;
    auto* seg_cmd = app.add_subcommand("seg-eval", "segmentation metrics on the test split");
    add_pipeline_options(seg_cmd, seg_opts);
    auto* cam_cmd = app.add_subcommand("cam-eval", "segmentation metrics plus CAM faithfulness");
    add_pipeline_options(cam_cmd, cam_opts);
    auto* wsde_cmd = app.add_subcommand("wsde", "segmentation metrics plus deposition estimates");
    add_pipeline_options(wsde_cmd, wsde_opts);
    auto* report_cmd = app.add_subcommand("report", "full pipeline and every report");
    add_pipeline_options(report_cmd, report_opts);

    std::string replay_dir;
    double tolerance = 1e-9;
    auto* replay_cmd = app.add_subcommand("replay", "recompute a report from its intermediates");
    replay_cmd->add_option("bundle", replay_dir, "report directory")->required();
    replay_cmd->add_option("--tolerance", tolerance, "allowed relative difference")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*ingest_cmd) {
            const DatasetIndex index = ingest(ingest_root);
            if (ingest_json) out << index.stats.to_json().dump(2) << "\n";
            else print_stats(index.stats, out);
            if (!ingest_out.empty()) {
                std::error_code ec;
                fs::create_directories(ingest_out, ec);
                if (ec) throw IoError("cannot create " + ingest_out + ": " + ec.message());
                write_file(fs::path(ingest_out) / "stats.json", index.stats.to_json().dump(2) + "\n");
            }
        } else if (*synth_cmd) {
            if (synth_format == "png") synth.format = SynthFormat::png;
            else if (synth_format != "tnsr") throw ConfigError("unknown synth format '" + synth_format + "'");
            const auto manifest = synthesize_dataset(synth, synth_out);
            print_stats(manifest_stats(manifest), out);
            out << "wrote " << synth_out << "\n";
        } else if (*seg_cmd) {
            return run_report(seg_opts, false, false, false, out);
        } else if (*cam_cmd) {
            return run_report(cam_opts, true, false, false, out);
        } else if (*wsde_cmd) {
            return run_report(wsde_opts, false, true, false, out);
        } else if (*report_cmd) {
            return run_report(report_opts, true, true, true, out);
        } else if (*replay_cmd) {
            const ReplayOutcome r = replay_bundle(replay_dir, tolerance);
            for (const auto& m : r.mismatches) err << "mismatch " << m << "\n";
            out << "replay: " << r.numbers_compared << " numbers compared, " << r.mismatches.size() << " mismatches\n";
            return r.ok() ? kExitOk : kExitData;
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "sprayeval: configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ArgumentError& e) {
        err << "sprayeval: configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        err << "sprayeval: data error: " << e.what() << "\n";
        return kExitData;
    } catch (const IoError& e) {
        err << "sprayeval: i/o error: " << e.what() << "\n";
        return kExitData;
    } catch (const TransportError& e) {
        err << "sprayeval: engine error: " << e.what() << "\n";
        return kExitEngine;
    } catch (const ContractError& e) {
        err << "sprayeval: engine error: " << e.what() << "\n";
        return kExitEngine;
    } catch (const std::exception& e) {
        err << "sprayeval: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace sprayeval
