#include "sprayeval/report/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sprayeval/report/overlay.hpp"
#include "sprayeval/tensor_io.hpp"

namespace sprayeval {
namespace {

using Json = nlohmann::ordered_json;

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string cell(const Json& v) {
    if (v.is_null()) return "";
    if (v.is_number_float()) return num(v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

void make_dirs(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p)) throw IoError("cannot create directory " + p.string() + (ec ? ": " + ec.message() : ""));
}

class Csv {
public:
    Csv(const fs::path& path, const std::vector<std::string>& header) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot write " + path.string());
        row(header);
    }
    ~Csv() noexcept(false) {
        out_.flush();
        if (!out_ && std::uncaught_exceptions() == 0) throw IoError("write failed for " + path_.string());
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }
    void row(const Json& obj, const std::vector<std::string>& keys, std::vector<std::string> prefix = {}) {
        for (const auto& k : keys) prefix.push_back(cell(obj.at(k)));
        row(prefix);
    }

private:
    fs::path path_;
    std::ofstream out_;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw IoError("cannot write " + path.string());
}

Json segmentation_section(const RunConfig& cfg, const ConfusionTally& total) {
    const auto& table = ClassTable::dataset();
    const PerClass dice = dice_per_class(total), iou = iou_per_class(total), acc = pixel_accuracy_per_class(total);
    Json classes = Json::array();
    for (int c = 0; c < kDatasetClassCount; ++c) {
        const auto i = static_cast<std::size_t>(c);
        classes.push_back({{"class_id", c},
                           {"name", table.name(c)},
                           {"tp", total.tp[i]},
                           {"fp", total.fp[i]},
                           {"fn", total.fn[i]},
                           {"dice", opt(dice[i])},
                           {"iou", opt(iou[i])},
                           {"pixel_accuracy", opt(acc[i])}});
    }
    return {{"classes", classes},
            {"miou", opt(miou(total, cfg.include_background))},
            {"miou_foreground", opt(miou(total, false))},
            {"miou_all_classes", opt(miou(total, true))},
            {"micro_f1", micro_f1(total, cfg.include_background)},
            {"micro_f1_foreground", micro_f1(total, false)},
            {"micro_f1_all_classes", micro_f1(total, true)},
            {"not_applicable", not_applicable_count(iou, cfg.include_background)}};
}

Json faithfulness_section(const RunConfig& cfg, const EngineDescriptor& engine, std::span<const ImageSummary> images) {
    const auto& table = ClassTable::dataset();
    Json classes = Json::array(), absent = Json::array();
    std::vector<AucPair> pairs;
    long long scored = 0, skipped = 0;
    for (const auto& img : images) skipped += static_cast<long long>(img.faithfulness_skipped.size());
    for (int c = 1; c < kDatasetClassCount; ++c) {
        double del = 0.0, ins = 0.0;
        long long n = 0;
        for (const auto& img : images)
            for (const auto& f : img.faithfulness)
                if (f.class_id == c) del += f.deletion_auc, ins += f.insertion_auc, ++n;
        if (n == 0) {
            absent.push_back(table.name(c));
            continue;
        }
        scored += n;
        const AucPair p{del / static_cast<double>(n), ins / static_cast<double>(n)};
        pairs.push_back(p);
        classes.push_back({{"class_id", c},
                           {"name", table.name(c)},
                           {"images", n},
                           {"mean_deletion", p.deletion},
                           {"mean_insertion", p.insertion}});
    }
    Json out = {{"model", engine.name}, {"fusion", to_string(cfg.fusion.mode)}, {"cam", to_string(cfg.cam)}};
    if (pairs.empty()) {
        out["mean_deletion"] = nullptr;
        out["mean_insertion"] = nullptr;
        out["difference"] = nullptr;
        out["interpretable"] = nullptr;
    } else {
        const ClassAverage avg = class_averaged_scores(pairs);
        out["mean_deletion"] = avg.mean_deletion;
        out["mean_insertion"] = avg.mean_insertion;
        out["difference"] = avg.difference();
        out["interpretable"] = avg.interpretable;
    }
    out["scored"] = scored;
    out["skipped"] = skipped;
    out["absent_classes"] = absent;
    out["classes"] = classes;
    return out;
}

Json deposition_section(const RunConfig& cfg, std::span<const ImageSummary> images) {
    std::vector<ImageCounts> counts;
    long long non_converged = 0;
    for (const auto& img : images) {
        ImageCounts ic;
        ic.image_id = img.id;
        for (const auto& w : img.wsde) {
            ic.per_class[w.class_id] = {static_cast<long long>(w.predicted.size()),
                                        static_cast<long long>(w.ground_truth.size()), w.pointing.hits,
                                        w.pointing.misses};
            non_converged += !w.converged;
        }
        counts.push_back(std::move(ic));
    }
    const DepositionReport rep = deposition_report(counts, cfg.sprayer, ClassTable::dataset(), cfg.hit_rate);
    Json classes = Json::array();
    for (const auto& r : rep.classes) {
        classes.push_back({{"sprayed_class", r.sprayed_class},
                           {"class_id", r.base_class},
                           {"name", r.name},
                           {"gt_ul", r.gt_ul},
                           {"predicted_ul", r.predicted_ul},
                           {"absolute_difference_ul", r.absolute_difference_ul},
                           {"gt_points", r.gt_points},
                           {"predicted_points", r.predicted_points},
                           {"hits", r.hits},
                           {"misses", r.misses},
                           {"hit_rate", opt(r.hit_rate)}});
    }
    return {{"method", to_string(cfg.cluster)},
            {"classes", classes},
            {"total_gt_ul", rep.total_gt_ul},
            {"total_predicted_ul", rep.total_predicted_ul},
            {"total_difference_ul", rep.total_difference_ul},
            {"mean_hit_rate", opt(rep.mean_hit_rate)},
            {"non_converged", non_converged}};
}

Json coverage_section(const RunConfig& cfg, std::span<const ImageSummary> images) {
    const auto& table = ClassTable::dataset();
    Json classes = Json::array();
    double total_gt = 0.0, total_pred = 0.0;
    long long all_sprayed = 0, all_unsprayed = 0;
    for (int sprayed : table.sprayed_classes()) {
        const int base = table.base_of(sprayed);
        double gt = 0.0, pred = 0.0;
        long long sprayed_n = 0, unsprayed_n = 0;
        for (const auto& img : images) {
            gt += coverage(img.gt, sprayed, cfg.sprayer);
            pred += coverage(img.pred, sprayed, cfg.sprayer);
            const auto inst = count_instances(img.gt);
            sprayed_n += inst[static_cast<std::size_t>(sprayed)];
            unsprayed_n += inst[static_cast<std::size_t>(base)];
        }
        total_gt += gt;
        total_pred += pred;
        all_sprayed += sprayed_n;
        all_unsprayed += unsprayed_n;
        const auto hm = hit_miss_rate(sprayed_n, unsprayed_n);
        classes.push_back({{"sprayed_class", sprayed},
                           {"class_id", base},
                           {"name", table.name(base)},
                           {"gt_cm2", gt},
                           {"predicted_cm2", pred},
                           {"sprayed_instances", sprayed_n},
                           {"unsprayed_instances", unsprayed_n},
                           {"hit_percent", hm ? Json(hm->hit_percent) : Json(nullptr)},
                           {"miss_percent", hm ? Json(hm->miss_percent) : Json(nullptr)}});
    }
    const auto hm = hit_miss_rate(all_sprayed, all_unsprayed);
    return {{"classes", classes},
            {"total_gt_cm2", total_gt},
            {"total_predicted_cm2", total_pred},
            {"hit_percent", hm ? Json(hm->hit_percent) : Json(nullptr)},
            {"miss_percent", hm ? Json(hm->miss_percent) : Json(nullptr)}};
}

Json per_image_segmentation(const ImageSummary& img) {
    return segmentation_section(RunConfig{}, img.tally).at("classes");
}

Json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_curve(const fs::path& path, const FaithfulnessCurve& curve) {
    std::ostringstream s;
    s << "fraction,confidence\n";
    for (int i = 0; i <= kCurveSteps; ++i) s << num(FaithfulnessCurve::fraction(i)) << ',' << num(curve.confidences[static_cast<std::size_t>(i)]) << '\n';
    write_text(path, s.str());
}

FaithfulnessCurve read_curve(const fs::path& path, CurveKind kind) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "fraction,confidence") throw DataError(path.string() + ": bad header");
    FaithfulnessCurve curve;
    curve.kind = kind;
    int i = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (i > kCurveSteps || comma == std::string::npos) throw DataError(path.string() + ": malformed curve");
        try {
            curve.confidences[static_cast<std::size_t>(i++)] = std::stod(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw DataError(path.string() + ": malformed value");
        }
    }
    if (i != kCurveSteps + 1) throw DataError(path.string() + ": expected " + std::to_string(kCurveSteps + 1) + " samples");
    return curve;
}

Tensor island_plane(std::span<const Island> islands, Index h, Index w) {
    Tensor plane = Tensor::plane(h, w);
    for (std::size_t i = 0; i < islands.size(); ++i)
        for (Index p : islands[i].pixels) plane.data()[p] = static_cast<float>(i + 1);
    return plane;
}

std::vector<KeypointRecord> records_for(const std::string& id, const std::vector<ClassWsde>& wsde, bool predicted) {
    std::vector<KeypointRecord> out;
    for (const auto& w : wsde)
        for (const auto& p : predicted ? w.predicted : w.ground_truth) out.push_back({id, w.class_id, p});
    return out;
}

std::string curve_name(int c, CurveKind k) { return "curve_" + std::to_string(c) + "_" + to_string(k) + ".csv"; }

}  // namespace

Json build_report(const RunConfig& cfg, const EngineDescriptor& engine, std::span<const ImageSummary> images) {
    ConfusionTally total;
    Json ids = Json::array();
    for (const auto& img : images) {
        total += img.tally;
        ids.push_back(img.id);
    }
    Json report;
    report["schema"] = kReportSchema;
    report["config"] = cfg.to_json();
    report["engine"] = {{"name", engine.name}, {"num_classes", engine.num_classes}, {"num_activations", engine.num_activations}};
    report["images"] = {{"count", images.size()}, {"ids", ids}};
    report["segmentation"] = segmentation_section(cfg, total);
    report["faithfulness"] = cfg.faithfulness ? faithfulness_section(cfg, engine, images) : Json(nullptr);
    report["deposition"] = cfg.wsde ? deposition_section(cfg, images) : Json(nullptr);
    report["coverage"] = coverage_section(cfg, images);
    return report;
}

Json faithfulness_summary(const Json& report) {
    const Json& f = report.at("faithfulness");
    if (f.is_null()) return nullptr;
    return {{"model", f.at("model")},
            {"fusion", f.at("fusion")},
            {"cam", f.at("cam")},
            {"mean_deletion", f.at("mean_deletion")},
            {"mean_insertion", f.at("mean_insertion")},
            {"difference", f.at("difference")}};
}

std::string faithfulness_svg(std::span<const FaithfulnessBar> bars) {
    const double group = 120.0, left = 60.0, top = 40.0, plot_h = 200.0, bar_w = 40.0;
    const double width = left + group * static_cast<double>(std::max<std::size_t>(bars.size(), 1)) + 20.0;
    const double height = top + plot_h + 60.0;
    auto f = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    auto esc = [](const std::string& s) {
        std::string out;
        for (char c : s) {
            switch (c) {
                case '&': out += "&amp;"; break;
                case '<': out += "&lt;"; break;
                case '>': out += "&gt;"; break;
                case '"': out += "&quot;"; break;
                default: out += c;
            }
        }
        return out;
    };
    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f(width) << "\" height=\"" << f(height)
      << "\" viewBox=\"0 0 " << f(width) << ' ' << f(height) << "\">\n"
      << "  <title>Mean Deletion and Insertion AUC</title>\n"
      << "  <rect x=\"0\" y=\"0\" width=\"" << f(width) << "\" height=\"" << f(height) << "\" fill=\"white\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double y = top + plot_h * (1.0 - t / 4.0);
        s << "  <line x1=\"" << f(left) << "\" y1=\"" << f(y) << "\" x2=\"" << f(width - 20.0) << "\" y2=\"" << f(y)
          << "\" stroke=\"#dddddd\"/>\n"
          << "  <text x=\"" << f(left - 8.0) << "\" y=\"" << f(y + 4.0) << "\" font-size=\"11\" text-anchor=\"end\">"
          << f(t / 4.0) << "</text>\n";
    }
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const double x0 = left + group * static_cast<double>(i) + 15.0;
        const double values[2] = {std::clamp(bars[i].deletion, 0.0, 1.0), std::clamp(bars[i].insertion, 0.0, 1.0)};
        const char* colours[2] = {"#d62728", "#1f77b4"};
        const char* names[2] = {"Deletion", "Insertion"};
        for (int k = 0; k < 2; ++k) {
            const double h = plot_h * values[k];
            s << "  <rect x=\"" << f(x0 + k * (bar_w + 5.0)) << "\" y=\"" << f(top + plot_h - h) << "\" width=\""
              << f(bar_w) << "\" height=\"" << f(h) << "\" fill=\"" << colours[k] << "\"><title>" << names[k] << ' '
              << f(k == 0 ? bars[i].deletion : bars[i].insertion) << "</title></rect>\n";
        }
        s << "  <text x=\"" << f(x0 + bar_w + 2.5) << "\" y=\"" << f(top + plot_h + 18.0)
          << "\" font-size=\"12\" text-anchor=\"middle\">" << esc(bars[i].label) << "</text>\n";
    }
    s << "  <line x1=\"" << f(left) << "\" y1=\"" << f(top + plot_h) << "\" x2=\"" << f(width - 20.0) << "\" y2=\""
      << f(top + plot_h) << "\" stroke=\"black\"/>\n"
      << "  <rect x=\"" << f(left) << "\" y=\"10\" width=\"12\" height=\"12\" fill=\"#d62728\"/>\n"
      << "  <text x=\"" << f(left + 16.0) << "\" y=\"20\" font-size=\"12\">Deletion</text>\n"
      << "  <rect x=\"" << f(left + 90.0) << "\" y=\"10\" width=\"12\" height=\"12\" fill=\"#1f77b4\"/>\n"
      << "  <text x=\"" << f(left + 106.0) << "\" y=\"20\" font-size=\"12\">Insertion</text>\n"
      << "</svg>\n";
    return s.str();
}

Json write_bundle(const RunResult& run, const fs::path& out) {
    make_dirs(out);
    std::vector<ImageSummary> summaries;
    for (const auto& img : run.images) summaries.push_back(img.summary);
    const Json report = build_report(run.config, run.engine, summaries);
    write_text(out / "report.json", report.dump(2) + "\n");

    const auto& table = ClassTable::dataset();
    const std::vector<std::string> seg_keys = {"class_id", "name", "tp", "fp", "fn", "dice", "iou", "pixel_accuracy"};
    {
        Csv csv(out / "segmentation.csv", seg_keys);
        if (!summaries.empty())
            for (const auto& row : report.at("segmentation").at("classes")) csv.row(row, seg_keys);
    }
    {
        std::vector<std::string> header = {"image_id"};
        header.insert(header.end(), seg_keys.begin(), seg_keys.end());
        Csv csv(out / "segmentation_per_image.csv", header);
        for (const auto& img : summaries)
            for (const auto& row : per_image_segmentation(img)) csv.row(row, seg_keys, {img.id});
    }
    {
        Csv csv(out / "coverage.csv", {"sprayed_class", "class_id", "name", "gt_cm2", "predicted_cm2",
                                       "sprayed_instances", "unsprayed_instances", "hit_percent", "miss_percent"});
        if (!summaries.empty())
            for (const auto& row : report.at("coverage").at("classes"))
                csv.row(row, {"sprayed_class", "class_id", "name", "gt_cm2", "predicted_cm2", "sprayed_instances",
                              "unsprayed_instances", "hit_percent", "miss_percent"});
    }
    if (run.config.faithfulness) {
        {
            Csv csv(out / "faithfulness.csv", {"image_id", "class_id", "name", "deletion_auc", "insertion_auc"});
            for (const auto& img : summaries)
                for (const auto& f : img.faithfulness)
                    csv.row({img.id, std::to_string(f.class_id), table.name(f.class_id), num(f.deletion_auc), num(f.insertion_auc)});
        }
        {
            const std::vector<std::string> keys = {"class_id", "name", "images", "mean_deletion", "mean_insertion"};
            Csv csv(out / "faithfulness_classes.csv", keys);
            for (const auto& row : report.at("faithfulness").at("classes")) csv.row(row, keys);
        }
        const Json summary = faithfulness_summary(report);
        write_text(out / "faithfulness_summary.json", summary.dump(2) + "\n");
        std::vector<FaithfulnessBar> bars;
        if (!summary.at("mean_deletion").is_null()) {
            bars.push_back({summary.at("fusion").get<std::string>(), summary.at("mean_deletion").get<double>(),
                            summary.at("mean_insertion").get<double>()});
        }
        write_text(out / "faithfulness.svg", faithfulness_svg(bars));
    }
    if (run.config.wsde) {
        const std::vector<std::string> keys = {"sprayed_class", "class_id", "name", "gt_ul", "predicted_ul",
                                               "absolute_difference_ul", "gt_points", "predicted_points",
                                               "hits", "misses", "hit_rate"};
        {
            Csv csv(out / "deposition.csv", keys);
            if (!summaries.empty())
                for (const auto& row : report.at("deposition").at("classes")) csv.row(row, keys);
        }
        {
            Csv csv(out / "wsde_per_image.csv",
                    {"image_id", "sprayed_class", "name", "islands", "predicted_points", "gt_points", "hits", "misses", "converged"});
            for (const auto& img : summaries)
                for (const auto& w : img.wsde)
                    csv.row({img.id, std::to_string(w.class_id), table.name(table.base_of(w.class_id)),
                             std::to_string(w.islands), std::to_string(w.predicted.size()),
                             std::to_string(w.ground_truth.size()), std::to_string(w.pointing.hits),
                             std::to_string(w.pointing.misses), w.converged ? "true" : "false"});
        }
        std::vector<KeypointRecord> all;
        for (const auto& img : summaries) {
            auto r = records_for(img.id, img.wsde, true);
            all.insert(all.end(), r.begin(), r.end());
        }
        write_keypoints_csv(out / "keypoints_pred.csv", all);
    }

    for (const auto& img : run.images) {
        const ImageSummary& s = img.summary;
        const ImageArtifacts& a = img.artifacts;
        const fs::path dir = out / "intermediates" / s.id;
        make_dirs(dir);
        write_tensor(a.fused, dir / "fused.tnsr");
        write_mask(s.pred, dir / "pred.lmsk");
        write_mask(s.gt, dir / "gt.lmsk");
        for (const auto& [c, cam] : a.cams) write_tensor(cam.map, dir / ("cam_" + std::to_string(c) + ".tnsr"));
        for (const auto& [c, curves] : a.curves) {
            write_curve(dir / curve_name(c, CurveKind::deletion), curves[0]);
            write_curve(dir / curve_name(c, CurveKind::insertion), curves[1]);
        }
        for (const auto& [c, islands] : a.islands) {
            write_tensor(island_plane(islands, s.pred.height(), s.pred.width()), dir / ("islands_" + std::to_string(c) + ".tnsr"));
        }
        if (run.config.wsde) {
            write_keypoints_csv(dir / "keypoints_gt.csv", records_for(s.id, s.wsde, false));
            write_keypoints_csv(dir / "keypoints_pred.csv", records_for(s.id, s.wsde, true));
        }
        if (!run.config.overlays) continue;
        const fs::path ov = out / "overlays";
        make_dirs(ov);
        write_png(prediction_overlay(a.image, s.pred), ov / (s.id + "_pred.png"));
        for (const auto& [c, cam] : a.cams) {
            std::span<const Island> islands;
            if (auto it = a.islands.find(c); it != a.islands.end()) islands = it->second;
            std::vector<PixelPoint> predicted, gt;
            for (const auto& w : s.wsde)
                if (w.class_id == c) predicted = w.predicted, gt = w.ground_truth;
            write_png(cam_overlay(a.image, cam.map, islands, predicted, gt), ov / (s.id + "_cam" + std::to_string(c) + ".png"));
        }
    }
    return report;
}

void compare_json(const Json& expected, const Json& actual, double tolerance, const std::string& path,
                  ReplayOutcome& outcome) {
    auto fail = [&](const std::string& why) { outcome.mismatches.push_back(path + ": " + why); };
    if (expected.is_number() && actual.is_number()) {
        ++outcome.numbers_compared;
        const double e = expected.get<double>(), a = actual.get<double>();
        if (!(std::abs(e - a) <= tolerance * std::max(1.0, std::abs(e)))) fail("expected " + num(e) + ", got " + num(a));
        return;
    }
    if (expected.type() != actual.type()) {
        fail("expected " + expected.dump() + ", got " + actual.dump());
        return;
    }
    if (expected.is_object()) {
        for (const auto& [k, v] : expected.items()) {
            if (!actual.contains(k)) fail("missing key '" + k + "'");
            else compare_json(v, actual.at(k), tolerance, path + "." + k, outcome);
        }
        for (const auto& [k, v] : actual.items())
            if (!expected.contains(k)) fail("unexpected key '" + k + "'");
    } else if (expected.is_array()) {
        if (expected.size() != actual.size()) {
            fail("array length " + std::to_string(expected.size()) + " vs " + std::to_string(actual.size()));
            return;
        }
        for (std::size_t i = 0; i < expected.size(); ++i)
            compare_json(expected[i], actual[i], tolerance, path + "[" + std::to_string(i) + "]", outcome);
    } else if (expected != actual) {
        fail("expected " + expected.dump() + ", got " + actual.dump());
    }
}

ReplayOutcome replay_bundle(const fs::path& bundle, double tolerance) {
    const Json report = read_json(bundle / "report.json");
    if (!report.contains("schema") || report.at("schema") != kReportSchema) {
        throw DataError((bundle / "report.json").string() + ": unknown report schema");
    }
    const RunConfig cfg = RunConfig::from_json(report.at("config"));
    EngineDescriptor engine;
    try {
        engine.name = report.at("engine").at("name").get<std::string>();
        engine.num_classes = report.at("engine").at("num_classes").get<Index>();
        engine.num_activations = report.at("engine").at("num_activations").get<Index>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("report engine: ") + e.what());
    }

    ReplayOutcome outcome;
    const auto& table = ClassTable::dataset();
    std::vector<ImageSummary> summaries;
    for (const auto& id_json : report.at("images").at("ids")) {
        ImageSummary s;
        s.id = id_json.get<std::string>();
        const fs::path dir = bundle / "intermediates" / s.id;
        s.pred = read_mask(dir / "pred.lmsk");
        s.gt = read_mask(dir / "gt.lmsk");
        if (!(argmax_mask(read_tensor(dir / "fused.tnsr")) == s.pred)) {
            outcome.mismatches.push_back(s.id + ": argmax of fused logits differs from pred.lmsk");
        }
        s.tally = tally(s.pred, s.gt);

        if (cfg.faithfulness) {
            for (int c = 1; c < kDatasetClassCount; ++c) {
                if (s.pred.count(c) == 0) continue;
                const fs::path del = dir / curve_name(c, CurveKind::deletion);
                if (!fs::exists(del)) {
                    s.faithfulness_skipped.push_back(c);
                    continue;
                }
                const FaithfulnessCurve d = read_curve(del, CurveKind::deletion);
                const FaithfulnessCurve i = read_curve(dir / curve_name(c, CurveKind::insertion), CurveKind::insertion);
                s.faithfulness.push_back({c, auc(d), auc(i)});
            }
        }
        if (cfg.wsde) {
            const auto gt_records = read_keypoints_csv(dir / "keypoints_gt.csv");
            const auto pred_records = read_keypoints_csv(dir / "keypoints_pred.csv");
            for (int c : table.sprayed_classes()) {
                ClassWsde w;
                w.class_id = c;
                w.ground_truth = points_of_class(gt_records, c);
                const fs::path cam_path = dir / ("cam_" + std::to_string(c) + ".tnsr");
                if (s.pred.count(c) > 0 && fs::exists(cam_path)) {
                    const Tensor cam = read_tensor(cam_path);
                    const auto islands = extract_islands(cam, s.pred, c, cfg.top_mode, cfg.min_island_px);
                    const fs::path island_path = dir / ("islands_" + std::to_string(c) + ".tnsr");
                    if (!(island_plane(islands, s.pred.height(), s.pred.width()) == read_tensor(island_path))) {
                        outcome.mismatches.push_back(s.id + ": islands of class " + std::to_string(c) + " differ");
                    }
                    const ClusterOutcome co = cluster_islands(cfg.cluster, islands, c, cfg.sprayer, cfg.ap_preference);
                    w.predicted = co.keypoints.points;
                    w.converged = co.converged;
                    w.islands = static_cast<Index>(islands.size());
                }
                if (w.predicted != points_of_class(pred_records, c)) {
                    outcome.mismatches.push_back(s.id + ": keypoints of class " + std::to_string(c) + " differ");
                }
                w.pointing = pointing_game(w.predicted, w.ground_truth, cfg.sprayer.box_halfwidth_px);
                s.wsde.push_back(std::move(w));
            }
        }
        summaries.push_back(std::move(s));
    }
    compare_json(report, build_report(cfg, engine, summaries), tolerance, "report", outcome);
    return outcome;
}

}  // namespace sprayeval
