#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sprayeval/report/pipeline.hpp"

namespace sprayeval {

inline constexpr const char* kReportSchema = "sprayeval.report/1";

/// Assembles report.json from per-image summaries. Top-level keys are always
/// schema, config, engine, images, segmentation, faithfulness, deposition and
/// coverage; a disabled stage is null, an undefined value is null.
nlohmann::ordered_json build_report(const RunConfig& cfg, const EngineDescriptor& engine,
                                    std::span<const ImageSummary> images);

/// {model, fusion, cam, mean_deletion, mean_insertion, difference} from a report.
nlohmann::ordered_json faithfulness_summary(const nlohmann::ordered_json& report);

struct FaithfulnessBar {
    std::string label;
    double deletion = 0.0;
    double insertion = 0.0;
};

/// Grouped bar chart of mean Deletion and Insertion AUC per label.
std::string faithfulness_svg(std::span<const FaithfulnessBar> bars);

/// Writes report.json, the CSV tables, the intermediates used by replay, the
/// faithfulness summary and chart, and PNG overlays. Throws IoError when the
/// directory cannot be written.
nlohmann::ordered_json write_bundle(const RunResult& run, const fs::path& out);

struct ReplayOutcome {
    std::size_t numbers_compared = 0;
    std::vector<std::string> mismatches;
    bool ok() const { return mismatches.empty(); }
};

/// Recomputes every report number from the persisted intermediates by calling
/// the metric, faithfulness and WSDE modules directly, then compares against
/// report.json.
ReplayOutcome replay_bundle(const fs::path& bundle, double tolerance = 1e-9);

/// Structural comparison: identical key sets and strings, numbers within
/// tolerance * max(1, |expected|). Appends one line per difference.
void compare_json(const nlohmann::ordered_json& expected, const nlohmann::ordered_json& actual, double tolerance,
                  const std::string& path, ReplayOutcome& outcome);

}  // namespace sprayeval
