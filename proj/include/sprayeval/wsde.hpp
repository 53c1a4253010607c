#pragma once

#include <compare>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sprayeval/tensor.hpp"

namespace sprayeval {

/// Calibration of the sprayer. Distances are in image pixels.
struct SprayerSpec {
    double unit_deposit_ul = 20.9;
    double deposit_std_ul = 0.16;  // recorded only
    double min_point_distance_px = 0.0;
    double box_halfwidth_px = 0.0;
    double cm2_per_pixel = 0.0;

    /// Throws ConfigError unless every field is positive.
    void validate() const;
};

struct PixelPoint {
    int row = 0;
    int col = 0;
    friend auto operator<=>(const PixelPoint&, const PixelPoint&) = default;
};

double squared_distance(const PixelPoint& a, const PixelPoint& b);

struct KeyPointSet {
    int class_id = 0;
    std::vector<PixelPoint> points;
};

struct Island {
    std::vector<Index> pixels;  // flat row-major, ascending
    double centroid_row = 0.0;
    double centroid_col = 0.0;
    Index area() const { return static_cast<Index>(pixels.size()); }
};

enum class Connectivity { four = 4, eight = 8 };

/// Connected components of a binary grid, ordered by their first pixel in
/// row-major order; pixels within a component ascend.
std::vector<std::vector<Index>> connected_components(const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& mask,
                                                     Connectivity connectivity);

/// How "top 10%" of a CAM is selected: values at or above the 90th percentile
/// of the map, or at or above 0.9 * max.
enum class TopMode { percentile, value };

TopMode parse_top_mode(std::string_view s);
std::string to_string(TopMode m);
double top_threshold(const Tensor& cam_map, TopMode mode);

inline constexpr Index kDefaultMinIslandPx = 4;

/// 8-connected components of (cam >= top threshold) AND (pred == class_id),
/// keeping those of at least min_island_px pixels.
std::vector<Island> extract_islands(const Tensor& cam_map, const LabelMask& pred, int class_id,
                                    TopMode mode = TopMode::percentile, Index min_island_px = kDefaultMinIslandPx);

/// One point per island at its centroid rounded to the nearest pixel.
KeyPointSet cluster_centres(std::span<const Island> islands, int class_id);

struct AffinityOptions {
    std::optional<double> preference;  // nullopt: median of off-diagonal similarities
    double damping = 0.5;
    int max_iterations = 200;
    int convergence_iterations = 15;
};

struct AffinityResult {
    std::vector<PixelPoint> exemplars;
    std::vector<int> labels;  // exemplar index per input point, -1 if none
    bool converged = false;
    int iterations = 0;
};

/// Affinity propagation with s(i, k) = -|x_i - x_k|^2. Throws ArgumentError on
/// empty input.
AffinityResult affinity_propagation(std::span<const PixelPoint> points, const AffinityOptions& options = {});

/// Greedy row-major scan keeping a point iff it is at least min_dist from every
/// kept point. Output is in row-major order.
std::vector<PixelPoint> cluster_threshold(std::span<const PixelPoint> points, double min_dist);

enum class ClusterMethod { centres, affinity, threshold };

ClusterMethod parse_cluster_method(std::string_view s);
std::string to_string(ClusterMethod m);

/// Preference used when WSDE calls affinity propagation: the classical median
/// or -min_point_distance_px^2 from the sprayer spacing.
enum class AffinityPreference { median, spacing };

AffinityPreference parse_affinity_preference(std::string_view s);
std::string to_string(AffinityPreference p);

struct ClusterOutcome {
    KeyPointSet keypoints;
    bool converged = true;
};

ClusterOutcome cluster_islands(ClusterMethod method, std::span<const Island> islands, int class_id,
                               const SprayerSpec& spec, AffinityPreference preference = AffinityPreference::spacing);

struct PointingResult {
    long long hits = 0;
    long long misses = 0;
    double accuracy() const { return hits + misses == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(hits + misses); }
};

/// Each GT point owns a (2*halfwidth+1)-wide square box. Predictions are
/// matched to boxes greedily by ascending distance to the box centre, one hit
/// per box; unmatched predictions are misses.
PointingResult pointing_game(std::span<const PixelPoint> predicted, std::span<const PixelPoint> ground_truth,
                             double box_halfwidth_px);

double estimate_deposition(long long point_count, const SprayerSpec& spec);

double coverage(const LabelMask& mask, int class_id, const SprayerSpec& spec);

struct HitMiss {
    double hit_percent = 0.0;
    double miss_percent = 0.0;
};

/// nullopt when there are no instances at all.
std::optional<HitMiss> hit_miss_rate(long long sprayed, long long unsprayed);

struct ClassCounts {
    long long predicted = 0;
    long long ground_truth = 0;
    long long hits = 0;
    long long misses = 0;
};

struct ImageCounts {
    std::string image_id;
    std::map<int, ClassCounts> per_class;  // keyed by sprayed class id
};

enum class HitRatePooling { pooled, per_image };

struct ClassDeposition {
    int sprayed_class = 0;
    int base_class = 0;
    std::string name;  // base class name
    double gt_ul = 0.0;
    double predicted_ul = 0.0;
    double absolute_difference_ul = 0.0;  // mean over images
    long long predicted_points = 0;
    long long gt_points = 0;
    long long hits = 0;
    long long misses = 0;
    std::optional<double> hit_rate;
};

struct DepositionReport {
    std::vector<ClassDeposition> classes;
    double total_gt_ul = 0.0;
    double total_predicted_ul = 0.0;
    double total_difference_ul = 0.0;
    std::optional<double> mean_hit_rate;
};

/// Per class: mean over images of |predicted - gt| * unit deposit, totals as
/// sums of class values, and the unweighted mean of class hit rates.
DepositionReport deposition_report(std::span<const ImageCounts> images, const SprayerSpec& spec,
                                   const ClassTable& classes = ClassTable::dataset(),
                                   HitRatePooling pooling = HitRatePooling::pooled);

}  // namespace sprayeval
