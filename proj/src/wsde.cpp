#include "sprayeval/wsde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "sprayeval/engine.hpp"

namespace sprayeval {

void SprayerSpec::validate() const {
    if (!(unit_deposit_ul > 0.0)) throw ConfigError("unit deposit must be positive");
    if (!(min_point_distance_px > 0.0)) throw ConfigError("minimum point distance must be positive");
    if (!(box_halfwidth_px > 0.0)) throw ConfigError("box half-width must be positive");
    if (!(cm2_per_pixel > 0.0)) throw ConfigError("cm2 per pixel must be positive");
}

double squared_distance(const PixelPoint& a, const PixelPoint& b) {
    const double dr = a.row - b.row, dc = a.col - b.col;
    return dr * dr + dc * dc;
}

// ---------------------------------------------------------------------------
// Islands

std::vector<std::vector<Index>> connected_components(
    const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& mask, Connectivity connectivity) {
    const Index h = mask.rows(), w = mask.cols();
    std::vector<char> seen(static_cast<std::size_t>(h * w), 0);
    std::vector<std::vector<Index>> components;
    std::vector<Index> stack;
    const int reach = connectivity == Connectivity::eight ? 8 : 4;
    static constexpr int dy[8] = {-1, 1, 0, 0, -1, -1, 1, 1};
    static constexpr int dx[8] = {0, 0, -1, 1, -1, 1, -1, 1};

    for (Index start = 0; start < h * w; ++start) {
        if (!mask.data()[start] || seen[static_cast<std::size_t>(start)]) continue;
        std::vector<Index> comp;
        stack.assign(1, start);
        seen[static_cast<std::size_t>(start)] = 1;
        while (!stack.empty()) {
            const Index p = stack.back();
            stack.pop_back();
            comp.push_back(p);
            const Index y = p / w, x = p % w;
            for (int d = 0; d < reach; ++d) {
                const Index ny = y + dy[d], nx = x + dx[d];
                if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                const Index q = ny * w + nx;
                if (mask.data()[q] && !seen[static_cast<std::size_t>(q)]) {
                    seen[static_cast<std::size_t>(q)] = 1;
                    stack.push_back(q);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        components.push_back(std::move(comp));
    }
    return components;
}

TopMode parse_top_mode(std::string_view s) {
    if (s == "percentile") return TopMode::percentile;
    if (s == "value") return TopMode::value;
    throw ConfigError("unknown top mode '" + std::string(s) + "'");
}

std::string to_string(TopMode m) { return m == TopMode::percentile ? "percentile" : "value"; }

double top_threshold(const Tensor& cam_map, TopMode mode) {
    if (mode == TopMode::value) return 0.9 * static_cast<double>(cam_map.data().maxCoeff());
    return percentile(std::span<const float>(cam_map.data().data(), static_cast<std::size_t>(cam_map.size())), 90.0);
}

std::vector<Island> extract_islands(const Tensor& cam_map, const LabelMask& pred, int class_id, TopMode mode,
                                    Index min_island_px) {
    if (cam_map.channels() != 1 || cam_map.height() != pred.height() || cam_map.width() != pred.width()) {
        throw ContractError("CAM and prediction mask dimensions differ");
    }
    const double threshold = top_threshold(cam_map, mode);
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> mask(pred.height(), pred.width());
    for (Index i = 0; i < pred.size(); ++i) {
        mask.data()[i] = static_cast<double>(cam_map.data()[i]) >= threshold && pred.flat(i) == class_id;
    }

    std::vector<Island> islands;
    const Index w = pred.width();
    for (auto& comp : connected_components(mask, Connectivity::eight)) {
        if (static_cast<Index>(comp.size()) < min_island_px) continue;
        Island island;
        double sr = 0.0, sc = 0.0;
        for (Index p : comp) {
            sr += static_cast<double>(p / w);
            sc += static_cast<double>(p % w);
        }
        island.centroid_row = sr / static_cast<double>(comp.size());
        island.centroid_col = sc / static_cast<double>(comp.size());
        island.pixels = std::move(comp);
        islands.push_back(std::move(island));
    }
    return islands;
}

// ---------------------------------------------------------------------------
// Clustering

KeyPointSet cluster_centres(std::span<const Island> islands, int class_id) {
    KeyPointSet set{class_id, {}};
    for (const auto& island : islands) {
        set.points.push_back({static_cast<int>(std::lround(island.centroid_row)),
                              static_cast<int>(std::lround(island.centroid_col))});
    }
    return set;
}

AffinityResult affinity_propagation(std::span<const PixelPoint> points, const AffinityOptions& options) {
    const auto n = static_cast<Index>(points.size());
    if (n == 0) throw ArgumentError("affinity propagation needs at least one point");
    if (!(options.damping >= 0.5 && options.damping < 1.0)) throw ArgumentError("damping must be in [0.5, 1)");

    AffinityResult result;
    if (n == 1) {
        result.exemplars = {points[0]};
        result.labels = {0};
        result.converged = true;
        return result;
    }

    Eigen::MatrixXd s(n, n);
    std::vector<double> off;
    off.reserve(static_cast<std::size_t>(n * (n - 1)));
    for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < n; ++k) {
            s(i, k) = -squared_distance(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(k)]);
            if (i != k) off.push_back(s(i, k));
        }
    }
    const double pref = options.preference ? *options.preference
                                           : percentile(std::span<const double>(off), 50.0);

    // All similarities equal: the messages carry no information.
    if (std::all_of(off.begin(), off.end(), [&](double v) { return v == off.front(); })) {
        result.converged = true;
        if (pref > off.front()) {
            for (Index i = 0; i < n; ++i) {
                result.exemplars.push_back(points[static_cast<std::size_t>(i)]);
                result.labels.push_back(static_cast<int>(i));
            }
        } else {
            result.exemplars = {points[0]};
            result.labels.assign(static_cast<std::size_t>(n), 0);
        }
        return result;
    }

    s.diagonal().setConstant(pref);
    // Deterministic jitter breaks ties between duplicate points. At machine
    // epsilon the ties persist past the convergence window.
    std::uint64_t state = 0x5eed;
    constexpr double rel = 1e-6, abs_floor = 1e-9;
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < n; ++k)
            s(i, k) += (rel * std::abs(s(i, k)) + abs_floor) * (2.0 * splitmix_unit(state) - 1.0);

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
    const double damp = options.damping;
    std::vector<char> exemplar(static_cast<std::size_t>(n), 0), previous(static_cast<std::size_t>(n), 0);
    int stable = 0;

    for (int it = 1; it <= options.max_iterations; ++it) {
        result.iterations = it;
        // responsibilities
        Eigen::MatrixXd as = a + s;
        for (Index i = 0; i < n; ++i) {
            Index best = 0;
            double first = -std::numeric_limits<double>::infinity(), second = first;
            for (Index k = 0; k < n; ++k) {
                const double v = as(i, k);
                if (v > first) {
                    second = first;
                    first = v;
                    best = k;
                } else if (v > second) {
                    second = v;
                }
            }
            for (Index k = 0; k < n; ++k) {
                const double fresh = s(i, k) - (k == best ? second : first);
                r(i, k) = damp * r(i, k) + (1.0 - damp) * fresh;
            }
        }
        // availabilities
        Eigen::MatrixXd rp = r.cwiseMax(0.0);
        rp.diagonal() = r.diagonal();
        const Eigen::RowVectorXd colsum = rp.colwise().sum();
        for (Index k = 0; k < n; ++k) {
            for (Index i = 0; i < n; ++i) {
                const double fresh = i == k ? colsum(k) - rp(k, k) : std::min(0.0, colsum(k) - rp(i, k));
                a(i, k) = damp * a(i, k) + (1.0 - damp) * fresh;
            }
        }

        int count = 0;
        for (Index k = 0; k < n; ++k) {
            exemplar[static_cast<std::size_t>(k)] = a(k, k) + r(k, k) > 0.0;
            count += exemplar[static_cast<std::size_t>(k)];
        }
        stable = exemplar == previous ? stable + 1 : 0;
        previous = exemplar;
        if (count > 0 && stable >= options.convergence_iterations) {
            result.converged = true;
            break;
        }
    }

    std::vector<Index> centres;
    for (Index k = 0; k < n; ++k)
        if (exemplar[static_cast<std::size_t>(k)]) centres.push_back(k);
    if (centres.empty()) {
        result.labels.assign(static_cast<std::size_t>(n), -1);
        result.converged = false;
        return result;
    }

    // Assign to the most similar exemplar, then move each exemplar to the
    // member with the highest summed similarity inside its cluster.
    auto assign = [&](const std::vector<Index>& ex) {
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            int best = 0;
            for (std::size_t e = 1; e < ex.size(); ++e)
                if (s(i, ex[e]) > s(i, ex[static_cast<std::size_t>(best)])) best = static_cast<int>(e);
            labels[static_cast<std::size_t>(i)] = best;
        }
        for (std::size_t e = 0; e < ex.size(); ++e) labels[static_cast<std::size_t>(ex[e])] = static_cast<int>(e);
        return labels;
    };
    std::vector<int> labels = assign(centres);
    for (std::size_t e = 0; e < centres.size(); ++e) {
        std::vector<Index> members;
        for (Index i = 0; i < n; ++i)
            if (labels[static_cast<std::size_t>(i)] == static_cast<int>(e)) members.push_back(i);
        Index best = centres[e];
        double best_sum = -std::numeric_limits<double>::infinity();
        for (Index m : members) {
            double sum = 0.0;
            for (Index o : members) sum += s(o, m);
            if (sum > best_sum) {
                best_sum = sum;
                best = m;
            }
        }
        centres[e] = best;
    }
    labels = assign(centres);

    for (Index c : centres) result.exemplars.push_back(points[static_cast<std::size_t>(c)]);
    result.labels = std::move(labels);
    return result;
}

std::vector<PixelPoint> cluster_threshold(std::span<const PixelPoint> points, double min_dist) {
    std::vector<PixelPoint> sorted(points.begin(), points.end());
    std::stable_sort(sorted.begin(), sorted.end());
    const double limit = min_dist * min_dist;
    std::vector<PixelPoint> kept;
    for (const auto& p : sorted) {
        const bool far = std::all_of(kept.begin(), kept.end(),
                                     [&](const PixelPoint& q) { return squared_distance(p, q) >= limit; });
        if (far) kept.push_back(p);
    }
    return kept;
}

ClusterMethod parse_cluster_method(std::string_view s) {
    if (s == "centres" || s == "centers") return ClusterMethod::centres;
    if (s == "affinity") return ClusterMethod::affinity;
    if (s == "threshold") return ClusterMethod::threshold;
    throw ConfigError("unknown clustering method '" + std::string(s) + "'");
}

std::string to_string(ClusterMethod m) {
    switch (m) {
        case ClusterMethod::centres: return "centres";
        case ClusterMethod::affinity: return "affinity";
        case ClusterMethod::threshold: return "threshold";
    }
    return "?";
}

AffinityPreference parse_affinity_preference(std::string_view s) {
    if (s == "median") return AffinityPreference::median;
    if (s == "spacing") return AffinityPreference::spacing;
    throw ConfigError("unknown affinity preference '" + std::string(s) + "'");
}

std::string to_string(AffinityPreference p) { return p == AffinityPreference::median ? "median" : "spacing"; }

ClusterOutcome cluster_islands(ClusterMethod method, std::span<const Island> islands, int class_id,
                               const SprayerSpec& spec, AffinityPreference preference) {
    ClusterOutcome out;
    out.keypoints = cluster_centres(islands, class_id);
    if (out.keypoints.points.empty() || method == ClusterMethod::centres) return out;
    if (method == ClusterMethod::threshold) {
        out.keypoints.points = cluster_threshold(out.keypoints.points, spec.min_point_distance_px);
        return out;
    }
    AffinityOptions opts;
    if (preference == AffinityPreference::spacing) {
        opts.preference = -spec.min_point_distance_px * spec.min_point_distance_px;
    }
    AffinityResult ap = affinity_propagation(out.keypoints.points, opts);
    out.converged = ap.converged;
    out.keypoints.points = std::move(ap.exemplars);
    return out;
}

// ---------------------------------------------------------------------------
// Scoring

PointingResult pointing_game(std::span<const PixelPoint> predicted, std::span<const PixelPoint> ground_truth,
                             double box_halfwidth_px) {
    struct Candidate {
        double dist2;
        std::size_t pred, gt;
    };
    std::vector<Candidate> candidates;
    for (std::size_t p = 0; p < predicted.size(); ++p) {
        for (std::size_t g = 0; g < ground_truth.size(); ++g) {
            const double dr = std::abs(predicted[p].row - ground_truth[g].row);
            const double dc = std::abs(predicted[p].col - ground_truth[g].col);
            if (dr <= box_halfwidth_px && dc <= box_halfwidth_px) {
                candidates.push_back({squared_distance(predicted[p], ground_truth[g]), p, g});
            }
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(a.dist2, a.pred, a.gt) < std::tie(b.dist2, b.pred, b.gt);
    });
    std::vector<char> pred_used(predicted.size(), 0), gt_used(ground_truth.size(), 0);
    PointingResult r;
    for (const auto& c : candidates) {
        if (pred_used[c.pred] || gt_used[c.gt]) continue;
        pred_used[c.pred] = gt_used[c.gt] = 1;
        ++r.hits;
    }
    r.misses = static_cast<long long>(predicted.size()) - r.hits;
    return r;
}

double estimate_deposition(long long point_count, const SprayerSpec& spec) {
    if (point_count < 0) throw ArgumentError("point count must be non-negative");
    return static_cast<double>(point_count) * spec.unit_deposit_ul;
}

double coverage(const LabelMask& mask, int class_id, const SprayerSpec& spec) {
    if (!(spec.cm2_per_pixel > 0.0)) throw ConfigError("cm2 per pixel must be positive");
    return static_cast<double>(mask.count(class_id)) * spec.cm2_per_pixel;
}

std::optional<HitMiss> hit_miss_rate(long long sprayed, long long unsprayed) {
    if (sprayed < 0 || unsprayed < 0) throw ArgumentError("instance counts must be non-negative");
    if (sprayed + unsprayed == 0) return std::nullopt;
    HitMiss hm;
    hm.hit_percent = 100.0 * static_cast<double>(sprayed) / static_cast<double>(sprayed + unsprayed);
    hm.miss_percent = 100.0 - hm.hit_percent;
    return hm;
}

DepositionReport deposition_report(std::span<const ImageCounts> images, const SprayerSpec& spec,
                                   const ClassTable& classes, HitRatePooling pooling) {
    DepositionReport report;
    double hit_rate_sum = 0.0;
    int hit_rate_classes = 0;
    for (int sprayed : classes.sprayed_classes()) {
        ClassDeposition row;
        row.sprayed_class = sprayed;
        row.base_class = classes.base_of(sprayed);
        row.name = classes.name(row.base_class);
        double diff_sum = 0.0;
        double image_rate_sum = 0.0;
        int image_rate_count = 0;
        for (const auto& img : images) {
            ClassCounts counts;
            if (auto it = img.per_class.find(sprayed); it != img.per_class.end()) counts = it->second;
            row.predicted_points += counts.predicted;
            row.gt_points += counts.ground_truth;
            row.hits += counts.hits;
            row.misses += counts.misses;
            diff_sum += estimate_deposition(std::llabs(counts.predicted - counts.ground_truth), spec);
            if (counts.predicted > 0 || counts.ground_truth > 0) {
                image_rate_sum += PointingResult{counts.hits, counts.misses}.accuracy();
                ++image_rate_count;
            }
        }
        row.gt_ul = estimate_deposition(row.gt_points, spec);
        row.predicted_ul = estimate_deposition(row.predicted_points, spec);
        row.absolute_difference_ul = images.empty() ? 0.0 : diff_sum / static_cast<double>(images.size());
        if (row.predicted_points > 0 || row.gt_points > 0) {
            row.hit_rate = pooling == HitRatePooling::pooled ? PointingResult{row.hits, row.misses}.accuracy()
                                                             : image_rate_sum / image_rate_count;
            hit_rate_sum += *row.hit_rate;
            ++hit_rate_classes;
        }
        report.total_gt_ul += row.gt_ul;
        report.total_predicted_ul += row.predicted_ul;
        report.total_difference_ul += row.absolute_difference_ul;
        report.classes.push_back(std::move(row));
    }
    if (hit_rate_classes > 0) report.mean_hit_rate = hit_rate_sum / hit_rate_classes;
    return report;
}

}  // namespace sprayeval
