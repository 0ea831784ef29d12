#pragma once

#include <array>
#include <string>
#include <vector>

#include "segpipe/volume.hpp"

namespace segpipe {

struct MetricsConfig {
    int connectivity = 26;
    int dilation_radius = 3;   // Chebyshev dilation of each reference lesion before matching
    double percentile = 95.0;
    double penalty_dice = 0.0;  // unmatched lesion (FP or FN)
    double penalty_hd95 = 374.0;

    void validate() const;
};

// 2|A∩B| / (|A|+|B|); both empty -> 1.0.
double dice(const BinaryMask& a, const BinaryMask& b);

// Percentile of the pooled symmetric surface-to-surface nearest distances in
// voxel units (1 mm isotropic). Both empty -> 0.0, exactly one empty -> the
// penalty value.
double hd95(const BinaryMask& a, const BinaryMask& b, double percentile = 95.0, double penalty = 374.0);

// Mask voxels with at least one background 6-neighbor; outside the volume
// counts as background.
BinaryMask surface_voxels(const BinaryMask& mask);

// Exact squared Euclidean distance to the nearest set voxel (lower-envelope
// transform, separable over the three axes).
Grid3<double> squared_edt(const BinaryMask& sites);

// Linear-interpolation percentile over an unsorted list; sorts in place.
double percentile_value(std::vector<double>& values, double pct);

// One scored lesion pairing: a reference component with the predicted
// components attached to it, or an unmatched component on either side
// (gt_id == 0 means no reference side; empty pred_ids means no predicted side).
struct LesionEntry {
    int gt_id = 0;
    std::vector<int> pred_ids;
    double dice = 0.0;
    double hd95 = 0.0;
};

struct LesionWiseResult {
    double dice = 1.0;
    double hd95 = 0.0;
    std::vector<LesionEntry> entries;
    int n_gt = 0;
    int n_pred = 0;
    int n_fp = 0;
    int n_fn = 0;
};

// Components of both masks are computed under cfg.connectivity; a predicted
// component is attached to every reference component whose Chebyshev dilation
// it touches. Each reference component is scored against the union of its
// attached predictions; leftovers on either side score the fixed penalties.
// Channel values are the means over all entries.
LesionWiseResult lesion_wise_metrics(const BinaryMask& pred, const BinaryMask& gt,
                                     const MetricsConfig& cfg);

struct ChannelReport {
    double legacy_dice = 0.0;
    double legacy_hd95 = 0.0;
    LesionWiseResult lesion;
};

struct CaseReport {
    std::string case_id;
    std::array<ChannelReport, 3> channels; // indexed by Channel (TC, WT, ET)
    double mean_legacy_dice = 0.0;
    double mean_legacy_hd95 = 0.0;
    double mean_lesion_dice = 0.0;
    double mean_lesion_hd95 = 0.0;
};

// Decodes both label maps into the nested ET/TC/WT channels and scores all
// four metric families per channel.
CaseReport evaluate_case(const LabelMap& pred, const LabelMap& gt, const MetricsConfig& cfg);

struct MetricMeans {
    double legacy_dice = 0.0;
    double legacy_hd95 = 0.0;
    double lesion_dice = 0.0;
    double lesion_hd95 = 0.0;
};

struct CorpusReport {
    std::vector<CaseReport> cases;
    std::array<MetricMeans, 3> channel_means; // cross-case, per channel
    MetricMeans overall;                      // cross-case mean of per-case channel means
};

CorpusReport aggregate_reports(std::vector<CaseReport> cases);

} // namespace segpipe
