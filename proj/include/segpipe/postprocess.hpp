#pragma once

#include <array>
#include <cstdint>

#include "segpipe/volume.hpp"

namespace segpipe {

// Per-channel discretization thresholds, each strictly inside (0,1).
struct ThresholdConfig {
    double tc = 0.5;
    double wt = 0.5;
    double et = 0.4;

    double channel(int c) const { return c == kTC ? tc : (c == kWT ? wt : et); }
    void validate() const;
};

// Connected-component filter: components with size >= size_upper survive iff
// their mean probability >= prob_upper; sizes in [size_lower, size_upper)
// survive iff mean >= prob_mid; smaller components are dropped.
struct FilterConfig {
    std::int64_t size_upper = 0;
    std::int64_t size_lower = 0;
    double prob_upper = 0.0;
    double prob_mid = 0.0;

    void validate(const std::string& what) const;
};

struct PostprocessConfig {
    ThresholdConfig thresholds;
    FilterConfig filter_tc{350, 350, 0.0, 0.0};
    FilterConfig filter_wt{2000, 100, 0.85, 0.925};
    FilterConfig filter_et{95, 70, 0.71, 0.5};
    std::int64_t et_to_tc_min_voxels = 70;
    int connectivity = 26; // 6 or 26

    const FilterConfig& filter(int c) const {
        return c == kTC ? filter_tc : (c == kWT ? filter_wt : filter_et);
    }
    void validate() const;
};

// Labels 1..count in order of each component's first voxel in scan order.
struct ComponentField {
    Grid3<std::int32_t> labels;
    std::int32_t count = 0;
};

std::array<BinaryMask, 3> as_discrete(const ChannelProbMap& probs, const ThresholdConfig& cfg);

ComponentField connected_components(const BinaryMask& mask, int connectivity);

BinaryMask filter_objects(const FloatVolume& prob, const BinaryMask& mask, const FilterConfig& cfg,
                          int connectivity);

// When the total ET voxel count is positive but below min_et_voxels, ET is
// folded into TC and cleared (masks order TC, WT, ET).
std::array<BinaryMask, 3> et_to_tc_replacement(std::array<BinaryMask, 3> masks,
                                               std::int64_t min_et_voxels);

// Priority decode per voxel: ET -> 3, else TC -> 1 (NCR), else WT -> 2 (ED).
LabelMap channels_to_labelmap(const std::array<BinaryMask, 3>& masks);

// Inverse encoding of the nested regions: ET={3}, TC={1,3}, WT={1,2,3}.
std::array<BinaryMask, 3> labelmap_to_channels(const LabelMap& labels);

struct PostprocessResult {
    std::array<BinaryMask, 3> masks; // TC, WT, ET
    LabelMap labels;
};

// threshold -> per-channel object filter -> ET-to-TC replacement -> label map.
PostprocessResult postprocess_pipeline(const ChannelProbMap& probs, const PostprocessConfig& cfg);

} // namespace segpipe
