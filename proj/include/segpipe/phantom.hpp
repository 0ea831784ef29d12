#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "segpipe/volume.hpp"

namespace segpipe {

// Axis-aligned ellipsoid triple describing one nested lesion. Membership is
// sum(((x - center) / r)^2) <= 1 per region; a zero radius component makes
// that region empty. Radii must nest componentwise (et <= tc <= wt).
struct LesionSpec {
    std::array<double, 3> center{0, 0, 0};
    std::array<double, 3> r_wt{0, 0, 0};
    std::array<double, 3> r_tc{0, 0, 0};
    std::array<double, 3> r_et{0, 0, 0};

    void validate() const;
};

// Spherical false-positive blob painted into one probability channel, only
// where the channel's true region does not already cover the voxel.
struct FpBlobSpec {
    std::array<double, 3> center{0, 0, 0};
    double radius = 0.0;
    double mean_prob = 0.45;
    int channel = kET;

    void validate() const;
};

struct PhantomSpec {
    std::uint64_t seed = 0;
    Shape3 shape{1, 1, 1};
    double noise_sigma = 0.0;
    std::vector<LesionSpec> lesions;
    std::vector<FpBlobSpec> fp_blobs;

    void validate() const;
};

// Labels by priority: enhancing core (3), then the rest of the tumor core as
// necrosis (1), then the rest of the whole tumor as edema (2).
LabelMap generate_ground_truth(const PhantomSpec& spec);

// Per-channel probabilities: 0.9 inside the channel region, 0.05 outside,
// blob voxels at their blob's mean_prob, plus Gaussian noise of noise_sigma
// drawn per (channel, voxel) counter, clipped to [0, 1]. Deterministic in the
// seed regardless of evaluation order.
ChannelProbMap generate_prob_map(const PhantomSpec& spec);

// Four synthetic MRI-like modalities: zero outside a brain ellipsoid,
// label-dependent positive intensities inside. Exercises foreground cropping
// and per-modality normalization upstream of inference.
std::vector<FloatVolume> synth_modalities(const PhantomSpec& spec);

// Randomized corpus description; ranges are inclusive and radii are sampled
// isotropic. fp_channel -1 draws a random channel per blob.
struct CorpusSampling {
    int n_cases = 0;
    Shape3 shape{64, 64, 64};
    double noise_sigma = 0.02;
    int lesions_min = 1;
    int lesions_max = 2;
    std::array<double, 2> r_wt_range{9.5, 11.5};
    std::array<double, 2> r_tc_range{6.5, 7.5};
    std::array<double, 2> r_et_range{4.5, 5.5};
    int fp_blobs_min = 2;
    int fp_blobs_max = 5;
    std::array<double, 2> fp_radius_range{1.0, 1.4};
    std::array<double, 2> fp_mean_prob_range{0.42, 0.48};
    int fp_channel = kET;

    void validate(const Shape3& shape_hint) const;
};

// Either an explicit case list or a sampling recipe (cases empty).
struct CorpusSpec {
    std::uint64_t seed = 0;
    std::vector<PhantomSpec> cases;
    CorpusSampling sampling;

    void validate() const;
};

// Explicit cases pass through unchanged; otherwise n_cases specs are sampled
// deterministically from the corpus seed. Lesions keep a mutual clearance so
// whole-tumor shells never merge; blobs keep clearance from every lesion so
// they always form their own components.
std::vector<PhantomSpec> expand_corpus(const CorpusSpec& corpus);

} // namespace segpipe
