#include "segpipe/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "segpipe/errors.hpp"
#include "segpipe/rng.hpp"

namespace segpipe {

namespace {

bool all_finite(const std::array<double, 3>& v) {
    return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
}

bool inside_ellipsoid(const std::array<double, 3>& x, const std::array<double, 3>& c,
                      const std::array<double, 3>& r) {
    double q = 0.0;
    for (int a = 0; a < 3; ++a) {
        if (r[a] <= 0.0) return false;
        const double t = (x[a] - c[a]) / r[a];
        q += t * t;
    }
    return q <= 1.0;
}

double distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

const std::array<double, 3>& region_radii(const LesionSpec& l, int channel) {
    switch (channel) {
        case kTC: return l.r_tc;
        case kWT: return l.r_wt;
        default: return l.r_et;
    }
}

void check_range(const std::array<double, 2>& r, const char* what) {
    if (!std::isfinite(r[0]) || !std::isfinite(r[1]) || r[0] < 0.0 || r[1] < r[0])
        throw ValidationError(std::string(what) + " range must satisfy 0 <= lo <= hi");
}

} // namespace

void LesionSpec::validate() const {
    if (!all_finite(center) || !all_finite(r_wt) || !all_finite(r_tc) || !all_finite(r_et))
        throw ValidationError("lesion parameters must be finite");
    for (int a = 0; a < 3; ++a) {
        if (r_wt[a] < 0.0 || r_tc[a] < 0.0 || r_et[a] < 0.0)
            throw ValidationError("lesion radii must be non-negative");
        if (r_et[a] > r_tc[a] || r_tc[a] > r_wt[a])
            throw ValidationError("lesion radii must nest componentwise: r_et <= r_tc <= r_wt");
    }
}

void FpBlobSpec::validate() const {
    if (!all_finite(center) || !std::isfinite(radius) || !std::isfinite(mean_prob))
        throw ValidationError("fp blob parameters must be finite");
    if (radius < 0.0) throw ValidationError("fp blob radius must be non-negative");
    if (mean_prob < 0.0 || mean_prob > 1.0)
        throw ValidationError("fp blob mean_prob must lie in [0, 1], got " +
                              std::to_string(mean_prob));
    if (channel < 0 || channel >= kNumChannels)
        throw ValidationError("fp blob channel must be 0 (tc), 1 (wt) or 2 (et), got " +
                              std::to_string(channel));
}

void PhantomSpec::validate() const {
    if (shape.h < 1 || shape.w < 1 || shape.d < 1)
        throw ValidationError("phantom shape must be positive, got " + to_string(shape));
    if (!std::isfinite(noise_sigma) || noise_sigma < 0.0)
        throw ValidationError("noise_sigma must be finite and non-negative");
    for (const LesionSpec& l : lesions) l.validate();
    for (const FpBlobSpec& b : fp_blobs) b.validate();
}

LabelMap generate_ground_truth(const PhantomSpec& spec) {
    spec.validate();
    LabelMap labels(spec.shape);
    int64_t idx = 0;
    for (int64_t i = 0; i < spec.shape.h; ++i)
        for (int64_t j = 0; j < spec.shape.w; ++j)
            for (int64_t k = 0; k < spec.shape.d; ++k, ++idx) {
                const std::array<double, 3> x{static_cast<double>(i), static_cast<double>(j),
                                              static_cast<double>(k)};
                uint8_t v = kBackground;
                for (const LesionSpec& l : spec.lesions)
                    if (inside_ellipsoid(x, l.center, l.r_et)) {
                        v = kLabelEt;
                        break;
                    }
                if (v == kBackground)
                    for (const LesionSpec& l : spec.lesions)
                        if (inside_ellipsoid(x, l.center, l.r_tc)) {
                            v = kLabelNcr;
                            break;
                        }
                if (v == kBackground)
                    for (const LesionSpec& l : spec.lesions)
                        if (inside_ellipsoid(x, l.center, l.r_wt)) {
                            v = kLabelEd;
                            break;
                        }
                labels.data[idx] = v;
            }
    return labels;
}

ChannelProbMap generate_prob_map(const PhantomSpec& spec) {
    spec.validate();
    ChannelProbMap probs(kNumChannels, spec.shape);
    const CounterRng rng(spec.seed);
    const int64_t n = spec.shape.voxels();
    for (int c = 0; c < kNumChannels; ++c) {
        int64_t idx = 0;
        for (int64_t i = 0; i < spec.shape.h; ++i)
            for (int64_t j = 0; j < spec.shape.w; ++j)
                for (int64_t k = 0; k < spec.shape.d; ++k, ++idx) {
                    const std::array<double, 3> x{static_cast<double>(i), static_cast<double>(j),
                                                  static_cast<double>(k)};
                    bool in_region = false;
                    for (const LesionSpec& l : spec.lesions)
                        if (inside_ellipsoid(x, l.center, region_radii(l, c))) {
                            in_region = true;
                            break;
                        }
                    double v = in_region ? 0.9 : 0.05;
                    if (!in_region)
                        for (const FpBlobSpec& b : spec.fp_blobs)
                            if (b.channel == c && distance(x, b.center) <= b.radius)
                                v = b.mean_prob;
                    if (spec.noise_sigma > 0.0)
                        v += spec.noise_sigma *
                             rng.gaussian(static_cast<uint64_t>(c) * static_cast<uint64_t>(n) +
                                          static_cast<uint64_t>(idx));
                    probs.data[static_cast<size_t>(c * n + idx)] =
                        static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
    }
    return probs;
}

std::vector<FloatVolume> synth_modalities(const PhantomSpec& spec) {
    spec.validate();
    const LabelMap labels = generate_ground_truth(spec);
    const Shape3 s = spec.shape;
    const std::array<double, 3> brain_center{(s.h - 1) / 2.0, (s.w - 1) / 2.0, (s.d - 1) / 2.0};
    const std::array<double, 3> brain_radii{0.48 * s.h, 0.48 * s.w, 0.48 * s.d};
    // Tissue contrast per label; modality changes the base gain so each
    // modality normalizes differently.
    const std::array<double, 4> bump{0.0, 0.35, 0.15, 0.6};
    const CounterRng rng = CounterRng(spec.seed).stream(7);
    const int64_t n = s.voxels();

    std::vector<FloatVolume> modalities;
    modalities.reserve(4);
    for (int m = 0; m < 4; ++m) {
        FloatVolume vol(s);
        int64_t idx = 0;
        for (int64_t i = 0; i < s.h; ++i)
            for (int64_t j = 0; j < s.w; ++j)
                for (int64_t k = 0; k < s.d; ++k, ++idx) {
                    const std::array<double, 3> x{static_cast<double>(i), static_cast<double>(j),
                                                  static_cast<double>(k)};
                    if (!inside_ellipsoid(x, brain_center, brain_radii)) continue; // stays 0
                    const double base = 0.55 + 0.1 * m;
                    double v = base * (1.0 + bump[labels.data[idx]]) +
                               0.03 * rng.gaussian(static_cast<uint64_t>(m) * static_cast<uint64_t>(n) +
                                                   static_cast<uint64_t>(idx));
                    vol.data[idx] = static_cast<float>(std::max(v, 0.01));
                }
        modalities.push_back(std::move(vol));
    }
    return modalities;
}

void CorpusSampling::validate(const Shape3& shape_hint) const {
    if (n_cases < 1)
        throw ValidationError("corpus n_cases must be at least 1, got " + std::to_string(n_cases));
    if (shape_hint.h < 1 || shape_hint.w < 1 || shape_hint.d < 1)
        throw ValidationError("corpus shape must be positive, got " + to_string(shape_hint));
    if (!std::isfinite(noise_sigma) || noise_sigma < 0.0)
        throw ValidationError("corpus noise_sigma must be finite and non-negative");
    if (lesions_min < 0 || lesions_max < lesions_min)
        throw ValidationError("corpus lesion counts must satisfy 0 <= min <= max");
    if (fp_blobs_min < 0 || fp_blobs_max < fp_blobs_min)
        throw ValidationError("corpus fp blob counts must satisfy 0 <= min <= max");
    check_range(r_wt_range, "r_wt");
    check_range(r_tc_range, "r_tc");
    check_range(r_et_range, "r_et");
    check_range(fp_radius_range, "fp_radius");
    check_range(fp_mean_prob_range, "fp_mean_prob");
    if (fp_mean_prob_range[1] > 1.0)
        throw ValidationError("fp_mean_prob range must stay within [0, 1]");
    if (fp_channel < -1 || fp_channel >= kNumChannels)
        throw ValidationError("corpus fp_channel must be -1 (random), 0, 1 or 2");
    const int64_t min_dim = std::min({shape_hint.h, shape_hint.w, shape_hint.d});
    if (static_cast<double>(min_dim) <= 2.0 * r_wt_range[1] + 4.0)
        throw ValidationError("corpus shape too small for the r_wt range");
}

void CorpusSpec::validate() const {
    if (!cases.empty()) {
        for (const PhantomSpec& c : cases) c.validate();
        return;
    }
    sampling.validate(sampling.shape);
}

std::vector<PhantomSpec> expand_corpus(const CorpusSpec& corpus) {
    corpus.validate();
    if (!corpus.cases.empty()) return corpus.cases;

    const CorpusSampling& smp = corpus.sampling;
    const CounterRng base(corpus.seed);
    std::vector<PhantomSpec> cases;
    cases.reserve(static_cast<size_t>(smp.n_cases));

    for (int ci = 0; ci < smp.n_cases; ++ci) {
        const CounterRng rng = base.stream(static_cast<uint64_t>(ci));
        uint64_t ctr = 0;
        PhantomSpec spec;
        spec.shape = smp.shape;
        spec.noise_sigma = smp.noise_sigma;
        spec.seed = rng.bits(0xC0FFEE);

        const auto n_lesions = rng.uniform_int(ctr++, smp.lesions_min, smp.lesions_max);
        for (int64_t li = 0; li < n_lesions; ++li) {
            LesionSpec lesion;
            const double r_wt = rng.uniform(ctr++, smp.r_wt_range[0], smp.r_wt_range[1]);
            const double r_tc =
                std::min(r_wt, rng.uniform(ctr++, smp.r_tc_range[0], smp.r_tc_range[1]));
            const double r_et =
                std::min(r_tc, rng.uniform(ctr++, smp.r_et_range[0], smp.r_et_range[1]));
            lesion.r_wt = {r_wt, r_wt, r_wt};
            lesion.r_tc = {r_tc, r_tc, r_tc};
            lesion.r_et = {r_et, r_et, r_et};

            bool placed = false;
            for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
                std::array<double, 3> c;
                for (int a = 0; a < 3; ++a) {
                    const double dim = static_cast<double>(spec.shape.axis(a));
                    c[a] = rng.uniform(ctr++, r_wt + 2.0, dim - r_wt - 2.0);
                }
                placed = true;
                for (const LesionSpec& other : spec.lesions)
                    if (distance(c, other.center) < r_wt + other.r_wt[0] + 2.0) {
                        placed = false;
                        break;
                    }
                if (placed) lesion.center = c;
            }
            if (!placed)
                throw ValidationError("could not place lesion " + std::to_string(li) + " of case " +
                                      std::to_string(ci) + "; shape too crowded");
            spec.lesions.push_back(lesion);
        }

        const auto n_blobs = rng.uniform_int(ctr++, smp.fp_blobs_min, smp.fp_blobs_max);
        for (int64_t bi = 0; bi < n_blobs; ++bi) {
            FpBlobSpec blob;
            blob.radius = rng.uniform(ctr++, smp.fp_radius_range[0], smp.fp_radius_range[1]);
            blob.mean_prob =
                rng.uniform(ctr++, smp.fp_mean_prob_range[0], smp.fp_mean_prob_range[1]);
            blob.channel = smp.fp_channel >= 0 ? smp.fp_channel
                                               : static_cast<int>(rng.uniform_int(ctr++, 0, 2));

            bool placed = false;
            for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
                std::array<double, 3> c;
                for (int a = 0; a < 3; ++a) {
                    const double dim = static_cast<double>(spec.shape.axis(a));
                    c[a] = rng.uniform(ctr++, blob.radius + 1.0, dim - blob.radius - 1.0);
                }
                placed = true;
                for (const LesionSpec& lesion : spec.lesions)
                    if (distance(c, lesion.center) < lesion.r_wt[0] + blob.radius + 6.0) {
                        placed = false;
                        break;
                    }
                if (placed) blob.center = c;
            }
            if (!placed)
                throw ValidationError("could not place fp blob " + std::to_string(bi) +
                                      " of case " + std::to_string(ci) + "; shape too crowded");
            spec.fp_blobs.push_back(blob);
        }
        cases.push_back(std::move(spec));
    }
    return cases;
}

} // namespace segpipe
