// Independent reference implementations used to cross-check the library:
// deliberately different algorithms (union-find components, brute-force
// distances, box-stamping dilation) so agreement is meaningful.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "segpipe/volume.hpp"

namespace testutil {

using namespace segpipe;

// Test-input generator; independent of the library's counter-based RNG.
struct TestRng {
    std::mt19937_64 gen;

    explicit TestRng(uint64_t seed) : gen(seed) {}

    double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int64_t uniform_int(int64_t lo, int64_t hi) { // inclusive
        return lo + static_cast<int64_t>(gen() % static_cast<uint64_t>(hi - lo + 1));
    }
    bool chance(double p) { return uniform() < p; }
};

inline FloatVolume random_volume(TestRng& rng, Shape3 shape, double lo = 0.0, double hi = 1.0) {
    FloatVolume vol(shape);
    for (float& v : vol.data) v = static_cast<float>(rng.uniform(lo, hi));
    return vol;
}

inline ChannelProbMap random_prob_map(TestRng& rng, Shape3 shape) {
    ChannelProbMap probs(kNumChannels, shape);
    for (float& v : probs.data) v = static_cast<float>(rng.uniform());
    return probs;
}

inline BinaryMask random_mask(TestRng& rng, Shape3 shape, double density) {
    BinaryMask mask(shape);
    for (uint8_t& v : mask.data) v = rng.chance(density) ? 1 : 0;
    return mask;
}

inline LabelMap random_labelmap(TestRng& rng, Shape3 shape, double density) {
    LabelMap labels(shape);
    for (uint8_t& v : labels.data)
        v = rng.chance(density) ? static_cast<uint8_t>(rng.uniform_int(1, 3)) : 0;
    return labels;
}

// ---------------------------------------------------------------- components

struct UnionFind {
    std::vector<int64_t> parent;

    explicit UnionFind(int64_t n) : parent(static_cast<size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int64_t find(int64_t x) {
        while (parent[static_cast<size_t>(x)] != x) {
            parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
            x = parent[static_cast<size_t>(x)];
        }
        return x;
    }
    void unite(int64_t a, int64_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<size_t>(std::max(a, b))] = std::min(a, b);
    }
};

inline bool neighbors_26(int64_t di, int64_t dj, int64_t dk) {
    return std::max({std::llabs(di), std::llabs(dj), std::llabs(dk)}) == 1;
}

inline bool neighbors_6(int64_t di, int64_t dj, int64_t dk) {
    return std::llabs(di) + std::llabs(dj) + std::llabs(dk) == 1;
}

// Components as sorted voxel lists ordered by their smallest linear index
// (i.e. by lexicographic first voxel).
inline std::vector<std::vector<int64_t>> uf_components(const BinaryMask& mask, int connectivity) {
    const Shape3 s = mask.shape;
    UnionFind uf(s.voxels());
    for (int64_t i = 0; i < s.h; ++i)
        for (int64_t j = 0; j < s.w; ++j)
            for (int64_t k = 0; k < s.d; ++k) {
                if (!mask.at(i, j, k)) continue;
                for (int64_t di = -1; di <= 1; ++di)
                    for (int64_t dj = -1; dj <= 1; ++dj)
                        for (int64_t dk = -1; dk <= 1; ++dk) {
                            const bool adjacent = connectivity == 26 ? neighbors_26(di, dj, dk)
                                                                     : neighbors_6(di, dj, dk);
                            if (!adjacent) continue;
                            const int64_t ni = i + di, nj = j + dj, nk = k + dk;
                            if (ni < 0 || ni >= s.h || nj < 0 || nj >= s.w || nk < 0 || nk >= s.d)
                                continue;
                            if (mask.at(ni, nj, nk)) uf.unite(mask.index(i, j, k), mask.index(ni, nj, nk));
                        }
            }
    std::vector<std::vector<int64_t>> by_root(static_cast<size_t>(s.voxels()));
    for (int64_t idx = 0; idx < s.voxels(); ++idx)
        if (mask.data[static_cast<size_t>(idx)]) by_root[static_cast<size_t>(uf.find(idx))].push_back(idx);
    std::vector<std::vector<int64_t>> comps;
    for (auto& c : by_root)
        if (!c.empty()) comps.push_back(std::move(c)); // roots are minima, so this is first-voxel order
    return comps;
}

inline Grid3<int32_t> uf_component_labels(const BinaryMask& mask, int connectivity) {
    Grid3<int32_t> labels(mask.shape);
    const auto comps = uf_components(mask, connectivity);
    for (size_t c = 0; c < comps.size(); ++c)
        for (const int64_t idx : comps[c]) labels.data[static_cast<size_t>(idx)] = static_cast<int32_t>(c) + 1;
    return labels;
}

// ------------------------------------------------------------------- metrics

inline double naive_dice(const BinaryMask& a, const BinaryMask& b) {
    int64_t na = 0, nb = 0, inter = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        na += a.data[i] != 0;
        nb += b.data[i] != 0;
        inter += a.data[i] && b.data[i];
    }
    return na + nb == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

inline std::vector<std::array<int64_t, 3>> naive_surface_points(const BinaryMask& mask) {
    const Shape3 s = mask.shape;
    std::vector<std::array<int64_t, 3>> pts;
    for (int64_t i = 0; i < s.h; ++i)
        for (int64_t j = 0; j < s.w; ++j)
            for (int64_t k = 0; k < s.d; ++k) {
                if (!mask.at(i, j, k)) continue;
                bool exposed = false;
                const int64_t off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                           {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
                for (const auto& o : off) {
                    const int64_t ni = i + o[0], nj = j + o[1], nk = k + o[2];
                    if (ni < 0 || ni >= s.h || nj < 0 || nj >= s.w || nk < 0 || nk >= s.d ||
                        !mask.at(ni, nj, nk)) {
                        exposed = true;
                        break;
                    }
                }
                if (exposed) pts.push_back({i, j, k});
            }
    return pts;
}

inline double naive_percentile(std::vector<double> v, double pct) {
    std::sort(v.begin(), v.end());
    const double rank = pct / 100.0 * static_cast<double>(v.size() - 1);
    const double lo = std::floor(rank);
    const auto li = static_cast<size_t>(lo);
    if (li + 1 >= v.size()) return v.back();
    return v[li] * (1.0 - (rank - lo)) + v[li + 1] * (rank - lo);
}

// All-pairs symmetric surface distances, then the percentile.
inline double naive_hd95(const BinaryMask& a, const BinaryMask& b, double pct = 95.0,
                         double penalty = 374.0) {
    const auto sa = naive_surface_points(a);
    const auto sb = naive_surface_points(b);
    if (sa.empty() && sb.empty()) return 0.0;
    if (sa.empty() || sb.empty()) return penalty;
    const auto min_dist = [](const std::array<int64_t, 3>& p,
                             const std::vector<std::array<int64_t, 3>>& set) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : set) {
            const double di = static_cast<double>(p[0] - q[0]);
            const double dj = static_cast<double>(p[1] - q[1]);
            const double dk = static_cast<double>(p[2] - q[2]);
            best = std::min(best, di * di + dj * dj + dk * dk);
        }
        return std::sqrt(best);
    };
    std::vector<double> pooled;
    for (const auto& p : sa) pooled.push_back(min_dist(p, sb));
    for (const auto& p : sb) pooled.push_back(min_dist(p, sa));
    return naive_percentile(std::move(pooled), pct);
}

// ------------------------------------------------- thresholding & filtering

inline std::array<BinaryMask, 3> naive_threshold(const ChannelProbMap& probs, double t_tc,
                                                 double t_wt, double t_et) {
    const double t[3] = {t_tc, t_wt, t_et};
    std::array<BinaryMask, 3> masks{BinaryMask(probs.shape), BinaryMask(probs.shape),
                                    BinaryMask(probs.shape)};
    for (int c = 0; c < 3; ++c) {
        const auto chan = probs.data.begin() + static_cast<int64_t>(c) * probs.shape.voxels();
        for (int64_t idx = 0; idx < probs.shape.voxels(); ++idx)
            masks[static_cast<size_t>(c)].data[static_cast<size_t>(idx)] =
                *(chan + idx) >= static_cast<float>(t[c]) ? 1 : 0;
    }
    return masks;
}

// Size/confidence object filter, straight from its definition: mean prob of
// the component decides survival in the two size bands. Sums accumulate in
// scan order, matching the contract of the production code.
inline BinaryMask naive_filter(const BinaryMask& mask, const FloatVolume& probs,
                               int64_t size_upper, int64_t size_lower, double prob_upper,
                               double prob_mid, int connectivity) {
    BinaryMask out(mask.shape);
    for (const auto& comp : uf_components(mask, connectivity)) {
        double sum = 0.0;
        for (const int64_t idx : comp) sum += static_cast<double>(probs.data[static_cast<size_t>(idx)]);
        const double mean = sum / static_cast<double>(comp.size());
        const auto size = static_cast<int64_t>(comp.size());
        bool keep = false;
        if (size >= size_upper)
            keep = mean >= prob_upper;
        else if (size >= size_lower)
            keep = mean >= prob_mid;
        if (keep)
            for (const int64_t idx : comp) out.data[static_cast<size_t>(idx)] = 1;
    }
    return out;
}

// -------------------------------------------------------------- lesion-wise

// Chebyshev dilation by stamping the (2r+1)^3 box around every set voxel.
inline BinaryMask naive_dilate(const BinaryMask& mask, int radius) {
    const Shape3 s = mask.shape;
    BinaryMask out(s);
    for (int64_t i = 0; i < s.h; ++i)
        for (int64_t j = 0; j < s.w; ++j)
            for (int64_t k = 0; k < s.d; ++k) {
                if (!mask.at(i, j, k)) continue;
                for (int64_t di = -radius; di <= radius; ++di)
                    for (int64_t dj = -radius; dj <= radius; ++dj)
                        for (int64_t dk = -radius; dk <= radius; ++dk) {
                            const int64_t ni = i + di, nj = j + dj, nk = k + dk;
                            if (ni >= 0 && ni < s.h && nj >= 0 && nj < s.w && nk >= 0 && nk < s.d)
                                out.at(ni, nj, nk) = 1;
                        }
            }
    return out;
}

struct NaiveLesionScores {
    double dice = 1.0;
    double hd95 = 0.0;
    int n_entries = 0;
    int n_fn = 0;
    int n_fp = 0;
};

inline NaiveLesionScores naive_lesion_wise(const BinaryMask& pred, const BinaryMask& gt,
                                           int connectivity, int radius, double pct,
                                           double penalty_dice, double penalty_hd95) {
    const Shape3 s = gt.shape;
    const auto gt_comps = uf_components(gt, connectivity);
    const auto pred_comps = uf_components(pred, connectivity);

    const auto to_mask = [&](const std::vector<int64_t>& voxels) {
        BinaryMask m(s);
        for (const int64_t idx : voxels) m.data[static_cast<size_t>(idx)] = 1;
        return m;
    };

    std::vector<bool> pred_used(pred_comps.size(), false);
    std::vector<double> dices, hds;
    NaiveLesionScores out;
    for (const auto& gcomp : gt_comps) {
        const BinaryMask dilated = naive_dilate(to_mask(gcomp), radius);
        BinaryMask joined(s);
        bool any = false;
        for (size_t p = 0; p < pred_comps.size(); ++p) {
            bool touches = false;
            for (const int64_t idx : pred_comps[p])
                if (dilated.data[static_cast<size_t>(idx)]) {
                    touches = true;
                    break;
                }
            if (!touches) continue;
            any = true;
            pred_used[p] = true;
            for (const int64_t idx : pred_comps[p]) joined.data[static_cast<size_t>(idx)] = 1;
        }
        if (!any) {
            dices.push_back(penalty_dice);
            hds.push_back(penalty_hd95);
            ++out.n_fn;
        } else {
            const BinaryMask gmask = to_mask(gcomp);
            dices.push_back(naive_dice(joined, gmask));
            hds.push_back(naive_hd95(joined, gmask, pct, penalty_hd95));
        }
    }
    for (size_t p = 0; p < pred_comps.size(); ++p)
        if (!pred_used[p]) {
            dices.push_back(penalty_dice);
            hds.push_back(penalty_hd95);
            ++out.n_fp;
        }
    out.n_entries = static_cast<int>(dices.size());
    if (!dices.empty()) {
        out.dice = std::accumulate(dices.begin(), dices.end(), 0.0) / static_cast<double>(dices.size());
        out.hd95 = std::accumulate(hds.begin(), hds.end(), 0.0) / static_cast<double>(hds.size());
    }
    return out;
}

} // namespace testutil
