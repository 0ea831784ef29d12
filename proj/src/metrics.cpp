#include "segpipe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "segpipe/errors.hpp"
#include "segpipe/postprocess.hpp"

namespace segpipe {

namespace {

// Finite stand-in for "no site on this scan line": large enough that any real
// site wins the minimization, small enough that adding squared offsets stays
// exact in double and the parabola intersections stay NaN-free.
constexpr double kFarAway = 1e15;

struct Box {
    std::array<int64_t, 3> lo{0, 0, 0};
    std::array<int64_t, 3> hi{0, 0, 0}; // half-open
    bool empty = true;

    void absorb(int64_t i, int64_t j, int64_t k) {
        if (empty) {
            lo = {i, j, k};
            hi = {i + 1, j + 1, k + 1};
            empty = false;
            return;
        }
        lo[0] = std::min(lo[0], i);
        lo[1] = std::min(lo[1], j);
        lo[2] = std::min(lo[2], k);
        hi[0] = std::max(hi[0], i + 1);
        hi[1] = std::max(hi[1], j + 1);
        hi[2] = std::max(hi[2], k + 1);
    }

    void absorb(const Box& o) {
        if (o.empty) return;
        absorb(o.lo[0], o.lo[1], o.lo[2]);
        hi[0] = std::max(hi[0], o.hi[0]);
        hi[1] = std::max(hi[1], o.hi[1]);
        hi[2] = std::max(hi[2], o.hi[2]);
    }

    void pad(int64_t margin, const Shape3& bounds) {
        if (empty) return;
        lo[0] = std::max<int64_t>(0, lo[0] - margin);
        lo[1] = std::max<int64_t>(0, lo[1] - margin);
        lo[2] = std::max<int64_t>(0, lo[2] - margin);
        hi[0] = std::min(bounds.h, hi[0] + margin);
        hi[1] = std::min(bounds.w, hi[1] + margin);
        hi[2] = std::min(bounds.d, hi[2] + margin);
    }

    Shape3 extent() const { return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]}; }

    bool intersects(const Box& o) const {
        if (empty || o.empty) return false;
        for (int a = 0; a < 3; ++a) {
            if (hi[a] <= o.lo[a] || o.hi[a] <= lo[a]) return false;
        }
        return true;
    }

    bool contains(int64_t i, int64_t j, int64_t k) const {
        return !empty && i >= lo[0] && i < hi[0] && j >= lo[1] && j < hi[1] && k >= lo[2] &&
               k < hi[2];
    }
};

Box mask_bbox(const BinaryMask& m) {
    Box box;
    int64_t idx = 0;
    for (int64_t i = 0; i < m.shape.h; ++i)
        for (int64_t j = 0; j < m.shape.w; ++j)
            for (int64_t k = 0; k < m.shape.d; ++k, ++idx)
                if (m.data[idx]) box.absorb(i, j, k);
    return box;
}

BinaryMask crop_mask(const BinaryMask& m, const Box& box) {
    BinaryMask out(box.extent());
    for (int64_t i = 0; i < out.shape.h; ++i)
        for (int64_t j = 0; j < out.shape.w; ++j) {
            const uint8_t* src = &m.data[m.index(box.lo[0] + i, box.lo[1] + j, box.lo[2])];
            uint8_t* dst = &out.data[out.index(i, j, 0)];
            std::copy(src, src + out.shape.d, dst);
        }
    return out;
}

// Lower-envelope transform of one line of squared offsets (Felzenszwalb &
// Huttenlocher). f/out may not alias.
void edt_line(const double* f, double* out, int64_t n, std::vector<int64_t>& v,
              std::vector<double>& z) {
    v.resize(static_cast<size_t>(n));
    z.resize(static_cast<size_t>(n) + 1);
    int64_t k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int64_t q = 1; q < n; ++q) {
        double s;
        for (;;) {
            const int64_t p = v[static_cast<size_t>(k)];
            s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
                (2.0 * (q - p));
            if (s > z[static_cast<size_t>(k)]) break;
            --k;
        }
        ++k;
        v[static_cast<size_t>(k)] = q;
        z[static_cast<size_t>(k)] = s;
        z[static_cast<size_t>(k) + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int64_t q = 0; q < n; ++q) {
        while (z[static_cast<size_t>(k) + 1] < static_cast<double>(q)) ++k;
        const int64_t p = v[static_cast<size_t>(k)];
        out[q] = static_cast<double>(q - p) * (q - p) + f[p];
    }
}

} // namespace

void MetricsConfig::validate() const {
    if (connectivity != 6 && connectivity != 26)
        throw ValidationError("connectivity must be 6 or 26, got " + std::to_string(connectivity));
    if (dilation_radius < 0)
        throw ValidationError("dilation_radius must be non-negative, got " +
                              std::to_string(dilation_radius));
    if (!(percentile >= 0.0 && percentile <= 100.0))
        throw ValidationError("percentile must lie in [0, 100], got " + std::to_string(percentile));
    if (!(penalty_dice >= 0.0) || !std::isfinite(penalty_dice))
        throw ValidationError("penalty_dice must be finite and non-negative");
    if (!(penalty_hd95 >= 0.0) || !std::isfinite(penalty_hd95))
        throw ValidationError("penalty_hd95 must be finite and non-negative");
}

double dice(const BinaryMask& a, const BinaryMask& b) {
    if (!(a.shape == b.shape))
        throw ValidationError("dice: shape mismatch " + to_string(a.shape) + " vs " +
                              to_string(b.shape));
    int64_t na = 0, nb = 0, inter = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const bool va = a.data[i] != 0, vb = b.data[i] != 0;
        na += va;
        nb += vb;
        inter += va && vb;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

BinaryMask surface_voxels(const BinaryMask& mask) {
    BinaryMask out(mask.shape);
    const Shape3 s = mask.shape;
    int64_t idx = 0;
    for (int64_t i = 0; i < s.h; ++i)
        for (int64_t j = 0; j < s.w; ++j)
            for (int64_t k = 0; k < s.d; ++k, ++idx) {
                if (!mask.data[idx]) continue;
                const bool exposed = i == 0 || !mask.data[idx - s.w * s.d] ||     //
                                     i == s.h - 1 || !mask.data[idx + s.w * s.d] || //
                                     j == 0 || !mask.data[idx - s.d] ||             //
                                     j == s.w - 1 || !mask.data[idx + s.d] ||       //
                                     k == 0 || !mask.data[idx - 1] ||               //
                                     k == s.d - 1 || !mask.data[idx + 1];
                out.data[idx] = exposed ? 1 : 0;
            }
    return out;
}

Grid3<double> squared_edt(const BinaryMask& sites) {
    const Shape3 s = sites.shape;
    Grid3<double> dist(s);
    for (size_t i = 0; i < dist.data.size(); ++i) dist.data[i] = sites.data[i] ? 0.0 : kFarAway;

    const int64_t n_max = std::max({s.h, s.w, s.d});
    std::vector<double> f(static_cast<size_t>(n_max)), g(static_cast<size_t>(n_max));
    std::vector<int64_t> v;
    std::vector<double> z;

    // Along d (contiguous lines).
    for (int64_t i = 0; i < s.h; ++i)
        for (int64_t j = 0; j < s.w; ++j) {
            double* line = &dist.data[dist.index(i, j, 0)];
            edt_line(line, g.data(), s.d, v, z);
            std::copy(g.begin(), g.begin() + s.d, line);
        }
    // Along w.
    for (int64_t i = 0; i < s.h; ++i)
        for (int64_t k = 0; k < s.d; ++k) {
            for (int64_t j = 0; j < s.w; ++j) f[static_cast<size_t>(j)] = dist.data[dist.index(i, j, k)];
            edt_line(f.data(), g.data(), s.w, v, z);
            for (int64_t j = 0; j < s.w; ++j) dist.data[dist.index(i, j, k)] = g[static_cast<size_t>(j)];
        }
    // Along h.
    for (int64_t j = 0; j < s.w; ++j)
        for (int64_t k = 0; k < s.d; ++k) {
            for (int64_t i = 0; i < s.h; ++i) f[static_cast<size_t>(i)] = dist.data[dist.index(i, j, k)];
            edt_line(f.data(), g.data(), s.h, v, z);
            for (int64_t i = 0; i < s.h; ++i) dist.data[dist.index(i, j, k)] = g[static_cast<size_t>(i)];
        }
    return dist;
}

double percentile_value(std::vector<double>& values, double pct) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    pct = std::clamp(pct, 0.0, 100.0);
    const double rank = pct / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<size_t>(rank);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

double hd95(const BinaryMask& a, const BinaryMask& b, double percentile, double penalty) {
    if (!(a.shape == b.shape))
        throw ValidationError("hd95: shape mismatch " + to_string(a.shape) + " vs " +
                              to_string(b.shape));
    const Box box_a = mask_bbox(a);
    const Box box_b = mask_bbox(b);
    if (box_a.empty && box_b.empty) return 0.0;
    if (box_a.empty || box_b.empty) return penalty;

    // A one-voxel margin keeps every surface voxel's exposed side inside the
    // crop, so surfaces and distances match the full-volume computation.
    Box box = box_a;
    box.absorb(box_b);
    box.pad(1, a.shape);
    const BinaryMask sa = surface_voxels(crop_mask(a, box));
    const BinaryMask sb = surface_voxels(crop_mask(b, box));
    const Grid3<double> da = squared_edt(sa);
    const Grid3<double> db = squared_edt(sb);

    std::vector<double> pooled;
    for (size_t i = 0; i < sa.data.size(); ++i) {
        if (sa.data[i]) pooled.push_back(std::sqrt(db.data[i]));
        if (sb.data[i]) pooled.push_back(std::sqrt(da.data[i]));
    }
    return percentile_value(pooled, percentile);
}

namespace {

// Morphological dilation by the Chebyshev ball of the given radius: the ball
// is the box [-r, r]^3, i.e. the Minkowski sum of one segment per axis, so
// three windowed-OR passes give the exact result.
BinaryMask dilate_chebyshev(const BinaryMask& mask, int radius) {
    if (radius <= 0) return mask;
    const Shape3 s = mask.shape;
    BinaryMask cur = mask;
    BinaryMask next(s);

    const auto pass = [&](int axis) {
        const int64_t len = s.axis(axis);
        for (int64_t i = 0; i < s.h; ++i)
            for (int64_t j = 0; j < s.w; ++j)
                for (int64_t k = 0; k < s.d; ++k) {
                    if (axis == 0 && i != 0) continue; // one pass per line
                    if (axis == 1 && j != 0) continue;
                    if (axis == 2 && k != 0) continue;
                    int64_t inside = 0;
                    const auto at = [&](int64_t t) -> int64_t {
                        if (axis == 0) return cur.index(t, j, k);
                        if (axis == 1) return cur.index(i, t, k);
                        return cur.index(i, j, t);
                    };
                    for (int64_t t = 0; t < std::min<int64_t>(radius, len); ++t)
                        inside += cur.data[at(t)];
                    for (int64_t t = 0; t < len; ++t) {
                        if (t + radius < len) inside += cur.data[at(t + radius)];
                        next.data[at(t)] = inside > 0 ? 1 : 0;
                        if (t - radius >= 0) inside -= cur.data[at(t - radius)];
                    }
                }
        std::swap(cur, next);
    };
    pass(2);
    pass(1);
    pass(0);
    return cur;
}

struct ComponentInfo {
    std::vector<int64_t> voxels; // linear indices, scan order
    Box box;
};

std::vector<ComponentInfo> collect_components(const ComponentField& field, const Shape3& s) {
    std::vector<ComponentInfo> comps(static_cast<size_t>(field.count));
    int64_t idx = 0;
    for (int64_t i = 0; i < s.h; ++i)
        for (int64_t j = 0; j < s.w; ++j)
            for (int64_t k = 0; k < s.d; ++k, ++idx) {
                const int32_t id = field.labels.data[idx];
                if (id == 0) continue;
                auto& c = comps[static_cast<size_t>(id) - 1];
                c.voxels.push_back(idx);
                c.box.absorb(i, j, k);
            }
    return comps;
}

} // namespace

LesionWiseResult lesion_wise_metrics(const BinaryMask& pred, const BinaryMask& gt,
                                     const MetricsConfig& cfg) {
    if (!(pred.shape == gt.shape))
        throw ValidationError("lesion_wise_metrics: shape mismatch " + to_string(pred.shape) +
                              " vs " + to_string(gt.shape));
    cfg.validate();
    const Shape3 s = gt.shape;
    const ComponentField cc_gt = connected_components(gt, cfg.connectivity);
    const ComponentField cc_pred = connected_components(pred, cfg.connectivity);
    const std::vector<ComponentInfo> gt_comps = collect_components(cc_gt, s);
    const std::vector<ComponentInfo> pred_comps = collect_components(cc_pred, s);

    const auto decode = [&](int64_t idx) {
        const int64_t k = idx % s.d;
        const int64_t j = (idx / s.d) % s.w;
        const int64_t i = idx / (s.w * s.d);
        return std::array<int64_t, 3>{i, j, k};
    };

    // Attach each predicted component to every reference component whose
    // dilation it touches; a prediction may serve several references.
    std::vector<std::vector<int>> matched(gt_comps.size());
    std::vector<uint8_t> pred_used(pred_comps.size(), 0);
    for (size_t g = 0; g < gt_comps.size(); ++g) {
        Box region = gt_comps[g].box;
        region.pad(cfg.dilation_radius, s);
        BinaryMask local(region.extent());
        for (const int64_t idx : gt_comps[g].voxels) {
            const auto [i, j, k] = decode(idx);
            local.at(i - region.lo[0], j - region.lo[1], k - region.lo[2]) = 1;
        }
        const BinaryMask dilated = dilate_chebyshev(local, cfg.dilation_radius);
        for (size_t p = 0; p < pred_comps.size(); ++p) {
            if (!region.intersects(pred_comps[p].box)) continue;
            bool hit = false;
            for (const int64_t idx : pred_comps[p].voxels) {
                const auto [i, j, k] = decode(idx);
                if (!region.contains(i, j, k)) continue;
                if (dilated.at(i - region.lo[0], j - region.lo[1], k - region.lo[2])) {
                    hit = true;
                    break;
                }
            }
            if (hit) {
                matched[g].push_back(static_cast<int>(p) + 1);
                pred_used[p] = 1;
            }
        }
    }

    LesionWiseResult result;
    result.n_gt = static_cast<int>(gt_comps.size());
    result.n_pred = static_cast<int>(pred_comps.size());

    for (size_t g = 0; g < gt_comps.size(); ++g) {
        LesionEntry entry;
        entry.gt_id = static_cast<int>(g) + 1;
        entry.pred_ids = matched[g];
        if (entry.pred_ids.empty()) {
            entry.dice = cfg.penalty_dice;
            entry.hd95 = cfg.penalty_hd95;
            ++result.n_fn;
        } else {
            Box box = gt_comps[g].box;
            for (const int p : entry.pred_ids) box.absorb(pred_comps[static_cast<size_t>(p) - 1].box);
            box.pad(1, s);
            BinaryMask local_gt(box.extent());
            BinaryMask local_pred(box.extent());
            for (const int64_t idx : gt_comps[g].voxels) {
                const auto [i, j, k] = decode(idx);
                local_gt.at(i - box.lo[0], j - box.lo[1], k - box.lo[2]) = 1;
            }
            for (const int p : entry.pred_ids)
                for (const int64_t idx : pred_comps[static_cast<size_t>(p) - 1].voxels) {
                    const auto [i, j, k] = decode(idx);
                    local_pred.at(i - box.lo[0], j - box.lo[1], k - box.lo[2]) = 1;
                }
            entry.dice = dice(local_pred, local_gt);
            entry.hd95 = hd95(local_pred, local_gt, cfg.percentile, cfg.penalty_hd95);
        }
        result.entries.push_back(std::move(entry));
    }
    for (size_t p = 0; p < pred_comps.size(); ++p) {
        if (pred_used[p]) continue;
        LesionEntry entry;
        entry.pred_ids = {static_cast<int>(p) + 1};
        entry.dice = cfg.penalty_dice;
        entry.hd95 = cfg.penalty_hd95;
        result.entries.push_back(std::move(entry));
        ++result.n_fp;
    }

    if (result.entries.empty()) {
        result.dice = 1.0;
        result.hd95 = 0.0;
    } else {
        double sd = 0.0, sh = 0.0;
        for (const LesionEntry& e : result.entries) {
            sd += e.dice;
            sh += e.hd95;
        }
        result.dice = sd / static_cast<double>(result.entries.size());
        result.hd95 = sh / static_cast<double>(result.entries.size());
    }
    return result;
}

CaseReport evaluate_case(const LabelMap& pred, const LabelMap& gt, const MetricsConfig& cfg) {
    if (!(pred.shape == gt.shape))
        throw ValidationError("evaluate_case: shape mismatch " + to_string(pred.shape) + " vs " +
                              to_string(gt.shape));
    cfg.validate();
    require_labelmap(pred, "predicted labels");
    require_labelmap(gt, "reference labels");
    const std::array<BinaryMask, 3> pc = labelmap_to_channels(pred);
    const std::array<BinaryMask, 3> gc = labelmap_to_channels(gt);

    CaseReport report;
    for (int c = 0; c < kNumChannels; ++c) {
        ChannelReport& ch = report.channels[static_cast<size_t>(c)];
        ch.legacy_dice = dice(pc[static_cast<size_t>(c)], gc[static_cast<size_t>(c)]);
        ch.legacy_hd95 =
            hd95(pc[static_cast<size_t>(c)], gc[static_cast<size_t>(c)], cfg.percentile, cfg.penalty_hd95);
        ch.lesion = lesion_wise_metrics(pc[static_cast<size_t>(c)], gc[static_cast<size_t>(c)], cfg);
        report.mean_legacy_dice += ch.legacy_dice / 3.0;
        report.mean_legacy_hd95 += ch.legacy_hd95 / 3.0;
        report.mean_lesion_dice += ch.lesion.dice / 3.0;
        report.mean_lesion_hd95 += ch.lesion.hd95 / 3.0;
    }
    return report;
}

CorpusReport aggregate_reports(std::vector<CaseReport> cases) {
    CorpusReport corpus;
    corpus.cases = std::move(cases);
    const auto n = static_cast<double>(corpus.cases.size());
    if (corpus.cases.empty()) return corpus;
    for (const CaseReport& cr : corpus.cases) {
        for (int c = 0; c < kNumChannels; ++c) {
            MetricMeans& m = corpus.channel_means[static_cast<size_t>(c)];
            const ChannelReport& ch = cr.channels[static_cast<size_t>(c)];
            m.legacy_dice += ch.legacy_dice / n;
            m.legacy_hd95 += ch.legacy_hd95 / n;
            m.lesion_dice += ch.lesion.dice / n;
            m.lesion_hd95 += ch.lesion.hd95 / n;
        }
        corpus.overall.legacy_dice += cr.mean_legacy_dice / n;
        corpus.overall.legacy_hd95 += cr.mean_legacy_hd95 / n;
        corpus.overall.lesion_dice += cr.mean_lesion_dice / n;
        corpus.overall.lesion_hd95 += cr.mean_lesion_hd95 / n;
    }
    return corpus;
}

} // namespace segpipe
