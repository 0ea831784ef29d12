#include "segpipe/postprocess.hpp"

#include <cmath>
#include <vector>

namespace segpipe {

void ThresholdConfig::validate() const {
    const struct { const char* name; double v; } fields[] = {{"t_tc", tc}, {"t_wt", wt}, {"t_et", et}};
    for (const auto& f : fields)
        if (!(f.v > 0.0 && f.v < 1.0))
            throw ValidationError(std::string("threshold ") + f.name + " = " + std::to_string(f.v) +
                                  " must be in (0,1)");
}

void FilterConfig::validate(const std::string& what) const {
    if (size_lower < 0)
        throw ValidationError(what + ": size_lower must be >= 0");
    if (size_upper < size_lower)
        throw ValidationError(what + ": size_upper must be >= size_lower");
    if (!(prob_upper >= 0.0 && prob_upper < 1.0))
        throw ValidationError(what + ": prob_upper must be in [0,1)");
    if (!(prob_mid >= 0.0 && prob_mid < 1.0))
        throw ValidationError(what + ": prob_mid must be in [0,1)");
}

void PostprocessConfig::validate() const {
    thresholds.validate();
    filter_tc.validate("filter.tc");
    filter_wt.validate("filter.wt");
    filter_et.validate("filter.et");
    if (et_to_tc_min_voxels < 0)
        throw ValidationError("et_to_tc_min_voxels must be >= 0");
    if (connectivity != 6 && connectivity != 26)
        throw ValidationError("connectivity must be 6 or 26, got " + std::to_string(connectivity));
}

std::array<BinaryMask, 3> as_discrete(const ChannelProbMap& probs, const ThresholdConfig& cfg) {
    cfg.validate();
    require_prob_map(probs, "as_discrete input");
    std::array<BinaryMask, 3> out{BinaryMask(probs.shape), BinaryMask(probs.shape), BinaryMask(probs.shape)};
    for (int c = 0; c < kNumChannels; ++c) {
        const float t = static_cast<float>(cfg.channel(c));
        auto src = probs.channel(c);
        auto& dst = out[static_cast<std::size_t>(c)].data;
        for (std::size_t v = 0; v < src.size(); ++v)
            dst[v] = src[v] >= t ? 1 : 0; // inclusive comparison
    }
    return out;
}

namespace {

struct Offset {
    std::int64_t di, dj, dk;
};

std::vector<Offset> neighbor_offsets(int connectivity) {
    std::vector<Offset> out;
    if (connectivity == 6) {
        out = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
    } else if (connectivity == 26) {
        for (std::int64_t di = -1; di <= 1; ++di)
            for (std::int64_t dj = -1; dj <= 1; ++dj)
                for (std::int64_t dk = -1; dk <= 1; ++dk)
                    if (di || dj || dk)
                        out.push_back({di, dj, dk});
    } else {
        throw ValidationError("connectivity must be 6 or 26, got " + std::to_string(connectivity));
    }
    return out;
}

} // namespace

ComponentField connected_components(const BinaryMask& mask, int connectivity) {
    require_binary(mask, "connected_components input");
    const auto offsets = neighbor_offsets(connectivity);
    const Shape3 s = mask.shape;

    ComponentField out;
    out.labels = Grid3<std::int32_t>(s, 0);
    std::vector<std::int64_t> queue;

    // Scan-order seeding gives ids ordered by each component's first voxel.
    for (std::int64_t i = 0; i < s.h; ++i)
        for (std::int64_t j = 0; j < s.w; ++j)
            for (std::int64_t k = 0; k < s.d; ++k) {
                const std::int64_t idx = mask.index(i, j, k);
                if (mask.data[static_cast<std::size_t>(idx)] == 0 ||
                    out.labels.data[static_cast<std::size_t>(idx)] != 0)
                    continue;
                const std::int32_t id = ++out.count;
                out.labels.data[static_cast<std::size_t>(idx)] = id;
                queue.clear();
                queue.push_back(idx);
                while (!queue.empty()) {
                    const std::int64_t cur = queue.back();
                    queue.pop_back();
                    const std::int64_t ci = cur / (s.w * s.d);
                    const std::int64_t cj = (cur / s.d) % s.w;
                    const std::int64_t ck = cur % s.d;
                    for (const auto& o : offsets) {
                        const std::int64_t ni = ci + o.di, nj = cj + o.dj, nk = ck + o.dk;
                        if (ni < 0 || ni >= s.h || nj < 0 || nj >= s.w || nk < 0 || nk >= s.d)
                            continue;
                        const std::int64_t nidx = mask.index(ni, nj, nk);
                        if (mask.data[static_cast<std::size_t>(nidx)] == 0 ||
                            out.labels.data[static_cast<std::size_t>(nidx)] != 0)
                            continue;
                        out.labels.data[static_cast<std::size_t>(nidx)] = id;
                        queue.push_back(nidx);
                    }
                }
            }
    return out;
}

BinaryMask filter_objects(const FloatVolume& prob, const BinaryMask& mask, const FilterConfig& cfg,
                          int connectivity) {
    cfg.validate("filter_objects");
    if (!(prob.shape == mask.shape))
        throw ValidationError("filter_objects: probability and mask shapes differ");
    require_finite(prob.data, "filter_objects probabilities");

    const ComponentField cc = connected_components(mask, connectivity);

    // Per-component size and probability sum, accumulated in scan order.
    std::vector<std::int64_t> size(static_cast<std::size_t>(cc.count) + 1, 0);
    std::vector<double> prob_sum(static_cast<std::size_t>(cc.count) + 1, 0.0);
    for (std::size_t v = 0; v < cc.labels.data.size(); ++v) {
        const std::int32_t id = cc.labels.data[v];
        if (id == 0)
            continue;
        ++size[static_cast<std::size_t>(id)];
        prob_sum[static_cast<std::size_t>(id)] += prob.data[v];
    }

    std::vector<std::uint8_t> keep(static_cast<std::size_t>(cc.count) + 1, 0);
    for (std::int32_t id = 1; id <= cc.count; ++id) {
        const std::int64_t sz = size[static_cast<std::size_t>(id)];
        const double mean = prob_sum[static_cast<std::size_t>(id)] / static_cast<double>(sz);
        if (sz >= cfg.size_upper)
            keep[static_cast<std::size_t>(id)] = mean >= cfg.prob_upper;
        else if (sz >= cfg.size_lower)
            keep[static_cast<std::size_t>(id)] = mean >= cfg.prob_mid;
        // below size_lower: dropped
    }

    BinaryMask out(mask.shape, 0);
    for (std::size_t v = 0; v < cc.labels.data.size(); ++v)
        out.data[v] = keep[static_cast<std::size_t>(cc.labels.data[v])];
    return out;
}

std::array<BinaryMask, 3> et_to_tc_replacement(std::array<BinaryMask, 3> masks,
                                               std::int64_t min_et_voxels) {
    const std::int64_t et_count = count_nonzero(masks[kET]);
    if (et_count > 0 && et_count < min_et_voxels) {
        auto& tc = masks[kTC].data;
        auto& et = masks[kET].data;
        for (std::size_t v = 0; v < et.size(); ++v) {
            if (et[v]) {
                tc[v] = 1;
                et[v] = 0;
            }
        }
    }
    return masks;
}

LabelMap channels_to_labelmap(const std::array<BinaryMask, 3>& masks) {
    const Shape3 s = masks[0].shape;
    for (const auto& m : masks)
        if (!(m.shape == s))
            throw ValidationError("channels_to_labelmap: masks disagree on shape");
    LabelMap out(s, kBackground);
    for (std::size_t v = 0; v < out.data.size(); ++v) {
        if (masks[kET].data[v])
            out.data[v] = kLabelEt;
        else if (masks[kTC].data[v])
            out.data[v] = kLabelNcr;
        else if (masks[kWT].data[v])
            out.data[v] = kLabelEd;
    }
    return out;
}

std::array<BinaryMask, 3> labelmap_to_channels(const LabelMap& labels) {
    require_labelmap(labels, "labelmap_to_channels input");
    std::array<BinaryMask, 3> out{BinaryMask(labels.shape, 0), BinaryMask(labels.shape, 0),
                                  BinaryMask(labels.shape, 0)};
    for (std::size_t v = 0; v < labels.data.size(); ++v) {
        const std::uint8_t l = labels.data[v];
        out[kTC].data[v] = (l == kLabelNcr || l == kLabelEt);
        out[kWT].data[v] = (l != kBackground);
        out[kET].data[v] = (l == kLabelEt);
    }
    return out;
}

PostprocessResult postprocess_pipeline(const ChannelProbMap& probs, const PostprocessConfig& cfg) {
    cfg.validate();
    PostprocessResult out;
    out.masks = as_discrete(probs, cfg.thresholds);
    for (int c = 0; c < kNumChannels; ++c) {
        const FloatVolume channel_prob = probs.channel_volume(c);
        out.masks[static_cast<std::size_t>(c)] =
            filter_objects(channel_prob, out.masks[static_cast<std::size_t>(c)], cfg.filter(c),
                           cfg.connectivity);
    }
    out.masks = et_to_tc_replacement(std::move(out.masks), cfg.et_to_tc_min_voxels);
    out.labels = channels_to_labelmap(out.masks);
    return out;
}

} // namespace segpipe
