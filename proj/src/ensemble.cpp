#include "segpipe/ensemble.hpp"

#include <cmath>

namespace segpipe {

void validate_weights(const std::vector<ModelWeights>& weights) {
    if (weights.empty())
        throw ValidationError("ensemble: need at least one model weighting");
    double sums[kNumChannels] = {0.0, 0.0, 0.0};
    for (const auto& w : weights) {
        for (int c = 0; c < kNumChannels; ++c) {
            const double v = w.channel(c);
            if (v < 0.0 || !std::isfinite(v))
                throw ValidationError("ensemble: negative or non-finite weight for model '" + w.name + "'");
            sums[c] += v;
        }
    }
    for (int c = 0; c < kNumChannels; ++c)
        if (sums[c] <= 0.0)
            throw ValidationError(std::string("ensemble: channel ") + channel_name(c) +
                                  " has zero total weight");
}

DoubleStack ensemble_f64(const std::vector<ChannelProbMap>& maps, const std::vector<ModelWeights>& weights) {
    if (maps.empty())
        throw ValidationError("ensemble: need at least one probability map");
    if (maps.size() != weights.size())
        throw ValidationError("ensemble: " + std::to_string(maps.size()) + " maps but " +
                              std::to_string(weights.size()) + " weight entries");
    validate_weights(weights);
    const Shape3 shape = maps[0].shape;
    for (const auto& m : maps) {
        require_prob_map(m, "ensemble input");
        if (!(m.shape == shape))
            throw ValidationError("ensemble: probability maps disagree on shape");
    }

    DoubleStack acc(kNumChannels, shape, 0.0);
    double weight_sum[kNumChannels] = {0.0, 0.0, 0.0};
    for (std::size_t n = 0; n < maps.size(); ++n) {
        for (int c = 0; c < kNumChannels; ++c) {
            const double w = weights[n].channel(c);
            weight_sum[c] += w;
            if (w == 0.0)
                continue;
            auto src = maps[n].channel(c);
            auto dst = acc.channel(c);
            for (std::size_t v = 0; v < src.size(); ++v)
                dst[v] += w * src[v];
        }
    }
    for (int c = 0; c < kNumChannels; ++c) {
        auto dst = acc.channel(c);
        for (double& v : dst)
            v /= weight_sum[c];
    }
    return acc;
}

ChannelProbMap ensemble(const std::vector<ChannelProbMap>& maps, const std::vector<ModelWeights>& weights) {
    DoubleStack acc = ensemble_f64(maps, weights);
    ChannelProbMap out(kNumChannels, acc.shape);
    for (std::size_t v = 0; v < acc.data.size(); ++v)
        out.data[v] = static_cast<float>(acc.data[v]);
    return out;
}

} // namespace segpipe
