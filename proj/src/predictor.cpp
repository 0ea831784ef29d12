#include "segpipe/predictor.hpp"

namespace segpipe {

ConstantPredictor::ConstantPredictor(double p) : value_(static_cast<float>(p)) {
    if (!(p >= 0.0 && p <= 1.0))
        throw ValidationError("constant predictor probability must be in [0,1]");
}

ChannelProbMap ConstantPredictor::predict(const FloatStack& patch, std::array<std::int64_t, 3>, FlipSpec) {
    return ChannelProbMap(kNumChannels, patch.shape, value_);
}

FieldPredictor::FieldPredictor(ChannelProbMap field) : field_(std::move(field)) {
    require_prob_map(field_, "FieldPredictor field");
}

ChannelProbMap FieldPredictor::predict(const FloatStack& patch, std::array<std::int64_t, 3> origin,
                                       FlipSpec flip) {
    const Shape3 win = patch.shape;
    const Shape3 vol = field_.shape;
    for (int a = 0; a < 3; ++a)
        if (origin[a] < 0 || origin[a] + win.axis(a) > vol.axis(a))
            throw ValidationError("FieldPredictor: window outside field (field shape " + to_string(vol) +
                                  ", input must match the field grid)");
    ChannelProbMap out(kNumChannels, win);
    for (std::int64_t c = 0; c < kNumChannels; ++c)
        for (std::int64_t i = 0; i < win.h; ++i) {
            const std::int64_t gi = origin[0] + i;
            const std::int64_t si = flip.flip_h ? vol.h - 1 - gi : gi;
            for (std::int64_t j = 0; j < win.w; ++j) {
                const std::int64_t gj = origin[1] + j;
                const std::int64_t sj = flip.flip_w ? vol.w - 1 - gj : gj;
                for (std::int64_t k = 0; k < win.d; ++k) {
                    const std::int64_t gk = origin[2] + k;
                    const std::int64_t sk = flip.flip_d ? vol.d - 1 - gk : gk;
                    out.at(c, i, j, k) = field_.at(c, si, sj, sk);
                }
            }
        }
    return out;
}

} // namespace segpipe
