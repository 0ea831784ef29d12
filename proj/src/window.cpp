#include "segpipe/window.hpp"

#include <cmath>

namespace segpipe {

std::vector<std::int64_t> window_starts(std::int64_t length, std::int64_t window, double overlap) {
    if (window < 1)
        throw ValidationError("window_starts: window must be >= 1");
    if (window > length)
        throw ValidationError("window_starts: window " + std::to_string(window) + " exceeds axis length " +
                              std::to_string(length));
    if (overlap < 0.0 || overlap >= 1.0)
        throw ValidationError("window_starts: overlap must be in [0,1)");
    const std::int64_t stride = std::llround(static_cast<double>(window) * (1.0 - overlap));
    if (stride < 1)
        throw ValidationError("window_starts: stride rounds to zero (overlap too large for window)");

    std::vector<std::int64_t> starts;
    const std::int64_t last = length - window;
    for (std::int64_t i = 0;; ++i) {
        const std::int64_t s = std::min(i * stride, last);
        if (starts.empty() || starts.back() != s)
            starts.push_back(s);
        if (i * stride >= last)
            break;
    }
    return starts;
}

WindowGrid make_window_grid(Shape3 volume, Shape3 window, double overlap) {
    WindowGrid g;
    g.window = window;
    g.starts_h = window_starts(volume.h, window.h, overlap);
    g.starts_w = window_starts(volume.w, window.w, overlap);
    g.starts_d = window_starts(volume.d, window.d, overlap);
    return g;
}

namespace {

FloatStack extract_patch(const FloatStack& input, std::array<std::int64_t, 3> origin, Shape3 window) {
    FloatStack patch(input.channels, window);
    for (std::int64_t c = 0; c < input.channels; ++c)
        for (std::int64_t i = 0; i < window.h; ++i)
            for (std::int64_t j = 0; j < window.w; ++j) {
                const float* src = &input.at(c, origin[0] + i, origin[1] + j, origin[2]);
                float* dst = &patch.at(c, i, j, 0);
                std::copy(src, src + window.d, dst);
            }
    return patch;
}

void check_prediction(const ChannelProbMap& p, Shape3 window) {
    if (p.channels != kNumChannels || !(p.shape == window))
        throw ValidationError("predictor returned wrong shape: expected 3x" + to_string(window));
    for (float v : p.data)
        if (!(v >= 0.0f && v <= 1.0f))
            throw ValidationError("predictor output outside [0,1]");
}

} // namespace

ChannelProbMap sliding_window_predict(const FloatStack& input, Predictor& predictor, const WindowGrid& grid,
                                      FlipSpec flip) {
    const Shape3 vol = input.shape;
    const Shape3 win = grid.window;
    if (win.h > vol.h || win.w > vol.w || win.d > vol.d)
        throw ValidationError("sliding_window_predict: window " + to_string(win) + " exceeds volume " +
                              to_string(vol));
    require_finite(input.data, "sliding_window_predict input");

    DoubleStack sum(kNumChannels, vol, 0.0);
    Grid3<std::uint32_t> count(vol, 0);

    for (std::int64_t sh : grid.starts_h)
        for (std::int64_t sw : grid.starts_w)
            for (std::int64_t sd : grid.starts_d) {
                const std::array<std::int64_t, 3> origin{sh, sw, sd};
                FloatStack patch = extract_patch(input, origin, win);
                ChannelProbMap pred = predictor.predict(patch, origin, flip);
                check_prediction(pred, win);
                for (std::int64_t c = 0; c < kNumChannels; ++c)
                    for (std::int64_t i = 0; i < win.h; ++i)
                        for (std::int64_t j = 0; j < win.w; ++j) {
                            const float* src = &pred.at(c, i, j, 0);
                            double* dst = &sum.at(c, sh + i, sw + j, sd);
                            for (std::int64_t k = 0; k < win.d; ++k)
                                dst[k] += src[k];
                        }
                for (std::int64_t i = 0; i < win.h; ++i)
                    for (std::int64_t j = 0; j < win.w; ++j) {
                        std::uint32_t* dst = &count.at(sh + i, sw + j, sd);
                        for (std::int64_t k = 0; k < win.d; ++k)
                            ++dst[k];
                    }
            }

    ChannelProbMap out(kNumChannels, vol);
    const std::size_t vox = static_cast<std::size_t>(vol.voxels());
    for (std::int64_t c = 0; c < kNumChannels; ++c) {
        const double* s = sum.channel(c).data();
        float* o = out.channel(c).data();
        for (std::size_t v = 0; v < vox; ++v)
            o[v] = static_cast<float>(s[v] / count.data[v]);
    }
    return out;
}

ChannelProbMap tta_predict(const FloatStack& input, Predictor& predictor, const WindowGrid& grid) {
    const Shape3 vol = input.shape;
    DoubleStack acc(kNumChannels, vol, 0.0);
    for (const FlipSpec& f : FlipSpec::all()) {
        FloatStack flipped = flip_stack(input, f);
        ChannelProbMap pred = sliding_window_predict(flipped, predictor, grid, f);
        FloatStack restored = flip_stack(pred, f); // flip is an involution
        for (std::size_t v = 0; v < acc.data.size(); ++v)
            acc.data[v] += restored.data[v];
    }
    ChannelProbMap out(kNumChannels, vol);
    for (std::size_t v = 0; v < out.data.size(); ++v)
        out.data[v] = static_cast<float>(acc.data[v] / 8.0);
    return out;
}

} // namespace segpipe
