#include "segpipe/volume.hpp"

#include <cmath>

namespace segpipe {

std::string to_string(const Shape3& s) {
    return "(" + std::to_string(s.h) + ", " + std::to_string(s.w) + ", " + std::to_string(s.d) + ")";
}

const char* channel_name(int c) {
    switch (c) {
    case kTC: return "tc";
    case kWT: return "wt";
    case kET: return "et";
    default: throw ValidationError("channel index out of range: " + std::to_string(c));
    }
}

std::array<FlipSpec, 8> FlipSpec::all() {
    std::array<FlipSpec, 8> out;
    for (int b = 0; b < 8; ++b)
        out[static_cast<std::size_t>(b)] = {(b & 4) != 0, (b & 2) != 0, (b & 1) != 0};
    return out;
}

void require_finite(std::span<const float> data, const std::string& what) {
    for (float v : data)
        if (!std::isfinite(v))
            throw ValidationError(what + ": NaN/Inf in float data");
}

FloatVolume flip_volume(const FloatVolume& v, FlipSpec f) {
    require_finite(v.data, "flip input");
    return flip(v, f);
}

FloatStack flip_stack(const FloatStack& v, FlipSpec f) {
    require_finite(v.data, "flip input");
    FloatStack out(v.channels, v.shape);
    for (std::int64_t c = 0; c < v.channels; ++c) {
        const auto& s = v.shape;
        for (std::int64_t i = 0; i < s.h; ++i) {
            const std::int64_t si = f.flip_h ? s.h - 1 - i : i;
            for (std::int64_t j = 0; j < s.w; ++j) {
                const std::int64_t sj = f.flip_w ? s.w - 1 - j : j;
                for (std::int64_t k = 0; k < s.d; ++k) {
                    const std::int64_t sk = f.flip_d ? s.d - 1 - k : k;
                    out.at(c, i, j, k) = v.at(c, si, sj, sk);
                }
            }
        }
    }
    return out;
}

void require_binary(const ByteVolume& mask, const std::string& what) {
    for (std::uint8_t v : mask.data)
        if (v > 1)
            throw ValidationError(what + ": mask value " + std::to_string(v) + " outside {0,1}");
}

void require_labelmap(const ByteVolume& labels, const std::string& what) {
    for (std::uint8_t v : labels.data)
        if (v > 3)
            throw ValidationError(what + ": label value " + std::to_string(v) + " outside {0,1,2,3}");
}

void require_prob_map(const FloatStack& probs, const std::string& what) {
    if (probs.channels != kNumChannels)
        throw ValidationError(what + ": expected 3 channels (TC, WT, ET), got " + std::to_string(probs.channels));
    for (float v : probs.data) {
        if (!std::isfinite(v))
            throw ValidationError(what + ": NaN/Inf in probability data");
        if (v < 0.0f || v > 1.0f)
            throw ValidationError(what + ": probability " + std::to_string(v) + " outside [0,1]");
    }
}

std::int64_t count_nonzero(const ByteVolume& mask) {
    std::int64_t n = 0;
    for (std::uint8_t v : mask.data)
        n += (v != 0);
    return n;
}

} // namespace segpipe
