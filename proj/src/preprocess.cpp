#include "segpipe/preprocess.hpp"

#include <cmath>
#include <limits>

namespace segpipe {

CropResult crop_foreground(const std::vector<FloatVolume>& modalities) {
    if (modalities.empty())
        throw ValidationError("crop_foreground: no modalities given");
    const Shape3 shape = modalities[0].shape;
    for (const auto& m : modalities) {
        if (!(m.shape == shape))
            throw ValidationError("crop_foreground: modalities disagree on shape");
        require_finite(m.data, "crop_foreground input");
    }

    std::array<std::int64_t, 3> lo{shape.h, shape.w, shape.d};
    std::array<std::int64_t, 3> hi{0, 0, 0};
    for (const auto& m : modalities) {
        for (std::int64_t i = 0; i < shape.h; ++i)
            for (std::int64_t j = 0; j < shape.w; ++j)
                for (std::int64_t k = 0; k < shape.d; ++k) {
                    if (m.at(i, j, k) == 0.0f)
                        continue;
                    lo[0] = std::min(lo[0], i);
                    lo[1] = std::min(lo[1], j);
                    lo[2] = std::min(lo[2], k);
                    hi[0] = std::max(hi[0], i + 1);
                    hi[1] = std::max(hi[1], j + 1);
                    hi[2] = std::max(hi[2], k + 1);
                }
    }
    if (hi[0] == 0)
        throw ValidationError("crop_foreground: all modalities are zero (empty foreground)");

    CropResult out;
    out.box = CropBox{lo, hi};
    out.original_shape = shape;
    std::vector<FloatVolume> cropped;
    cropped.reserve(modalities.size());
    for (const auto& m : modalities)
        cropped.push_back(crop(m, out.box));
    out.stack = FloatStack::from_channels(cropped);
    return out;
}

FloatVolume crop(const FloatVolume& v, const CropBox& box) {
    for (int a = 0; a < 3; ++a)
        if (box.lo[a] < 0 || box.hi[a] > v.shape.axis(a) || box.lo[a] >= box.hi[a])
            throw ValidationError("crop: box out of bounds for shape " + to_string(v.shape));
    FloatVolume out(box.extent());
    for (std::int64_t i = 0; i < out.shape.h; ++i)
        for (std::int64_t j = 0; j < out.shape.w; ++j)
            for (std::int64_t k = 0; k < out.shape.d; ++k)
                out.at(i, j, k) = v.at(box.lo[0] + i, box.lo[1] + j, box.lo[2] + k);
    return out;
}

FloatVolume normalize_nonzero(const FloatVolume& v) {
    require_finite(v.data, "normalize_nonzero input");

    double sum = 0.0;
    std::int64_t n = 0;
    for (float x : v.data) {
        if (x == 0.0f)
            continue;
        sum += x;
        ++n;
    }
    if (n == 0)
        return v; // all zero, nothing to normalize

    const double mean = sum / static_cast<double>(n);
    double sq_dev = 0.0;
    for (float x : v.data) {
        if (x == 0.0f)
            continue;
        const double d = x - mean;
        sq_dev += d * d;
    }
    const double std_dev = std::sqrt(sq_dev / static_cast<double>(n));

    FloatVolume out(v.shape);
    const bool scale = std_dev >= 1e-8;
    for (std::size_t i = 0; i < v.data.size(); ++i) {
        const float x = v.data[i];
        if (x == 0.0f) {
            out.data[i] = 0.0f;
        } else {
            const double z = scale ? (x - mean) / std_dev : (x - mean);
            out.data[i] = static_cast<float>(z);
        }
    }
    return out;
}

} // namespace segpipe
