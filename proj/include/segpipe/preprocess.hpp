#pragma once

#include <array>
#include <vector>

#include "segpipe/volume.hpp"

namespace segpipe {

// Records where a cropped block sits in the original grid so predictions can
// be mapped back. lo inclusive, hi exclusive.
struct CropBox {
    std::array<std::int64_t, 3> lo{0, 0, 0};
    std::array<std::int64_t, 3> hi{0, 0, 0};

    Shape3 extent() const { return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]}; }
    bool operator==(const CropBox&) const = default;
};

struct CropResult {
    FloatStack stack; // modalities restricted to the box, channel-major
    CropBox box;
    Shape3 original_shape;
};

// Tight bounding box of the union of non-zero voxels across all modalities;
// throws ValidationError when everything is zero.
CropResult crop_foreground(const std::vector<FloatVolume>& modalities);

// Z-score over the voxels that are non-zero in the input (population std);
// zeros stay zero. Degenerate std (< 1e-8) subtracts the mean only.
FloatVolume normalize_nonzero(const FloatVolume& v);

FloatVolume crop(const FloatVolume& v, const CropBox& box);

template <typename T>
Grid3<T> uncrop(const Grid3<T>& cropped, const CropBox& box, Shape3 original) {
    for (int a = 0; a < 3; ++a) {
        if (box.lo[a] < 0 || box.hi[a] > original.axis(a) || box.lo[a] >= box.hi[a])
            throw ValidationError("uncrop: box exceeds original shape " + to_string(original));
    }
    if (!(cropped.shape == box.extent()))
        throw ValidationError("uncrop: cropped shape " + to_string(cropped.shape) +
                              " does not match box extent " + to_string(box.extent()));
    Grid3<T> out(original, T{});
    for (std::int64_t i = 0; i < cropped.shape.h; ++i)
        for (std::int64_t j = 0; j < cropped.shape.w; ++j)
            for (std::int64_t k = 0; k < cropped.shape.d; ++k)
                out.at(box.lo[0] + i, box.lo[1] + j, box.lo[2] + k) = cropped.at(i, j, k);
    return out;
}

} // namespace segpipe
