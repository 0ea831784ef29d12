#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segpipe/errors.hpp"

namespace segpipe {

struct Shape3 {
    std::int64_t h = 0;
    std::int64_t w = 0;
    std::int64_t d = 0;

    std::int64_t voxels() const { return h * w * d; }
    std::int64_t axis(int a) const { return a == 0 ? h : (a == 1 ? w : d); }
    bool operator==(const Shape3&) const = default;
};

std::string to_string(const Shape3& s);

// Dense 3D scalar field, row-major (C) order: index (i,j,k) = (i*W + j)*D + k.
template <typename T>
struct Grid3 {
    Shape3 shape;
    std::vector<T> data;

    Grid3() = default;
    Grid3(Shape3 s, T fill = T{}) : shape(s) {
        if (s.h < 1 || s.w < 1 || s.d < 1)
            throw ValidationError("volume shape must be positive, got " + to_string(s));
        data.assign(static_cast<std::size_t>(s.voxels()), fill);
    }

    std::int64_t index(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return (i * shape.w + j) * shape.d + k;
    }
    T& at(std::int64_t i, std::int64_t j, std::int64_t k) { return data[static_cast<std::size_t>(index(i, j, k))]; }
    const T& at(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return data[static_cast<std::size_t>(index(i, j, k))];
    }
    std::int64_t voxels() const { return shape.voxels(); }
    bool operator==(const Grid3&) const = default;
};

using FloatVolume = Grid3<float>;
using ByteVolume = Grid3<std::uint8_t>;

// Conventions, not distinct types: a BinaryMask holds {0,1}, a LabelMap holds
// {0,1,2,3}. Loaders and the ops that require them call the validators below.
using BinaryMask = ByteVolume;
using LabelMap = ByteVolume;

// Channel order of every 3-channel probability map.
enum Channel : int { kTC = 0, kWT = 1, kET = 2 };
constexpr int kNumChannels = 3;
const char* channel_name(int c);

// Label values of a LabelMap.
constexpr std::uint8_t kBackground = 0;
constexpr std::uint8_t kLabelNcr = 1; // necrotic core
constexpr std::uint8_t kLabelEd = 2;  // edema
constexpr std::uint8_t kLabelEt = 3;  // enhancing tumor

// Channel-major 4D stack (channel, H, W, D); modality stacks use 4 channels,
// probability maps 3 (TC, WT, ET).
template <typename T>
struct StackT {
    std::int64_t channels = 0;
    Shape3 shape;
    std::vector<T> data;

    StackT() = default;
    StackT(std::int64_t c, Shape3 s, T fill = T{}) : channels(c), shape(s) {
        if (c < 1)
            throw ValidationError("stack needs at least one channel");
        if (s.h < 1 || s.w < 1 || s.d < 1)
            throw ValidationError("volume shape must be positive, got " + to_string(s));
        data.assign(static_cast<std::size_t>(c * s.voxels()), fill);
    }

    std::int64_t index(std::int64_t c, std::int64_t i, std::int64_t j, std::int64_t k) const {
        return ((c * shape.h + i) * shape.w + j) * shape.d + k;
    }
    T& at(std::int64_t c, std::int64_t i, std::int64_t j, std::int64_t k) {
        return data[static_cast<std::size_t>(index(c, i, j, k))];
    }
    const T& at(std::int64_t c, std::int64_t i, std::int64_t j, std::int64_t k) const {
        return data[static_cast<std::size_t>(index(c, i, j, k))];
    }

    std::span<T> channel(std::int64_t c) {
        return std::span<T>(data).subspan(static_cast<std::size_t>(c * shape.voxels()),
                                          static_cast<std::size_t>(shape.voxels()));
    }
    std::span<const T> channel(std::int64_t c) const {
        return std::span<const T>(data).subspan(static_cast<std::size_t>(c * shape.voxels()),
                                                static_cast<std::size_t>(shape.voxels()));
    }

    Grid3<T> channel_volume(std::int64_t c) const {
        Grid3<T> out(shape);
        auto src = channel(c);
        std::copy(src.begin(), src.end(), out.data.begin());
        return out;
    }

    static StackT from_channels(const std::vector<Grid3<T>>& vols) {
        if (vols.empty())
            throw ValidationError("cannot build a stack from zero channels");
        StackT out(static_cast<std::int64_t>(vols.size()), vols[0].shape);
        for (std::size_t c = 0; c < vols.size(); ++c) {
            if (!(vols[c].shape == vols[0].shape))
                throw ValidationError("stack channels disagree on shape");
            std::copy(vols[c].data.begin(), vols[c].data.end(), out.channel(static_cast<std::int64_t>(c)).begin());
        }
        return out;
    }

    bool operator==(const StackT&) const = default;
};

using FloatStack = StackT<float>;
using DoubleStack = StackT<double>;
using ChannelProbMap = FloatStack; // 3 channels (TC, WT, ET), values in [0,1]

struct FlipSpec {
    bool flip_h = false;
    bool flip_w = false;
    bool flip_d = false;

    // Composition of two flips is the XOR of their axes.
    FlipSpec composed(const FlipSpec& o) const {
        return {flip_h != o.flip_h, flip_w != o.flip_w, flip_d != o.flip_d};
    }
    bool identity() const { return !flip_h && !flip_w && !flip_d; }
    static std::array<FlipSpec, 8> all();
    bool operator==(const FlipSpec&) const = default;
};

template <typename T>
Grid3<T> flip(const Grid3<T>& v, FlipSpec f) {
    const auto& s = v.shape;
    Grid3<T> out(s);
    for (std::int64_t i = 0; i < s.h; ++i) {
        const std::int64_t si = f.flip_h ? s.h - 1 - i : i;
        for (std::int64_t j = 0; j < s.w; ++j) {
            const std::int64_t sj = f.flip_w ? s.w - 1 - j : j;
            for (std::int64_t k = 0; k < s.d; ++k) {
                const std::int64_t sk = f.flip_d ? s.d - 1 - k : k;
                out.at(i, j, k) = v.at(si, sj, sk);
            }
        }
    }
    return out;
}

FloatVolume flip_volume(const FloatVolume& v, FlipSpec f); // validates finiteness
FloatStack flip_stack(const FloatStack& v, FlipSpec f);

// NaN/Inf guard for float data entering the pipeline.
void require_finite(std::span<const float> data, const std::string& what);

void require_binary(const ByteVolume& mask, const std::string& what);
void require_labelmap(const ByteVolume& labels, const std::string& what);
void require_prob_map(const FloatStack& probs, const std::string& what);

std::int64_t count_nonzero(const ByteVolume& mask);

} // namespace segpipe
