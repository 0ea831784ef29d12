#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "segpipe/volume.hpp"

namespace segpipe {

enum class NpyDtype { float32, uint8 };

// An array as it sits in a .npy file: 3D volumes and channel-major 4D stacks.
struct NpyArray {
    std::vector<std::int64_t> shape;
    NpyDtype dtype = NpyDtype::float32;
    std::vector<float> f32;
    std::vector<std::uint8_t> u8;

    std::int64_t elements() const;
    int rank() const { return static_cast<int>(shape.size()); }
};

// v1.0 container, little-endian, C order: \x93NUMPY \x01\x00, u16le header
// length, python-dict header padded with spaces so the total preamble is a
// multiple of 64 bytes and ends in \n. Supported descrs: '<f4' and '|u1'.
NpyArray read_npy(const std::filesystem::path& path);
void write_npy(const std::filesystem::path& path, const NpyArray& a);

// Exact preamble (magic through terminating newline) for a given array spec.
std::vector<std::uint8_t> npy_header_bytes(const std::vector<std::int64_t>& shape, NpyDtype dtype);

// Typed convenience wrappers; each validates rank/dtype and, for float data,
// finiteness.
FloatVolume read_float_volume(const std::filesystem::path& path);
ByteVolume read_byte_volume(const std::filesystem::path& path);
FloatStack read_float_stack(const std::filesystem::path& path);
BinaryMask read_binary_mask(const std::filesystem::path& path);
LabelMap read_labelmap(const std::filesystem::path& path);
ChannelProbMap read_prob_map(const std::filesystem::path& path);

void write_npy(const std::filesystem::path& path, const FloatVolume& v);
void write_npy(const std::filesystem::path& path, const ByteVolume& v);
void write_npy(const std::filesystem::path& path, const FloatStack& v);

} // namespace segpipe
