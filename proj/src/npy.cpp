#include "segpipe/npy.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

static_assert(std::endian::native == std::endian::little, "little-endian host required for .npy I/O");

namespace segpipe {
namespace {

constexpr char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

std::string dtype_descr(NpyDtype d) {
    return d == NpyDtype::float32 ? "<f4" : "|u1";
}

std::size_t dtype_size(NpyDtype d) {
    return d == NpyDtype::float32 ? 4 : 1;
}

// Minimal parser for the python-dict header. Accepts the layout numpy writes
// plus whitespace variation; anything else is a bad_header.
struct HeaderFields {
    std::string descr;
    bool fortran_order = false;
    std::vector<std::int64_t> shape;
};

void skip_ws(const std::string& s, std::size_t& p) {
    while (p < s.size() && (s[p] == ' ' || s[p] == '\t' || s[p] == '\n'))
        ++p;
}

std::string parse_quoted(const std::string& s, std::size_t& p) {
    if (p >= s.size() || (s[p] != '\'' && s[p] != '"'))
        throw NpyError(NpyErrc::bad_header, "npy header: expected quoted string");
    const char q = s[p++];
    std::string out;
    while (p < s.size() && s[p] != q)
        out.push_back(s[p++]);
    if (p >= s.size())
        throw NpyError(NpyErrc::bad_header, "npy header: unterminated string");
    ++p;
    return out;
}

std::vector<std::int64_t> parse_shape_tuple(const std::string& s, std::size_t& p) {
    if (p >= s.size() || s[p] != '(')
        throw NpyError(NpyErrc::bad_header, "npy header: expected shape tuple");
    ++p;
    std::vector<std::int64_t> dims;
    for (;;) {
        skip_ws(s, p);
        if (p < s.size() && s[p] == ')') {
            ++p;
            break;
        }
        std::size_t start = p;
        while (p < s.size() && std::isdigit(static_cast<unsigned char>(s[p])))
            ++p;
        if (p == start)
            throw NpyError(NpyErrc::bad_header, "npy header: bad shape entry");
        dims.push_back(std::stoll(s.substr(start, p - start)));
        skip_ws(s, p);
        if (p < s.size() && s[p] == ',')
            ++p;
    }
    return dims;
}

HeaderFields parse_header(const std::string& header) {
    HeaderFields out;
    bool saw_descr = false, saw_order = false, saw_shape = false;
    std::size_t p = 0;
    skip_ws(header, p);
    if (p >= header.size() || header[p] != '{')
        throw NpyError(NpyErrc::bad_header, "npy header: expected dict");
    ++p;
    for (;;) {
        skip_ws(header, p);
        if (p < header.size() && header[p] == '}')
            break;
        std::string key = parse_quoted(header, p);
        skip_ws(header, p);
        if (p >= header.size() || header[p] != ':')
            throw NpyError(NpyErrc::bad_header, "npy header: expected ':'");
        ++p;
        skip_ws(header, p);
        if (key == "descr") {
            out.descr = parse_quoted(header, p);
            saw_descr = true;
        } else if (key == "fortran_order") {
            if (header.compare(p, 4, "True") == 0) {
                out.fortran_order = true;
                p += 4;
            } else if (header.compare(p, 5, "False") == 0) {
                out.fortran_order = false;
                p += 5;
            } else {
                throw NpyError(NpyErrc::bad_header, "npy header: bad fortran_order");
            }
            saw_order = true;
        } else if (key == "shape") {
            out.shape = parse_shape_tuple(header, p);
            saw_shape = true;
        } else {
            throw NpyError(NpyErrc::bad_header, "npy header: unknown key '" + key + "'");
        }
        skip_ws(header, p);
        if (p < header.size() && header[p] == ',')
            ++p;
    }
    if (!saw_descr || !saw_order || !saw_shape)
        throw NpyError(NpyErrc::bad_header, "npy header: missing required key");
    return out;
}

void check_supported_shape(const std::vector<std::int64_t>& shape) {
    if (shape.size() != 3 && shape.size() != 4)
        throw NpyError(NpyErrc::unsupported_rank,
                       "npy: only 3D volumes and 4D stacks are supported, got rank " +
                           std::to_string(shape.size()));
    for (std::int64_t d : shape)
        if (d < 1)
            throw NpyError(NpyErrc::bad_header, "npy: non-positive dimension in shape");
}

} // namespace

std::int64_t NpyArray::elements() const {
    std::int64_t n = 1;
    for (std::int64_t d : shape)
        n *= d;
    return n;
}

std::vector<std::uint8_t> npy_header_bytes(const std::vector<std::int64_t>& shape, NpyDtype dtype) {
    std::string dict = "{'descr': '" + dtype_descr(dtype) + "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        dict += std::to_string(shape[i]);
        if (i + 1 < shape.size())
            dict += ", ";
    }
    if (shape.size() == 1)
        dict += ",";
    dict += "), }";

    // magic(6) + version(2) + hlen(2) + dict + pad + '\n', padded to 64.
    const std::size_t base = 6 + 2 + 2;
    std::size_t total = base + dict.size() + 1;
    const std::size_t padded = (total + 63) / 64 * 64;
    dict.append(padded - total, ' ');
    dict.push_back('\n');

    std::vector<std::uint8_t> out;
    out.reserve(padded);
    out.insert(out.end(), kMagic, kMagic + 6);
    out.push_back(0x01);
    out.push_back(0x00);
    const std::size_t hlen = dict.size();
    out.push_back(static_cast<std::uint8_t>(hlen & 0xFF));
    out.push_back(static_cast<std::uint8_t>((hlen >> 8) & 0xFF));
    out.insert(out.end(), dict.begin(), dict.end());
    return out;
}

NpyArray read_npy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw NpyError(NpyErrc::io, "cannot open file: " + path.string());

    char magic[6];
    if (!in.read(magic, 6) || std::memcmp(magic, kMagic, 6) != 0)
        throw NpyError(NpyErrc::bad_magic, "not a .npy file (bad magic): " + path.string());

    unsigned char version[2];
    if (!in.read(reinterpret_cast<char*>(version), 2))
        throw NpyError(NpyErrc::bad_header, "truncated .npy header: " + path.string());
    if (version[0] != 1 || version[1] != 0)
        throw NpyError(NpyErrc::bad_version, "unsupported .npy version " + std::to_string(version[0]) + "." +
                                                 std::to_string(version[1]) + ": " + path.string());

    unsigned char lenb[2];
    if (!in.read(reinterpret_cast<char*>(lenb), 2))
        throw NpyError(NpyErrc::bad_header, "truncated .npy header: " + path.string());
    const std::size_t hlen = static_cast<std::size_t>(lenb[0]) | (static_cast<std::size_t>(lenb[1]) << 8);

    std::string header(hlen, '\0');
    if (!in.read(header.data(), static_cast<std::streamsize>(hlen)))
        throw NpyError(NpyErrc::bad_header, "truncated .npy header: " + path.string());

    HeaderFields f = parse_header(header);
    if (f.fortran_order)
        throw NpyError(NpyErrc::fortran_order, "npy: fortran-order arrays are not supported: " + path.string());
    check_supported_shape(f.shape);

    NpyArray a;
    a.shape = f.shape;
    if (f.descr == "<f4")
        a.dtype = NpyDtype::float32;
    else if (f.descr == "|u1" || f.descr == "<u1")
        a.dtype = NpyDtype::uint8;
    else
        throw NpyError(NpyErrc::unsupported_dtype, "npy: unsupported dtype '" + f.descr + "': " + path.string());

    const std::int64_t n = a.elements();
    const std::size_t payload = static_cast<std::size_t>(n) * dtype_size(a.dtype);

    // Payload size must match the declared shape exactly.
    const std::streampos data_start = in.tellg();
    in.seekg(0, std::ios::end);
    const std::size_t available = static_cast<std::size_t>(in.tellg() - data_start);
    if (available != payload)
        throw NpyError(NpyErrc::shape_length_mismatch,
                       "npy: payload is " + std::to_string(available) + " bytes but header shape needs " +
                           std::to_string(payload) + ": " + path.string());
    in.seekg(data_start);

    if (a.dtype == NpyDtype::float32) {
        a.f32.resize(static_cast<std::size_t>(n));
        if (!in.read(reinterpret_cast<char*>(a.f32.data()), static_cast<std::streamsize>(payload)))
            throw NpyError(NpyErrc::io, "npy: short read: " + path.string());
        require_finite(a.f32, "read_npy(" + path.string() + ")");
    } else {
        a.u8.resize(static_cast<std::size_t>(n));
        if (!in.read(reinterpret_cast<char*>(a.u8.data()), static_cast<std::streamsize>(payload)))
            throw NpyError(NpyErrc::io, "npy: short read: " + path.string());
    }
    return a;
}

void write_npy(const std::filesystem::path& path, const NpyArray& a) {
    check_supported_shape(a.shape);
    const std::int64_t n = a.elements();
    if (a.dtype == NpyDtype::float32) {
        if (static_cast<std::int64_t>(a.f32.size()) != n)
            throw NpyError(NpyErrc::shape_length_mismatch, "npy write: data length does not match shape");
        require_finite(a.f32, "write_npy(" + path.string() + ")");
    } else if (static_cast<std::int64_t>(a.u8.size()) != n) {
        throw NpyError(NpyErrc::shape_length_mismatch, "npy write: data length does not match shape");
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open for writing: " + path.string());
    const auto header = npy_header_bytes(a.shape, a.dtype);
    out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
    if (a.dtype == NpyDtype::float32)
        out.write(reinterpret_cast<const char*>(a.f32.data()), static_cast<std::streamsize>(a.f32.size() * 4));
    else
        out.write(reinterpret_cast<const char*>(a.u8.data()), static_cast<std::streamsize>(a.u8.size()));
    if (!out)
        throw IoError("write failed: " + path.string());
}

FloatVolume read_float_volume(const std::filesystem::path& path) {
    NpyArray a = read_npy(path);
    if (a.rank() != 3)
        throw NpyError(NpyErrc::unsupported_rank, "expected a 3D volume in " + path.string());
    if (a.dtype != NpyDtype::float32)
        throw NpyError(NpyErrc::unsupported_dtype, "expected float32 data in " + path.string());
    FloatVolume v(Shape3{a.shape[0], a.shape[1], a.shape[2]});
    v.data = std::move(a.f32);
    return v;
}

ByteVolume read_byte_volume(const std::filesystem::path& path) {
    NpyArray a = read_npy(path);
    if (a.rank() != 3)
        throw NpyError(NpyErrc::unsupported_rank, "expected a 3D volume in " + path.string());
    if (a.dtype != NpyDtype::uint8)
        throw NpyError(NpyErrc::unsupported_dtype, "expected uint8 data in " + path.string());
    ByteVolume v(Shape3{a.shape[0], a.shape[1], a.shape[2]});
    v.data = std::move(a.u8);
    return v;
}

FloatStack read_float_stack(const std::filesystem::path& path) {
    NpyArray a = read_npy(path);
    if (a.rank() != 4)
        throw NpyError(NpyErrc::unsupported_rank, "expected a 4D channel stack in " + path.string());
    if (a.dtype != NpyDtype::float32)
        throw NpyError(NpyErrc::unsupported_dtype, "expected float32 data in " + path.string());
    FloatStack s(a.shape[0], Shape3{a.shape[1], a.shape[2], a.shape[3]});
    s.data = std::move(a.f32);
    return s;
}

BinaryMask read_binary_mask(const std::filesystem::path& path) {
    ByteVolume v = read_byte_volume(path);
    require_binary(v, "read_binary_mask(" + path.string() + ")");
    return v;
}

LabelMap read_labelmap(const std::filesystem::path& path) {
    ByteVolume v = read_byte_volume(path);
    require_labelmap(v, "read_labelmap(" + path.string() + ")");
    return v;
}

ChannelProbMap read_prob_map(const std::filesystem::path& path) {
    FloatStack s = read_float_stack(path);
    require_prob_map(s, "read_prob_map(" + path.string() + ")");
    return s;
}

void write_npy(const std::filesystem::path& path, const FloatVolume& v) {
    NpyArray a;
    a.shape = {v.shape.h, v.shape.w, v.shape.d};
    a.dtype = NpyDtype::float32;
    a.f32 = v.data;
    write_npy(path, a);
}

void write_npy(const std::filesystem::path& path, const ByteVolume& v) {
    NpyArray a;
    a.shape = {v.shape.h, v.shape.w, v.shape.d};
    a.dtype = NpyDtype::uint8;
    a.u8 = v.data;
    write_npy(path, a);
}

void write_npy(const std::filesystem::path& path, const FloatStack& v) {
    NpyArray a;
    a.shape = {v.channels, v.shape.h, v.shape.w, v.shape.d};
    a.dtype = NpyDtype::float32;
    a.f32 = v.data;
    write_npy(path, a);
}

} // namespace segpipe
