#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "oracles.hpp"
#include "segpipe/errors.hpp"
#include "segpipe/npy.hpp"

using namespace segpipe;
namespace fs = std::filesystem;

namespace {

// Reference files captured byte-for-byte from numpy.save (numpy 1.x, format
// v1.0): arange(8, float32).reshape(2,2,2) and arange(6, uint8).reshape(1,2,3).
const char* kFloatHex =
    "934e554d5059010076007b276465736372273a20273c6634272c2027666f727472616e5f6f72646572273a20"
    "46616c73652c20277368617065273a2028322c20322c2032292c207d20202020202020202020202020202020"
    "2020202020202020202020202020202020202020202020202020202020202020202020202020200a00000000"
    "0000803f0000004000004040000080400000a0400000c0400000e040";
const char* kByteHex =
    "934e554d5059010076007b276465736372273a20277c7531272c2027666f727472616e5f6f72646572273a20"
    "46616c73652c20277368617065273a2028312c20322c2033292c207d20202020202020202020202020202020"
    "2020202020202020202020202020202020202020202020202020202020202020202020202020200a00010203"
    "0405";
const char* kStack4dHeaderHex =
    "934e554d5059010076007b276465736372273a20273c6634272c2027666f727472616e5f6f72646572273a20"
    "46616c73652c20277368617065273a2028332c20322c20322c2032292c207d20202020202020202020202020"
    "2020202020202020202020202020202020202020202020202020202020202020202020202020200a";

std::vector<uint8_t> from_hex(const std::string& hex) {
    std::vector<uint8_t> out;
    out.reserve(hex.size() / 2);
    for (size_t i = 0; i + 1 < hex.size(); i += 2)
        out.push_back(static_cast<uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
    return out;
}

std::vector<uint8_t> slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.is_open());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("segpipe_npy_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static inline int counter = 0;
};

} // namespace

TEST_CASE("write_npy reproduces numpy.save byte-for-byte") {
    TempDir tmp;

    FloatVolume v({2, 2, 2});
    for (size_t i = 0; i < 8; ++i) v.data[i] = static_cast<float>(i);
    write_npy(tmp.path / "f.npy", v);
    CHECK(slurp(tmp.path / "f.npy") == from_hex(kFloatHex));

    ByteVolume b({1, 2, 3});
    for (size_t i = 0; i < 6; ++i) b.data[i] = static_cast<uint8_t>(i);
    write_npy(tmp.path / "b.npy", b);
    CHECK(slurp(tmp.path / "b.npy") == from_hex(kByteHex));

    CHECK(npy_header_bytes({3, 2, 2, 2}, NpyDtype::float32) == from_hex(kStack4dHeaderHex));
}

TEST_CASE("read_npy parses numpy.save output") {
    TempDir tmp;
    {
        std::ofstream out(tmp.path / "f.npy", std::ios::binary);
        const auto bytes = from_hex(kFloatHex);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    const NpyArray a = read_npy(tmp.path / "f.npy");
    CHECK(a.dtype == NpyDtype::float32);
    CHECK(a.shape == std::vector<int64_t>{2, 2, 2});
    REQUIRE(a.f32.size() == 8);
    for (size_t i = 0; i < 8; ++i) CHECK(a.f32[i] == static_cast<float>(i));

    {
        std::ofstream out(tmp.path / "b.npy", std::ios::binary);
        const auto bytes = from_hex(kByteHex);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    const NpyArray u = read_npy(tmp.path / "b.npy");
    CHECK(u.dtype == NpyDtype::uint8);
    CHECK(u.shape == std::vector<int64_t>{1, 2, 3});
    REQUIRE(u.u8.size() == 6);
    CHECK(u.u8[5] == 5);
}

TEST_CASE("volume and stack round-trips preserve bytes and values") {
    TempDir tmp;
    testutil::TestRng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Shape3 shape{rng.uniform_int(1, 8), rng.uniform_int(1, 8), rng.uniform_int(1, 8)};
        SUBCASE("") {}
        const FloatVolume v = testutil::random_volume(rng, shape, -10.0, 10.0);
        write_npy(tmp.path / "v.npy", v);
        CHECK(read_float_volume(tmp.path / "v.npy") == v);

        ByteVolume b(shape);
        for (uint8_t& x : b.data) x = static_cast<uint8_t>(rng.uniform_int(0, 255));
        write_npy(tmp.path / "b.npy", b);
        CHECK(read_byte_volume(tmp.path / "b.npy") == b);

        FloatStack stack(rng.uniform_int(1, 4), shape);
        for (float& x : stack.data) x = static_cast<float>(rng.uniform(-1.0, 1.0));
        write_npy(tmp.path / "s.npy", stack);
        CHECK(read_float_stack(tmp.path / "s.npy") == stack);

        // A second write of identical data is bitwise identical.
        const auto bytes1 = slurp(tmp.path / "s.npy");
        write_npy(tmp.path / "s2.npy", stack);
        CHECK(slurp(tmp.path / "s2.npy") == bytes1);
    }
}

TEST_CASE("typed readers enforce their contracts") {
    TempDir tmp;

    FloatStack probs(3, {2, 2, 2}, 0.25f);
    write_npy(tmp.path / "p.npy", probs);
    CHECK(read_prob_map(tmp.path / "p.npy") == probs);

    FloatStack two(2, {2, 2, 2}, 0.25f);
    write_npy(tmp.path / "p2.npy", two);
    CHECK_THROWS_AS(read_prob_map(tmp.path / "p2.npy"), ValidationError);

    probs.data[0] = 1.5f;
    write_npy(tmp.path / "p3.npy", probs);
    CHECK_THROWS_AS(read_prob_map(tmp.path / "p3.npy"), ValidationError);

    ByteVolume labels({2, 2, 2});
    labels.at(0, 0, 0) = 3;
    write_npy(tmp.path / "l.npy", labels);
    CHECK_NOTHROW(read_labelmap(tmp.path / "l.npy"));
    CHECK_THROWS_AS(read_binary_mask(tmp.path / "l.npy"), ValidationError);
    labels.at(0, 0, 0) = 4;
    write_npy(tmp.path / "l2.npy", labels);
    CHECK_THROWS_AS(read_labelmap(tmp.path / "l2.npy"), ValidationError);

    // rank mismatches
    write_npy(tmp.path / "v3.npy", FloatVolume({2, 2, 2}, 0.5f));
    CHECK_THROWS_AS(read_float_stack(tmp.path / "v3.npy"), NpyError);
    write_npy(tmp.path / "s4.npy", FloatStack(3, {2, 2, 2}, 0.5f));
    CHECK_THROWS_AS(read_float_volume(tmp.path / "s4.npy"), NpyError);
    // dtype mismatches
    CHECK_THROWS_AS(read_byte_volume(tmp.path / "v3.npy"), NpyError);
    CHECK_THROWS_AS(read_float_volume(tmp.path / "l.npy"), NpyError);
}

TEST_CASE("malformed files produce specific error codes") {
    TempDir tmp;
    const auto good = from_hex(kFloatHex);

    const auto write_bytes = [&](const std::vector<uint8_t>& bytes) {
        std::ofstream out(tmp.path / "x.npy", std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    };
    const auto code_of = [&]() -> NpyErrc {
        try {
            read_npy(tmp.path / "x.npy");
        } catch (const NpyError& e) {
            return e.code();
        }
        FAIL("expected NpyError");
        return NpyErrc::io;
    };

    SUBCASE("missing file") {
        CHECK_THROWS_AS(read_npy(tmp.path / "nope.npy"), IoError);
    }
    SUBCASE("bad magic") {
        auto bytes = good;
        bytes[1] = 'X';
        write_bytes(bytes);
        CHECK(code_of() == NpyErrc::bad_magic);
    }
    SUBCASE("unsupported version") {
        auto bytes = good;
        bytes[6] = 2; // major version
        write_bytes(bytes);
        CHECK(code_of() == NpyErrc::bad_version);
    }
    SUBCASE("fortran order rejected") {
        auto bytes = good;
        std::string text(bytes.begin(), bytes.end());
        text.replace(text.find("False"), 5, "True "); // same byte count
        write_bytes({text.begin(), text.end()});
        CHECK(code_of() == NpyErrc::fortran_order);
    }
    SUBCASE("unsupported dtype") {
        auto bytes = good;
        const std::string text(bytes.begin(), bytes.end());
        const auto pos = text.find("<f4");
        auto patched = text;
        patched.replace(pos, 3, "<f8");
        write_bytes({patched.begin(), patched.end()});
        CHECK(code_of() == NpyErrc::unsupported_dtype);
    }
    SUBCASE("unsupported rank") {
        FloatVolume v({2, 2, 2}, 1.0f);
        write_npy(tmp.path / "v.npy", v);
        auto bytes = slurp(tmp.path / "v.npy");
        std::string text(bytes.begin(), bytes.end());
        const auto pos = text.find("(2, 2, 2)");
        text.replace(pos, 9, "(4, 2,  )"); // rank 2, same preamble length
        write_bytes({text.begin(), text.end()});
        CHECK(code_of() == NpyErrc::unsupported_rank);
    }
    SUBCASE("payload shorter than shape") {
        auto bytes = good;
        bytes.resize(bytes.size() - 4);
        write_bytes(bytes);
        CHECK(code_of() == NpyErrc::shape_length_mismatch);
    }
    SUBCASE("payload longer than shape") {
        auto bytes = good;
        bytes.push_back(0);
        write_bytes(bytes);
        CHECK(code_of() == NpyErrc::shape_length_mismatch);
    }
    SUBCASE("truncated header") {
        auto bytes = good;
        bytes.resize(32);
        write_bytes(bytes);
        CHECK(code_of() == NpyErrc::bad_header);
    }
    SUBCASE("NaN payload rejected as invalid values") {
        auto bytes = good;
        bytes[bytes.size() - 1] = 0x7f; // last float becomes NaN
        bytes[bytes.size() - 2] = 0xc0;
        write_bytes(bytes);
        CHECK_THROWS_AS(read_npy(tmp.path / "x.npy"), ValidationError);
    }
}
