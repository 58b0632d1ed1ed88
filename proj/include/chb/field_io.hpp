#pragma once

// CHBF snapshot format (little-endian):
//   offset  0  char[4]  "CHBF"
//   offset  4  u32      version (1)
//   offset  8  u32      nx
//   offset 12  u32      ny
//   offset 16  f64      lx
//   offset 24  f64      ly
//   offset 32  f64[nx*ny] values, row-major (row = j)

#include <chb/errors.hpp>
#include <chb/grid.hpp>

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace chb::io {

inline constexpr std::uint32_t kChbfVersion = 1;
inline constexpr std::size_t kChbfHeaderBytes = 32;

namespace detail {

inline void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) buf.push_back(static_cast<unsigned char>((v >> (8 * b)) & 0xFFu));
}

inline void put_f64(std::vector<unsigned char>& buf, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int b = 0; b < 8; ++b) buf.push_back(static_cast<unsigned char>((v >> (8 * b)) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int b = 3; b >= 0; --b) v = (v << 8) | p[b];
    return v;
}

inline double get_f64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
    return std::bit_cast<double>(v);
}

} // namespace detail

inline std::vector<unsigned char> encode_chbf(const ScalarField& f) {
    const Grid2D& g = f.grid();
    std::vector<unsigned char> buf;
    buf.reserve(kChbfHeaderBytes + 8 * f.size());
    for (char c : {'C', 'H', 'B', 'F'}) buf.push_back(static_cast<unsigned char>(c));
    detail::put_u32(buf, kChbfVersion);
    detail::put_u32(buf, static_cast<std::uint32_t>(g.nx()));
    detail::put_u32(buf, static_cast<std::uint32_t>(g.ny()));
    detail::put_f64(buf, g.lx());
    detail::put_f64(buf, g.ly());
    for (double v : f.values()) detail::put_f64(buf, v);
    return buf;
}

inline ScalarField decode_chbf(const std::vector<unsigned char>& buf) {
    if (buf.size() < kChbfHeaderBytes || buf[0] != 'C' || buf[1] != 'H' || buf[2] != 'B' || buf[3] != 'F') {
        throw IoError("not a CHBF snapshot (bad magic or truncated header)");
    }
    const std::uint32_t version = detail::get_u32(&buf[4]);
    if (version != kChbfVersion) {
        throw IoError("unsupported CHBF version " + std::to_string(version));
    }
    const auto nx = static_cast<int>(detail::get_u32(&buf[8]));
    const auto ny = static_cast<int>(detail::get_u32(&buf[12]));
    const double lx = detail::get_f64(&buf[16]);
    const double ly = detail::get_f64(&buf[24]);
    const Grid2D g(nx, ny, lx, ly);
    if (buf.size() != kChbfHeaderBytes + 8 * g.cells()) {
        throw IoError("CHBF payload size does not match header");
    }
    ScalarField f(g);
    for (std::size_t k = 0; k < g.cells(); ++k) f[k] = detail::get_f64(&buf[kChbfHeaderBytes + 8 * k]);
    return f;
}

inline void write_chbf(const std::filesystem::path& path, const ScalarField& f) {
    const auto buf = encode_chbf(f);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("short write to " + path.string());
}

inline ScalarField read_chbf(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_chbf(buf);
}

/// Shortest round-trip text representation of a double.
inline std::string fmt_double(double v) {
    std::array<char, 32> s{};
    std::snprintf(s.data(), s.size(), "%.17g", v);
    return s.data();
}

/// One CSV row per grid row (j = 0 first), comma separated.
inline void write_csv(const std::filesystem::path& path, const ScalarField& f) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    const Grid2D& g = f.grid();
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            if (i) out << ',';
            out << fmt_double(f(i, j));
        }
        out << '\n';
    }
}

} // namespace chb::io
