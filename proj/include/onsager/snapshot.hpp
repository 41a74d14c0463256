#pragma once
// OSGF snapshot files: a checksummed binary header followed by little-endian
// 64-bit floats, field-major then time-major then space row-major, so that
// time windows can be read without loading whole runs.

#include "onsager/fields.hpp"

#include <cstring>
#include <fstream>

namespace onsager {

namespace osgf {

constexpr std::uint32_t kVersion = 1;

namespace detail {

inline bool host_is_little_endian() {
    const std::uint32_t probe = 1;
    unsigned char b;
    std::memcpy(&b, &probe, 1);
    return b == 1;
}

struct Buf {
    std::vector<unsigned char> bytes;

    void put_u8(std::uint8_t v) { bytes.push_back(v); }
    void put_u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) bytes.push_back((v >> (8 * i)) & 0xff);
    }
    void put_u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back((v >> (8 * i)) & 0xff);
    }
    void put_f64(double v) {
        std::uint64_t u;
        std::memcpy(&u, &v, 8);
        for (int i = 0; i < 8; ++i) bytes.push_back((u >> (8 * i)) & 0xff);
    }
    void put_str(const std::string& s) {
        put_u16(std::uint16_t(s.size()));
        bytes.insert(bytes.end(), s.begin(), s.end());
    }
};

struct Reader {
    const unsigned char* p;
    const unsigned char* end;

    void need(std::size_t n) const {
        if (std::size_t(end - p) < n) throw IoError("snapshot header truncated");
    }
    std::uint8_t get_u8() {
        need(1);
        return *p++;
    }
    std::uint16_t get_u16() {
        need(2);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= std::uint16_t(*p++) << (8 * i);
        return v;
    }
    std::uint32_t get_u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(*p++) << (8 * i);
        return v;
    }
    double get_f64() {
        need(8);
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u |= std::uint64_t(*p++) << (8 * i);
        double v;
        std::memcpy(&v, &u, 8);
        return v;
    }
    std::string get_str() {
        std::uint16_t n = get_u16();
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        return s;
    }
};

}  // namespace detail

inline std::vector<std::string> field_names(int d) {
    std::vector<std::string> n = {"rho", "u", "vx"};
    if (d == 2) n.push_back("vy");
    return n;
}

inline void write(const std::string& path, const FieldBlock& blk, const EosSpec& eos) {
    const Grid& g = blk.grid;
    detail::Buf h;
    h.bytes = {'O', 'S', 'G', 'F'};
    h.put_u32(kVersion);
    h.put_u32(std::uint32_t(g.d));
    h.put_u32(std::uint32_t(g.nx[0]));
    h.put_u32(std::uint32_t(g.nx[1]));
    h.put_f64(g.dx[0]);
    h.put_f64(g.dx[1]);
    h.put_u32(std::uint32_t(g.nt));  // nt_chunk: levels in this file
    h.put_f64(g.dt);
    h.put_f64(g.t0);
    h.put_f64(g.x0[0]);
    h.put_f64(g.x0[1]);
    h.put_f64(blk.eps);
    h.put_f64(g.c_ref);
    h.put_u8(g.periodic[0] ? 1 : 0);
    h.put_u8(g.periodic[1] ? 1 : 0);
    h.put_u32(eos.kind == EosKind::IdealGas ? 0u : 1u);
    h.put_f64(eos.alpha);
    h.put_f64(eos.k_B);
    h.put_f64(eos.s_0);
    h.put_f64(eos.a);
    h.put_f64(eos.b);
    auto names = field_names(g.d);
    h.put_u32(std::uint32_t(names.size()));
    for (const auto& n : names) h.put_str(n);
    std::uint32_t crc = crc32(h.bytes.data(), h.bytes.size());
    h.put_u32(crc);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(h.bytes.data()), std::streamsize(h.bytes.size()));

    auto write_field = [&](const Field& fld) {
        if (detail::host_is_little_endian()) {
            f.write(reinterpret_cast<const char*>(fld.a.data()),
                    std::streamsize(fld.a.size() * 8));
        } else {
            detail::Buf b;
            b.bytes.reserve(fld.a.size() * 8);
            for (double v : fld.a) b.put_f64(v);
            f.write(reinterpret_cast<const char*>(b.bytes.data()),
                    std::streamsize(b.bytes.size()));
        }
    };
    write_field(blk.rho);
    write_field(blk.u);
    write_field(blk.v[0]);
    if (g.d == 2) write_field(blk.v[1]);
    if (!f) throw IoError("write failed for " + path);
}

struct ReadResult {
    FieldBlock block;
    EosSpec eos;
};

// Reads the block; a time window [t_lo, t_lo + nt_window) restricts the
// levels actually loaded (nt_window = 0 loads everything).
inline ReadResult read(const std::string& path, int t_lo = 0, int nt_window = 0) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<unsigned char> head(4096);
    f.read(reinterpret_cast<char*>(head.data()), std::streamsize(head.size()));
    std::size_t got = std::size_t(f.gcount());
    head.resize(got);
    detail::Reader r{head.data(), head.data() + head.size()};
    r.need(4);
    if (std::memcmp(r.p, "OSGF", 4) != 0) throw IoError("bad magic in " + path);
    r.p += 4;
    std::uint32_t version = r.get_u32();
    if (version != kVersion) throw IoError("unsupported snapshot version");
    Grid g;
    g.d = int(r.get_u32());
    g.nx = {int(r.get_u32()), int(r.get_u32())};
    g.dx = {r.get_f64(), r.get_f64()};
    g.nt = int(r.get_u32());
    g.dt = r.get_f64();
    g.t0 = r.get_f64();
    g.x0[0] = r.get_f64();
    g.x0[1] = r.get_f64();
    double eps = r.get_f64();
    g.c_ref = r.get_f64();
    g.periodic = {r.get_u8() == 1, r.get_u8() == 1};
    EosSpec eos;
    eos.kind = r.get_u32() == 0 ? EosKind::IdealGas : EosKind::VanDerWaals;
    eos.alpha = r.get_f64();
    eos.k_B = r.get_f64();
    eos.s_0 = r.get_f64();
    eos.a = r.get_f64();
    eos.b = r.get_f64();
    std::uint32_t nfields = r.get_u32();
    std::vector<std::string> names;
    for (std::uint32_t i = 0; i < nfields; ++i) names.push_back(r.get_str());
    std::size_t header_len = std::size_t(r.p - head.data());
    std::uint32_t stored_crc = r.get_u32();
    std::uint32_t crc = crc32(head.data(), header_len);
    if (crc != stored_crc) throw IoError("header checksum mismatch in " + path);
    std::size_t payload_off = header_len + 4;

    auto expected = field_names(g.d);
    if (names != expected) throw IoError("unexpected field list in " + path);

    const int nt_total = g.nt;
    if (t_lo < 0 || t_lo >= nt_total) throw IoError("time window outside file");
    if (nt_window <= 0) nt_window = nt_total - t_lo;
    if (t_lo + nt_window > nt_total) throw IoError("time window outside file");
    const std::size_t slice = std::size_t(g.nx[0]) * g.nx[1];

    Grid gw = g;
    gw.nt = nt_window;
    gw.t0 = g.t0 + t_lo * g.dt;
    gw.validate();
    ReadResult res{FieldBlock(gw), eos};
    res.block.eps = eps;

    auto read_field = [&](Field& dst, int field_index) {
        std::uint64_t base = payload_off +
                             (std::uint64_t(field_index) * nt_total + t_lo) * slice * 8;
        f.seekg(std::streamoff(base));
        f.read(reinterpret_cast<char*>(dst.a.data()),
               std::streamsize(dst.a.size() * 8));
        if (std::size_t(f.gcount()) != dst.a.size() * 8)
            throw IoError("snapshot payload truncated in " + path);
        if (!detail::host_is_little_endian()) {
            for (double& v : dst.a) {
                std::uint64_t u;
                std::memcpy(&u, &v, 8);
                std::uint64_t s = 0;
                for (int i = 0; i < 8; ++i) s |= ((u >> (8 * i)) & 0xff) << (8 * (7 - i));
                std::memcpy(&v, &s, 8);
            }
        }
    };
    read_field(res.block.rho, 0);
    read_field(res.block.u, 1);
    read_field(res.block.v[0], 2);
    if (g.d == 2) read_field(res.block.v[1], 3);
    res.block.check_finite_and_floored(eos.rho_floor);
    return res;
}

}  // namespace osgf

}  // namespace onsager
