#pragma once
// Core data model: grids, index boxes, fields on boxes, error types and
// small shared utilities used by every other header.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace onsager {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define ONSAGER_ERROR_TYPE(Name)                                         \
    struct Name : Error {                                                \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

ONSAGER_ERROR_TYPE(StateOutsideValidity);
ONSAGER_ERROR_TYPE(ShiftExceedsMargin);
ONSAGER_ERROR_TYPE(ScaleUnresolved);
ONSAGER_ERROR_TYPE(ScaleExceedsMargin);
ONSAGER_ERROR_TYPE(RequiresViscousData);
ONSAGER_ERROR_TYPE(EmptyDomain);
ONSAGER_ERROR_TYPE(SupportExceedsValidRegion);
ONSAGER_ERROR_TYPE(NoAdmissibleSolution);
ONSAGER_ERROR_TYPE(ShootingFailed);
ONSAGER_ERROR_TYPE(CflViolation);
ONSAGER_ERROR_TYPE(NegativeDensityOrPressure);
ONSAGER_ERROR_TYPE(WouldShockInWindow);
ONSAGER_ERROR_TYPE(InsufficientScalingRange);
ONSAGER_ERROR_TYPE(NonConvergentSeries);
ONSAGER_ERROR_TYPE(InsufficientScan);
ONSAGER_ERROR_TYPE(UnresolvedRun);
ONSAGER_ERROR_TYPE(ConfigError);
ONSAGER_ERROR_TYPE(IoError);

#undef ONSAGER_ERROR_TYPE

// ---------------------------------------------------------------------------
// Grid: uniform tensor grid in space (d = 1 or 2) x time.
// Axis order everywhere is (x, y, t); for d = 1 the y axis has extent 1.
// The space-time metric for shifts and kernel supports is
// |R| = sqrt(|r|^2 + (c_ref*tau)^2).
// ---------------------------------------------------------------------------

struct Grid {
    int d = 1;
    std::array<int, 2> nx{2, 1};
    std::array<double, 2> dx{1.0, 1.0};
    int nt = 2;
    double dt = 1.0;
    std::array<bool, 2> periodic{false, false};
    double c_ref = 1.0;
    double x0[2] = {0.0, 0.0};  // physical coordinate of cell 0 center
    double t0 = 0.0;

    void validate() const {
        if (d < 1 || d > 2) throw ConfigError("grid dimension must be 1 or 2");
        for (int k = 0; k < d; ++k) {
            if (nx[k] < 2) throw ConfigError("grid.nx must be >= 2");
            if (!(dx[k] > 0)) throw ConfigError("grid.dx must be positive");
        }
        if (d == 1 && nx[1] != 1) throw ConfigError("grid.nx[1] must be 1 when d=1");
        if (nt < 2) throw ConfigError("grid.nt must be >= 2");
        if (!(dt > 0)) throw ConfigError("grid.dt must be positive");
        if (!(c_ref > 0)) throw ConfigError("grid.c_ref must be positive");
    }

    std::size_t size() const {
        return std::size_t(nx[0]) * std::size_t(nx[1]) * std::size_t(nt);
    }
    // time-major layout: time blocks of space slices, row-major in space
    std::size_t idx(int ix, int iy, int it) const {
        return (std::size_t(it) * nx[1] + iy) * nx[0] + ix;
    }
    double x(int ix) const { return x0[0] + ix * dx[0]; }
    double y(int iy) const { return x0[1] + iy * dx[1]; }
    double t(int it) const { return t0 + it * dt; }
    // metric length of a lattice shift (rx, ry, rt)
    double shift_norm(int rx, int ry, int rt) const {
        double sx = rx * dx[0];
        double sy = (d == 2) ? ry * dx[1] : 0.0;
        double st = c_ref * rt * dt;
        return std::sqrt(sx * sx + sy * sy + st * st);
    }
    double cell_measure() const {
        double m = dx[0] * dt;
        if (d == 2) m *= dx[1];
        return m;
    }
};

// ---------------------------------------------------------------------------
// Box: half-open index box [lo, hi) over (x, y, t) in global grid indices.
// Used both for field storage extents and for analysis subdomains.
// ---------------------------------------------------------------------------

struct Box {
    std::array<int, 3> lo{0, 0, 0};
    std::array<int, 3> hi{0, 0, 0};

    static Box full(const Grid& g) {
        return Box{{0, 0, 0}, {g.nx[0], g.nx[1], g.nt}};
    }
    int extent(int axis) const { return hi[axis] - lo[axis]; }
    bool empty() const {
        return extent(0) <= 0 || extent(1) <= 0 || extent(2) <= 0;
    }
    std::size_t count() const {
        if (empty()) return 0;
        return std::size_t(extent(0)) * extent(1) * extent(2);
    }
    bool contains(const Box& inner) const {
        for (int a = 0; a < 3; ++a)
            if (inner.lo[a] < lo[a] || inner.hi[a] > hi[a]) return false;
        return true;
    }
    Box shrunk(const std::array<int, 3>& r) const {
        Box b = *this;
        for (int a = 0; a < 3; ++a) {
            b.lo[a] += r[a];
            b.hi[a] -= r[a];
        }
        return b;
    }
    Box intersect(const Box& o) const {
        Box b;
        for (int a = 0; a < 3; ++a) {
            b.lo[a] = std::max(lo[a], o.lo[a]);
            b.hi[a] = std::min(hi[a], o.hi[a]);
        }
        return b;
    }
    bool operator==(const Box& o) const { return lo == o.lo && hi == o.hi; }
};

// Physical margin of a box to the data boundary, in metric units, ignoring
// periodic axes (shifts wrap there).
inline double metric_margin(const Grid& g, const Box& data, const Box& inner) {
    double m = std::numeric_limits<double>::infinity();
    auto upd = [&](double v) { m = std::min(m, v); };
    if (!g.periodic[0]) {
        upd((inner.lo[0] - data.lo[0]) * g.dx[0]);
        upd((data.hi[0] - inner.hi[0]) * g.dx[0]);
    }
    if (g.d == 2 && !g.periodic[1]) {
        upd((inner.lo[1] - data.lo[1]) * g.dx[1]);
        upd((data.hi[1] - inner.hi[1]) * g.dx[1]);
    }
    upd((inner.lo[2] - data.lo[2]) * g.dt * g.c_ref);
    upd((data.hi[2] - inner.hi[2]) * g.dt * g.c_ref);
    return m;
}

// ---------------------------------------------------------------------------
// Field: scalar values on a Box, indexed with global grid indices.
// ---------------------------------------------------------------------------

struct Field {
    Box box;
    std::vector<double> a;

    Field() = default;
    explicit Field(const Box& b, double fill = 0.0) : box(b), a(b.count(), fill) {}

    std::size_t offset(int ix, int iy, int it) const {
        return (std::size_t(it - box.lo[2]) * box.extent(1) + (iy - box.lo[1])) *
                   box.extent(0) +
               (ix - box.lo[0]);
    }
    double& at(int ix, int iy, int it) { return a[offset(ix, iy, it)]; }
    double at(int ix, int iy, int it) const { return a[offset(ix, iy, it)]; }

    Field& operator+=(const Field& o) { bin(o, [](double& x, double y) { x += y; }); return *this; }
    Field& operator-=(const Field& o) { bin(o, [](double& x, double y) { x -= y; }); return *this; }
    Field& operator*=(double c) {
        for (double& x : a) x *= c;
        return *this;
    }

  private:
    template <class F>
    void bin(const Field& o, F f) {
        if (!(o.box == box)) throw Error("field box mismatch");
        for (std::size_t i = 0; i < a.size(); ++i) f(a[i], o.a[i]);
    }
};

template <class F>
inline void for_each_cell(const Box& b, F f) {
    for (int it = b.lo[2]; it < b.hi[2]; ++it)
        for (int iy = b.lo[1]; iy < b.hi[1]; ++iy)
            for (int ix = b.lo[0]; ix < b.hi[0]; ++ix) f(ix, iy, it);
}

inline Field map_field(const Field& x, const std::function<double(double)>& f) {
    Field r(x.box);
    for (std::size_t i = 0; i < x.a.size(); ++i) r.a[i] = f(x.a[i]);
    return r;
}

// ---------------------------------------------------------------------------
// Small utilities
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Deterministic uniform doubles in [0,1) from a 64-bit mix (library-agnostic).
struct Rng {
    std::uint64_t s;
    explicit Rng(std::uint64_t seed) : s(seed ? seed : 0x9e3779b97f4a7c15ULL) {}
    std::uint64_t next_u64() {
        s += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
};

// Fixed-partition parallel loop over [0, n); results must be written to
// disjoint slots so any thread count gives identical output. The first
// exception thrown by a worker is rethrown on the calling thread.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t, std::size_t)>& body) {
    if (threads <= 1 || n < 2) {
        body(0, n);
        return;
    }
    int nw = int(std::min<std::size_t>(threads, n));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(nw);
    pool.reserve(nw);
    for (int w = 0; w < nw; ++w) {
        std::size_t b = n * w / nw, e = n * (w + 1) / nw;
        pool.emplace_back([=, &errs] {
            try {
                body(b, e);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

inline std::uint32_t crc32(const void* data, std::size_t n, std::uint32_t seed = 0) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = ~seed;
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) c = table[(c ^ p[i]) & 0xff] ^ (c >> 8);
    return ~c;
}

}  // namespace onsager
