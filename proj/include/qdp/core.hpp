#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdp {

using real = double;
using cplx = std::complex<double>;

inline constexpr real kPi = 3.14159265358979323846264338327950288;

// Fixed capacity for coordinate tuples. The largest product space in the
// catalog is X^3 for a 3-axis X (9 axes).
inline constexpr int kMaxAxes = 12;

/// A point on one axis: chart component plus chart coordinate.
/// Finite axes use chart 0 and integer-valued t (the element index).
struct AxisPt {
    std::int32_t chart = 0;
    real t = 0.0;
};

/// A point in a product of axes.
struct Pt {
    std::array<AxisPt, kMaxAxes> c{};
    int n = 0;

    AxisPt& operator[](int i) { return c[static_cast<size_t>(i)]; }
    const AxisPt& operator[](int i) const { return c[static_cast<size_t>(i)]; }

    static Pt concat(const Pt& a, const Pt& b) {
        Pt r = a;
        for (int i = 0; i < b.n; ++i) r.c[static_cast<size_t>(r.n++)] = b.c[static_cast<size_t>(i)];
        return r;
    }
    Pt slice(int lo, int len) const {
        Pt r;
        r.n = len;
        for (int i = 0; i < len; ++i) r.c[static_cast<size_t>(i)] = c[static_cast<size_t>(lo + i)];
        return r;
    }
};

inline Pt pt1(std::int32_t chart, real t) {
    Pt p;
    p.n = 1;
    p.c[0] = {chart, t};
    return p;
}

/// Deterministic RNG stream: every check derives its stream from the run seed
/// and its own label so result bytes do not depend on check ordering.
inline std::uint64_t substream(std::uint64_t seed, const std::string& label) {
    std::uint64_t h = 1469598103934665603ull ^ seed;
    for (unsigned char ch : label) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

using Rng = std::mt19937_64;

inline real urand(Rng& r, real lo, real hi) {
    return std::uniform_real_distribution<real>(lo, hi)(r);
}
inline int irand(Rng& r, int lo, int hi) {  // inclusive
    return std::uniform_int_distribution<int>(lo, hi)(r);
}

// ---------------------------------------------------------------------------
// Residual reports

struct CheckEntry {
    std::string check;
    real residual = 0.0;
    real tolerance = 0.0;
    bool pass = false;
    real masked_fraction = 0.0;
    std::map<std::string, std::string> params;

    static CheckEntry bound(const std::string& id, real res, real tol) {
        CheckEntry e;
        e.check = id;
        e.residual = res;
        e.tolerance = tol;
        e.pass = res <= tol;
        return e;
    }
    /// Negative control: detection succeeds when the raw residual exceeds the
    /// threshold. Reported as a margin so that pass <=> residual <= tolerance.
    static CheckEntry detect(const std::string& id, real raw, real threshold) {
        CheckEntry e;
        e.check = id;
        e.residual = raw > threshold ? 0.0 : threshold - raw;
        e.tolerance = 0.0;
        e.pass = raw > threshold;
        e.params["raw_residual"] = format_real(raw);
        e.params["detect_threshold"] = format_real(threshold);
        return e;
    }
    CheckEntry& with(const std::string& k, const std::string& v) {
        params[k] = v;
        return *this;
    }
    CheckEntry& masked(real f) {
        masked_fraction = f;
        return *this;
    }

    static std::string format_real(real x) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return buf;
    }
};

struct ResidualReport {
    std::string suite;
    std::vector<CheckEntry> entries;
    std::map<std::string, std::string> metadata;

    bool all_pass() const {
        for (const auto& e : entries)
            if (!e.pass) return false;
        return true;
    }
    real max_residual() const {
        real m = 0;
        for (const auto& e : entries) m = std::max(m, e.residual);
        return m;
    }
    void add(CheckEntry e) { entries.push_back(std::move(e)); }
    void merge(const ResidualReport& o) {
        for (const auto& e : o.entries) entries.push_back(e);
        for (const auto& [k, v] : o.metadata) metadata.emplace(k, v);
    }
    const CheckEntry* find(const std::string& id) const {
        for (const auto& e : entries)
            if (e.check == id) return &e;
        return nullptr;
    }
};

struct qdp_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw qdp_error(msg);
}

}  // namespace qdp
