#pragma once

#include "qdp/group.hpp"

namespace qdp {

/// Multi-index walker over a space, row-major (last axis fastest).
struct NodeIter {
    const Space* sp;
    std::vector<int> idx;
    bool done = false;

    explicit NodeIter(const Space& s) : sp(&s), idx(static_cast<size_t>(s.rank()), 0) { done = s.total_nodes() == 0; }
    void next() {
        int ax = sp->rank() - 1;
        while (ax >= 0) {
            if (++idx[static_cast<size_t>(ax)] < sp->axes[static_cast<size_t>(ax)].total_nodes()) return;
            idx[static_cast<size_t>(ax)] = 0;
            --ax;
        }
        done = true;
    }
};

/// A materialized complex field on the product quadrature of a space.
struct DenseField {
    Space space;
    std::vector<cplx> data;

    DenseField() = default;
    explicit DenseField(Space s) : space(std::move(s)), data(static_cast<size_t>(space.total_nodes()), cplx{}) {}

    long flat(const std::vector<int>& idx) const {
        long f = 0;
        for (int i = 0; i < space.rank(); ++i) f = f * space.axes[static_cast<size_t>(i)].total_nodes() + idx[static_cast<size_t>(i)];
        return f;
    }
    cplx& at(const std::vector<int>& idx) { return data[static_cast<size_t>(flat(idx))]; }
    const cplx& at(const std::vector<int>& idx) const { return data[static_cast<size_t>(flat(idx))]; }

    real norm2_sq() const {
        real s = 0;
        for (NodeIter it(space); !it.done; it.next()) s += space.weight(it.idx) * std::norm(data[static_cast<size_t>(flat(it.idx))]);
        return s;
    }
    real norm2() const { return std::sqrt(norm2_sq()); }

    cplx inner(const DenseField& o) const {
        cplx s = 0;
        for (NodeIter it(space); !it.done; it.next())
            s += space.weight(it.idx) * data[static_cast<size_t>(flat(it.idx))] * std::conj(o.data[static_cast<size_t>(flat(it.idx))]);
        return s;
    }

    /// Multilinear interpolation at an arbitrary point; nullopt when any axis
    /// stencil is out of window.
    std::optional<cplx> interp(const Pt& p) const {
        std::array<AxisStencil, kMaxAxes> st;
        for (int i = 0; i < space.rank(); ++i) {
            st[static_cast<size_t>(i)] = stencil(space.axes[static_cast<size_t>(i)], p[i]);
            if (st[static_cast<size_t>(i)].m == 0) return std::nullopt;
        }
        cplx acc = 0;
        int corners = 1;
        for (int i = 0; i < space.rank(); ++i) corners *= st[static_cast<size_t>(i)].m;
        std::vector<int> idx(static_cast<size_t>(space.rank()));
        for (int c = 0; c < corners; ++c) {
            int cc = c;
            real w = 1;
            for (int i = space.rank() - 1; i >= 0; --i) {
                int pick = cc % st[static_cast<size_t>(i)].m;
                cc /= st[static_cast<size_t>(i)].m;
                idx[static_cast<size_t>(i)] = st[static_cast<size_t>(i)].idx[pick];
                w *= st[static_cast<size_t>(i)].w[pick];
            }
            acc += w * data[static_cast<size_t>(flat(idx))];
        }
        return acc;
    }

    static DenseField sample(const Space& s, const std::function<cplx(const Pt&)>& f) {
        DenseField out(s);
        for (NodeIter it(s); !it.done; it.next()) out.at(it.idx) = f(s.point(it.idx));
        return out;
    }
};

// ---------------------------------------------------------------------------
// Tensor-product fields
//
// Products of per-axis 1-D sampled factors. Per-axis linear stages (DFTs,
// resamplings, permutations) keep the tensor structure, which is what makes
// the large operator checks affordable: a tensor field is evaluable at any
// point as the product of 1-D interpolants, and multilinear interpolation of
// a product function equals the product of the per-axis interpolations.

struct TensorField {
    Space space;
    std::vector<std::vector<cplx>> fac;  // one 1-D array per axis

    explicit TensorField(Space s) : space(std::move(s)) {
        for (const auto& ax : space.axes) fac.emplace_back(static_cast<size_t>(ax.total_nodes()), cplx{0});
    }

    cplx at_nodes(const std::vector<int>& idx) const {
        cplx z = 1;
        for (int i = 0; i < space.rank(); ++i) z *= fac[static_cast<size_t>(i)][static_cast<size_t>(idx[static_cast<size_t>(i)])];
        return z;
    }
    /// Product of per-axis linear interpolants (= multilinear interpolation).
    std::optional<cplx> interp(const Pt& p) const {
        cplx z = 1;
        for (int i = 0; i < space.rank(); ++i) {
            AxisStencil st = stencil(space.axes[static_cast<size_t>(i)], p[i]);
            if (st.m == 0) return std::nullopt;
            cplx v = 0;
            for (int k = 0; k < st.m; ++k) v += st.w[k] * fac[static_cast<size_t>(i)][static_cast<size_t>(st.idx[k])];
            z *= v;
        }
        return z;
    }
    real norm2_sq() const {
        real s = 1;
        for (int i = 0; i < space.rank(); ++i) {
            const Axis& ax = space.axes[static_cast<size_t>(i)];
            real t = 0;
            for (int k = 0; k < ax.total_nodes(); ++k) t += ax.weight(k) * std::norm(fac[static_cast<size_t>(i)][static_cast<size_t>(k)]);
            s *= t;
        }
        return s;
    }
    real norm2() const { return std::sqrt(norm2_sq()); }

    DenseField to_dense() const {
        DenseField out(space);
        for (NodeIter it(space); !it.done; it.next()) out.at(it.idx) = at_nodes(it.idx);
        return out;
    }
};

/// Band-limited random test vector: per grid axis a Gaussian times a low-order
/// Hermite polynomial, centered well inside the window; per finite axis a
/// random unit-magnitude-ish complex vector. Deterministic in the rng stream.
inline TensorField random_test_vector(const Space& s, Rng& rng) {
    TensorField f(s);
    for (int i = 0; i < s.rank(); ++i) {
        const Axis& ax = s.axes[static_cast<size_t>(i)];
        auto& v = f.fac[static_cast<size_t>(i)];
        if (ax.finite) {
            for (auto& z : v) z = cplx(urand(rng, -1, 1), urand(rng, -1, 1));
            continue;
        }
        // One set of parameters per chart.
        for (int c = 0; c < ax.chart_count(); ++c) {
            const AxisChart& ch = ax.charts[static_cast<size_t>(c)];
            real L = 0.5 * (ch.hi() - ch.lo);
            real cen = ch.lo + L + urand(rng, -0.15, 0.15) * 2 * L;
            real sig = urand(rng, L / 6, L / 4);
            int herm = irand(rng, 0, 2);
            cplx amp = std::polar(urand(rng, 0.5, 1.0), urand(rng, 0.0, 2 * kPi));
            int off = ax.chart_offset(c);
            for (int k = 0; k < ch.n; ++k) {
                real z = (ch.node(k) - cen) / sig;
                real h = herm == 0 ? 1.0 : (herm == 1 ? z : z * z - 1);
                v[static_cast<size_t>(off + k)] = amp * h * std::exp(-0.5 * z * z);
            }
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// L2 pushforward along a measure class isomorphism

/// f |-> (f o inverse) * rn(inverse(.))^{-1/2}, resampled on the target
/// quadrature; preserves the L2 norm up to interpolation error. Masked target
/// nodes (inverse lands outside the source window or in the singular set) are
/// zeroed and counted.
struct PushforwardResult {
    DenseField field;
    real masked_fraction = 0;
    long masked_nodes = 0;
};

inline PushforwardResult pushforward_L2(const MeasureClassIso& iso, const DenseField& f, const Space& target) {
    PushforwardResult out;
    out.field = DenseField(target);
    real wmask = 0, wtot = 0;
    for (NodeIter it(target); !it.done; it.next()) {
        Pt y = target.point(it.idx);
        real w = target.weight(it.idx);
        wtot += w;
        if (!iso.dst_ok(y)) {
            ++out.masked_nodes;
            wmask += w;
            continue;
        }
        Pt x = iso.inv(y);
        if (!iso.src_ok(x) || !f.space.in_window(x)) {
            ++out.masked_nodes;
            wmask += w;
            continue;
        }
        auto v = f.interp(x);
        if (!v) {
            ++out.masked_nodes;
            wmask += w;
            continue;
        }
        out.field.at(it.idx) = *v / std::sqrt(iso.rn_density(x));
    }
    out.masked_fraction = wtot > 0 ? wmask / wtot : 0;
    return out;
}

}  // namespace qdp
