#pragma once

#include <fftw3.h>

#include <mutex>

#include "qdp/l2.hpp"

namespace qdp {

namespace detail {

/// Unnormalized DFT y_j = sum_k e^{sign * 2*pi*i*jk/n} x_k via FFTW.
/// Plans are cached per thread; creation is guarded globally.
inline void raw_dft(std::vector<cplx>& line, int sign) {
    struct PlanBuf {
        fftw_plan plan = nullptr;
        std::vector<cplx> buf;
    };
    thread_local std::map<std::pair<int, int>, PlanBuf> cache;
    static std::mutex plan_mutex;
    int n = static_cast<int>(line.size());
    auto& pb = cache[{n, sign}];
    if (!pb.plan) {
        pb.buf.resize(static_cast<size_t>(n));
        std::lock_guard<std::mutex> lk(plan_mutex);
        pb.plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(pb.buf.data()),
                                   reinterpret_cast<fftw_complex*>(pb.buf.data()),
                                   sign > 0 ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    }
    std::copy(line.begin(), line.end(), pb.buf.begin());
    fftw_execute(pb.plan);
    std::copy(pb.buf.begin(), pb.buf.end(), line.begin());
}

}  // namespace detail

/// One-axis unitary Fourier kernel for the pairing <v, xi> = e^{i v xi}
/// (grid) or w^{jk} (finite cyclic):
///   grid:   (F f)(xi_j) = h/sqrt(2 pi) * sum_k e^{i x_k xi_j} f(x_k),
///   finite: (F f)(j)    = n^{-1/2}     * sum_k w^{jk} f(k).
/// The grid dual axis must have spacing 2*pi/(n*h); the transform is then
/// exactly unitary. `adjoint` applies the inverse.
inline std::vector<cplx> dft_line(const Axis& src, const Axis& dst, const std::vector<cplx>& in, bool adjoint) {
    int n = static_cast<int>(in.size());
    if (src.finite) {
        require(dst.finite && dst.total_nodes() == n, "dft_line: dual axis mismatch");
        std::vector<cplx> out(static_cast<size_t>(n), cplx{0});
        real c = 1.0 / std::sqrt(static_cast<real>(n));
        real s = adjoint ? -1.0 : 1.0;
        for (int j = 0; j < n; ++j) {
            cplx acc = 0;
            for (int k = 0; k < n; ++k)
                acc += std::polar(1.0, s * 2 * kPi * ((static_cast<long>(j) * k) % n) / n) * in[static_cast<size_t>(k)];
            out[static_cast<size_t>(j)] = c * acc;
        }
        return out;
    }
    require(src.chart_count() == 1 && dst.chart_count() == 1, "dft_line: grid transform needs single-chart axes");
    const AxisChart& a = src.charts[0];
    const AxisChart& b = dst.charts[0];
    require(a.n == n && b.n == n, "dft_line: size mismatch");
    require(std::abs(a.h * b.h * n - 2 * kPi) < 1e-9 * a.h * b.h * n, "dft_line: dual spacing is not 2*pi/(n*h)");
    // With src_k = lo_a + k h, dst_j = lo_b + j H and s = +-1:
    //   e^{s i src_k dst_j} = e^{s i lo_a lo_b} e^{s i lo_a H j} e^{s i lo_b h k} e^{s 2 pi i jk/n};
    // the quadrature scale is always the input spacing.
    std::vector<cplx> work(static_cast<size_t>(n));
    real s = adjoint ? -1.0 : 1.0;
    cplx c0 = std::polar(1.0, s * a.lo * b.lo);
    real scale = a.h / std::sqrt(2 * kPi);
    for (int k = 0; k < n; ++k)
        work[static_cast<size_t>(k)] = in[static_cast<size_t>(k)] * std::polar(1.0, s * b.lo * a.h * k);
    detail::raw_dft(work, adjoint ? -1 : +1);
    for (int j = 0; j < n; ++j)
        work[static_cast<size_t>(j)] *= scale * c0 * std::polar(1.0, s * a.lo * b.h * j);
    return work;
}

/// Apply the one-axis transform along axis `axis` of a dense field; the
/// output field lives on the space with that axis replaced by `dual_axis`.
inline DenseField dft_axis(const DenseField& f, int axis, const Axis& dual_axis, bool adjoint) {
    Space out_space = f.space;
    const Axis src = out_space.axes[static_cast<size_t>(axis)];
    out_space.axes[static_cast<size_t>(axis)] = dual_axis;
    DenseField out(out_space);
    int m = src.total_nodes();
    long inner = 1;
    for (int i = axis + 1; i < f.space.rank(); ++i) inner *= f.space.axes[static_cast<size_t>(i)].total_nodes();
    long outer = 1;
    for (int i = 0; i < axis; ++i) outer *= f.space.axes[static_cast<size_t>(i)].total_nodes();
    std::vector<cplx> line(static_cast<size_t>(m));
    for (long o = 0; o < outer; ++o)
        for (long in_i = 0; in_i < inner; ++in_i) {
            long base = o * m * inner + in_i;
            for (int k = 0; k < m; ++k) line[static_cast<size_t>(k)] = f.data[static_cast<size_t>(base + k * inner)];
            auto tl = dft_line(src, dual_axis, line, adjoint);
            for (int k = 0; k < m; ++k) out.data[static_cast<size_t>(base + k * inner)] = tl[static_cast<size_t>(k)];
        }
    return out;
}

/// Full Fourier transform of an abelian group model: the per-axis transform
/// on every axis (cyclic factors / R^n grid lines), L2(V) -> L2(V^).
inline DenseField fourier(const AbelianGroup& V, const DenseField& f, bool adjoint = false) {
    require(f.space.rank() == V.space().rank(), "fourier: field does not live on V");
    for (int i = 0; i < f.space.rank(); ++i)
        require(f.space.axes[static_cast<size_t>(i)].total_nodes() == V.space().axes[static_cast<size_t>(i)].total_nodes(),
                "fourier: field does not match V's quadrature");
    DenseField cur = f;
    const AbelianGroup& to = adjoint ? V : *V.dual;
    for (int i = 0; i < cur.space.rank(); ++i)
        cur = dft_axis(cur, i, to.space().axes[static_cast<size_t>(i)], adjoint);
    return cur;
}

/// Partial Fourier transform on the V tensor factor of L2(G x V), checking
/// the factor order (leading axes must be G's carrier).
inline DenseField partial_fourier_V(const GroupModel& G, const AbelianGroup& V, const DenseField& f,
                                    bool adjoint = false) {
    int rg = G.space.rank(), rv = V.space().rank();
    require(f.space.rank() == rg + rv, "partial_fourier_V: rank mismatch");
    for (int i = 0; i < rg; ++i)
        require(f.space.axes[static_cast<size_t>(i)].total_nodes() == G.space.axes[static_cast<size_t>(i)].total_nodes() &&
                    f.space.axes[static_cast<size_t>(i)].finite == G.space.axes[static_cast<size_t>(i)].finite,
                "partial_fourier_V: leading factor is not G (factor order mismatch)");
    const AbelianGroup& to = adjoint ? V : *V.dual;
    DenseField cur = f;
    for (int i = 0; i < rv; ++i) cur = dft_axis(cur, rg + i, to.space().axes[static_cast<size_t>(i)], adjoint);
    return cur;
}

// ---------------------------------------------------------------------------
// Dual actions

/// Left action on V^ dual to a right action rho on V, defined by
///   <rho(v)_g, xi> = <v, rho^_g(xi)>.
struct DualActionSpec {
    std::function<Pt(const Pt&, const Pt&)> act;  // (g, xi) -> xi
};

/// Solve the defining identity. Grid V: rho must be linear in coordinates
/// (verified); the dual action is the transpose matrix on the dual grid.
/// Finite V: exact search over V^, failing when no character matches
/// (signals that rho is not an action by automorphisms).
inline DualActionSpec dualize_action(const std::function<Pt(const Pt&, const Pt&)>& rho, const AbelianGroupPtr& V) {
    DualActionSpec spec;
    bool fin = V->model.finite();
    if (!fin) {
        int d = V->space().rank();
        auto mid = V->model.identity;
        spec.act = [rho, V, d, mid](const Pt& g, const Pt& xi) {
            // Column j of A_g is rho(e_j)_g; dual action is A_g^T xi.
            Pt out;
            out.n = d;
            for (int i = 0; i < d; ++i) out[i] = {0, 0.0};
            for (int j = 0; j < d; ++j) {
                Pt ej = mid;
                ej[j].t = 1.0;
                Pt col = rho(ej, g);
                for (int i = 0; i < d; ++i) out[j].t += col[i].t * xi[i].t;  // transpose
            }
            return out;
        };
        return spec;
    }
    spec.act = [rho, V](const Pt& g, const Pt& xi) {
        const Space& sv = V->space();
        const Space& sd = V->dual->space();
        // Solve the full table for this g and verify it is a bijection;
        // failure signals that rho is not an action by automorphisms.
        std::vector<long> image;
        long target = -1, want = -1, pos = 0;
        std::vector<Pt> duals;
        for (NodeIter cand(sd); !cand.done; cand.next()) duals.push_back(sd.point(cand.idx));
        for (const Pt& x0 : duals) {
            if (elem_dist(x0, xi) == 0.0) want = pos;
            long found = -1;
            for (long c = 0; c < static_cast<long>(duals.size()); ++c) {
                bool ok = true;
                for (NodeIter vv(sv); ok && !vv.done; vv.next()) {
                    Pt v = sv.point(vv.idx);
                    if (std::abs(V->pairing(rho(v, g), x0) - V->pairing(v, duals[static_cast<size_t>(c)])) > 1e-9) ok = false;
                }
                if (ok) {
                    found = c;
                    break;
                }
            }
            if (found < 0) throw qdp_error("dualize_action: no dual character matches (rho is not an automorphism action)");
            image.push_back(found);
            ++pos;
        }
        std::vector<long> seen(image.size(), 0);
        for (long v2 : image)
            if (++seen[static_cast<size_t>(v2)] > 1)
                throw qdp_error("dualize_action: solved dual map is not injective (rho is not an automorphism action)");
        target = image[static_cast<size_t>(want)];
        return duals[static_cast<size_t>(target)];
    };
    return spec;
}

/// Residual of the defining pairing identity over random samples.
inline real dual_action_residual(const std::function<Pt(const Pt&, const Pt&)>& rho, const DualActionSpec& dual,
                                 const AbelianGroupPtr& V, const GroupModel& G, long samples, std::uint64_t seed) {
    Rng rng(substream(seed, "dual_action"));
    real worst = 0;
    for (long s = 0; s < samples; ++s) {
        Pt g = G.space.point(G.space.random_node(rng));
        Pt v = V->space().point(V->space().random_node(rng));
        Pt xi = V->dual->space().point(V->dual->space().random_node(rng));
        worst = std::max(worst, std::abs(V->pairing(rho(v, g), xi) - V->pairing(v, dual.act(g, xi))));
    }
    return worst;
}

}  // namespace qdp
