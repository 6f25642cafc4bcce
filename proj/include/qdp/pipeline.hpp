#pragma once

#include "qdp/fourier.hpp"
#include "qdp/operators.hpp"

namespace qdp {

// ---------------------------------------------------------------------------
// Per-axis stages
//
// The half-transforms and Poisson-Fourier transforms factor into stages that
// act on a single axis (1-D Fourier kernels, eta resamplings) plus axis
// permutations. Tensor-product fields stay tensor products under all of
// them, and chains of the form [per-axis] o [point-phase] o [per-axis] can
// be evaluated block-streamed with memory bounded by the final Fourier band.

struct AxisStage {
    enum Kind { kPointPhase, kDft };
    Kind kind = kPointPhase;
    int axis = 0;
    PointPhaseOp pp;  // rank-1 in/out spaces
    Axis dft_src, dft_dst;
    bool dft_adjoint = false;

    const Axis& axis_in() const { return kind == kDft ? dft_src : pp.in_space.axes[0]; }
    const Axis& axis_out() const { return kind == kDft ? dft_dst : pp.out_space.axes[0]; }
};

struct TensorStage {
    enum Kind { kAxis, kPerm, kBlockPp };
    Kind kind = kAxis;
    AxisStage st;
    std::vector<int> perm_from;   // out axis i carries in axis perm_from[i]
    PointPhaseOp bpp;             // joint point-phase on a set of axes
    std::vector<int> bpp_axes;
};

inline TensorStage make_perm_stage(const std::vector<int>& from) {
    TensorStage t;
    t.kind = TensorStage::kPerm;
    t.perm_from = from;
    return t;
}
inline TensorStage make_axis_stage(AxisStage st) {
    TensorStage t;
    t.st = std::move(st);
    return t;
}
inline TensorStage make_block_stage(PointPhaseOp pp, std::vector<int> axes) {
    TensorStage t;
    t.kind = TensorStage::kBlockPp;
    t.bpp = std::move(pp);
    t.bpp_axes = std::move(axes);
    return t;
}

inline AxisStage dft_stage(int axis, const Axis& src, const Axis& dst, bool adjoint) {
    AxisStage s;
    s.kind = AxisStage::kDft;
    s.axis = axis;
    s.dft_src = src;
    s.dft_dst = dst;
    s.dft_adjoint = adjoint;
    return s;
}

/// Pushforward stage along a 1-D measure class isomorphism eta: src -> dst:
///   (eta_* f)(y) = f(eta^{-1} y) rn(eta^{-1} y)^{-1/2}.
inline AxisStage push_stage(int axis, const MeasureClassIso& eta, const Axis& src, const Axis& dst) {
    AxisStage s;
    s.axis = axis;
    s.pp.in_space.axes = {src};
    s.pp.out_space.axes = {dst};
    auto e = std::make_shared<MeasureClassIso>(eta);
    s.pp.fwd = [e](const Pt& y) -> std::optional<Pt> {
        if (!e->dst_ok(y)) return std::nullopt;
        Pt x = e->inv(y);
        if (!e->src_ok(x)) return std::nullopt;
        return x;
    };
    s.pp.bwd = [e](const Pt& x) -> std::optional<Pt> {
        if (!e->src_ok(x)) return std::nullopt;
        return e->fwd(x);
    };
    s.pp.jac = [e](const Pt& y) {
        if (!e->dst_ok(y)) return 1.0;
        return 1.0 / e->rn_density(e->inv(y));
    };
    return s;
}

/// Pullback stage eta^* = (eta_*)^{-1} = (eta_*)^adjoint:
///   (eta^* f)(x) = f(eta x) rn(x)^{1/2}.
inline AxisStage pull_stage(int axis, const MeasureClassIso& eta, const Axis& src, const Axis& dst) {
    AxisStage s;
    s.axis = axis;
    s.pp.in_space.axes = {dst};  // reads on the eta-image side
    s.pp.out_space.axes = {src};
    auto e = std::make_shared<MeasureClassIso>(eta);
    s.pp.fwd = [e](const Pt& x) -> std::optional<Pt> {
        if (!e->src_ok(x)) return std::nullopt;
        return e->fwd(x);
    };
    s.pp.bwd = [e](const Pt& y) -> std::optional<Pt> {
        if (!e->dst_ok(y)) return std::nullopt;
        return e->inv(y);
    };
    s.pp.jac = [e](const Pt& x) { return e->src_ok(x) ? e->rn_density(x) : 1.0; };
    return s;
}

/// 1-D line application of an axis stage: samples on the out-axis nodes,
/// reading the input line (sampled on the in-axis nodes) by interpolation.
/// Masked reads produce zeros and report their weight.
inline std::vector<cplx> apply_stage_line(const AxisStage& st, const std::vector<cplx>& line, real* masked_w = nullptr) {
    if (st.kind == AxisStage::kDft) return dft_line(st.dft_src, st.dft_dst, line, st.dft_adjoint);
    const Axis& ain = st.pp.in_space.axes[0];
    const Axis& aout = st.pp.out_space.axes[0];
    std::vector<cplx> out(static_cast<size_t>(aout.total_nodes()), cplx{0});
    for (int j = 0; j < aout.total_nodes(); ++j) {
        Pt y = pt1(aout.point(j).chart, aout.point(j).t);
        auto x = st.pp.fwd(y);
        if (!x) {
            if (masked_w) *masked_w += aout.weight(j);
            continue;
        }
        AxisStencil sten = stencil(ain, (*x)[0]);
        if (sten.m == 0) {
            if (masked_w) *masked_w += aout.weight(j);
            continue;
        }
        cplx v = 0;
        for (int k = 0; k < sten.m; ++k) v += sten.w[k] * line[static_cast<size_t>(sten.idx[k])];
        out[static_cast<size_t>(j)] = st.pp.phase_at(y) * std::sqrt(st.pp.jac_at(y)) * v;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Per-axis pipelines

struct L2Map {
    Space in_space;
    Space out_space;
    std::vector<TensorStage> stages;

    static L2Map identity(const Space& s) {
        L2Map m;
        m.in_space = m.out_space = s;
        return m;
    }
    L2Map& then_axis(AxisStage st) {
        if (out_space.axes.empty()) out_space = in_space;
        out_space.axes[static_cast<size_t>(st.axis)] = st.axis_out();
        stages.push_back(make_axis_stage(std::move(st)));
        return *this;
    }
    L2Map& then_perm(const std::vector<int>& from) {
        if (out_space.axes.empty()) out_space = in_space;
        Space ns;
        ns.axes.resize(out_space.axes.size());
        for (size_t i = 0; i < from.size(); ++i) ns.axes[i] = out_space.axes[static_cast<size_t>(from[i])];
        out_space = ns;
        stages.push_back(make_perm_stage(from));
        return *this;
    }
    /// Joint point-phase on a subset of axes; pp's in/out spaces list the
    /// axes it reads and produces (same positions, possibly new axes).
    L2Map& then_block(PointPhaseOp pp, const std::vector<int>& axes) {
        if (out_space.axes.empty()) out_space = in_space;
        for (size_t i = 0; i < axes.size(); ++i)
            out_space.axes[static_cast<size_t>(axes[i])] = pp.out_space.axes[i];
        stages.push_back(make_block_stage(std::move(pp), axes));
        return *this;
    }
};

inline TensorField apply_tensor(const L2Map& map, const TensorField& f) {
    TensorField cur = f;
    for (const auto& ts : map.stages) {
        if (ts.kind == TensorStage::kPerm) {
            TensorField nf(cur.space);
            Space ns;
            ns.axes.resize(cur.space.axes.size());
            for (size_t i = 0; i < ts.perm_from.size(); ++i) ns.axes[i] = cur.space.axes[static_cast<size_t>(ts.perm_from[i])];
            nf.space = ns;
            for (size_t i = 0; i < ts.perm_from.size(); ++i) nf.fac[i] = cur.fac[static_cast<size_t>(ts.perm_from[i])];
            cur = std::move(nf);
            continue;
        }
        require(ts.kind == TensorStage::kAxis, "apply_tensor: joint stages do not preserve tensor structure");
        const AxisStage& st = ts.st;
        cur.fac[static_cast<size_t>(st.axis)] = apply_stage_line(st, cur.fac[static_cast<size_t>(st.axis)]);
        cur.space.axes[static_cast<size_t>(st.axis)] = st.axis_out();
    }
    return cur;
}

/// Joint point-phase gather on a subset of axes of a dense field.
inline DenseField apply_block_pp_dense(const PointPhaseOp& pp, const std::vector<int>& axes, const DenseField& f,
                                       real* masked_w = nullptr) {
    Space out_space = f.space;
    for (size_t i = 0; i < axes.size(); ++i) out_space.axes[static_cast<size_t>(axes[i])] = pp.out_space.axes[i];
    DenseField out(out_space);
    int k = static_cast<int>(axes.size());
    for (NodeIter it(out_space); !it.done; it.next()) {
        Pt x = out_space.point(it.idx);
        Pt sub;
        sub.n = k;
        for (int i = 0; i < k; ++i) sub[i] = x[axes[static_cast<size_t>(i)]];
        auto t = pp.fwd(sub);
        if (!t) {
            if (masked_w) *masked_w += out_space.weight(it.idx);
            continue;
        }
        Pt src = x;
        for (int i = 0; i < k; ++i) src[axes[static_cast<size_t>(i)]] = (*t)[i];
        auto v = f.interp(src);
        if (!v) {
            if (masked_w) *masked_w += out_space.weight(it.idx);
            continue;
        }
        out.at(it.idx) = pp.phase_at(sub) * std::sqrt(pp.jac_at(sub)) * *v;
    }
    return out;
}

inline DenseField apply_dense(const L2Map& map, const DenseField& f, real* masked_w = nullptr) {
    DenseField cur = f;
    for (const auto& ts : map.stages) {
        if (ts.kind == TensorStage::kPerm) {
            PointPhaseOp p = axis_permutation(cur.space, ts.perm_from);
            auto r = apply_dense(p, cur);
            cur = std::move(r.field);
            continue;
        }
        if (ts.kind == TensorStage::kBlockPp) {
            cur = apply_block_pp_dense(ts.bpp, ts.bpp_axes, cur, masked_w);
            continue;
        }
        const AxisStage& st = ts.st;
        if (st.kind == AxisStage::kDft) {
            cur = dft_axis(cur, st.axis, st.dft_dst, st.dft_adjoint);
            continue;
        }
        // line-wise point-phase along the axis
        Space out_space = cur.space;
        out_space.axes[static_cast<size_t>(st.axis)] = st.axis_out();
        DenseField out(out_space);
        int m_in = cur.space.axes[static_cast<size_t>(st.axis)].total_nodes();
        int m_out = out_space.axes[static_cast<size_t>(st.axis)].total_nodes();
        long inner = 1;
        for (int i = st.axis + 1; i < cur.space.rank(); ++i) inner *= cur.space.axes[static_cast<size_t>(i)].total_nodes();
        long outer = 1;
        for (int i = 0; i < st.axis; ++i) outer *= cur.space.axes[static_cast<size_t>(i)].total_nodes();
        std::vector<cplx> line(static_cast<size_t>(m_in));
        for (long o = 0; o < outer; ++o)
            for (long ii = 0; ii < inner; ++ii) {
                for (int k = 0; k < m_in; ++k)
                    line[static_cast<size_t>(k)] = cur.data[static_cast<size_t>((o * m_in + k) * inner + ii)];
                auto tl = apply_stage_line(st, line, masked_w);
                for (int k = 0; k < m_out; ++k)
                    out.data[static_cast<size_t>((o * m_out + k) * inner + ii)] = tl[static_cast<size_t>(k)];
            }
        cur = std::move(out);
    }
    return cur;
}

// ---------------------------------------------------------------------------
// Blocked chain comparison
//
// A chain is  [post per-axis stages] o [one point-phase gather] o [pre].
// Both chains must end on the same space, with all post stages confined to a
// common "band" of axes. The residual is accumulated block by block: for each
// setting of the outer coordinates, the mid values are tabulated on the band
// lattice (reading the pre-transformed tensor input through interpolation)
// and the post stages run line-wise on the block. Memory is O(band size).

struct OpChain {
    L2Map pre;                      // tensor-safe stage list
    PointPhaseOp mid;
    std::vector<TensorStage> post;  // confined to the band axes
    Space final_space() const {
        Space s = mid.out_space;
        for (const auto& ts : post) {
            if (ts.kind == TensorStage::kAxis) {
                s.axes[static_cast<size_t>(ts.st.axis)] = ts.st.axis_out();
            } else if (ts.kind == TensorStage::kBlockPp) {
                for (size_t i = 0; i < ts.bpp_axes.size(); ++i)
                    s.axes[static_cast<size_t>(ts.bpp_axes[i])] = ts.bpp.out_space.axes[i];
            }
        }
        return s;
    }
};

struct ChainCompareResult {
    real residual = 0;
    real masked_fraction = 0;
};

namespace detail {

struct BlockEval {
    const OpChain* chain;
    const TensorField* u;  // pre-transformed input
    Space band_mid;        // band axes in mid.out_space order
    std::vector<int> band;

    /// Tabulate mid on the band lattice at fixed outer coords, then run post.
    DenseField eval(const Pt& outer_pt, const std::vector<int>& outer_axes, real* masked_w) const {
        DenseField block(band_mid);
        for (NodeIter it(band_mid); !it.done; it.next()) {
            Pt x;
            x.n = chain->mid.out_space.rank();
            for (size_t k = 0; k < outer_axes.size(); ++k) x[outer_axes[k]] = outer_pt[static_cast<int>(k)];
            for (size_t k = 0; k < band.size(); ++k)
                x[band[k]] = band_mid.axes[k].point(it.idx[k]);
            auto t = chain->mid.fwd(x);
            std::optional<cplx> v = t ? u->interp(*t) : std::nullopt;
            if (!v) {
                if (masked_w) *masked_w += band_mid.weight(it.idx);
                continue;
            }
            block.at(it.idx) = chain->mid.phase_at(x) * std::sqrt(chain->mid.jac_at(x)) * *v;
        }
        // post stages, re-indexed to block-local axes
        for (const auto& ts : chain->post) {
            if (ts.kind == TensorStage::kBlockPp) {
                std::vector<int> local_axes;
                for (int a : ts.bpp_axes) {
                    auto pos = std::find(band.begin(), band.end(), a);
                    require(pos != band.end(), "blocked chain: post stage outside the band");
                    local_axes.push_back(static_cast<int>(pos - band.begin()));
                }
                block = apply_block_pp_dense(ts.bpp, local_axes, block, masked_w);
                continue;
            }
            require(ts.kind == TensorStage::kAxis, "blocked chain: unsupported post stage");
            AxisStage local = ts.st;
            auto pos = std::find(band.begin(), band.end(), ts.st.axis);
            require(pos != band.end(), "blocked chain: post stage outside the band");
            local.axis = static_cast<int>(pos - band.begin());
            L2Map one;
            one.in_space = block.space;
            one.then_axis(local);
            block = apply_dense(one, block, masked_w);
        }
        return block;
    }
};

}  // namespace detail

/// Relative residual ||A xi - B xi|| / ||xi|| over random tensor test vectors,
/// block-streamed over the band axes. Outer coordinates are enumerated when
/// few, otherwise sampled (same-sample differencing between the two chains).
inline ChainCompareResult compare_chains_blocked(const OpChain& A, const OpChain& B, const std::vector<int>& band,
                                                 int n_vectors, long full_threshold, long n_blocks,
                                                 std::uint64_t seed, const std::string& label) {
    Space outA = A.final_space(), outB = B.final_space();
    require(outA.rank() == outB.rank(), "compare_chains_blocked: output rank mismatch");
    for (int i = 0; i < outA.rank(); ++i)
        require(outA.axes[static_cast<size_t>(i)].total_nodes() == outB.axes[static_cast<size_t>(i)].total_nodes(),
                "compare_chains_blocked: output spaces differ");
    std::vector<int> outer_axes;
    for (int i = 0; i < outA.rank(); ++i)
        if (std::find(band.begin(), band.end(), i) == band.end()) outer_axes.push_back(i);
    Space outer_space;
    for (int a : outer_axes) outer_space.axes.push_back(outA.axes[static_cast<size_t>(a)]);
    Space band_final;
    for (int a : band) band_final.axes.push_back(outA.axes[static_cast<size_t>(a)]);

    ChainCompareResult res;
    real worst = 0, worst_mask = 0;
    for (int v = 0; v < n_vectors; ++v) {
        Rng rng(substream(seed, label + "#" + std::to_string(v)));
        TensorField xi = random_test_vector(A.pre.in_space, rng);
        TensorField uA = apply_tensor(A.pre, xi);
        TensorField uB = apply_tensor(B.pre, xi);
        detail::BlockEval evA{&A, &uA, {}, band}, evB{&B, &uB, {}, band};
        for (int a : band) {
            evA.band_mid.axes.push_back(A.mid.out_space.axes[static_cast<size_t>(a)]);
            evB.band_mid.axes.push_back(B.mid.out_space.axes[static_cast<size_t>(a)]);
        }
        real num = 0, wmask = 0, wtot = 0;
        long outer_total = outer_space.total_nodes();
        bool full = outer_total <= full_threshold;
        long n_iter = full ? outer_total : n_blocks;
        for (long bi = 0; bi < n_iter; ++bi) {
            std::vector<int> oidx;
            if (full) {
                long f = bi;
                oidx.resize(outer_space.axes.size());
                for (int i = static_cast<int>(outer_space.axes.size()) - 1; i >= 0; --i) {
                    int sz = outer_space.axes[static_cast<size_t>(i)].total_nodes();
                    oidx[static_cast<size_t>(i)] = static_cast<int>(f % sz);
                    f /= sz;
                }
            } else {
                oidx = outer_space.random_node(rng);
            }
            Pt opt = outer_space.point(oidx);
            real ow = outer_space.weight(oidx);
            real mw = 0;
            DenseField ba = evA.eval(opt, outer_axes, &mw);
            DenseField bb = evB.eval(opt, outer_axes, &mw);
            real bw = 0;
            for (NodeIter it(band_final); !it.done; it.next()) {
                real w = band_final.weight(it.idx);
                bw += w;
                num += ow * w * std::norm(ba.at(it.idx) - bb.at(it.idx));
            }
            wmask += ow * mw;
            wtot += ow * bw;
        }
        if (!full && n_iter > 0) {
            real scale = static_cast<real>(outer_total) / static_cast<real>(n_iter);
            num *= scale;
        }
        real den = xi.norm2_sq();
        worst = std::max(worst, den > 0 ? std::sqrt(num / den) : 0.0);
        if (wtot > 0) worst_mask = std::max(worst_mask, wmask / wtot);
    }
    res.residual = worst;
    res.masked_fraction = worst_mask;
    return res;
}

}  // namespace qdp
