#pragma once

#include "qdp/matched_pair.hpp"

namespace qdp {

/// A lazily evaluable vector: value at a point, nullopt where masked.
using VecFn = std::function<std::optional<cplx>(const Pt&)>;

inline VecFn reader(const std::shared_ptr<TensorField>& tf) {
    return [tf](const Pt& p) { return tf->interp(p); };
}
inline VecFn reader(const std::shared_ptr<DenseField>& df) {
    return [df](const Pt& p) { return df->interp(p); };
}

/// Grid-sampling emulation: reads of f only happen at the nodes of `s`,
/// reconstructed multilinearly in between. This is what makes a composed
/// chain behave like the honestly discretized operator product (one
/// interpolation layer per operator application).
inline VecFn gridify(const Space& s, VecFn f) {
    auto sp = std::make_shared<Space>(s);
    return [sp, f](const Pt& p) -> std::optional<cplx> {
        std::array<AxisStencil, kMaxAxes> st;
        for (int i = 0; i < sp->rank(); ++i) {
            st[static_cast<size_t>(i)] = stencil(sp->axes[static_cast<size_t>(i)], p[i]);
            if (st[static_cast<size_t>(i)].m == 0) return std::nullopt;
        }
        cplx acc = 0;
        int corners = 1;
        for (int i = 0; i < sp->rank(); ++i) corners *= st[static_cast<size_t>(i)].m;
        for (int c = 0; c < corners; ++c) {
            int cc = c;
            real w = 1;
            Pt q;
            q.n = sp->rank();
            for (int i = sp->rank() - 1; i >= 0; --i) {
                int pick = cc % st[static_cast<size_t>(i)].m;
                cc /= st[static_cast<size_t>(i)].m;
                w *= st[static_cast<size_t>(i)].w[pick];
                q[i] = sp->axes[static_cast<size_t>(i)].point(st[static_cast<size_t>(i)].idx[pick]);
            }
            auto v = f(q);
            if (!v) return std::nullopt;
            acc += w * *v;
        }
        return acc;
    };
}

// ---------------------------------------------------------------------------
// Point-phase operators
//
// Every unitary in the construction acts as
//   (W xi)(x) = phase(x) * jac(x)^{1/2} * xi(T(x)),
// with |phase| = 1 and T a measure class isomorphism (jac the correction that
// makes W unitary; identically 1 for the multiplicative unitaries, whose
// point maps are built from left translations). On finite carriers this is an
// exact monomial matrix.

struct PointPhaseOp {
    Space in_space;
    Space out_space;
    std::function<std::optional<Pt>(const Pt&)> fwd;  // pullback: output point -> input point
    std::function<std::optional<Pt>(const Pt&)> bwd;  // its inverse
    std::function<cplx(const Pt&)> phase;             // on output points
    std::function<real(const Pt&)> jac;               // on output points, default 1

    cplx phase_at(const Pt& p) const { return phase ? phase(p) : cplx{1, 0}; }
    real jac_at(const Pt& p) const { return jac ? jac(p) : 1.0; }

    static PointPhaseOp identity(const Space& s) {
        PointPhaseOp w;
        w.in_space = w.out_space = s;
        w.fwd = w.bwd = [](const Pt& p) { return std::optional<Pt>(p); };
        return w;
    }
};

/// Lazy application; the caller decides whether the input is read exactly or
/// through gridify().
inline VecFn apply_fn(const PointPhaseOp& op, VecFn in) {
    auto o = std::make_shared<PointPhaseOp>(op);
    return [o, in](const Pt& x) -> std::optional<cplx> {
        auto t = o->fwd(x);
        if (!t) return std::nullopt;
        auto v = in(*t);
        if (!v) return std::nullopt;
        return o->phase_at(x) * std::sqrt(o->jac_at(x)) * *v;
    };
}

/// One discretized application: the input is sampled on op.in_space nodes.
inline VecFn apply_gridded(const PointPhaseOp& op, VecFn in) { return apply_fn(op, gridify(op.in_space, in)); }

/// Dense application over output nodes; masked nodes are zeroed and counted.
struct DenseApplyResult {
    DenseField field;
    real masked_fraction = 0;
};
inline DenseApplyResult apply_dense(const PointPhaseOp& op, const DenseField& in) {
    DenseApplyResult out;
    out.field = DenseField(op.out_space);
    real wm = 0, wt = 0;
    for (NodeIter it(op.out_space); !it.done; it.next()) {
        Pt x = op.out_space.point(it.idx);
        real w = op.out_space.weight(it.idx);
        wt += w;
        auto t = op.fwd(x);
        std::optional<cplx> v = t ? in.interp(*t) : std::nullopt;
        if (!v) {
            wm += w;
            continue;
        }
        out.field.at(it.idx) = op.phase_at(x) * std::sqrt(op.jac_at(x)) * *v;
    }
    out.masked_fraction = wt > 0 ? wm / wt : 0;
    return out;
}

inline PointPhaseOp adjoint(const PointPhaseOp& op) {
    PointPhaseOp a;
    a.in_space = op.out_space;
    a.out_space = op.in_space;
    a.fwd = op.bwd;
    a.bwd = op.fwd;
    auto o = std::make_shared<PointPhaseOp>(op);
    a.phase = [o](const Pt& y) -> cplx {
        auto x = o->bwd(y);
        return x ? std::conj(o->phase_at(*x)) : cplx{1, 0};
    };
    a.jac = [o](const Pt& y) -> real {
        auto x = o->bwd(y);
        return x ? 1.0 / o->jac_at(*x) : 1.0;
    };
    return a;
}

/// Exact composition (A o B): point maps, phases and corrections compose in
/// closed form; no discretization is introduced here.
inline PointPhaseOp compose(const PointPhaseOp& A, const PointPhaseOp& B) {
    PointPhaseOp c;
    c.in_space = B.in_space;
    c.out_space = A.out_space;
    auto a = std::make_shared<PointPhaseOp>(A);
    auto b = std::make_shared<PointPhaseOp>(B);
    c.fwd = [a, b](const Pt& x) -> std::optional<Pt> {
        auto t = a->fwd(x);
        if (!t) return std::nullopt;
        return b->fwd(*t);
    };
    c.bwd = [a, b](const Pt& y) -> std::optional<Pt> {
        auto t = b->bwd(y);
        if (!t) return std::nullopt;
        return a->bwd(*t);
    };
    c.phase = [a, b](const Pt& x) -> cplx {
        auto t = a->fwd(x);
        return t ? a->phase_at(x) * b->phase_at(*t) : cplx{1, 0};
    };
    c.jac = [a, b](const Pt& x) -> real {
        auto t = a->fwd(x);
        return t ? a->jac_at(x) * b->jac_at(*t) : 1.0;
    };
    return c;
}

/// Axis permutation: output axis i carries input axis from[i]. Exact.
inline PointPhaseOp axis_permutation(const Space& in_space, const std::vector<int>& from) {
    PointPhaseOp p;
    p.in_space = in_space;
    int r = in_space.rank();
    require(static_cast<int>(from.size()) == r, "axis_permutation: wrong size");
    p.out_space.axes.resize(static_cast<size_t>(r));
    std::vector<int> to(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        p.out_space.axes[static_cast<size_t>(i)] = in_space.axes[static_cast<size_t>(from[static_cast<size_t>(i)])];
        to[static_cast<size_t>(from[static_cast<size_t>(i)])] = i;
    }
    p.fwd = [from, r](const Pt& x) {
        Pt y;
        y.n = r;
        for (int i = 0; i < r; ++i) y[from[static_cast<size_t>(i)]] = x[i];
        return std::optional<Pt>(y);
    };
    p.bwd = [to, r](const Pt& y) {
        Pt x;
        x.n = r;
        for (int i = 0; i < r; ++i) x[to[static_cast<size_t>(i)]] = y[i];
        return std::optional<Pt>(x);
    };
    return p;
}

/// Embed an operator on a sub-product of axes into a bigger space (identity
/// on the remaining axes). `axes` lists the big-space axes carrying the
/// operator's factors, in order.
inline PointPhaseOp on_factors(const PointPhaseOp& op, const Space& big, const std::vector<int>& axes) {
    PointPhaseOp e;
    e.in_space = e.out_space = big;
    int r = big.rank(), k = static_cast<int>(axes.size());
    require(op.in_space.rank() == k && op.out_space.rank() == k, "on_factors: rank mismatch");
    auto o = std::make_shared<PointPhaseOp>(op);
    auto lift_map = [axes, r, k, o](const Pt& x, bool forward) -> std::optional<Pt> {
        Pt sub;
        sub.n = k;
        for (int i = 0; i < k; ++i) sub[i] = x[axes[static_cast<size_t>(i)]];
        auto t = forward ? o->fwd(sub) : o->bwd(sub);
        if (!t) return std::nullopt;
        Pt y = x;
        y.n = r;
        for (int i = 0; i < k; ++i) y[axes[static_cast<size_t>(i)]] = (*t)[i];
        return y;
    };
    e.fwd = [lift_map](const Pt& x) { return lift_map(x, true); };
    e.bwd = [lift_map](const Pt& x) { return lift_map(x, false); };
    e.phase = [axes, k, o](const Pt& x) {
        Pt sub;
        sub.n = k;
        for (int i = 0; i < k; ++i) sub[i] = x[axes[static_cast<size_t>(i)]];
        return o->phase_at(sub);
    };
    e.jac = [axes, k, o](const Pt& x) {
        Pt sub;
        sub.n = k;
        for (int i = 0; i < k; ++i) sub[i] = x[axes[static_cast<size_t>(i)]];
        return o->jac_at(sub);
    };
    return e;
}

// ---------------------------------------------------------------------------
// The operators of the construction

/// Kac-Takesaki operator of a group model: zeta(x, y) -> zeta(y x, y) on
/// L2(G x G); phase 1, measure-preserving (x -> y x is a left translation).
inline PointPhaseOp build_kac_takesaki(const GroupModel& g) {
    PointPhaseOp w;
    w.in_space = w.out_space = Space::power(g.space, 2);
    int r = g.space.rank();
    auto gm = std::make_shared<GroupModel>(g);
    w.fwd = [gm, r](const Pt& p) {
        Pt x = p.slice(0, r), y = p.slice(r, r);
        return std::optional<Pt>(Pt::concat(gm->mul(y, x), y));
    };
    w.bwd = [gm, r](const Pt& p) {
        Pt u = p.slice(0, r), y = p.slice(r, r);
        return std::optional<Pt>(Pt::concat(gm->mul(gm->inv(y), u), y));
    };
    return w;
}

/// The multiplicative unitary of the cocycle bicrossed product on
/// L2(G x H x G x H):
///   W xi(g1,h1,g2,h2) = U(beta_k(g2), g1, h1) conj(V)(a, k, g2)
///                       xi(beta_k(g2) g1, h1, g2, k),
/// where a = alpha_{g1}(h1) and k = a^{-1} h2. Mask propagates from the
/// dressing domain.
inline PointPhaseOp build_multiplicative_unitary(const GroupModel& G, const GroupModel& H, const DressingPair& dp,
                                                 const CocyclePair& cc) {
    PointPhaseOp w;
    Space X = Space::product(G.space, H.space);
    w.in_space = w.out_space = Space::power(X, 2);
    int rg = G.space.rank(), rh = H.space.rank();
    auto Gp = std::make_shared<GroupModel>(G);
    auto Hp = std::make_shared<GroupModel>(H);
    auto dpp = std::make_shared<DressingPair>(dp);
    auto ccp = std::make_shared<CocyclePair>(cc);
    auto parts = [rg, rh](const Pt& p, Pt& g1, Pt& h1, Pt& g2, Pt& h2) {
        g1 = p.slice(0, rg);
        h1 = p.slice(rg, rh);
        g2 = p.slice(rg + rh, rg);
        h2 = p.slice(2 * rg + rh, rh);
    };
    w.fwd = [Gp, Hp, dpp, parts](const Pt& p) -> std::optional<Pt> {
        Pt g1, h1, g2, h2;
        parts(p, g1, h1, g2, h2);
        auto a = dpp->alpha(g1, h1);
        if (!a) return std::nullopt;
        Pt k = Hp->mul(Hp->inv(*a), h2);
        auto b = dpp->beta(k, g2);
        if (!b) return std::nullopt;
        return Pt::concat(Pt::concat(Gp->mul(*b, g1), h1), Pt::concat(g2, k));
    };
    w.bwd = [Gp, Hp, dpp, parts](const Pt& p) -> std::optional<Pt> {
        Pt G1, h1, g2, k;
        parts(p, G1, h1, g2, k);
        auto b = dpp->beta(k, g2);
        if (!b) return std::nullopt;
        Pt g1 = Gp->mul(Gp->inv(*b), G1);
        auto a = dpp->alpha(g1, h1);
        if (!a) return std::nullopt;
        return Pt::concat(Pt::concat(g1, h1), Pt::concat(g2, Hp->mul(*a, k)));
    };
    w.phase = [Gp, Hp, dpp, ccp, parts](const Pt& p) -> cplx {
        Pt g1, h1, g2, h2;
        parts(p, g1, h1, g2, h2);
        auto a = dpp->alpha(g1, h1);
        if (!a) return cplx{1, 0};
        Pt k = Hp->mul(Hp->inv(*a), h2);
        auto b = dpp->beta(k, g2);
        if (!b) return cplx{1, 0};
        return ccp->U(*b, g1, h1) * std::conj(ccp->V(*a, k, g2));
    };
    return w;
}

/// Dual multiplicative unitary W^ = Sigma_K W* Sigma_K on (X tensor X), with
/// Sigma_K the flip of the two X-legs. Validated against the direct dual
/// construction on finite carriers.
inline PointPhaseOp dual_multiplicative_unitary(const PointPhaseOp& W) {
    int r2 = W.in_space.rank();
    int r = r2 / 2;
    std::vector<int> flip(static_cast<size_t>(r2));
    for (int i = 0; i < r2; ++i) flip[static_cast<size_t>(i)] = (i + r) % r2;
    PointPhaseOp sig = axis_permutation(W.in_space, flip);
    return compose(sig, compose(adjoint(W), sig));
}

/// Left-translation unitary lambda_g on L2(G): (lambda_g xi)(x) = xi(g^{-1} x).
inline PointPhaseOp translation_op(const GroupModel& g, const Pt& g0) {
    PointPhaseOp w;
    w.in_space = w.out_space = g.space;
    auto gm = std::make_shared<GroupModel>(g);
    w.fwd = [gm, g0](const Pt& x) { return std::optional<Pt>(gm->mul(gm->inv(g0), x)); };
    w.bwd = [gm, g0](const Pt& x) { return std::optional<Pt>(gm->mul(g0, x)); };
    return w;
}

/// Multiplication by a unimodular function (trivial point map).
inline PointPhaseOp unimodular_mult_op(const Space& s, const std::function<cplx(const Pt&)>& m) {
    PointPhaseOp w = PointPhaseOp::identity(s);
    w.phase = m;
    return w;
}

// ---------------------------------------------------------------------------
// Residual engines

struct OpCompareResult {
    real residual = 0;
    real masked_fraction = 0;
    long samples = 0;
};

/// Relative L2 residual between two evaluations against a reference norm,
/// over the full node set when small, else a uniform node sample with
/// same-sample differencing. Masked nodes (either side) are excluded from
/// both sums and their weight fraction is reported.
inline OpCompareResult compare_vecfns(const Space& out_space, const VecFn& A, const VecFn& B, const VecFn& ref,
                                      long full_threshold, long mc_samples, std::uint64_t seed,
                                      const std::string& label) {
    OpCompareResult res;
    real num = 0, den = 0, wm = 0, wt = 0;
    auto account = [&](const Pt& p, real w) {
        wt += w;
        auto va = A(p), vb = B(p), vr = ref(p);
        if (!va || !vb || !vr) {
            wm += w;
            return;
        }
        num += w * std::norm(*va - *vb);
        den += w * std::norm(*vr);
        ++res.samples;
    };
    if (out_space.total_nodes() <= full_threshold) {
        for (NodeIter it(out_space); !it.done; it.next()) account(out_space.point(it.idx), out_space.weight(it.idx));
    } else {
        Rng rng(substream(seed, "compare:" + label));
        for (long s = 0; s < mc_samples; ++s) {
            auto idx = out_space.random_node(rng);
            account(out_space.point(idx), out_space.weight(idx));
        }
    }
    res.residual = den > 0 ? std::sqrt(num / den) : 0.0;
    res.masked_fraction = wt > 0 ? wm / wt : 0.0;
    return res;
}

/// Pentagon residual ||(W12 W13 W23 - W23 W12) xi|| / ||xi|| on X^3, with one
/// grid-sampling layer per operator application. Legs count X-factors.
inline CheckEntry check_pentagon(const PointPhaseOp& W, const Space& X, int n_vectors, long mc_samples,
                                 std::uint64_t seed, real tol, const std::string& id = "pentagon") {
    int r = X.rank();
    Space X3 = Space::power(X, 3);
    std::vector<int> legs12, legs13, legs23;
    for (int i = 0; i < r; ++i) {
        legs12.push_back(i);
        legs13.push_back(i);
        legs23.push_back(r + i);
    }
    for (int i = 0; i < r; ++i) {
        legs12.push_back(r + i);
        legs13.push_back(2 * r + i);
        legs23.push_back(2 * r + i);
    }
    PointPhaseOp W12 = on_factors(W, X3, legs12);
    PointPhaseOp W13 = on_factors(W, X3, legs13);
    PointPhaseOp W23 = on_factors(W, X3, legs23);
    real worst = 0, mask = 0;
    for (int v = 0; v < n_vectors; ++v) {
        Rng rng(substream(seed, id + "#" + std::to_string(v)));
        auto tf = std::make_shared<TensorField>(random_test_vector(X3, rng));
        VecFn xi = reader(tf);
        VecFn lhs = apply_gridded(W12, apply_gridded(W13, apply_gridded(W23, xi)));
        VecFn rhs = apply_gridded(W23, apply_gridded(W12, xi));
        auto r0 = compare_vecfns(X3, lhs, rhs, xi, 1000000, mc_samples, substream(seed, id + "cmp" + std::to_string(v)),
                                 id);
        worst = std::max(worst, r0.residual);
        mask = std::max(mask, r0.masked_fraction);
    }
    return CheckEntry::bound(id, worst, tol).masked(mask);
}

/// Unitarity: ||W* W xi - xi|| / ||xi|| over random test vectors.
inline CheckEntry check_unitarity(const PointPhaseOp& W, int n_vectors, long mc_samples, std::uint64_t seed, real tol,
                                  const std::string& id = "unitarity") {
    PointPhaseOp Ws = adjoint(W);
    real worst = 0, mask = 0;
    for (int v = 0; v < n_vectors; ++v) {
        Rng rng(substream(seed, id + "#" + std::to_string(v)));
        auto tf = std::make_shared<TensorField>(random_test_vector(W.in_space, rng));
        VecFn xi = reader(tf);
        VecFn lhs = apply_gridded(Ws, apply_gridded(W, xi));
        auto r0 =
            compare_vecfns(W.in_space, lhs, xi, xi, 1000000, mc_samples, substream(seed, id + "cmp" + std::to_string(v)), id);
        worst = std::max(worst, r0.residual);
        mask = std::max(mask, r0.masked_fraction);
    }
    return CheckEntry::bound(id, worst, tol).masked(mask);
}

/// Duality flip: W^ of (G,H) against (Sigma x Sigma) W' (Sigma x Sigma) where
/// W' is the multiplicative unitary of the swapped pair.
inline CheckEntry check_duality_flip(const GroupModel& G, const GroupModel& H, const DressingPair& dp,
                                     const CocyclePair& cc, int n_vectors, long mc_samples, std::uint64_t seed,
                                     real tol, const std::string& id = "duality_flip") {
    PointPhaseOp W = build_multiplicative_unitary(G, H, dp, cc);
    PointPhaseOp What = dual_multiplicative_unitary(W);
    DressingPair dps;
    dps.alpha = dp.beta;
    dps.beta = dp.alpha;
    CocyclePair ccs;
    ccs.U = cc.V;
    ccs.V = cc.U;
    PointPhaseOp Wswap = build_multiplicative_unitary(H, G, dps, ccs);  // on (H x G)^2
    int rg = G.space.rank(), rh = H.space.rank();
    // Sigma x Sigma : (G,H,G,H) -> (H,G,H,G); out axis order lists H first.
    std::vector<int> from;
    for (int i = 0; i < rh; ++i) from.push_back(rg + i);
    for (int i = 0; i < rg; ++i) from.push_back(i);
    for (int i = 0; i < rh; ++i) from.push_back(2 * rg + rh + i);
    for (int i = 0; i < rg; ++i) from.push_back(rg + rh + i);
    PointPhaseOp sig2 = axis_permutation(What.in_space, from);
    PointPhaseOp rhs_op = compose(adjoint(sig2), compose(Wswap, sig2));
    real worst = 0, mask = 0;
    for (int v = 0; v < n_vectors; ++v) {
        Rng rng(substream(seed, id + "#" + std::to_string(v)));
        auto tf = std::make_shared<TensorField>(random_test_vector(What.in_space, rng));
        VecFn xi = reader(tf);
        VecFn lhs = apply_gridded(What, xi);
        VecFn rhs = apply_gridded(rhs_op, xi);
        auto r0 = compare_vecfns(What.out_space, lhs, rhs, xi, 1000000, mc_samples,
                                 substream(seed, id + "cmp" + std::to_string(v)), id);
        worst = std::max(worst, r0.residual);
        mask = std::max(mask, r0.masked_fraction);
    }
    return CheckEntry::bound(id, worst, tol).masked(mask);
}

/// Coproduct Delta(x) = W* (1 tensor x) W applied to a test vector.
inline VecFn apply_coproduct(const PointPhaseOp& W, const PointPhaseOp& x_op, VecFn xi) {
    int r = W.in_space.rank() / 2;
    std::vector<int> second_legs;
    for (int i = 0; i < r; ++i) second_legs.push_back(r + i);
    PointPhaseOp one_x = on_factors(x_op, W.in_space, second_legs);
    return apply_gridded(adjoint(W), apply_gridded(one_x, apply_gridded(W, xi)));
}

}  // namespace qdp
