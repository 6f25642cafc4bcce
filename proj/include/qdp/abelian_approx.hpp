#pragma once

#include "qdp/pipeline.hpp"

namespace qdp {

/// A measurable abelian approximation of H: an abelian fiber V with a right
/// G-action rho and a 2-cocycle psi, plus the measure class isomorphism
/// eta : H -> V^ transporting the dressing action to the dual action.
struct AbelianApproximation {
    AbelianGroupPtr V;
    std::function<Pt(const Pt&, const Pt&)> rho;  // (v, g) -> v
    std::function<Pt(const Pt&, const Pt&)> psi;  // (g1, g2) -> v; null = 0
    MeasureClassIso eta;                          // H -> V^ in chart coordinates
};

/// Matched abelian approximations: eta_H : H -> V^ with classical limit
/// calG = G x_{rho,psi} V, and eta_G : G -> W^ with classical limit
/// calH = H x_{sigma,omega} W. apxG's fields hold (W, sigma, omega, eta_G).
struct MatchedAbelianApproximations {
    std::string name;
    GroupModel G, H;
    AbelianApproximation apxH;
    AbelianApproximation apxG;
    std::function<real(const Pt&)> modular_calG;  // optional, for extension builds
    std::function<real(const Pt&)> modular_calH;

    ExtensionSpec ext_calG() const {
        ExtensionSpec e;
        e.base = G;
        e.fiber = apxH.V;
        e.rho = apxH.rho;
        e.psi = apxH.psi;
        e.modular = modular_calG;
        e.name = name + ":calG";
        return e;
    }
    ExtensionSpec ext_calH() const {
        ExtensionSpec e;
        e.base = H;
        e.fiber = apxG.V;
        e.rho = apxG.rho;
        e.psi = apxG.psi;
        e.modular = modular_calH;
        e.name = name + ":calH";
        return e;
    }
};

struct DerivedStructure {
    DressingPair dp;
    CocyclePair cc;
    DualActionSpec rho_hat;    // dual of rho on V^
    DualActionSpec sigma_hat;  // dual of sigma on W^
};

/// alpha_g(h) = eta_H^{-1}(rho^_g(eta_H(h))), beta_h(g) = eta_G^{-1}(sigma^_h(eta_G(g))),
/// U = <psi(.,.), eta_H(.)>, V = <omega(.,.), eta_G(.)>. Masks follow the eta
/// singular sets; more than half the probe masked aborts.
inline DerivedStructure derive_structure_from_approximations(const MatchedAbelianApproximations& maa,
                                                             long n_probe = 256, std::uint64_t seed = 1) {
    DerivedStructure out;
    out.rho_hat = dualize_action(maa.apxH.rho, maa.apxH.V);
    out.sigma_hat = dualize_action(maa.apxG.rho, maa.apxG.V);
    auto etaH = std::make_shared<MeasureClassIso>(maa.apxH.eta);
    auto etaG = std::make_shared<MeasureClassIso>(maa.apxG.eta);
    auto rh = out.rho_hat.act;
    auto sh = out.sigma_hat.act;
    out.dp.alpha = [etaH, rh](const Pt& g, const Pt& h) -> std::optional<Pt> {
        if (!etaH->src_ok(h)) return std::nullopt;
        Pt xi = rh(g, etaH->fwd(h));
        if (!etaH->dst_ok(xi)) return std::nullopt;
        return etaH->inv(xi);
    };
    out.dp.beta = [etaG, sh](const Pt& h, const Pt& g) -> std::optional<Pt> {
        if (!etaG->src_ok(g)) return std::nullopt;
        Pt xi = sh(h, etaG->fwd(g));
        if (!etaG->dst_ok(xi)) return std::nullopt;
        return etaG->inv(xi);
    };
    auto psi = maa.apxH.psi;
    auto omega = maa.apxG.psi;
    auto Vg = maa.apxH.V;
    auto Wg = maa.apxG.V;
    out.cc.U = [psi, Vg, etaH](const Pt& g1, const Pt& g2, const Pt& h) -> cplx {
        if (!psi) return cplx{1, 0};
        if (!etaH->src_ok(h)) return cplx{1, 0};
        return Vg->pairing(psi(g1, g2), etaH->fwd(h));
    };
    out.cc.V = [omega, Wg, etaG](const Pt& h1, const Pt& h2, const Pt& g) -> cplx {
        if (!omega) return cplx{1, 0};
        if (!etaG->src_ok(g)) return cplx{1, 0};
        return Wg->pairing(omega(h1, h2), etaG->fwd(g));
    };
    Rng rng(substream(seed, "derive_probe:" + maa.name));
    long masked = 0;
    for (long s = 0; s < n_probe; ++s) {
        Pt g = maa.G.space.point(maa.G.space.random_node(rng));
        Pt h = maa.H.space.point(maa.H.space.random_node(rng));
        if (!out.dp.alpha(g, h) || !out.dp.beta(h, g)) ++masked;
    }
    if (2 * masked > n_probe)
        throw qdp_error("derive_structure_from_approximations(" + maa.name + "): mask exceeds 50%");
    return out;
}

/// Defining identities of a measurable abelian approximation plus structural
/// sanity of (rho, psi) and the finite-difference oracle for the declared
/// Radon-Nikodym density.
inline ResidualReport check_abelian_approximation(const GroupModel& G, const GroupModel& H, const DressingPair& dp,
                                                  const CocyclePair& cc, const AbelianApproximation& apx,
                                                  long n_samples, std::uint64_t seed, real tol) {
    ResidualReport rep;
    rep.suite = "abelian_approximation";
    Rng rng(substream(seed, "ab_approx"));
    const Space& SV = apx.V->space();
    real r_act = 0, r_coc = 0, r_add = 0, r_law = 0, r_psi = 0;
    long masked = 0;
    for (long s = 0; s < n_samples; ++s) {
        Pt g = G.space.point(G.space.random_node(rng));
        Pt g2 = G.space.point(G.space.random_node(rng));
        Pt g3 = G.space.point(G.space.random_node(rng));
        Pt h = H.space.point(H.space.random_node(rng));
        Pt v = SV.point(SV.random_node(rng));
        Pt v2 = SV.point(SV.random_node(rng));
        auto ah = dp.alpha(g, h);
        if (!ah || !apx.eta.src_ok(h) || !apx.eta.src_ok(*ah)) {
            ++masked;
        } else {
            r_act = std::max(r_act, std::abs(apx.V->pairing(apx.rho(v, g), apx.eta.fwd(h)) -
                                             apx.V->pairing(v, apx.eta.fwd(*ah))));
            r_coc = std::max(r_coc, std::abs((apx.psi ? apx.V->pairing(apx.psi(g, g2), apx.eta.fwd(h)) : cplx{1, 0}) -
                                             cc.U(g, g2, h)));
        }
        r_add = std::max(r_add, elem_dist(apx.rho(apx.V->model.mul(v, v2), g),
                                          apx.V->model.mul(apx.rho(v, g), apx.rho(v2, g))));
        r_law = std::max(r_law, elem_dist(apx.rho(apx.rho(v, g), g2), apx.rho(v, G.mul(g, g2))));
        if (apx.psi) {
            Pt lhs = apx.V->model.mul(apx.rho(apx.psi(g, g2), g3), apx.psi(G.mul(g, g2), g3));
            Pt rhs = apx.V->model.mul(apx.psi(g2, g3), apx.psi(g, G.mul(g2, g3)));
            r_psi = std::max(r_psi, elem_dist(lhs, rhs));
        }
    }
    real mf = static_cast<real>(masked) / static_cast<real>(n_samples);
    rep.add(CheckEntry::bound("pairing_action_eq", r_act, tol).masked(mf));
    rep.add(CheckEntry::bound("pairing_cocycle_eq", r_coc, tol).masked(mf));
    rep.add(CheckEntry::bound("rho_additive", r_add, tol));
    rep.add(CheckEntry::bound("rho_action_law", r_law, tol));
    rep.add(CheckEntry::bound("psi_cocycle_law", r_psi, tol));
    // FD oracle for the eta density (central differences, step = spacing/8).
    if (!H.finite()) {
        real worst = 0;
        long ok = 0;
        for (long s = 0; s < 64 && ok < 32; ++s) {
            Pt h = H.space.point(H.space.random_node(rng));
            if (!apx.eta.src_ok(h)) continue;
            real step = H.space.axes[0].charts[0].h / 8;
            real det = std::abs(numeric_jacobian_det(
                [&](const Pt& p) { return apx.eta.fwd(p); }, h, step));
            real det2 = std::abs(numeric_jacobian_det(
                [&](const Pt& p) { return apx.eta.fwd(p); }, h, step / 2));
            det = det2 + (det2 - det) / 3;  // Richardson
            real declared = apx.eta.rn_density(h);
            if (declared <= 0) continue;
            worst = std::max(worst, std::abs(det / declared - 1.0));
            ++ok;
        }
        rep.add(CheckEntry::bound("eta_density_fd_oracle", worst, 0.01));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Half-transforms and the Poisson-Fourier transform

/// Multi-axis pushforward (eta_*) as a point-phase block.
inline PointPhaseOp push_pp_block(const MeasureClassIso& eta, const Space& src, const Space& dst) {
    PointPhaseOp pp;
    pp.in_space = src;
    pp.out_space = dst;
    auto e = std::make_shared<MeasureClassIso>(eta);
    pp.fwd = [e](const Pt& y) -> std::optional<Pt> {
        if (!e->dst_ok(y)) return std::nullopt;
        Pt x = e->inv(y);
        if (!e->src_ok(x)) return std::nullopt;
        return x;
    };
    pp.bwd = [e](const Pt& x) -> std::optional<Pt> {
        if (!e->src_ok(x)) return std::nullopt;
        return e->fwd(x);
    };
    pp.jac = [e](const Pt& y) { return e->dst_ok(y) ? 1.0 / e->rn_density(e->inv(y)) : 1.0; };
    return pp;
}

/// Multi-axis pullback (eta^*) = (eta_*)^{-1}.
inline PointPhaseOp pull_pp_block(const MeasureClassIso& eta, const Space& src, const Space& dst) {
    PointPhaseOp pp;
    pp.in_space = dst;
    pp.out_space = src;
    auto e = std::make_shared<MeasureClassIso>(eta);
    pp.fwd = [e](const Pt& x) -> std::optional<Pt> {
        if (!e->src_ok(x)) return std::nullopt;
        return e->fwd(x);
    };
    pp.bwd = [e](const Pt& y) -> std::optional<Pt> {
        if (!e->dst_ok(y)) return std::nullopt;
        return e->inv(y);
    };
    pp.jac = [e](const Pt& x) { return e->src_ok(x) ? e->rn_density(x) : 1.0; };
    return pp;
}

/// Append the stages of (eta_H)_* followed by F_V^* on the H-axes starting at
/// position `pos`: L2(... x H x ...) -> L2(... x V x ...).
inline void append_half_transform_stages(L2Map& m, int pos, const GroupModel& H, const AbelianApproximation& apx) {
    int rh = H.space.rank();
    const Space& SV = apx.V->space();
    const Space& SVh = apx.V->dual->space();
    require(SV.rank() == rh, "half transform: eta rank mismatch");
    if (rh == 1) {
        m.then_axis(push_stage(pos, apx.eta, H.space.axes[0], SVh.axes[0]));
    } else {
        Space src, dst;
        src = H.space;
        dst = SVh;
        std::vector<int> axes;
        for (int i = 0; i < rh; ++i) axes.push_back(pos + i);
        m.then_block(push_pp_block(apx.eta, src, dst), axes);
    }
    for (int i = 0; i < rh; ++i)
        m.then_axis(dft_stage(pos + i, SVh.axes[static_cast<size_t>(i)], SV.axes[static_cast<size_t>(i)], true));
}

/// The Poisson-Fourier half-transform F_H = F_V^* (eta_H)_* on the H factor:
/// L2(G x H) -> L2(calG = G x V).
inline L2Map build_half_transform(const GroupModel& G, const GroupModel& H, const AbelianApproximation& apx) {
    L2Map m;
    m.in_space = Space::product(G.space, H.space);
    append_half_transform_stages(m, G.space.rank(), H, apx);
    return m;
}

/// The adjoint stages: (eta_H)^* F_V on the V-axes starting at `pos`:
/// L2(... x V x ...) -> L2(... x H x ...).
inline void append_half_transform_adjoint_stages(L2Map& m, int pos, const GroupModel& H,
                                                 const AbelianApproximation& apx) {
    int rh = H.space.rank();
    const Space& SV = apx.V->space();
    const Space& SVh = apx.V->dual->space();
    for (int i = 0; i < rh; ++i)
        m.then_axis(dft_stage(pos + i, SV.axes[static_cast<size_t>(i)], SVh.axes[static_cast<size_t>(i)], false));
    if (rh == 1) {
        m.then_axis(pull_stage(pos, apx.eta, H.space.axes[0], SVh.axes[0]));
    } else {
        std::vector<int> axes;
        for (int i = 0; i < rh; ++i) axes.push_back(pos + i);
        m.then_block(pull_pp_block(apx.eta, H.space, SVh), axes);
    }
}

/// F_calG = F_G Sigma F_H^* : L2(calG) -> L2(calH).
inline L2Map build_poisson_fourier_transform(const MatchedAbelianApproximations& maa) {
    int rg = maa.G.space.rank(), rh = maa.H.space.rank();
    L2Map m;
    m.in_space = Space::product(maa.G.space, maa.apxH.V->space());
    // F_H^* : (G, V) -> (G, H)
    append_half_transform_adjoint_stages(m, rg, maa.H, maa.apxH);
    // Sigma : (G, H) -> (H, G)
    std::vector<int> from;
    for (int i = 0; i < rh; ++i) from.push_back(rg + i);
    for (int i = 0; i < rg; ++i) from.push_back(i);
    m.then_perm(from);
    // F_G : (H, G) -> (H, W)
    append_half_transform_stages(m, rh, maa.G, maa.apxG);
    return m;
}

/// Norm preservation of a per-axis pipeline on random dense fields.
inline CheckEntry check_map_unitary(const L2Map& m, int n_vectors, std::uint64_t seed, real tol,
                                    const std::string& id) {
    real worst = 0, mask = 0;
    for (int v = 0; v < n_vectors; ++v) {
        Rng rng(substream(seed, id + "#" + std::to_string(v)));
        DenseField f = random_test_vector(m.in_space, rng).to_dense();
        real mw = 0;
        DenseField g = apply_dense(m, f, &mw);
        real n0 = f.norm2(), n1 = g.norm2();
        if (n0 > 0) worst = std::max(worst, std::abs(n1 / n0 - 1.0));
        real wt = 0;
        for (NodeIter it(g.space); !it.done; it.next()) wt += g.space.weight(it.idx);
        if (wt > 0) mask = std::max(mask, mw / wt);
    }
    return CheckEntry::bound(id, worst, tol).masked(mask);
}

// ---------------------------------------------------------------------------
// Intertwiner checks (block-streamed)

/// Lemma check: (F_V^* x F_V^*) W_{rho^,psi} (F_V x F_V) = W^_calG, verified
/// in the Fourier frame: W_{rho^,psi} (F_V x F_V) against (F_V x F_V) W^_calG.
inline CheckEntry check_half_transform_intertwiner(const ExtensionSpec& ext, int n_vectors, long full_threshold,
                                                   long n_blocks, std::uint64_t seed, real tol,
                                                   const std::string& id = "half_transform_intertwiner") {
    const GroupModel& G = ext.base;
    const AbelianGroupPtr& V = ext.fiber;
    int rg = G.space.rank(), rv = V->space().rank();
    GroupModel calG = ext.build();
    GroupModel Vhat_model = V->dual->model;

    // Bicrossed operator of the matched pair (G, V^) with dressing (rho^, id)
    // and cocycles (psi-pairing, 1).
    DualActionSpec rho_hat = dualize_action(ext.rho, V);
    DressingPair dp;
    auto rh = rho_hat.act;
    dp.alpha = [rh](const Pt& g, const Pt& xi) { return std::optional<Pt>(rh(g, xi)); };
    dp.beta = [](const Pt&, const Pt& g) { return std::optional<Pt>(g); };
    CocyclePair cc = CocyclePair::trivial();
    if (ext.psi) {
        auto psi = ext.psi;
        cc.U = [psi, V](const Pt& g1, const Pt& g2, const Pt& xi) { return V->pairing(psi(g1, g2), xi); };
    }
    PointPhaseOp Wbic = build_multiplicative_unitary(G, Vhat_model, dp, cc);

    OpChain A, B;
    A.pre.in_space = Space::power(calG.space, 2);
    for (int f = 0; f < 2; ++f)
        for (int i = 0; i < rv; ++i) {
            int pos = f * (rg + rv) + rg + i;
            A.pre.then_axis(dft_stage(pos, V->space().axes[static_cast<size_t>(i)],
                                      V->dual->space().axes[static_cast<size_t>(i)], false));
        }
    A.mid = Wbic;
    B.pre.in_space = A.pre.in_space;
    B.mid = build_kac_takesaki(calG);
    std::vector<int> band;
    for (int f = 0; f < 2; ++f)
        for (int i = 0; i < rv; ++i) {
            int pos = f * (rg + rv) + rg + i;
            band.push_back(pos);
            B.post.push_back(make_axis_stage(dft_stage(pos, V->space().axes[static_cast<size_t>(i)],
                                                       V->dual->space().axes[static_cast<size_t>(i)], false)));
        }
    auto r = compare_chains_blocked(A, B, band, n_vectors, full_threshold, n_blocks, seed, id);
    return CheckEntry::bound(id, r.residual, tol).masked(r.masked_fraction);
}

/// Theorem check (quantum duality): the Poisson-Fourier transform conjugates
/// the dual of the quantized calG operator onto the quantized calH operator.
/// Evaluated in the frame where both sides are reduced to
///   A = (F_H x F_H) [Sig_K W_calG^* Sig_K] (Sig^* x Sig^*)(F_G^* x F_G^*)
///   B = (F_H x F_H) [(Sig^* x Sig^*) W_calH] (F_G^* x F_G^*),
/// after cancelling exact inverse pairs (unitary DFTs, eta pull/push).
inline CheckEntry check_pft_intertwiner(const MatchedAbelianApproximations& maa, const DerivedStructure& ds,
                                        int n_vectors, long full_threshold, long n_blocks, std::uint64_t seed,
                                        real tol, const std::string& id = "pft_intertwiner") {
    int rg = maa.G.space.rank(), rh = maa.H.space.rank();
    int rX = rg + rh;
    PointPhaseOp WG = build_multiplicative_unitary(maa.G, maa.H, ds.dp, ds.cc);
    DressingPair dps;
    dps.alpha = ds.dp.beta;
    dps.beta = ds.dp.alpha;
    CocyclePair ccs;
    ccs.U = ds.cc.V;
    ccs.V = ds.cc.U;
    PointPhaseOp WH = build_multiplicative_unitary(maa.H, maa.G, dps, ccs);  // on (H, G)^2

    const Space& SW = maa.apxG.V->space();
    const Space& SWh = maa.apxG.V->dual->space();
    require(maa.apxG.V->space().rank() == rg, "pft: eta_G rank mismatch");

    auto build_pre = [&](bool with_sigma_perm) {
        L2Map pre;
        pre.in_space = Space::power(Space::product(maa.H.space, SW), 2);  // L2(calH)^2
        for (int f = 0; f < 2; ++f) {
            for (int i = 0; i < rg; ++i) {
                int pos = f * rX + rh + i;
                pre.then_axis(dft_stage(pos, SW.axes[static_cast<size_t>(i)], SWh.axes[static_cast<size_t>(i)], false));
            }
            if (rg == 1) {
                pre.then_axis(pull_stage(f * rX + rh, maa.apxG.eta, maa.G.space.axes[0], SWh.axes[0]));
            } else {
                std::vector<int> axes;
                for (int i = 0; i < rg; ++i) axes.push_back(f * rX + rh + i);
                pre.then_block(pull_pp_block(maa.apxG.eta, maa.G.space, SWh), axes);
            }
        }
        if (with_sigma_perm) {
            // (Sigma^* x Sigma^*) : (H,G)^2 -> (G,H)^2
            std::vector<int> from;
            for (int f = 0; f < 2; ++f) {
                for (int i = 0; i < rg; ++i) from.push_back(f * rX + rh + i);
                for (int i = 0; i < rh; ++i) from.push_back(f * rX + i);
            }
            pre.then_perm(from);
        }
        return pre;
    };

    OpChain A, B;
    A.pre = build_pre(true);
    // Sig_K W_calG^* Sig_K on (G,H)^2
    std::vector<int> flip(static_cast<size_t>(2 * rX));
    for (int i = 0; i < 2 * rX; ++i) flip[static_cast<size_t>(i)] = (i + rX) % (2 * rX);
    PointPhaseOp sigK = axis_permutation(Space::power(Space::product(maa.G.space, maa.H.space), 2), flip);
    A.mid = compose(sigK, compose(adjoint(WG), sigK));

    B.pre = build_pre(false);
    // (Sigma^* x Sigma^*) composed after W_calH: (H,G)^2 -> (G,H)^2
    std::vector<int> sfrom;
    for (int f = 0; f < 2; ++f) {
        for (int i = 0; i < rg; ++i) sfrom.push_back(f * rX + rh + i);
        for (int i = 0; i < rh; ++i) sfrom.push_back(f * rX + i);
    }
    PointPhaseOp sig2 = axis_permutation(Space::power(Space::product(maa.H.space, maa.G.space), 2), sfrom);
    B.mid = compose(sig2, WH);

    // Common post: (F_H x F_H) = (eta_H)_* then F_V^* on the H positions.
    std::vector<int> band;
    const Space& SV = maa.apxH.V->space();
    const Space& SVh = maa.apxH.V->dual->space();
    for (int f = 0; f < 2; ++f) {
        if (rh == 1) {
            int pos = f * rX + rg;
            band.push_back(pos);
            A.post.push_back(make_axis_stage(push_stage(pos, maa.apxH.eta, maa.H.space.axes[0], SVh.axes[0])));
        } else {
            PointPhaseOp blk = push_pp_block(maa.apxH.eta, maa.H.space, SVh);
            std::vector<int> axes;
            for (int i = 0; i < rh; ++i) {
                axes.push_back(f * rX + rg + i);
                band.push_back(f * rX + rg + i);
            }
            TensorStage ts = make_block_stage(blk, axes);
            A.post.push_back(ts);
        }
        for (int i = 0; i < rh; ++i) {
            int pos = f * rX + rg + i;
            A.post.push_back(make_axis_stage(
                dft_stage(pos, SVh.axes[static_cast<size_t>(i)], SV.axes[static_cast<size_t>(i)], true)));
        }
    }
    B.post = A.post;
    auto r = compare_chains_blocked(A, B, band, n_vectors, full_threshold, n_blocks, seed, id);
    return CheckEntry::bound(id, r.residual, tol).masked(r.masked_fraction);
}

// ---------------------------------------------------------------------------
// Matched abelian approximation axioms

/// Damped Newton inversion of a chart map (fixed charts); nullopt on failure.
inline std::optional<Pt> newton_invert(const std::function<std::optional<Pt>(const Pt&)>& F, const Pt& target,
                                       const Pt& start, int iters = 40, real tol = 1e-11) {
    Pt z = start;
    int n = start.n;
    for (int it = 0; it < iters; ++it) {
        auto fz = F(z);
        if (!fz || fz->n != n) return std::nullopt;
        for (int i = 0; i < n; ++i)
            if ((*fz)[i].chart != target[i].chart) return std::nullopt;
        real err = 0;
        std::vector<real> r(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            r[static_cast<size_t>(i)] = (*fz)[i].t - target[i].t;
            err = std::max(err, std::abs(r[static_cast<size_t>(i)]));
        }
        if (err < tol) return z;
        // FD Jacobian
        real step = 1e-6;
        std::vector<std::vector<real>> J(static_cast<size_t>(n), std::vector<real>(static_cast<size_t>(n), 0.0));
        for (int j = 0; j < n; ++j) {
            Pt zp = z, zm = z;
            zp[j].t += step;
            zm[j].t -= step;
            auto fp = F(zp), fm = F(zm);
            if (!fp || !fm) return std::nullopt;
            for (int i = 0; i < n; ++i)
                J[static_cast<size_t>(i)][static_cast<size_t>(j)] = ((*fp)[i].t - (*fm)[i].t) / (2 * step);
        }
        // Solve J d = r
        std::vector<real> d = r;
        for (int c = 0; c < n; ++c) {
            int piv = c;
            for (int rr = c + 1; rr < n; ++rr)
                if (std::abs(J[static_cast<size_t>(rr)][static_cast<size_t>(c)]) >
                    std::abs(J[static_cast<size_t>(piv)][static_cast<size_t>(c)]))
                    piv = rr;
            if (std::abs(J[static_cast<size_t>(piv)][static_cast<size_t>(c)]) < 1e-14) return std::nullopt;
            std::swap(J[static_cast<size_t>(piv)], J[static_cast<size_t>(c)]);
            std::swap(d[static_cast<size_t>(piv)], d[static_cast<size_t>(c)]);
            for (int rr = c + 1; rr < n; ++rr) {
                real m = J[static_cast<size_t>(rr)][static_cast<size_t>(c)] / J[static_cast<size_t>(c)][static_cast<size_t>(c)];
                for (int k = c; k < n; ++k)
                    J[static_cast<size_t>(rr)][static_cast<size_t>(k)] -= m * J[static_cast<size_t>(c)][static_cast<size_t>(k)];
                d[static_cast<size_t>(rr)] -= m * d[static_cast<size_t>(c)];
            }
        }
        for (int i = n - 1; i >= 0; --i) {
            real s = d[static_cast<size_t>(i)];
            for (int k = i + 1; k < n; ++k) s -= J[static_cast<size_t>(i)][static_cast<size_t>(k)] * d[static_cast<size_t>(k)];
            d[static_cast<size_t>(i)] = s / J[static_cast<size_t>(i)][static_cast<size_t>(i)];
        }
        real damp = 1.0;
        for (int i = 0; i < n; ++i) z[i].t -= damp * d[static_cast<size_t>(i)];
    }
    return std::nullopt;
}

/// Axioms of matched abelian approximations: (i) tau(g,h) = (beta_h(g),
/// alpha_g(h)) invertible (numeric Newton round-trip), (ii) the two twisted
/// action identities, (iii) the cocycle compatibility.
inline ResidualReport check_matched_abelian_approximations(const MatchedAbelianApproximations& maa,
                                                           const DerivedStructure& ds, long n_samples,
                                                           std::uint64_t seed, real tol) {
    ResidualReport rep;
    rep.suite = "matched_abelian_approximations:" + maa.name;
    Rng rng(substream(seed, "maa:" + maa.name));
    int rg = maa.G.space.rank(), rh = maa.H.space.rank();
    auto tau = [&](const Pt& z) -> std::optional<Pt> {
        Pt g = z.slice(0, rg), h = z.slice(rg, rh);
        auto b = ds.dp.beta(h, g);
        auto a = ds.dp.alpha(g, h);
        if (!a || !b) return std::nullopt;
        return Pt::concat(*b, *a);
    };
    real r_tau = 0;
    long tau_fail = 0, tau_tot = 0;
    long n_tau = std::min<long>(n_samples, 200);
    for (long s = 0; s < n_tau; ++s) {
        Pt g = maa.G.space.point(maa.G.space.random_node(rng));
        Pt h = maa.H.space.point(maa.H.space.random_node(rng));
        Pt z = Pt::concat(g, h);
        auto y = tau(z);
        if (!y) continue;
        ++tau_tot;
        auto zi = newton_invert(tau, *y, *y);
        if (!zi) zi = newton_invert(tau, *y, z);  // second start
        if (!zi) {
            ++tau_fail;
            continue;
        }
        auto yy = tau(*zi);
        if (!yy) {
            ++tau_fail;
            continue;
        }
        r_tau = std::max(r_tau, elem_dist(*yy, *y));
    }
    real tau_mask = tau_tot > 0 ? static_cast<real>(tau_fail) / static_cast<real>(tau_tot) : 0;
    rep.add(CheckEntry::bound("tau_invertible_roundtrip", r_tau, tol).masked(tau_mask));

    real r_a = 0, r_b = 0;
    long masked = 0;
    for (long s = 0; s < n_samples; ++s) {
        Pt g = maa.G.space.point(maa.G.space.random_node(rng));
        Pt gp = maa.G.space.point(maa.G.space.random_node(rng));
        Pt h = maa.H.space.point(maa.H.space.random_node(rng));
        Pt hp = maa.H.space.point(maa.H.space.random_node(rng));
        auto a_g_h = ds.dp.alpha(g, h);
        auto b_h_g = ds.dp.beta(h, g);
        if (!a_g_h || !b_h_g) {
            ++masked;
            continue;
        }
        auto lhs_a = ds.dp.alpha(g, maa.H.mul(hp, h));
        auto a_bg_hp = ds.dp.alpha(*b_h_g, hp);
        auto lhs_b = ds.dp.beta(h, maa.G.mul(gp, g));
        auto b_ah_gp = ds.dp.beta(*a_g_h, gp);
        if (!lhs_a || !a_bg_hp || !lhs_b || !b_ah_gp) {
            ++masked;
            continue;
        }
        r_a = std::max(r_a, elem_dist(*lhs_a, maa.H.mul(*a_bg_hp, *a_g_h)));
        r_b = std::max(r_b, elem_dist(*lhs_b, maa.G.mul(*b_ah_gp, *b_h_g)));
    }
    real mf = static_cast<real>(masked) / static_cast<real>(n_samples);
    rep.add(CheckEntry::bound("matched_actions_alpha", r_a, tol).masked(mf));
    rep.add(CheckEntry::bound("matched_actions_beta", r_b, tol).masked(mf));

    MatchedPair fake;
    fake.name = maa.name;
    fake.G = maa.G;
    fake.H = maa.H;
    rep.add(check_matched_compatibility(fake, ds.dp, ds.cc, n_samples, substream(seed, "maa_cc"), tol,
                                        "matched_cocycles"));
    return rep;
}

/// Compare the eta-derived dressing with the ambient matched pair's dressing
/// and verify the embeddings are homomorphisms.
inline ResidualReport cross_check_dressing_vs_ambient(const MatchedAbelianApproximations& maa,
                                                      const DerivedStructure& ds, const MatchedPair& ambient,
                                                      long n_samples, std::uint64_t seed, real tol) {
    ResidualReport rep;
    rep.suite = "dressing_vs_ambient:" + maa.name;
    Rng rng(substream(seed, "ambient:" + maa.name));
    real r_hom_h = 0, r_hom_g = 0;
    for (long s = 0; s < n_samples; ++s) {
        Pt h1 = maa.H.space.point(maa.H.space.random_node(rng));
        Pt h2 = maa.H.space.point(maa.H.space.random_node(rng));
        r_hom_h = std::max(r_hom_h, elem_dist(ambient.embed_H(maa.H.mul(h1, h2)),
                                              ambient.D.mul(ambient.embed_H(h1), ambient.embed_H(h2))));
        Pt g1 = maa.G.space.point(maa.G.space.random_node(rng));
        Pt g2 = maa.G.space.point(maa.G.space.random_node(rng));
        r_hom_g = std::max(r_hom_g, elem_dist(ambient.embed_G(maa.G.mul(g1, g2)),
                                              ambient.D.mul(ambient.embed_G(g1), ambient.embed_G(g2))));
    }
    rep.add(CheckEntry::bound("iota_H_homomorphism", r_hom_h, tol));
    rep.add(CheckEntry::bound("iota_G_homomorphism", r_hom_g, tol));
    rep.add(CheckEntry::bound("iota_H_unit", elem_dist(ambient.embed_H(maa.H.identity), ambient.D.identity), tol));

    DressingPair amb = compute_dressing(ambient, 256, substream(seed, "amb_dress"));
    real r_alpha = 0, r_beta = 0;
    long masked = 0;
    for (long s = 0; s < n_samples; ++s) {
        Pt g = maa.G.space.point(maa.G.space.random_node(rng));
        Pt h = maa.H.space.point(maa.H.space.random_node(rng));
        auto a1 = ds.dp.alpha(g, h), a2 = amb.alpha(g, h);
        auto b1 = ds.dp.beta(h, g), b2 = amb.beta(h, g);
        if (!a1 || !a2 || !b1 || !b2) {
            ++masked;
            continue;
        }
        r_alpha = std::max(r_alpha, elem_dist(*a1, *a2));
        r_beta = std::max(r_beta, elem_dist(*b1, *b2));
    }
    real mf = static_cast<real>(masked) / static_cast<real>(n_samples);
    rep.add(CheckEntry::bound("alpha_matches_ambient", r_alpha, tol).masked(mf));
    rep.add(CheckEntry::bound("beta_matches_ambient", r_beta, tol).masked(mf));
    return rep;
}

// ---------------------------------------------------------------------------
// Constructions from 1-cocycles and two-step data

/// Self-dual matched approximations from an essentially bijective 1-cocycle
/// gamma : G -> V^ for rho^ (gamma(g g') = gamma(g) + rho^_g(gamma(g'))):
///   eta_H(h) = -gamma(h^{-1}),  eta_G(g) = gamma(g^{-1}),
/// with H = G, W = V, sigma = rho. Aborts when the cocycle law fails.
inline MatchedAbelianApproximations build_from_one_cocycle(const GroupModel& G, const AbelianGroupPtr& V,
                                                           const std::function<Pt(const Pt&, const Pt&)>& rho,
                                                           const MeasureClassIso& gamma, long n_samples,
                                                           std::uint64_t seed, real tol,
                                                           const std::string& name = "one_cocycle") {
    DualActionSpec rho_hat = dualize_action(rho, V);
    {
        Rng rng(substream(seed, "cocycle_law:" + name));
        real worst = 0;
        const AbelianGroup& Vh = *V->dual;
        for (long s = 0; s < n_samples; ++s) {
            Pt g1 = G.space.point(G.space.random_node(rng));
            Pt g2 = G.space.point(G.space.random_node(rng));
            if (!gamma.src_ok(g1) || !gamma.src_ok(g2) || !gamma.src_ok(G.mul(g1, g2))) continue;
            Pt lhs = gamma.fwd(G.mul(g1, g2));
            Pt rhs = Vh.model.mul(gamma.fwd(g1), rho_hat.act(g1, gamma.fwd(g2)));
            worst = std::max(worst, elem_dist(lhs, rhs));
        }
        if (worst > tol)
            throw qdp_error("build_from_one_cocycle(" + name + "): 1-cocycle law residual " +
                            CheckEntry::format_real(worst) + " exceeds tolerance");
    }
    MatchedAbelianApproximations maa;
    maa.name = name;
    maa.G = G;
    maa.H = G;
    auto Gm = std::make_shared<GroupModel>(G);
    auto Vh = V->dual;
    auto gm = std::make_shared<MeasureClassIso>(gamma);
    // eta_H(h) = -gamma(h^{-1})
    MeasureClassIso etaH;
    etaH.fwd = [Gm, gm, Vh](const Pt& h) { return Vh->model.inv(gm->fwd(Gm->inv(h))); };
    etaH.inv = [Gm, gm, Vh](const Pt& xi) { return Gm->inv(gm->inv(Vh->model.inv(xi))); };
    etaH.rn_density = [Gm, gm](const Pt& h) { return gm->rn_density(Gm->inv(h)); };
    if (gamma.singular_src) {
        auto ss = gamma.singular_src;
        etaH.singular_src = [Gm, ss](const Pt& h) { return ss(Gm->inv(h)); };
    }
    if (gamma.singular_dst) {
        auto sd = gamma.singular_dst;
        etaH.singular_dst = [Vh, sd](const Pt& xi) { return sd(Vh->model.inv(xi)); };
    }
    // eta_G(g) = gamma(g^{-1})
    MeasureClassIso etaG;
    etaG.fwd = [Gm, gm](const Pt& g) { return gm->fwd(Gm->inv(g)); };
    etaG.inv = [Gm, gm](const Pt& xi) { return Gm->inv(gm->inv(xi)); };
    etaG.rn_density = [Gm, gm](const Pt& g) { return gm->rn_density(Gm->inv(g)); };
    if (gamma.singular_src) {
        auto ss = gamma.singular_src;
        etaG.singular_src = [Gm, ss](const Pt& g) { return ss(Gm->inv(g)); };
    }
    etaG.singular_dst = gamma.singular_dst;
    maa.apxH = AbelianApproximation{V, rho, nullptr, etaH};
    maa.apxG = AbelianApproximation{V, rho, nullptr, etaG};
    return maa;
}

/// Two-step nilpotent equivariance: psi(rho^_g(h1), rho^_g(h2)) = theta_g(psi(h1,h2)).
inline CheckEntry check_two_step_equivariance(const GroupModel& G, const GroupModel& Hmodel,
                                              const std::function<Pt(const Pt&, const Pt&)>& psi,
                                              const std::function<Pt(const Pt&, const Pt&)>& rho_hat_on_H,
                                              const std::function<Pt(const Pt&, const Pt&)>& theta,
                                              const GroupModel& W, long n_samples, std::uint64_t seed, real tol,
                                              const std::string& id = "two_step_equivariance") {
    Rng rng(substream(seed, id));
    real worst = 0;
    for (long s = 0; s < n_samples; ++s) {
        Pt g = G.space.point(G.space.random_node(rng));
        Pt h1 = Hmodel.space.point(Hmodel.space.random_node(rng));
        Pt h2 = Hmodel.space.point(Hmodel.space.random_node(rng));
        Pt lhs = psi(rho_hat_on_H(g, h1), rho_hat_on_H(g, h2));
        Pt rhs = theta(g, psi(h1, h2));
        worst = std::max(worst, elem_dist(lhs, rhs));
        (void)W;
    }
    return CheckEntry::bound(id, worst, tol);
}

}  // namespace qdp
