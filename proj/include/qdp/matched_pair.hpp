#pragma once

#include "qdp/l2.hpp"

namespace qdp {

/// A matched pair (G, H) <= D: closed subgroups with trivial intersection
/// whose product exhausts D up to measure zero. The factorizers invert
///   mu(g, h) = g h^{-1}   and   mu_sigma(g, h) = h^{-1} g
/// outside a declared singular set (finite pairs: exhaustive lookup; grid
/// pairs: closed forms supplied by the example). Disintegration constants
/// record the Haar normalization choice.
struct MatchedPair {
    std::string name;
    GroupModel G, H, D;
    std::function<Pt(const Pt&)> embed_G, embed_H;
    std::function<std::optional<std::pair<Pt, Pt>>(const Pt&)> factor_mu;        // x -> (g, h)
    std::function<std::optional<std::pair<Pt, Pt>>(const Pt&)> factor_mu_sigma;  // x -> (g, h)
    real haar_const_mu = 1.0;
    real haar_const_sigma = 1.0;

    Pt mu(const Pt& g, const Pt& h) const { return D.mul(embed_G(g), D.inv(embed_H(h))); }
    Pt mu_sigma(const Pt& g, const Pt& h) const { return D.mul(D.inv(embed_H(h)), embed_G(g)); }
};

/// Exhaustive factorizers for finite pairs; requires |D| = |G||H| coverage
/// up to lookup failure (which simply yields masked tuples).
inline void attach_finite_factorizers(MatchedPair& mp) {
    require(mp.D.finite(), "attach_finite_factorizers: D must be finite");
    struct Tables {
        std::vector<std::optional<std::pair<Pt, Pt>>> mu, musig;
    };
    auto tbl = std::make_shared<Tables>();
    long n = mp.D.order();
    tbl->mu.assign(static_cast<size_t>(n), std::nullopt);
    tbl->musig.assign(static_cast<size_t>(n), std::nullopt);
    auto flat_of = [&](const Pt& x) { return std::lround(x[0].t); };
    for (NodeIter ig(mp.G.space); !ig.done; ig.next())
        for (NodeIter ih(mp.H.space); !ih.done; ih.next()) {
            Pt g = mp.G.space.point(ig.idx), h = mp.H.space.point(ih.idx);
            tbl->mu[static_cast<size_t>(flat_of(mp.mu(g, h)))] = std::make_pair(g, h);
            tbl->musig[static_cast<size_t>(flat_of(mp.mu_sigma(g, h)))] = std::make_pair(g, h);
        }
    mp.factor_mu = [tbl, flat_of](const Pt& x) { return tbl->mu[static_cast<size_t>(flat_of(x))]; };
    mp.factor_mu_sigma = [tbl, flat_of](const Pt& x) { return tbl->musig[static_cast<size_t>(flat_of(x))]; };
}

/// Dressing transformations alpha : G x H -> H, beta : H x G -> G determined
/// almost everywhere by g h^{-1} = alpha_g(h)^{-1} beta_h(g); masked tuples
/// return nullopt.
struct DressingPair {
    std::function<std::optional<Pt>(const Pt&, const Pt&)> alpha;  // (g, h) -> H
    std::function<std::optional<Pt>(const Pt&, const Pt&)> beta;   // (h, g) -> G

    static DressingPair trivial(const GroupModel&, const GroupModel&) {
        DressingPair dp;
        dp.alpha = [](const Pt&, const Pt& h) { return std::optional<Pt>(h); };
        dp.beta = [](const Pt&, const Pt& g) { return std::optional<Pt>(g); };
        return dp;
    }
};

/// Unit-modulus cocycles U : G x G x H -> U(1), V : H x H x G -> U(1).
struct CocyclePair {
    std::function<cplx(const Pt&, const Pt&, const Pt&)> U;  // (g1, g2, h)
    std::function<cplx(const Pt&, const Pt&, const Pt&)> V;  // (h1, h2, g)

    static CocyclePair trivial() {
        CocyclePair c;
        c.U = [](const Pt&, const Pt&, const Pt&) { return cplx{1, 0}; };
        c.V = [](const Pt&, const Pt&, const Pt&) { return cplx{1, 0}; };
        return c;
    }
};

/// Dressing from the factorizers: (beta_h(g), alpha_g(h)) = mu_sigma^{-1}(mu(g, h)).
/// Probes the mask on a node sample; aborts when more than half the probed
/// tuples fail to factor.
inline DressingPair compute_dressing(const MatchedPair& mp, long n_probe = 256, std::uint64_t seed = 1) {
    auto mpc = std::make_shared<MatchedPair>(mp);
    DressingPair dp;
    dp.alpha = [mpc](const Pt& g, const Pt& h) -> std::optional<Pt> {
        auto f = mpc->factor_mu_sigma(mpc->mu(g, h));
        if (!f) return std::nullopt;
        return f->second;
    };
    dp.beta = [mpc](const Pt& h, const Pt& g) -> std::optional<Pt> {
        auto f = mpc->factor_mu_sigma(mpc->mu(g, h));
        if (!f) return std::nullopt;
        return f->first;
    };
    Rng rng(substream(seed, "dressing_probe:" + mp.name));
    long masked = 0;
    for (long s = 0; s < n_probe; ++s) {
        Pt g = mp.G.space.point(mp.G.space.random_node(rng));
        Pt h = mp.H.space.point(mp.H.space.random_node(rng));
        if (!dp.alpha(g, h)) ++masked;
    }
    if (2 * masked > n_probe)
        throw qdp_error("compute_dressing(" + mp.name + "): " + std::to_string(masked) + "/" +
                        std::to_string(n_probe) + " probed tuples failed to factor");
    return dp;
}

/// Residual of the defining equation g h^{-1} = alpha_g(h)^{-1} beta_h(g) in D.
inline CheckEntry check_dressing_defining(const MatchedPair& mp, const DressingPair& dp, long n_samples,
                                          std::uint64_t seed, real tol) {
    Rng rng(substream(seed, "dressing_def:" + mp.name));
    real worst = 0;
    long masked = 0;
    for (long s = 0; s < n_samples; ++s) {
        Pt g = mp.G.space.point(mp.G.space.random_node(rng));
        Pt h = mp.H.space.point(mp.H.space.random_node(rng));
        auto a = dp.alpha(g, h), b = dp.beta(h, g);
        if (!a || !b) {
            ++masked;
            continue;
        }
        Pt lhs = mp.mu(g, h);
        Pt rhs = mp.D.mul(mp.D.inv(mp.embed_H(*a)), mp.embed_G(*b));
        worst = std::max(worst, elem_dist(lhs, rhs));
    }
    return CheckEntry::bound("dressing_defining_eq", worst, tol)
        .masked(static_cast<real>(masked) / static_cast<real>(n_samples));
}

/// The four dressing identities: for almost every g, g', h, h',
///   alpha_{g'g}(h) = alpha_{g'}(alpha_g(h)),  beta_h(g'g) = beta_{alpha_g(h)}(g') beta_h(g),
///   beta_{h'h}(g) = beta_{h'}(beta_h(g)),      alpha_g(h'h) = alpha_{beta_h(g)}(h') alpha_g(h).
inline ResidualReport check_dressing_identities(const MatchedPair& mp, const DressingPair& dp, long n_samples,
                                                std::uint64_t seed, real tol) {
    ResidualReport rep;
    rep.suite = "dressing_identities:" + mp.name;
    real r1 = 0, r2 = 0, r3 = 0, r4 = 0;
    long masked = 0, total = 0;
    auto probe = [&](const Pt& gp, const Pt& g, const Pt& hp, const Pt& h) {
        ++total;
        auto a_g_h = dp.alpha(g, h);
        auto b_h_g = dp.beta(h, g);
        if (!a_g_h || !b_h_g) {
            ++masked;
            return;
        }
        auto lhs1 = dp.alpha(mp.G.mul(gp, g), h);
        auto rhs1 = dp.alpha(gp, *a_g_h);
        auto lhs2 = dp.beta(h, mp.G.mul(gp, g));
        auto b_ah_gp = dp.beta(*a_g_h, gp);
        auto lhs3 = dp.beta(mp.H.mul(hp, h), g);
        auto rhs3 = dp.beta(hp, *b_h_g);
        auto lhs4 = dp.alpha(g, mp.H.mul(hp, h));
        auto a_bg_hp = dp.alpha(*b_h_g, hp);
        if (!lhs1 || !rhs1 || !lhs2 || !b_ah_gp || !lhs3 || !rhs3 || !lhs4 || !a_bg_hp) {
            ++masked;
            return;
        }
        r1 = std::max(r1, elem_dist(*lhs1, *rhs1));
        r2 = std::max(r2, elem_dist(*lhs2, mp.G.mul(*b_ah_gp, *b_h_g)));
        r3 = std::max(r3, elem_dist(*lhs3, *rhs3));
        r4 = std::max(r4, elem_dist(*lhs4, mp.H.mul(*a_bg_hp, *a_g_h)));
    };
    long ng = mp.G.order(), nh = mp.H.order();
    if (mp.D.finite() && ng * ng * nh * nh <= 100000) {
        for (NodeIter i1(mp.G.space); !i1.done; i1.next())
            for (NodeIter i2(mp.G.space); !i2.done; i2.next())
                for (NodeIter i3(mp.H.space); !i3.done; i3.next())
                    for (NodeIter i4(mp.H.space); !i4.done; i4.next())
                        probe(mp.G.space.point(i1.idx), mp.G.space.point(i2.idx), mp.H.space.point(i3.idx),
                              mp.H.space.point(i4.idx));
        rep.metadata["mode"] = "exhaustive";
    } else {
        Rng rng(substream(seed, "dressing_ids:" + mp.name));
        for (long s = 0; s < n_samples; ++s)
            probe(mp.G.space.point(mp.G.space.random_node(rng)), mp.G.space.point(mp.G.space.random_node(rng)),
                  mp.H.space.point(mp.H.space.random_node(rng)), mp.H.space.point(mp.H.space.random_node(rng)));
        rep.metadata["mode"] = "sampled";
    }
    real mf = total > 0 ? static_cast<real>(masked) / static_cast<real>(total) : 0;
    rep.add(CheckEntry::bound("alpha_left_action", r1, tol).masked(mf));
    rep.add(CheckEntry::bound("beta_twisted_right", r2, tol).masked(mf));
    rep.add(CheckEntry::bound("beta_left_action", r3, tol).masked(mf));
    rep.add(CheckEntry::bound("alpha_twisted_right", r4, tol).masked(mf));
    return rep;
}

/// Haar disintegration of D over G x H:
///   int_D f = c_mu    int f(mu(g,h))       delta_D(h)^{-1} dg dh
///           = c_sigma int f(mu_sigma(g,h)) delta_D(g) delta_G(g)^{-1} delta_H(h)^{-1} dg dh
/// for bump test functions f; residuals are relative to int_D f.
inline ResidualReport check_haar_disintegration(const MatchedPair& mp, int test_functions, std::uint64_t seed,
                                                real tol) {
    ResidualReport rep;
    rep.suite = "haar_disintegration:" + mp.name;
    Rng rng(substream(seed, "haar:" + mp.name));
    real worst_mu = 0, worst_sigma = 0, leak = 0;
    for (int tf = 0; tf < test_functions; ++tf) {
        // Bump on D in chart coordinates.
        int rk = mp.D.space.rank();
        std::vector<real> c(static_cast<size_t>(rk)), s(static_cast<size_t>(rk));
        std::vector<int> chart(static_cast<size_t>(rk), 0);
        std::vector<cplx> coef(static_cast<size_t>(rk));
        for (int i = 0; i < rk; ++i) {
            const Axis& ax = mp.D.space.axes[static_cast<size_t>(i)];
            if (ax.finite) continue;
            const AxisChart& ch = ax.charts[0];
            real L = 0.5 * (ch.hi() - ch.lo);
            c[static_cast<size_t>(i)] = urand(rng, -0.2 * L, 0.2 * L);
            s[static_cast<size_t>(i)] = urand(rng, L / 8, L / 5);
            chart[static_cast<size_t>(i)] = irand(rng, 0, ax.chart_count() - 1);
        }
        auto f = [&](const Pt& p) -> real {
            real v = 1;
            for (int i = 0; i < rk; ++i) {
                const Axis& ax = mp.D.space.axes[static_cast<size_t>(i)];
                if (ax.finite) {
                    // alternate support on finite axes
                    v *= (std::lround(p[i].t) % 2 == 0) ? 1.0 : 0.25;
                    continue;
                }
                if (p[i].chart != chart[static_cast<size_t>(i)]) return 0.0;
                real z = (p[i].t - c[static_cast<size_t>(i)]) / s[static_cast<size_t>(i)];
                v *= std::exp(-0.5 * z * z);
            }
            return v;
        };
        real lhs = 0;
        for (NodeIter it(mp.D.space); !it.done; it.next()) lhs += mp.D.space.weight(it.idx) * f(mp.D.space.point(it.idx));
        real rhs_mu = 0, rhs_sigma = 0, off_mass = 0, tot_mass = 0;
        for (NodeIter ig(mp.G.space); !ig.done; ig.next())
            for (NodeIter ih(mp.H.space); !ih.done; ih.next()) {
                Pt g = mp.G.space.point(ig.idx), h = mp.H.space.point(ih.idx);
                real w = mp.G.space.weight(ig.idx) * mp.H.space.weight(ih.idx);
                Pt xm = mp.mu(g, h), xs = mp.mu_sigma(g, h);
                real fm = f(xm);
                rhs_mu += w * fm / mp.D.delta(mp.embed_H(h));
                rhs_sigma += w * f(xs) * mp.D.delta(mp.embed_G(g)) / (mp.G.delta(g) * mp.H.delta(h));
                tot_mass += w * fm;
                if (!mp.D.space.in_window(xm)) off_mass += w * fm;
            }
        if (lhs <= 0) continue;
        worst_mu = std::max(worst_mu, std::abs(lhs - mp.haar_const_mu * rhs_mu) / lhs);
        worst_sigma = std::max(worst_sigma, std::abs(lhs - mp.haar_const_sigma * rhs_sigma) / lhs);
        if (tot_mass > 0) leak = std::max(leak, off_mass / tot_mass);
    }
    rep.metadata["haar_const_mu"] = CheckEntry::format_real(mp.haar_const_mu);
    rep.metadata["haar_const_sigma"] = CheckEntry::format_real(mp.haar_const_sigma);
    if (leak > 1e-6) rep.metadata["truncation_leakage"] = CheckEntry::format_real(leak);
    rep.add(CheckEntry::bound("disintegration_mu", worst_mu, tol));
    rep.add(CheckEntry::bound("disintegration_mu_sigma", worst_sigma, tol));
    return rep;
}

/// Cocycle equation for U:
///   U(g1,g2,alpha_{g3}(h)) U(g1 g2,g3,h) = U(g1,g2 g3,h) U(g2,g3,h).
inline CheckEntry check_cocycle_U(const MatchedPair& mp, const DressingPair& dp,
                                  const std::function<cplx(const Pt&, const Pt&, const Pt&)>& U, long n_samples,
                                  std::uint64_t seed, real tol, const std::string& id = "cocycle_U") {
    Rng rng(substream(seed, id + ":" + mp.name));
    real worst = 0;
    long masked = 0;
    for (long s = 0; s < n_samples; ++s) {
        Pt g1 = mp.G.space.point(mp.G.space.random_node(rng));
        Pt g2 = mp.G.space.point(mp.G.space.random_node(rng));
        Pt g3 = mp.G.space.point(mp.G.space.random_node(rng));
        Pt h = mp.H.space.point(mp.H.space.random_node(rng));
        auto ah = dp.alpha(g3, h);
        if (!ah) {
            ++masked;
            continue;
        }
        cplx lhs = U(g1, g2, *ah) * U(mp.G.mul(g1, g2), g3, h);
        cplx rhs = U(g1, mp.G.mul(g2, g3), h) * U(g2, g3, h);
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return CheckEntry::bound(id, worst, tol).masked(static_cast<real>(masked) / static_cast<real>(n_samples));
}

/// Cocycle equation for V (the h3 reading of the paper's "h_C"):
///   V(h1,h2,beta_{h3}(g)) V(h1 h2,h3,g) = V(h1,h2 h3,g) V(h2,h3,g).
inline CheckEntry check_cocycle_V(const MatchedPair& mp, const DressingPair& dp,
                                  const std::function<cplx(const Pt&, const Pt&, const Pt&)>& V, long n_samples,
                                  std::uint64_t seed, real tol, const std::string& id = "cocycle_V") {
    Rng rng(substream(seed, id + ":" + mp.name));
    real worst = 0;
    long masked = 0;
    for (long s = 0; s < n_samples; ++s) {
        Pt h1 = mp.H.space.point(mp.H.space.random_node(rng));
        Pt h2 = mp.H.space.point(mp.H.space.random_node(rng));
        Pt h3 = mp.H.space.point(mp.H.space.random_node(rng));
        Pt g = mp.G.space.point(mp.G.space.random_node(rng));
        auto bg = dp.beta(h3, g);
        if (!bg) {
            ++masked;
            continue;
        }
        cplx lhs = V(h1, h2, *bg) * V(mp.H.mul(h1, h2), h3, g);
        cplx rhs = V(h1, mp.H.mul(h2, h3), g) * V(h2, h3, g);
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return CheckEntry::bound(id, worst, tol).masked(static_cast<real>(masked) / static_cast<real>(n_samples));
}

/// Matched-cocycle compatibility under the adopted parenthesization:
///   V(h1,h2,g1 g2) conj(U)(g1,g2,h1 h2)
///     = V(alpha_{beta_{h2}(g2)}(h1), alpha_{g2}(h2), g1) V(h1,h2,g2)
///       conj(U)(beta_{alpha_{g2}(h2)}(g1), beta_{h2}(g2), h1) conj(U)(g1,g2,h2).
inline CheckEntry check_matched_compatibility(const MatchedPair& mp, const DressingPair& dp, const CocyclePair& cc,
                                              long n_samples, std::uint64_t seed, real tol,
                                              const std::string& id = "matched_cocycles") {
    Rng rng(substream(seed, id + ":" + mp.name));
    real worst = 0;
    long masked = 0;
    for (long s = 0; s < n_samples; ++s) {
        Pt g1 = mp.G.space.point(mp.G.space.random_node(rng));
        Pt g2 = mp.G.space.point(mp.G.space.random_node(rng));
        Pt h1 = mp.H.space.point(mp.H.space.random_node(rng));
        Pt h2 = mp.H.space.point(mp.H.space.random_node(rng));
        auto bh2g2 = dp.beta(h2, g2);
        auto ag2h2 = dp.alpha(g2, h2);
        if (!bh2g2 || !ag2h2) {
            ++masked;
            continue;
        }
        auto a1 = dp.alpha(*bh2g2, h1);
        auto b1 = dp.beta(*ag2h2, g1);
        if (!a1 || !b1) {
            ++masked;
            continue;
        }
        cplx lhs = cc.V(h1, h2, mp.G.mul(g1, g2)) * std::conj(cc.U(g1, g2, mp.H.mul(h1, h2)));
        cplx rhs = cc.V(*a1, *ag2h2, g1) * cc.V(h1, h2, g2) * std::conj(cc.U(*b1, *bh2g2, h1)) *
                   std::conj(cc.U(g1, g2, h2));
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return CheckEntry::bound(id, worst, tol).masked(static_cast<real>(masked) / static_cast<real>(n_samples));
}

/// The swapped matched pair (H, G) <= D with dressing (beta, alpha) and
/// cocycles (V, U).
struct SwappedStructure {
    MatchedPair mp;
    DressingPair dp;
    CocyclePair cc;
};

inline SwappedStructure swap_matched_pair(const MatchedPair& mp, const DressingPair& dp, const CocyclePair& cc) {
    SwappedStructure out;
    out.mp.name = mp.name + "_swapped";
    out.mp.G = mp.H;
    out.mp.H = mp.G;
    out.mp.D = mp.D;
    out.mp.embed_G = mp.embed_H;
    out.mp.embed_H = mp.embed_G;
    // Substituting x -> x^{-1} and using delta_D(g h^{-1}) = delta_D(g)/delta_D(h)
    // shows both normalization constants carry over unchanged.
    out.mp.haar_const_mu = mp.haar_const_mu;
    out.mp.haar_const_sigma = mp.haar_const_sigma;
    auto mpD = std::make_shared<GroupModel>(mp.D);
    auto fm = mp.factor_mu;
    auto fs = mp.factor_mu_sigma;
    // mu'(h, g) = h g^{-1} = (g h^{-1})^{-1}; factor through the original maps.
    out.mp.factor_mu = [mpD, fm](const Pt& x) -> std::optional<std::pair<Pt, Pt>> {
        auto f = fm(mpD->inv(x));
        if (!f) return std::nullopt;
        return std::make_pair(f->second, f->first);
    };
    out.mp.factor_mu_sigma = [mpD, fs](const Pt& x) -> std::optional<std::pair<Pt, Pt>> {
        auto f = fs(mpD->inv(x));
        if (!f) return std::nullopt;
        return std::make_pair(f->second, f->first);
    };
    out.dp.alpha = dp.beta;
    out.dp.beta = dp.alpha;
    out.cc.U = cc.V;
    out.cc.V = cc.U;
    return out;
}

}  // namespace qdp
