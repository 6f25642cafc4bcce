#pragma once

#include <memory>
#include <optional>
#include <utility>

#include "qdp/axis.hpp"
#include "qdp/core.hpp"

namespace qdp {

/// A computable locally compact group: sampled carrier, closed-form group law,
/// left Haar quadrature and modular function.
///
/// Finite carriers use finite axes with counting measure. Grid carriers use
/// chart coordinates (for R^x axes the coordinate is t = log|g|); mul/inv act
/// on coordinates in closed form, the grid nodes are only samples. The left
/// Haar weight of a node is haar_density(x) times the product of axis weights.
struct GroupModel {
    std::string name;
    Space space;
    Pt identity;
    std::function<Pt(const Pt&, const Pt&)> mul;
    std::function<Pt(const Pt&)> inv;
    std::function<real(const Pt&)> modular;  // defaults to 1

    bool finite() const {
        for (const auto& a : space.axes)
            if (!a.finite) return false;
        return true;
    }
    long order() const { return space.total_nodes(); }
    real haar_weight(const std::vector<int>& idx) const { return space.weight(idx); }
    real delta(const Pt& p) const { return modular ? modular(p) : 1.0; }
};

/// Rescale the per-node weights of one axis by a positive node function.
/// Left Haar measures that are not plain products of axis measures (e.g.
/// d xi da / a^2 on ax+b ambients) are baked into the axis weights this way,
/// so that node weight products are always the true Haar weights.
inline void scale_axis_weights(GroupModel& g, int axis, const std::function<real(const AxisPt&)>& f) {
    Axis& ax = g.space.axes[static_cast<size_t>(axis)];
    for (int c = 0; c < ax.chart_count(); ++c) {
        AxisChart& ch = ax.charts[static_cast<size_t>(c)];
        for (int k = 0; k < ch.n; ++k)
            ch.weights[static_cast<size_t>(k)] *= f(AxisPt{c, ax.finite ? static_cast<real>(k) : ch.node(k)});
    }
}

/// Distance between two points in chart coordinates, relative per coordinate
/// (coordinates range over ~e^L, so absolute comparison would sit below
/// double roundoff). Chart mismatch counts as a unit residual.
inline real elem_dist(const Pt& a, const Pt& b) {
    if (a.n != b.n) return 1.0;
    real d = 0;
    for (int i = 0; i < a.n; ++i) {
        if (a[i].chart != b[i].chart) return 1.0;
        real scale = std::max({1.0, std::abs(a[i].t), std::abs(b[i].t)});
        d = std::max(d, std::abs(a[i].t - b[i].t) / scale);
    }
    return d;
}

// ---------------------------------------------------------------------------
// Abelian groups with Pontryagin pairing

struct AbelianGroup;
using AbelianGroupPtr = std::shared_ptr<AbelianGroup>;

struct AbelianGroup {
    GroupModel model;
    /// Pontryagin pairing <v, xi> in U(1); xi lives on the dual carrier.
    std::function<cplx(const Pt&, const Pt&)> pairing;
    AbelianGroupPtr dual;

    const Space& space() const { return model.space; }
};

/// Z/n with counting measure; self-dual with pairing w^{jk}, w = e^{2*pi*i/n}.
inline AbelianGroupPtr cyclic_group(int n) {
    auto make = [n](const std::string& nm) {
        auto g = std::make_shared<AbelianGroup>();
        g->model.name = nm;
        g->model.space.axes.push_back(Axis::finite_axis(nm, n));
        g->model.identity = pt1(0, 0);
        g->model.mul = [n](const Pt& a, const Pt& b) {
            long s = std::lround(a[0].t) + std::lround(b[0].t);
            return pt1(0, static_cast<real>(((s % n) + n) % n));
        };
        g->model.inv = [n](const Pt& a) {
            long s = -std::lround(a[0].t);
            return pt1(0, static_cast<real>(((s % n) + n) % n));
        };
        g->pairing = [n](const Pt& v, const Pt& xi) {
            long j = std::lround(v[0].t), k = std::lround(xi[0].t);
            return std::polar(1.0, 2 * kPi * static_cast<real>((j * k) % n) / n);
        };
        return g;
    };
    auto g = make("Z" + std::to_string(n));
    auto gh = make("Z" + std::to_string(n) + "^");
    g->dual = gh;
    gh->dual = g;
    return g;
}

/// Direct product of abelian groups (componentwise law, product pairing).
inline AbelianGroupPtr abelian_product(const std::vector<AbelianGroupPtr>& parts, const std::string& nm) {
    auto assemble = [](const std::vector<AbelianGroupPtr>& ps, const std::string& n2) {
        auto g = std::make_shared<AbelianGroup>();
        g->model.name = n2;
        std::vector<int> ranks;
        Pt id;
        for (const auto& p : ps) {
            ranks.push_back(p->space().rank());
            for (const auto& ax : p->space().axes) g->model.space.axes.push_back(ax);
            id = Pt::concat(id, p->model.identity);
        }
        g->model.identity = id;
        g->model.mul = [ps, ranks](const Pt& a, const Pt& b) {
            Pt r;
            int off = 0;
            for (size_t i = 0; i < ps.size(); ++i) {
                r = Pt::concat(r, ps[i]->model.mul(a.slice(off, ranks[i]), b.slice(off, ranks[i])));
                off += ranks[i];
            }
            return r;
        };
        g->model.inv = [ps, ranks](const Pt& a) {
            Pt r;
            int off = 0;
            for (size_t i = 0; i < ps.size(); ++i) {
                r = Pt::concat(r, ps[i]->model.inv(a.slice(off, ranks[i])));
                off += ranks[i];
            }
            return r;
        };
        g->pairing = [ps, ranks](const Pt& v, const Pt& xi) {
            cplx z = 1;
            int off = 0;
            for (size_t i = 0; i < ps.size(); ++i) {
                z *= ps[i]->pairing(v.slice(off, ranks[i]), xi.slice(off, ranks[i]));
                off += ranks[i];
            }
            return z;
        };
        return g;
    };
    auto g = assemble(parts, nm);
    std::vector<AbelianGroupPtr> dparts;
    for (const auto& p : parts) dparts.push_back(p->dual);
    auto gh = assemble(dparts, nm + "^");
    g->dual = gh;
    gh->dual = g;
    return g;
}

/// R^dim on a uniform grid [-L, L)^dim with uniform weights h. The dual grid
/// has spacing 2*pi/(N*h), which makes the discrete Fourier transform exactly
/// unitary for the pairing <v, xi> = e^{i v.xi}.
inline AbelianGroupPtr real_group(int dim, real L, int n, const std::string& nm = "R") {
    auto assemble = [dim, n](real win, const std::string& n2) {
        auto g = std::make_shared<AbelianGroup>();
        g->model.name = n2;
        for (int i = 0; i < dim; ++i)
            g->model.space.axes.push_back(Axis::uniform(n2 + "_" + std::to_string(i), win, n));
        Pt id;
        id.n = dim;
        g->model.identity = id;
        g->model.mul = [dim](const Pt& a, const Pt& b) {
            Pt r;
            r.n = dim;
            for (int i = 0; i < dim; ++i) r[i] = {0, a[i].t + b[i].t};
            return r;
        };
        g->model.inv = [dim](const Pt& a) {
            Pt r;
            r.n = dim;
            for (int i = 0; i < dim; ++i) r[i] = {0, -a[i].t};
            return r;
        };
        g->pairing = [dim](const Pt& v, const Pt& xi) {
            real s = 0;
            for (int i = 0; i < dim; ++i) s += v[i].t * xi[i].t;
            return std::polar(1.0, s);
        };
        return g;
    };
    auto g = assemble(L, nm);
    real h = 2 * L / n;
    real Lhat = kPi / h;  // N * (2*pi/(N*h)) / 2
    auto gh = assemble(Lhat, nm + "^");
    g->dual = gh;
    gh->dual = g;
    return g;
}

/// R^x as two log charts g = +-e^t, t uniform on [-L, L); Haar dg/|g| = dt.
inline GroupModel real_mult_group(real L, int n_per_chart, const std::string& nm = "Rx") {
    GroupModel g;
    g.name = nm;
    g.space.axes.push_back(Axis::log_pair(nm, L, n_per_chart));
    g.identity = pt1(0, 0.0);
    g.mul = [](const Pt& a, const Pt& b) { return pt1(a[0].chart ^ b[0].chart, a[0].t + b[0].t); };
    g.inv = [](const Pt& a) { return pt1(a[0].chart, -a[0].t); };
    return g;
}

/// Numeric value g = +-e^t of a point on an R^x axis.
inline real rx_value(const AxisPt& p) { return (p.chart == 0 ? 1.0 : -1.0) * std::exp(p.t); }
/// Chart point of a nonzero real (t = log|g|).
inline AxisPt rx_point(real g) { return {g > 0 ? 0 : 1, std::log(std::abs(g))}; }

/// Finite group from an explicit multiplication table.
inline GroupModel finite_group_from_table(const std::string& nm, const std::vector<std::vector<int>>& table,
                                          int identity_idx) {
    int n = static_cast<int>(table.size());
    GroupModel g;
    g.name = nm;
    g.space.axes.push_back(Axis::finite_axis(nm, n));
    g.identity = pt1(0, static_cast<real>(identity_idx));
    std::vector<int> invs(static_cast<size_t>(n), -1);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            if (table[static_cast<size_t>(a)][static_cast<size_t>(b)] == identity_idx) invs[static_cast<size_t>(a)] = b;
    g.mul = [table](const Pt& a, const Pt& b) {
        return pt1(0, static_cast<real>(table[static_cast<size_t>(std::lround(a[0].t))][static_cast<size_t>(std::lround(b[0].t))]));
    };
    g.inv = [invs](const Pt& a) { return pt1(0, static_cast<real>(invs[static_cast<size_t>(std::lround(a[0].t))])); };
    return g;
}

/// S3 as permutations of {0,1,2}, indexed lexicographically:
/// 0:(012) 1:(021) 2:(102) 3:(120) 4:(201) 5:(210) as one-line images.
inline GroupModel symmetric_group_s3() {
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    auto index_of = [&](const int p[3]) {
        for (int i = 0; i < 6; ++i)
            if (perms[i][0] == p[0] && perms[i][1] == p[1] && perms[i][2] == p[2]) return i;
        return -1;
    };
    std::vector<std::vector<int>> table(6, std::vector<int>(6));
    for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) {
            int comp[3];  // (a*b)(x) = a(b(x))
            for (int x = 0; x < 3; ++x) comp[x] = perms[a][perms[b][x]];
            table[static_cast<size_t>(a)][static_cast<size_t>(b)] = index_of(comp);
        }
    return finite_group_from_table("S3", table, 0);
}

// ---------------------------------------------------------------------------
// Measure class isomorphisms and the L2 pushforward

/// A measurable a.e.-bijection between sampled carriers.
/// rn_density is the source-side derivative d(inverse_* nu)/d mu; the L2
/// pushforward therefore carries the weight rn_density^{-1/2} so that norms
/// are preserved.
struct MeasureClassIso {
    std::function<Pt(const Pt&)> fwd;
    std::function<Pt(const Pt&)> inv;
    std::function<real(const Pt&)> rn_density;          // on the source
    std::function<bool(const Pt&)> singular_src;        // optional
    std::function<bool(const Pt&)> singular_dst;        // optional

    bool src_ok(const Pt& p) const { return !singular_src || !singular_src(p); }
    bool dst_ok(const Pt& p) const { return !singular_dst || !singular_dst(p); }

    static MeasureClassIso identity() {
        MeasureClassIso m;
        m.fwd = [](const Pt& p) { return p; };
        m.inv = [](const Pt& p) { return p; };
        m.rn_density = [](const Pt&) { return 1.0; };
        return m;
    }
    MeasureClassIso inverse() const {
        MeasureClassIso m;
        m.fwd = inv;
        m.inv = fwd;
        // rn of the inverse map at y is 1/rn(inv(y)).
        auto iv = inv;
        auto d = rn_density;
        m.rn_density = [iv, d](const Pt& y) { return 1.0 / d(iv(y)); };
        m.singular_src = singular_dst;
        m.singular_dst = singular_src;
        return m;
    }
};

/// Central-difference Jacobian determinant oracle for a map between
/// equal-rank chart domains; used to cross-check declared rn densities.
inline real numeric_jacobian_det(const std::function<Pt(const Pt&)>& f, const Pt& x, real step) {
    int n = x.n;
    Pt fx = f(x);
    require(fx.n == n, "numeric_jacobian_det: rank mismatch");
    std::vector<std::vector<real>> J(static_cast<size_t>(n), std::vector<real>(static_cast<size_t>(n)));
    for (int j = 0; j < n; ++j) {
        Pt xp = x, xm = x;
        xp[j].t += step;
        xm[j].t -= step;
        Pt fp = f(xp), fm = f(xm);
        for (int i = 0; i < n; ++i) J[static_cast<size_t>(i)][static_cast<size_t>(j)] = (fp[i].t - fm[i].t) / (2 * step);
    }
    // Gaussian elimination with partial pivoting.
    real det = 1;
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r)
            if (std::abs(J[static_cast<size_t>(r)][static_cast<size_t>(c)]) > std::abs(J[static_cast<size_t>(piv)][static_cast<size_t>(c)])) piv = r;
        if (piv != c) {
            std::swap(J[static_cast<size_t>(piv)], J[static_cast<size_t>(c)]);
            det = -det;
        }
        real p = J[static_cast<size_t>(c)][static_cast<size_t>(c)];
        if (p == 0) return 0;
        det *= p;
        for (int r = c + 1; r < n; ++r) {
            real m = J[static_cast<size_t>(r)][static_cast<size_t>(c)] / p;
            for (int k = c; k < n; ++k) J[static_cast<size_t>(r)][static_cast<size_t>(k)] -= m * J[static_cast<size_t>(c)][static_cast<size_t>(k)];
        }
    }
    return det;
}

// ---------------------------------------------------------------------------
// Extensions G x_{rho,psi} V

/// Extension data: product law
///   (g1, v1)(g2, v2) = (g1 g2, rho(v1)_{g2} + v2 + psi(g1, g2)).
struct ExtensionSpec {
    GroupModel base;                                        // G
    AbelianGroupPtr fiber;                                  // V
    std::function<Pt(const Pt&, const Pt&)> rho;            // (v, g) -> v, right action
    std::function<Pt(const Pt&, const Pt&)> psi;            // (g1, g2) -> v; null means 0
    std::function<real(const Pt&)> modular;                 // of the extension, optional
    std::string name;

    Pt psi_or_zero(const Pt& g1, const Pt& g2) const {
        return psi ? psi(g1, g2) : fiber->model.identity;
    }

    GroupModel build() const {
        GroupModel g;
        g.name = name.empty() ? base.name + "|x" + fiber->model.name : name;
        g.space = Space::product(base.space, fiber->space());
        g.identity = Pt::concat(base.identity, fiber->model.identity);
        int rg = base.space.rank();
        int rv = fiber->space().rank();
        auto self = *this;
        g.mul = [self, rg, rv](const Pt& a, const Pt& b) {
            Pt g1 = a.slice(0, rg), v1 = a.slice(rg, rv);
            Pt g2 = b.slice(0, rg), v2 = b.slice(rg, rv);
            Pt gv = self.fiber->model.mul(self.fiber->model.mul(self.rho(v1, g2), v2), self.psi_or_zero(g1, g2));
            return Pt::concat(self.base.mul(g1, g2), gv);
        };
        g.inv = [self, rg, rv](const Pt& a) {
            Pt g1 = a.slice(0, rg), v1 = a.slice(rg, rv);
            Pt gi = self.base.inv(g1);
            Pt vi = self.fiber->model.inv(self.fiber->model.mul(self.rho(v1, gi), self.psi_or_zero(g1, gi)));
            return Pt::concat(gi, vi);
        };
        g.modular = modular;
        return g;
    }
};

// ---------------------------------------------------------------------------
// Structure checks

/// Associativity / identity / inverse residuals. Finite carriers are checked
/// exhaustively when n^3 <= 1e6; otherwise (and on grids) sampled triples.
/// Also reports the multiplicativity of the declared modular function.
inline ResidualReport check_group_axioms(const GroupModel& g, long n_samples, std::uint64_t seed) {
    require(n_samples >= 1, "check_group_axioms: n_samples must be >= 1");
    ResidualReport rep;
    rep.suite = "group_axioms:" + g.name;
    real assoc = 0, ident = 0, invres = 0, modres = 0;
    auto probe = [&](const Pt& a, const Pt& b, const Pt& c) {
        assoc = std::max(assoc, elem_dist(g.mul(g.mul(a, b), c), g.mul(a, g.mul(b, c))));
        ident = std::max(ident, elem_dist(g.mul(g.identity, a), a));
        ident = std::max(ident, elem_dist(g.mul(a, g.identity), a));
        invres = std::max(invres, elem_dist(g.mul(a, g.inv(a)), g.identity));
        invres = std::max(invres, elem_dist(g.mul(g.inv(a), a), g.identity));
        real d1 = g.delta(g.mul(a, b)), d2 = g.delta(a) * g.delta(b);
        modres = std::max(modres, std::abs(d1 - d2) / std::max(1.0, std::abs(d2)));
        (void)c;
    };
    long n = g.order();
    bool exhaustive = g.finite() && n * n * n <= 1000000;
    if (exhaustive) {
        auto pt_of = [&](long flat) {
            std::vector<int> idx(static_cast<size_t>(g.space.rank()));
            for (int ax = g.space.rank() - 1; ax >= 0; --ax) {
                int sz = g.space.axes[static_cast<size_t>(ax)].total_nodes();
                idx[static_cast<size_t>(ax)] = static_cast<int>(flat % sz);
                flat /= sz;
            }
            return g.space.point(idx);
        };
        for (long a = 0; a < n; ++a)
            for (long b = 0; b < n; ++b)
                for (long c = 0; c < n; ++c) probe(pt_of(a), pt_of(b), pt_of(c));
        rep.metadata["mode"] = "exhaustive (" + std::to_string(n * n * n) + " triples)";
    } else {
        Rng rng(substream(seed, "group_axioms:" + g.name));
        for (long s = 0; s < n_samples; ++s)
            probe(g.space.point(g.space.random_node(rng)), g.space.point(g.space.random_node(rng)),
                  g.space.point(g.space.random_node(rng)));
        rep.metadata["mode"] = "sampled (" + std::to_string(n_samples) + " triples)";
    }
    real tol = g.finite() ? 0.0 : 1e-12;
    rep.add(CheckEntry::bound("associativity", assoc, tol));
    rep.add(CheckEntry::bound("identity", ident, tol));
    rep.add(CheckEntry::bound("inverse", invres, tol));
    rep.add(CheckEntry::bound("modular_multiplicative", modres, g.finite() ? 0.0 : 1e-10));
    return rep;
}

/// Bump shape knobs for the quadrature oracles: center offset and width as
/// fractions of the chart half-width.
struct BumpParams {
    real center_frac = 0.2;
    real sigma_lo_frac = 1.0 / 8;
    real sigma_hi_frac = 1.0 / 5;
};

/// Quadrature estimate of int f(g g0) dg / int f(g) dg, which equals
/// delta_G(g0)^{-1}. Bump test functions are Gaussians in chart coordinates.
/// Returns the averaged ratio; flags bumps whose support nears the window.
inline real estimate_modular_function(const GroupModel& g, const Pt& g0, int test_functions, std::uint64_t seed,
                                      bool* window_flag = nullptr, const BumpParams& bp = {}) {
    require(test_functions >= 1, "estimate_modular_function: need at least one test function");
    Rng rng(substream(seed, "modular:" + g.name));
    if (window_flag) *window_flag = false;
    real acc = 0;
    for (int f = 0; f < test_functions; ++f) {
        // Random centered bump in chart coordinates.
        std::vector<real> c(static_cast<size_t>(g.space.rank())), s(static_cast<size_t>(g.space.rank()));
        std::vector<int> chart(static_cast<size_t>(g.space.rank()), 0);
        for (int i = 0; i < g.space.rank(); ++i) {
            const Axis& ax = g.space.axes[static_cast<size_t>(i)];
            const AxisChart& ch0 = ax.charts[0];
            if (ax.finite) continue;
            real L = 0.5 * (ch0.hi() - ch0.lo);
            c[static_cast<size_t>(i)] = urand(rng, -bp.center_frac * L, bp.center_frac * L);
            s[static_cast<size_t>(i)] = urand(rng, bp.sigma_lo_frac * L, bp.sigma_hi_frac * L);
            chart[static_cast<size_t>(i)] = irand(rng, 0, ax.chart_count() - 1);
        }
        auto bump = [&](const Pt& p) -> real {
            real v = 1;
            for (int i = 0; i < p.n; ++i) {
                const Axis& ax = g.space.axes[static_cast<size_t>(i)];
                if (ax.finite) continue;
                if (p[i].chart != chart[static_cast<size_t>(i)]) return 0.0;
                real z = (p[i].t - c[static_cast<size_t>(i)]) / s[static_cast<size_t>(i)];
                v *= std::exp(-0.5 * z * z);
            }
            return v;
        };
        real num = 0, den = 0;
        std::vector<int> idx(static_cast<size_t>(g.space.rank()), 0);
        bool more = g.space.total_nodes() > 0;
        while (more) {
            Pt p = g.space.point(idx);
            real w = g.haar_weight(idx);
            den += w * bump(p);
            num += w * bump(g.mul(p, g0));
            // advance multi-index
            int ax = g.space.rank() - 1;
            while (ax >= 0) {
                if (++idx[static_cast<size_t>(ax)] < g.space.axes[static_cast<size_t>(ax)].total_nodes()) break;
                idx[static_cast<size_t>(ax)] = 0;
                --ax;
            }
            more = ax >= 0;
        }
        if (window_flag) {
            for (int i = 0; i < g.space.rank(); ++i) {
                const Axis& ax = g.space.axes[static_cast<size_t>(i)];
                if (ax.finite) continue;
                const AxisChart& ch = ax.charts[static_cast<size_t>(chart[static_cast<size_t>(i)])];
                if (c[static_cast<size_t>(i)] - 4 * s[static_cast<size_t>(i)] < ch.lo || c[static_cast<size_t>(i)] + 4 * s[static_cast<size_t>(i)] > ch.hi())
                    *window_flag = true;
            }
        }
        require(den > 0, "estimate_modular_function: bump has no mass on the grid");
        acc += num / den;
    }
    return acc / test_functions;
}

}  // namespace qdp
