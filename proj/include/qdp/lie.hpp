#pragma once

#include <boost/rational.hpp>

#include "qdp/core.hpp"

namespace qdp {

using Rat = boost::rational<long long>;

inline real to_double(const Rat& r) { return boost::rational_cast<real>(r); }
inline real to_double(real r) { return r; }

/// Finite-dimensional Lie algebra by structure constants:
/// [e_i, e_j] = sum_k c[i][j][k] e_k. Scalar is exact rational for the
/// paper's integer tables, double for chart evaluations.
template <typename S>
struct LieAlgebra {
    int dim = 0;
    std::vector<std::string> basis;
    std::vector<std::vector<std::vector<S>>> c;

    static LieAlgebra zero(int n, std::vector<std::string> names = {}) {
        LieAlgebra L;
        L.dim = n;
        L.basis = std::move(names);
        if (L.basis.empty())
            for (int i = 0; i < n; ++i) L.basis.push_back("e" + std::to_string(i));
        L.c.assign(static_cast<size_t>(n),
                   std::vector<std::vector<S>>(static_cast<size_t>(n), std::vector<S>(static_cast<size_t>(n), S(0))));
        return L;
    }
    /// Set [e_i, e_j] = sum_k coeffs[k] e_k (and the antisymmetric partner).
    void set_bracket(int i, int j, const std::vector<S>& coeffs) {
        for (int k = 0; k < dim; ++k) {
            c[static_cast<size_t>(i)][static_cast<size_t>(j)][static_cast<size_t>(k)] = coeffs[static_cast<size_t>(k)];
            c[static_cast<size_t>(j)][static_cast<size_t>(i)][static_cast<size_t>(k)] = -coeffs[static_cast<size_t>(k)];
        }
    }
    std::vector<S> bracket(const std::vector<S>& x, const std::vector<S>& y) const {
        std::vector<S> out(static_cast<size_t>(dim), S(0));
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) {
                S f = x[static_cast<size_t>(i)] * y[static_cast<size_t>(j)];
                if (f == S(0)) continue;
                for (int k = 0; k < dim; ++k)
                    out[static_cast<size_t>(k)] += f * c[static_cast<size_t>(i)][static_cast<size_t>(j)][static_cast<size_t>(k)];
            }
        return out;
    }
};

/// Skew bivector r = sum r[i][j] e_i tensor e_j on a Lie algebra.
template <typename S>
struct RMatrix {
    std::vector<std::vector<S>> r;

    static RMatrix wedge(int dim, int i, int j, S coef = S(1)) {
        RMatrix m;
        m.r.assign(static_cast<size_t>(dim), std::vector<S>(static_cast<size_t>(dim), S(0)));
        m.r[static_cast<size_t>(i)][static_cast<size_t>(j)] = coef;
        m.r[static_cast<size_t>(j)][static_cast<size_t>(i)] = -coef;
        return m;
    }
    bool skew() const {
        for (size_t i = 0; i < r.size(); ++i)
            for (size_t j = 0; j < r.size(); ++j)
                if (r[i][j] != -r[j][i]) return false;
        return true;
    }
};

/// Lie algebra plus cocommutator tensor delta(e_k) = sum delta[k][i][j] e_i tensor e_j.
template <typename S>
struct LieBialgebra {
    LieAlgebra<S> algebra;
    std::vector<std::vector<std::vector<S>>> delta;
};

template <typename S>
inline CheckEntry check_jacobi(const LieAlgebra<S>& L, const std::string& id = "jacobi") {
    real worst = 0;
    for (int i = 0; i < L.dim; ++i)
        for (int j = 0; j < L.dim; ++j)
            for (int k = 0; k < L.dim; ++k) {
                std::vector<S> ei(static_cast<size_t>(L.dim), S(0)), ej = ei, ek = ei;
                ei[static_cast<size_t>(i)] = S(1);
                ej[static_cast<size_t>(j)] = S(1);
                ek[static_cast<size_t>(k)] = S(1);
                auto t1 = L.bracket(L.bracket(ei, ej), ek);
                auto t2 = L.bracket(L.bracket(ej, ek), ei);
                auto t3 = L.bracket(L.bracket(ek, ei), ej);
                for (int m = 0; m < L.dim; ++m)
                    worst = std::max(worst, std::abs(to_double(t1[static_cast<size_t>(m)] + t2[static_cast<size_t>(m)] +
                                                               t3[static_cast<size_t>(m)])));
            }
    return CheckEntry::bound(id, worst, 0.0);
}

/// Classical Yang-Baxter residual [r12,r13] + [r12,r23] + [r13,r23] in the
/// tensor-cube basis.
template <typename S>
inline CheckEntry check_cybe(const LieAlgebra<S>& L, const RMatrix<S>& r, const std::string& id = "cybe") {
    require(r.skew(), "check_cybe: r must be skew");
    int n = L.dim;
    real worst = 0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int cc = 0; cc < n; ++cc) {
                S t(0);
                for (int i = 0; i < n; ++i)
                    for (int k = 0; k < n; ++k) {
                        // [r12, r13]: c_{ik}^a r^{ib} r^{kc}
                        t += L.c[static_cast<size_t>(i)][static_cast<size_t>(k)][static_cast<size_t>(a)] *
                             r.r[static_cast<size_t>(i)][static_cast<size_t>(b)] * r.r[static_cast<size_t>(k)][static_cast<size_t>(cc)];
                        // [r12, r23]: c_{jk}^b r^{aj} r^{kc}
                        t += L.c[static_cast<size_t>(i)][static_cast<size_t>(k)][static_cast<size_t>(b)] *
                             r.r[static_cast<size_t>(a)][static_cast<size_t>(i)] * r.r[static_cast<size_t>(k)][static_cast<size_t>(cc)];
                        // [r13, r23]: c_{jl}^c r^{aj} r^{bl}
                        t += L.c[static_cast<size_t>(i)][static_cast<size_t>(k)][static_cast<size_t>(cc)] *
                             r.r[static_cast<size_t>(a)][static_cast<size_t>(i)] * r.r[static_cast<size_t>(b)][static_cast<size_t>(k)];
                    }
                worst = std::max(worst, std::abs(to_double(t)));
            }
    return CheckEntry::bound(id, worst, 0.0);
}

/// Coboundary cocommutator delta(X) = ad_X(r):
///   delta[k][a][b] = sum_i c_{ki}^a r^{ib} + sum_j r^{aj} c_{kj}^b.
template <typename S>
inline LieBialgebra<S> cocommutator_from_r(const LieAlgebra<S>& L, const RMatrix<S>& r) {
    require(r.skew(), "cocommutator_from_r: r must be skew");
    LieBialgebra<S> B;
    B.algebra = L;
    int n = L.dim;
    B.delta.assign(static_cast<size_t>(n),
                   std::vector<std::vector<S>>(static_cast<size_t>(n), std::vector<S>(static_cast<size_t>(n), S(0))));
    for (int k = 0; k < n; ++k)
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                S t(0);
                for (int i = 0; i < n; ++i) {
                    t += L.c[static_cast<size_t>(k)][static_cast<size_t>(i)][static_cast<size_t>(a)] *
                         r.r[static_cast<size_t>(i)][static_cast<size_t>(b)];
                    t += r.r[static_cast<size_t>(a)][static_cast<size_t>(i)] *
                         L.c[static_cast<size_t>(k)][static_cast<size_t>(i)][static_cast<size_t>(b)];
                }
                B.delta[static_cast<size_t>(k)][static_cast<size_t>(a)][static_cast<size_t>(b)] = t;
            }
    return B;
}

/// Dual bracket [d^a, d^b]_* = sum_k delta[k][a][b] d^k on the dual space;
/// Jacobi is re-checked by the caller (failure signals delta is not a
/// bialgebra cocommutator).
template <typename S>
inline LieAlgebra<S> dual_bracket(const LieBialgebra<S>& B) {
    int n = B.algebra.dim;
    LieAlgebra<S> D = LieAlgebra<S>::zero(n);
    for (int i = 0; i < n; ++i) D.basis[static_cast<size_t>(i)] = "d^" + B.algebra.basis[static_cast<size_t>(i)];
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int k = 0; k < n; ++k)
                D.c[static_cast<size_t>(a)][static_cast<size_t>(b)][static_cast<size_t>(k)] =
                    B.delta[static_cast<size_t>(k)][static_cast<size_t>(a)][static_cast<size_t>(b)];
    return D;
}

template <typename S>
inline S det_exact(std::vector<std::vector<S>> m) {
    int n = static_cast<int>(m.size());
    S det(1);
    for (int c = 0; c < n; ++c) {
        int piv = -1;
        for (int r2 = c; r2 < n; ++r2)
            if (m[static_cast<size_t>(r2)][static_cast<size_t>(c)] != S(0)) {
                piv = r2;
                break;
            }
        if (piv < 0) return S(0);
        if (piv != c) {
            std::swap(m[static_cast<size_t>(piv)], m[static_cast<size_t>(c)]);
            det = -det;
        }
        det *= m[static_cast<size_t>(c)][static_cast<size_t>(c)];
        for (int r2 = c + 1; r2 < n; ++r2) {
            S f = m[static_cast<size_t>(r2)][static_cast<size_t>(c)] / m[static_cast<size_t>(c)][static_cast<size_t>(c)];
            for (int k = c; k < n; ++k)
                m[static_cast<size_t>(r2)][static_cast<size_t>(k)] -= f * m[static_cast<size_t>(c)][static_cast<size_t>(k)];
        }
    }
    return det;
}

/// The (+,-)-isomorphism conditions for a triangular non-degenerate r-matrix:
///   r#([xi, zeta]_*) = [r# xi, r# zeta]   and
///   (r# tensor r#)(delta_{g*}(xi)) = -delta_g(r# xi),
/// with (r# xi)^j = sum_i r^{ij} xi_i, [.,.]_* the dual bracket of ad(r), and
/// delta_{g*} the dual of the bracket. `flip_second_sign` produces the
/// negative control.
template <typename S>
inline ResidualReport check_r_sharp_iso(const LieAlgebra<S>& L, const RMatrix<S>& r, bool flip_second_sign = false) {
    ResidualReport rep;
    rep.suite = "r_sharp";
    S det = det_exact(r.r);
    if (det == S(0)) throw qdp_error("check_r_sharp_iso: r is degenerate (det = 0)");
    rep.metadata["det_r"] = CheckEntry::format_real(to_double(det));
    int n = L.dim;
    LieBialgebra<S> B = cocommutator_from_r(L, r);
    LieAlgebra<S> Ls = dual_bracket(B);
    auto rsharp = [&](const std::vector<S>& xi) {
        std::vector<S> out(static_cast<size_t>(n), S(0));
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) out[static_cast<size_t>(j)] += r.r[static_cast<size_t>(i)][static_cast<size_t>(j)] * xi[static_cast<size_t>(i)];
        return out;
    };
    real worst1 = 0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            std::vector<S> da(static_cast<size_t>(n), S(0)), db(static_cast<size_t>(n), S(0));
            da[static_cast<size_t>(a)] = S(1);
            db[static_cast<size_t>(b)] = S(1);
            auto lhs = rsharp(Ls.bracket(da, db));
            auto rhs = L.bracket(rsharp(da), rsharp(db));
            for (int k = 0; k < n; ++k)
                worst1 = std::max(worst1, std::abs(to_double(lhs[static_cast<size_t>(k)] - rhs[static_cast<size_t>(k)])));
        }
    rep.add(CheckEntry::bound("r_sharp_lie_homomorphism", worst1, 0.0));
    // delta_{g*}(d^k)_{ab} = c_{ab}^k; LHS^{ij} = sum_{ab} r^{ai} c_{ab}^k r^{bj}.
    real worst2 = 0;
    S sgn = flip_second_sign ? S(1) : S(-1);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                S lhs(0);
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b)
                        lhs += r.r[static_cast<size_t>(a)][static_cast<size_t>(i)] *
                               L.c[static_cast<size_t>(a)][static_cast<size_t>(b)][static_cast<size_t>(k)] *
                               r.r[static_cast<size_t>(b)][static_cast<size_t>(j)];
                S rhs(0);
                for (int a = 0; a < n; ++a)
                    rhs += r.r[static_cast<size_t>(a)][static_cast<size_t>(k)] *
                           B.delta[static_cast<size_t>(a)][static_cast<size_t>(i)][static_cast<size_t>(j)];
                worst2 = std::max(worst2, std::abs(to_double(lhs - sgn * rhs)));
            }
    rep.add(CheckEntry::bound("r_sharp_coalgebra_antihomomorphism", worst2, 0.0));
    return rep;
}

/// Reductive decomposition d = g + p with [g, p] <= p: rank of the combined
/// basis plus the g-component of [X, U] for X in the g-basis, U in the p-basis.
template <typename S>
inline ResidualReport check_reductive_decomposition(const LieAlgebra<S>& d, const std::vector<std::vector<S>>& g_basis,
                                                    const std::vector<std::vector<S>>& p_basis) {
    ResidualReport rep;
    rep.suite = "reductive_decomposition";
    int n = d.dim;
    int ng = static_cast<int>(g_basis.size()), np = static_cast<int>(p_basis.size());
    require(ng + np == n, "check_reductive_decomposition: basis sizes must sum to dim");
    // Combined basis matrix, columns = basis vectors.
    std::vector<std::vector<S>> M(static_cast<size_t>(n), std::vector<S>(static_cast<size_t>(n), S(0)));
    for (int j = 0; j < ng; ++j)
        for (int i = 0; i < n; ++i) M[static_cast<size_t>(i)][static_cast<size_t>(j)] = g_basis[static_cast<size_t>(j)][static_cast<size_t>(i)];
    for (int j = 0; j < np; ++j)
        for (int i = 0; i < n; ++i) M[static_cast<size_t>(i)][static_cast<size_t>(ng + j)] = p_basis[static_cast<size_t>(j)][static_cast<size_t>(i)];
    S det = det_exact(M);
    if (det == S(0)) {
        rep.add(CheckEntry::bound("direct_sum_rank", 1.0, 0.0).with("note", "rank deficient"));
        return rep;
    }
    rep.add(CheckEntry::bound("direct_sum_rank", 0.0, 0.0));
    // Solve M x = v exactly to decompose brackets.
    auto decompose = [&](const std::vector<S>& v) {
        std::vector<std::vector<S>> A = M;
        std::vector<S> x = v;
        int nn = n;
        for (int c = 0; c < nn; ++c) {
            int piv = -1;
            for (int r2 = c; r2 < nn; ++r2)
                if (A[static_cast<size_t>(r2)][static_cast<size_t>(c)] != S(0)) {
                    piv = r2;
                    break;
                }
            std::swap(A[static_cast<size_t>(piv)], A[static_cast<size_t>(c)]);
            std::swap(x[static_cast<size_t>(piv)], x[static_cast<size_t>(c)]);
            for (int r2 = 0; r2 < nn; ++r2) {
                if (r2 == c || A[static_cast<size_t>(r2)][static_cast<size_t>(c)] == S(0)) continue;
                S f = A[static_cast<size_t>(r2)][static_cast<size_t>(c)] / A[static_cast<size_t>(c)][static_cast<size_t>(c)];
                for (int k = 0; k < nn; ++k)
                    A[static_cast<size_t>(r2)][static_cast<size_t>(k)] -= f * A[static_cast<size_t>(c)][static_cast<size_t>(k)];
                x[static_cast<size_t>(r2)] -= f * x[static_cast<size_t>(c)];
            }
        }
        for (int i = 0; i < nn; ++i) x[static_cast<size_t>(i)] = x[static_cast<size_t>(i)] / A[static_cast<size_t>(i)][static_cast<size_t>(i)];
        return x;
    };
    real worst = 0;
    for (const auto& X : g_basis)
        for (const auto& U : p_basis) {
            auto br = d.bracket(X, U);
            auto coords = decompose(br);
            for (int j = 0; j < ng; ++j) worst = std::max(worst, std::abs(to_double(coords[static_cast<size_t>(j)])));
        }
    rep.add(CheckEntry::bound("ad_g_preserves_p", worst, 0.0));
    return rep;
}

// ---------------------------------------------------------------------------
// Poisson charts and linearization

/// A Poisson bivector in chart coordinates with a candidate linearization
/// map J into (the dual of) a Lie algebra.
struct PoissonChart {
    int dim = 0;
    std::function<std::vector<std::vector<real>>(const std::vector<real>&)> pi;  // skew matrix at a point
    std::function<std::vector<real>(const std::vector<real>&)> J;                // chart -> linear coords
    std::function<std::vector<std::vector<real>>(const std::vector<real>&)> DJ;  // optional analytic Jacobian
    std::vector<std::pair<real, real>> box;                                      // sampling box
    std::function<bool(const std::vector<real>&)> singular;                      // optional mask
};

/// Richardson-extrapolated central-difference Jacobian.
inline std::vector<std::vector<real>> fd_jacobian(const std::function<std::vector<real>(const std::vector<real>&)>& f,
                                                  const std::vector<real>& x, real step) {
    size_t n = x.size();
    auto eval = [&](real h) {
        std::vector<std::vector<real>> J(n, std::vector<real>(n, 0.0));
        for (size_t j = 0; j < n; ++j) {
            auto xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            auto fp = f(xp), fm = f(xm);
            for (size_t i = 0; i < n; ++i) J[i][j] = (fp[i] - fm[i]) / (2 * h);
        }
        return J;
    };
    auto J1 = eval(step), J2 = eval(step / 2);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) J2[i][j] += (J2[i][j] - J1[i][j]) / 3;
    return J2;
}

/// Linearization check: DJ(p) pi(p) DJ(p)^T against the linear bivector
/// pi_lin(J(p))^{ij} = sum_k cstar[i][j][k] J(p)_k.
template <typename S>
inline CheckEntry check_linearization(const PoissonChart& chart, const LieAlgebra<S>& L_dual, long n_samples,
                                      std::uint64_t seed, real tol, const std::string& id = "linearization") {
    Rng rng(substream(seed, id));
    real worst = 0;
    long masked = 0;
    int n = chart.dim;
    for (long s = 0; s < n_samples; ++s) {
        std::vector<real> p(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            p[static_cast<size_t>(i)] = urand(rng, chart.box[static_cast<size_t>(i)].first, chart.box[static_cast<size_t>(i)].second);
        if (chart.singular && chart.singular(p)) {
            ++masked;
            continue;
        }
        auto DJ = chart.DJ ? chart.DJ(p) : fd_jacobian(chart.J, p, 1e-4);
        auto Pi = chart.pi(p);
        auto Jp = chart.J(p);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                real lhs = 0;
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b)
                        lhs += DJ[static_cast<size_t>(i)][static_cast<size_t>(a)] * Pi[static_cast<size_t>(a)][static_cast<size_t>(b)] *
                               DJ[static_cast<size_t>(j)][static_cast<size_t>(b)];
                real rhs = 0;
                for (int k = 0; k < n; ++k)
                    rhs += to_double(L_dual.c[static_cast<size_t>(i)][static_cast<size_t>(j)][static_cast<size_t>(k)]) * Jp[static_cast<size_t>(k)];
                worst = std::max(worst, std::abs(lhs - rhs));
            }
    }
    return CheckEntry::bound(id, worst, tol)
        .masked(n_samples > 0 ? static_cast<real>(masked) / static_cast<real>(n_samples) : 0);
}

/// Tangent pairing at the units: the mixed differential of
///   (x_G, y_H) -> <eta_G(g), w> + <eta_H(h), v>
/// against the expected pairing matrix (rows: calG directions = G then V;
/// columns: calH directions = H then W).
inline CheckEntry check_pairing_tangent(const std::function<std::vector<real>(const std::vector<real>&)>& eta_G,
                                        const std::function<std::vector<real>(const std::vector<real>&)>& eta_H,
                                        int dim_g, int dim_v, int dim_h, int dim_w,
                                        const std::vector<std::vector<real>>& expected, real step, real tol,
                                        const std::string& id = "pairing_tangent") {
    int ng = dim_g + dim_v, nh = dim_h + dim_w;
    auto F = [&](const std::vector<real>& xg, const std::vector<real>& yh) {
        std::vector<real> g(xg.begin(), xg.begin() + dim_g);
        std::vector<real> v(xg.begin() + dim_g, xg.end());
        std::vector<real> h(yh.begin(), yh.begin() + dim_h);
        std::vector<real> w(yh.begin() + dim_h, yh.end());
        auto eg = eta_G(g);
        auto eh = eta_H(h);
        real sum = 0;
        for (int i = 0; i < dim_w; ++i) sum += eg[static_cast<size_t>(i)] * w[static_cast<size_t>(i)];
        for (int i = 0; i < dim_v; ++i) sum += eh[static_cast<size_t>(i)] * v[static_cast<size_t>(i)];
        return sum;
    };
    auto mixed = [&](int i, int j, real hh) {
        std::vector<real> xp(static_cast<size_t>(ng), 0.0), xm = xp;
        std::vector<real> yp(static_cast<size_t>(nh), 0.0), ym = yp;
        xp[static_cast<size_t>(i)] = hh;
        xm[static_cast<size_t>(i)] = -hh;
        yp[static_cast<size_t>(j)] = hh;
        ym[static_cast<size_t>(j)] = -hh;
        return (F(xp, yp) - F(xp, ym) - F(xm, yp) + F(xm, ym)) / (4 * hh * hh);
    };
    real worst = 0;
    for (int i = 0; i < ng; ++i)
        for (int j = 0; j < nh; ++j) {
            real d1 = mixed(i, j, step), d2 = mixed(i, j, step / 2);
            real d = d2 + (d2 - d1) / 3;
            worst = std::max(worst, std::abs(d - expected[static_cast<size_t>(i)][static_cast<size_t>(j)]));
        }
    return CheckEntry::bound(id, worst, tol);
}

}  // namespace qdp
