#include <catch2/catch_amalgamated.hpp>

#include "qdp/fourier.hpp"

using namespace qdp;

namespace {

/// Independent oracle: the plain character sum through the group pairing,
/// (F f)(xi) = |V|^{-1/2} sum_v <v, xi> f(v).
DenseField naive_finite_fourier(const AbelianGroup& V, const DenseField& f) {
    DenseField out(V.dual->space());
    real c = 1.0 / std::sqrt(static_cast<real>(V.space().total_nodes()));
    for (NodeIter io(out.space); !io.done; io.next()) {
        Pt xi = out.space.point(io.idx);
        cplx acc = 0;
        for (NodeIter iv(V.space()); !iv.done; iv.next()) acc += V.pairing(V.space().point(iv.idx), xi) * f.at(iv.idx);
        out.at(io.idx) = c * acc;
    }
    return out;
}

}  // namespace

TEST_CASE("delta at 0 on Z4 transforms to the constant 1/2") {
    auto z4 = cyclic_group(4);
    DenseField f(z4->space());
    f.data[0] = 1.0;
    DenseField g = fourier(*z4, f);
    for (auto& v : g.data) CHECK(std::abs(v - cplx{0.5, 0}) < 1e-14);
}

TEST_CASE("unit Gaussian is a fixed point of the R transform") {
    auto R = real_group(1, 6.0, 256);
    DenseField f = DenseField::sample(R->space(), [](const Pt& p) { return cplx(std::exp(-0.5 * p[0].t * p[0].t), 0); });
    DenseField g = fourier(*R, f);
    real worst = 0;
    for (NodeIter it(g.space); !it.done; it.next()) {
        real xi = g.space.point(it.idx)[0].t;
        worst = std::max(worst, std::abs(g.at(it.idx) - cplx(std::exp(-0.5 * xi * xi), 0)));
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("Plancherel on Z7 is exact") {
    auto z7 = cyclic_group(7);
    Rng rng(42);
    DenseField f(z7->space());
    for (auto& v : f.data) v = cplx(urand(rng, -1, 1), urand(rng, -1, 1));
    DenseField g = fourier(*z7, f);
    CHECK(std::abs(g.norm2() - f.norm2()) <= 1e-14);
}

TEST_CASE("finite transform equals the naive character-sum oracle") {
    auto v = abelian_product({cyclic_group(2), cyclic_group(3)}, "Z2xZ3");
    Rng rng(7);
    DenseField f(v->space());
    for (auto& z : f.data) z = cplx(urand(rng, -1, 1), urand(rng, -1, 1));
    DenseField a = fourier(*v, f);
    DenseField b = naive_finite_fourier(*v, f);
    for (size_t i = 0; i < a.data.size(); ++i) CHECK(std::abs(a.data[i] - b.data[i]) <= 1e-13);
}

TEST_CASE("grid transform is exactly unitary and invertible") {
    auto R = real_group(2, 6.0, 64);
    Rng rng(3);
    DenseField f = random_test_vector(R->space(), rng).to_dense();
    DenseField g = random_test_vector(R->space(), rng).to_dense();
    DenseField Ff = fourier(*R, f), Fg = fourier(*R, g);
    CHECK(std::abs(Ff.inner(Fg) - f.inner(g)) <= 1e-12 * f.norm2() * g.norm2());
    DenseField back = fourier(*R, Ff, /*adjoint=*/true);
    real worst = 0;
    for (size_t i = 0; i < f.data.size(); ++i) worst = std::max(worst, std::abs(back.data[i] - f.data[i]));
    CHECK(worst <= 1e-12);
}

TEST_CASE("partial Fourier transform") {
    GroupModel z2 = cyclic_group(2)->model;
    auto z3 = cyclic_group(3);
    Space gs = Space::product(z2.space, z3->space());

    SECTION("tensor factorization") {
        std::vector<cplx> u = {cplx(0.3, 0.1), cplx(-1.2, 0.4)};
        DenseField w(z3->space());
        w.data = {cplx(1, 0), cplx(0, 1), cplx(0.5, -0.5)};
        DenseField f(gs);
        for (NodeIter it(gs); !it.done; it.next())
            f.at(it.idx) = u[static_cast<size_t>(it.idx[0])] * w.data[static_cast<size_t>(it.idx[1])];
        DenseField Ff = partial_fourier_V(z2, *z3, f);
        DenseField Fw = fourier(*z3, w);
        for (NodeIter it(Ff.space); !it.done; it.next())
            CHECK(std::abs(Ff.at(it.idx) - u[static_cast<size_t>(it.idx[0])] * Fw.data[static_cast<size_t>(it.idx[1])]) <= 1e-13);
    }
    SECTION("adjoint then forward is the identity") {
        Rng rng(5);
        DenseField f = random_test_vector(gs, rng).to_dense();
        DenseField round = partial_fourier_V(z2, *z3, partial_fourier_V(z2, *z3, f), /*adjoint=*/true);
        // forward then adjoint
        real worst = 0;
        for (size_t i = 0; i < f.data.size(); ++i) worst = std::max(worst, std::abs(round.data[i] - f.data[i]));
        CHECK(worst <= 1e-12);
    }
    SECTION("double-sum oracle on Z2 x Z3") {
        Rng rng(9);
        DenseField f = random_test_vector(gs, rng).to_dense();
        DenseField Ff = partial_fourier_V(z2, *z3, f);
        for (NodeIter io(Ff.space); !io.done; io.next()) {
            Pt xi = z3->dual->space().point({io.idx[1]});
            cplx acc = 0;
            for (int k = 0; k < 3; ++k)
                acc += z3->pairing(pt1(0, k), xi) * f.at({io.idx[0], k});
            acc /= std::sqrt(3.0);
            CHECK(std::abs(Ff.at(io.idx) - acc) <= 1e-13);
        }
    }
    SECTION("factor-order mismatch is rejected") {
        DenseField f(Space::product(z3->space(), z2.space));  // V first: wrong
        CHECK_THROWS_AS(partial_fourier_V(z2, *z3, f), qdp_error);
    }
}

TEST_CASE("dual actions satisfy the defining pairing identity") {
    SECTION("trivial action") {
        auto R = real_group(1, 6.0, 32);
        auto rho = [](const Pt& v, const Pt&) { return v; };
        auto dual = dualize_action(rho, R);
        GroupModel triv = cyclic_group(1)->model;
        CHECK(dual_action_residual(rho, dual, R, triv, 100, 1) <= 1e-12);
    }
    SECTION("matrix exponential action on R^2") {
        auto V = real_group(2, 6.0, 16);
        GroupModel G = real_group(1, 2.0, 16)->model;  // R as the acting group
        auto rho = [](const Pt& v, const Pt& g) {
            // e^{gM} with M = [[0,1],[0,0]]: (v1, v2) -> (v1 + g v2, v2)
            real gg = g[0].t;
            Pt r;
            r.n = 2;
            r[0] = {0, v[0].t + gg * v[1].t};
            r[1] = {0, v[1].t};
            return r;
        };
        auto dual = dualize_action(rho, V);
        CHECK(dual_action_residual(rho, dual, V, G, 3000, 17) <= 1e-12);
        // and the solved action is e^{g M^T}: (xi1, xi2) -> (xi1, xi2 + g xi1)
        Pt xi = dual.act(pt1(0, 0.7), Pt::concat(pt1(0, 2.0), pt1(0, -1.0)));
        CHECK(std::abs(xi[0].t - 2.0) <= 1e-12);
        CHECK(std::abs(xi[1].t - (-1.0 + 0.7 * 2.0)) <= 1e-12);
    }
    SECTION("Z5 acted on by doubling") {
        auto z5 = cyclic_group(5);
        GroupModel z4 = cyclic_group(4)->model;
        auto rho = [](const Pt& v, const Pt& g) {
            long p = 1;
            for (long i = 0; i < std::lround(g[0].t); ++i) p = (p * 2) % 5;
            return pt1(0, static_cast<real>((std::lround(v[0].t) * p) % 5));
        };
        auto dual = dualize_action(rho, z5);
        CHECK(dual_action_residual(rho, dual, z5, z4, 200, 23) <= 1e-14);
        // at the generator, characters are multiplied by 2
        Pt xi = dual.act(pt1(0, 1), pt1(0, 3));
        CHECK(std::lround(xi[0].t) == (3 * 2) % 5);
    }
    SECTION("non-automorphism is rejected on finite carriers") {
        auto z4g = cyclic_group(4);
        GroupModel z2 = cyclic_group(2)->model;
        auto bad = [](const Pt& v, const Pt& g) {
            if (std::lround(g[0].t) == 1) return pt1(0, 0.0);  // collapses: not an automorphism
            return v;
        };
        auto dual = dualize_action(bad, z4g);
        CHECK_THROWS_AS(dual.act(pt1(0, 1), pt1(0, 1)), qdp_error);
    }
}
