#pragma once

#include <algorithm>
#include <cassert>
#include <memory>
#include <numeric>

#include "qdp/core.hpp"

namespace qdp {

/// One chart component of an axis: a uniform 1-D grid with node coordinates
/// t_k = lo + k*h and per-node quadrature weights.
struct AxisChart {
    real lo = 0.0;
    real h = 1.0;
    int n = 1;
    std::vector<real> weights;  // size n

    real node(int k) const { return lo + h * k; }
    real hi() const { return lo + h * (n - 1); }
    bool in_window(real t) const { return t >= lo - 0.5 * h && t <= hi() + 0.5 * h; }
};

/// A sampled 1-D carrier: disjoint union of chart components.
/// Finite carriers are a single chart with n integer nodes (h = 1) and
/// interpolation disabled.
struct Axis {
    std::string name;
    std::vector<AxisChart> charts;
    bool finite = false;

    int chart_count() const { return static_cast<int>(charts.size()); }
    int nodes_in(int chart) const { return charts[static_cast<size_t>(chart)].n; }
    int total_nodes() const {
        int s = 0;
        for (const auto& ch : charts) s += ch.n;
        return s;
    }
    int chart_offset(int chart) const {
        int s = 0;
        for (int c = 0; c < chart; ++c) s += charts[static_cast<size_t>(c)].n;
        return s;
    }
    /// Flat node index -> (chart, slot).
    std::pair<int, int> split(int flat) const {
        int c = 0;
        while (flat >= charts[static_cast<size_t>(c)].n) {
            flat -= charts[static_cast<size_t>(c)].n;
            ++c;
        }
        return {c, flat};
    }
    AxisPt point(int flat) const {
        auto [c, k] = split(flat);
        return {c, finite ? static_cast<real>(k) : charts[static_cast<size_t>(c)].node(k)};
    }
    real weight(int flat) const {
        auto [c, k] = split(flat);
        return charts[static_cast<size_t>(c)].weights[static_cast<size_t>(k)];
    }
    bool in_window(const AxisPt& p) const {
        if (p.chart < 0 || p.chart >= chart_count()) return false;
        if (finite) {
            long k = std::lround(p.t);
            return k >= 0 && k < charts[static_cast<size_t>(p.chart)].n &&
                   std::abs(p.t - static_cast<real>(k)) < 1e-9;
        }
        return charts[static_cast<size_t>(p.chart)].in_window(p.t);
    }

    static Axis finite_axis(const std::string& name, int n) {
        Axis a;
        a.name = name;
        a.finite = true;
        AxisChart ch;
        ch.lo = 0;
        ch.h = 1;
        ch.n = n;
        ch.weights.assign(static_cast<size_t>(n), 1.0);
        a.charts.push_back(std::move(ch));
        return a;
    }
    /// Uniform grid of n nodes on [-L, L), spacing h = 2L/n, uniform weight h.
    static Axis uniform(const std::string& name, real L, int n) {
        Axis a;
        a.name = name;
        AxisChart ch;
        ch.n = n;
        ch.h = 2 * L / n;
        ch.lo = -L;
        ch.weights.assign(static_cast<size_t>(n), ch.h);
        a.charts.push_back(std::move(ch));
        return a;
    }
    /// Two-chart axis for R^x in coordinates t = log|g|: chart 0 is g = e^t,
    /// chart 1 is g = -e^t, both with t uniform on [-L, L). Haar dg/|g| = dt.
    static Axis log_pair(const std::string& name, real L, int n_per_chart) {
        Axis a;
        a.name = name;
        for (int s = 0; s < 2; ++s) {
            AxisChart ch;
            ch.n = n_per_chart;
            ch.h = 2 * L / n_per_chart;
            ch.lo = -L;
            ch.weights.assign(static_cast<size_t>(n_per_chart), ch.h);
            a.charts.push_back(std::move(ch));
        }
        return a;
    }
};

/// Interpolation stencil on one axis: up to two nodes with convex weights.
/// Empty (m = 0) signals an out-of-window point.
struct AxisStencil {
    int idx[2] = {0, 0};  // flat node indices
    real w[2] = {0, 0};
    int m = 0;
};

inline AxisStencil stencil(const Axis& ax, const AxisPt& p) {
    AxisStencil s;
    if (p.chart < 0 || p.chart >= ax.chart_count()) return s;
    const AxisChart& ch = ax.charts[static_cast<size_t>(p.chart)];
    int off = ax.chart_offset(p.chart);
    if (ax.finite) {
        long k = std::lround(p.t);
        if (k < 0 || k >= ch.n || std::abs(p.t - static_cast<real>(k)) > 1e-9) return s;
        s.idx[0] = off + static_cast<int>(k);
        s.w[0] = 1;
        s.m = 1;
        return s;
    }
    real u = (p.t - ch.lo) / ch.h;
    if (u < -0.5 || u > ch.n - 0.5) return s;
    int k0 = static_cast<int>(std::floor(u));
    real frac = u - k0;
    if (k0 < 0) {
        k0 = 0;
        frac = 0;
    }
    if (k0 >= ch.n - 1) {
        k0 = ch.n - 1;
        frac = 0;
    }
    if (frac < 1e-12) {
        s.idx[0] = off + k0;
        s.w[0] = 1;
        s.m = 1;
        return s;
    }
    s.idx[0] = off + k0;
    s.w[0] = 1 - frac;
    s.idx[1] = off + k0 + 1;
    s.w[1] = frac;
    s.m = 2;
    return s;
}

/// An ordered product of axes; the quadrature domain of fields and operators.
struct Space {
    std::vector<Axis> axes;

    int rank() const { return static_cast<int>(axes.size()); }
    long total_nodes() const {
        long t = 1;
        for (const auto& a : axes) t *= a.total_nodes();
        return t;
    }
    Pt point(const std::vector<int>& idx) const {
        Pt p;
        p.n = rank();
        for (int i = 0; i < rank(); ++i) p[i] = axes[static_cast<size_t>(i)].point(idx[static_cast<size_t>(i)]);
        return p;
    }
    real weight(const std::vector<int>& idx) const {
        real w = 1;
        for (int i = 0; i < rank(); ++i) w *= axes[static_cast<size_t>(i)].weight(idx[static_cast<size_t>(i)]);
        return w;
    }
    bool in_window(const Pt& p) const {
        if (p.n != rank()) return false;
        for (int i = 0; i < rank(); ++i)
            if (!axes[static_cast<size_t>(i)].in_window(p[i])) return false;
        return true;
    }
    static Space product(const Space& a, const Space& b) {
        Space s = a;
        for (const auto& ax : b.axes) s.axes.push_back(ax);
        return s;
    }
    static Space power(const Space& a, int k) {
        Space s;
        for (int i = 0; i < k; ++i)
            for (const auto& ax : a.axes) s.axes.push_back(ax);
        return s;
    }
    /// Draw a uniformly random node multi-index.
    std::vector<int> random_node(Rng& rng) const {
        std::vector<int> idx(static_cast<size_t>(rank()));
        for (int i = 0; i < rank(); ++i) idx[static_cast<size_t>(i)] = irand(rng, 0, axes[static_cast<size_t>(i)].total_nodes() - 1);
        return idx;
    }
};

}  // namespace qdp
