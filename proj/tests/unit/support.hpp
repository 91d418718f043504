#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dgstab/dataset.hpp"
#include "dgstab/doubling.hpp"
#include "dgstab/geometry.hpp"
#include "dgstab/numeric.hpp"

namespace dgtest {

inline dgstab::LabeledDataset random_cloud(std::size_t n, std::uint64_t seed, double spread = 1.0,
                                           bool random_weights = false) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-spread, spread);
    std::uniform_real_distribution<double> w(0.1, 1.0);
    std::vector<double> pts;
    std::vector<int> labels;
    std::vector<double> weights;
    for (std::size_t i = 0; i < n; ++i) {
        pts.push_back(u(rng));
        pts.push_back(u(rng));
        labels.push_back(static_cast<int>(i % 2));
        if (random_weights) weights.push_back(w(rng));
    }
    return dgstab::LabeledDataset(2, 2, pts, labels, weights);
}

/// Mass recount that never reuses a profile: every point is re-tested
/// against a freshly built slab of the requested width.
inline double naive_mass(const dgstab::LabeledDataset& ds, const dgstab::TruncatedSlab& ts, double width) {
    const dgstab::TruncatedSlab s = dgstab::with_width(ts, width);
    dgstab::CompensatedSum sum;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (dgstab::truncated_contains(s, ds.point(i))) sum += ds.weight(i);
    }
    return sum.value();
}

inline std::size_t naive_count(const dgstab::LabeledDataset& ds, const dgstab::Slab& s) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) c += dgstab::slab_contains(s, ds.point(i)) ? 1 : 0;
    return c;
}

/// Definition-level recount: every width rebuilt from scratch, widths taken
/// from a running product checked against the direct power.
/// Smallest positive difference between any two values.
inline double smallest_gap(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double gap = INFINITY;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] != v[i - 1]) gap = std::min(gap, v[i] - v[i - 1]);
    return gap;
}

inline dgstab::DcVerdict naive_uniform(const dgstab::LabeledDataset& ds, const dgstab::TruncatedSlab& ts,
                                       const dgstab::DoublingParams& p) {
    for (int i = 0;; ++i) {
        const double w = p.ell * std::pow(p.kappa, i);
        if (w >= p.beta) return {};
        const double before = naive_mass(ds, ts, w);
        const double after = naive_mass(ds, ts, p.ell * std::pow(p.kappa, i + 1));
        if (after < std::min(p.delta, (1 + p.sigma) * before)) return {dgstab::DcFailure{0, i, before, after}};
    }
}

inline dgstab::DcVerdict naive_nonuniform(const dgstab::LabeledDataset& ds, const dgstab::TruncatedSlab& ts,
                                          const dgstab::DoublingParams& p, double beta_s) {
    // smallest positive gap between projected offsets of admitted points
    std::vector<double> offs;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ts.admits(ds.point(i))) offs.push_back(ts.slab.offset(ds.point(i)));
    double gap = smallest_gap(offs);
    for (int j = 0;; ++j) {
        const double eps = beta_s / std::pow(p.kappa, j);
        if (j > 0 && !(eps >= gap)) return {};
        const double before = naive_mass(ds, ts, eps);
        const double after = naive_mass(ds, ts, eps * p.kappa);
        const double rhs = std::min(p.delta, std::max(p.m0, (1 + p.sigma) * before) - p.m0);
        if (after < rhs) return {dgstab::DcFailure{0, j, before, after}};
    }
}

inline double interval_mass(const std::vector<dgstab::WeightedValue>& v, double width) {
    dgstab::CompensatedSum s;
    for (const auto& e : v)
        if (-width / 2 <= e.value && e.value <= width / 2) s += e.weight;
    return s.value();
}

inline dgstab::DcVerdict naive_uniform_deltax(const std::vector<dgstab::WeightedValue>& v,
                                              const dgstab::DoublingParams& p) {
    for (int i = 0;; ++i) {
        const double w = p.ell * std::pow(p.kappa, i);
        if (w > p.beta) return {};
        const double before = interval_mass(v, w);
        const double after = interval_mass(v, p.ell * std::pow(p.kappa, i + 1));
        if (after < std::min(p.delta, (1 + p.sigma) * before)) return {dgstab::DcFailure{0, i, before, after}};
    }
}


inline dgstab::DcVerdict naive_nonuniform_deltax(const std::vector<dgstab::WeightedValue>& v,
                                                const dgstab::DoublingParams& p) {
    std::vector<double> mags{0.0};
    for (const auto& e : v) mags.push_back(std::abs(e.value));
    const double gap = smallest_gap(mags);
    for (int j = 0;; ++j) {
        const double eps = p.beta / std::pow(p.kappa, j);
        if (j > 0 && !(eps >= gap)) return {};
        const double before = interval_mass(v, eps);
        const double after = interval_mass(v, eps * p.kappa);
        const double rhs = std::min(p.delta, std::max(p.m0, (1 + p.sigma) * before) - p.m0);
        if (after < rhs) return {dgstab::DcFailure{0, j, before, after}};
    }
}

/// Slab scan recounted from scratch at every width: widen while the measure
/// grows by the factor (1 + sigma).
inline dgstab::SudcSlab naive_sudc(const dgstab::LabeledDataset& ds, const dgstab::Slab& s,
                                   const dgstab::DoublingParams& p, bool by_mass, int max_steps) {
    auto measure = [&](double w) {
        return by_mass ? naive_mass(ds, dgstab::TruncatedSlab(s), w)
                       : static_cast<double>(naive_count(ds, s.with_width(w)));
    };
    int steps = 0;
    auto width = [&](int i) { return p.ell * std::pow(p.kappa, i); };
    while (steps < max_steps && measure(width(steps + 1)) >= (1 + p.sigma) * measure(width(steps))) ++steps;
    const double w = width(steps);
    return {steps, w, naive_mass(ds, dgstab::TruncatedSlab(s), w), naive_count(ds, s.with_width(w))};
}

}  // namespace dgtest
