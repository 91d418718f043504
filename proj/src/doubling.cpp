#include "dgstab/doubling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "dgstab/dataset.hpp"
#include "dgstab/errors.hpp"
#include "dgstab/numeric.hpp"
#include "dgstab/parallel.hpp"

namespace dgstab {

void DoublingParams::validate() const {
    if (!(kappa > 1.0) || !std::isfinite(kappa)) throw ValidationError("kappa must be > 1");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be >= 0");
    if (!(delta > 0.0 && delta <= 1.0)) throw ValidationError("delta must lie in (0, 1]");
    if (!(ell > 0.0) || !std::isfinite(ell)) throw ValidationError("ell must be > 0");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be > 0");
    if (!(m0 >= 0.0)) throw ValidationError("m0 must be >= 0");
}

void SlabSampler::validate() const {
    if (n_slabs < 1) throw ValidationError("n_slabs must be >= 1");
}

Slab SlabSampler::sample(const LabeledDataset& ds, std::size_t index, double width) const {
    std::mt19937_64 rng(mix_seed(seed, index));
    const std::size_t n = ds.dim();
    std::vector<double> center(n);
    if (center_policy == CenterPolicy::OnDataPoint) {
        std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
        auto p = ds.point(pick(rng));
        center.assign(p.begin(), p.end());
    } else {
        for (std::size_t j = 0; j < n; ++j) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (std::size_t i = 0; i < ds.size(); ++i) {
                lo = std::min(lo, ds.point(i)[j]);
                hi = std::max(hi, ds.point(i)[j]);
            }
            center[j] = lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
        }
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> normal(n);
    for (;;) {
        double norm2 = 0.0;
        for (double& u : normal) {
            u = gauss(rng);
            norm2 += u * u;
        }
        if (norm2 > 1e-20) break;
    }
    return Slab(std::move(center), std::move(normal), width);
}

std::vector<Slab> SlabSampler::draw(const LabeledDataset& ds, double width) const {
    validate();
    std::vector<Slab> out;
    out.reserve(n_slabs);
    for (std::size_t k = 0; k < n_slabs; ++k) out.push_back(sample(ds, k, width));
    return out;
}

nlohmann::json to_json(const DcVerdict& v) {
    nlohmann::json j{{"satisfied", v.satisfied()}};
    if (v.first_failure) {
        const auto& f = *v.first_failure;
        j["first_failure"] = {{"slab_id", f.slab_id},
                              {"scale_index", f.scale_index},
                              {"mass_before", f.mass_before},
                              {"mass_after", f.mass_after}};
    } else {
        j["first_failure"] = nullptr;
    }
    return j;
}

namespace {

/// Offsets and weights of the points admitted by the truncations, in dataset
/// order. Masses are re-summed in that order so they match a naive recount.
struct Profile {
    std::vector<double> offsets;
    std::vector<double> weights;

    double mass_at(double width) const {
        CompensatedSum s;
        for (std::size_t k = 0; k < offsets.size(); ++k) {
            if (within_width(offsets[k], width)) s += weights[k];
        }
        return s.value();
    }
};

Profile build_profile(const LabeledDataset& ds, const TruncatedSlab& ts) {
    if (ts.dim() != ds.dim()) {
        throw ValidationError(fmt::format("dimension mismatch: slab {}, data {}", ts.dim(), ds.dim()));
    }
    Profile prof;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto x = ds.point(i);
        if (!ts.admits(x)) continue;
        prof.offsets.push_back(ts.slab.offset(x));
        prof.weights.push_back(ds.weight(i));
    }
    return prof;
}

constexpr int kMaxUniformLevels = 100000;

double nonuniform_rhs(double mass_eps, const DoublingParams& p) {
    return std::min(p.delta, std::max(p.m0, (1.0 + p.sigma) * mass_eps) - p.m0);
}

}  // namespace

DcVerdict check_uniform_dc_slab(const LabeledDataset& ds, const TruncatedSlab& ts,
                                const DoublingParams& p, std::size_t slab_id) {
    p.validate();
    const Profile prof = build_profile(ds, ts);
    for (int i = 0; i < kMaxUniformLevels; ++i) {
        const double w = geometric_width(p.ell, p.kappa, i);
        if (!(w < p.beta)) break;
        const double before = prof.mass_at(w);
        const double after = prof.mass_at(geometric_width(p.ell, p.kappa, i + 1));
        if (!(after >= std::min(p.delta, (1.0 + p.sigma) * before))) {
            return {DcFailure{slab_id, i, before, after}};
        }
    }
    return {};
}

std::vector<double> nonuniform_width_grid(std::span<const double> offsets, double beta_s, double kappa,
                                          int max_levels) {
    if (!(beta_s > 0.0)) throw ValidationError("beta_S must be > 0");
    if (!(kappa > 1.0)) throw ValidationError("kappa must be > 1");
    std::vector<double> sorted(offsets.begin(), offsets.end());
    std::sort(sorted.begin(), sorted.end());
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < sorted.size(); ++k) {
        const double d = sorted[k] - sorted[k - 1];
        if (d > 0.0) gap = std::min(gap, d);
    }
    std::vector<double> grid;
    for (int j = 0; j < max_levels; ++j) {
        const double eps = beta_s / std::pow(kappa, j);
        if (j > 0 && eps < gap) break;
        if (j > 0 && !std::isfinite(gap)) break;
        grid.push_back(eps);
    }
    return grid;
}

DcVerdict check_nonuniform_dc_slab(const LabeledDataset& ds, const TruncatedSlab& ts,
                                   const DoublingParams& p, double beta_s, std::size_t slab_id) {
    p.validate();
    const Profile prof = build_profile(ds, ts);
    const auto grid = nonuniform_width_grid(prof.offsets, beta_s, p.kappa);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double before = prof.mass_at(grid[j]);
        const double after = prof.mass_at(grid[j] * p.kappa);
        if (!(after >= nonuniform_rhs(before, p))) {
            return {DcFailure{slab_id, static_cast<int>(j), before, after}};
        }
    }
    return {};
}

namespace {

Profile profile_of(std::span<const WeightedValue> values) {
    Profile prof;
    prof.offsets.reserve(values.size());
    prof.weights.reserve(values.size());
    for (const auto& v : values) {
        prof.offsets.push_back(v.value);
        prof.weights.push_back(v.weight);
    }
    return prof;
}

}  // namespace

DcVerdict check_uniform_dc_deltax(std::span<const WeightedValue> values, const DoublingParams& p) {
    p.validate();
    const Profile prof = profile_of(values);
    for (int i = 0; i < kMaxUniformLevels; ++i) {
        const double w = geometric_width(p.ell, p.kappa, i);
        if (!(w <= p.beta)) break;
        const double before = prof.mass_at(w);
        const double after = prof.mass_at(geometric_width(p.ell, p.kappa, i + 1));
        if (!(after >= std::min(p.delta, (1.0 + p.sigma) * before))) {
            return {DcFailure{0, i, before, after}};
        }
    }
    return {};
}

DcVerdict check_nonuniform_dc_deltax(std::span<const WeightedValue> values, const DoublingParams& p) {
    p.validate();
    const Profile prof = profile_of(values);
    std::vector<double> magnitudes;
    magnitudes.reserve(prof.offsets.size() + 1);
    magnitudes.push_back(0.0);
    for (double v : prof.offsets) magnitudes.push_back(std::abs(v));
    const auto grid = nonuniform_width_grid(magnitudes, p.beta, p.kappa);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double before = prof.mass_at(grid[j]);
        const double after = prof.mass_at(grid[j] * p.kappa);
        if (!(after >= nonuniform_rhs(before, p))) {
            return {DcFailure{0, static_cast<int>(j), before, after}};
        }
    }
    return {};
}

namespace {

SudcSlab scan_one(const LabeledDataset& ds, const Slab& slab, const DoublingParams& p,
                  const SudcOptions& opts) {
    const Profile prof = build_profile(ds, TruncatedSlab(slab));
    std::vector<double> radii(prof.offsets.size());
    std::transform(prof.offsets.begin(), prof.offsets.end(), radii.begin(),
                   [](double o) { return std::abs(o); });
    std::sort(radii.begin(), radii.end());
    // |o| <= w/2 is exactly "radius not greater than w/2".
    auto count_at = [&](double w) {
        return static_cast<double>(std::upper_bound(radii.begin(), radii.end(), 0.5 * w) - radii.begin());
    };
    auto measure = [&](double w) { return opts.mode == CountMode::Points ? count_at(w) : prof.mass_at(w); };

    int steps = 0;
    double current = measure(p.ell);
    while (steps < opts.max_steps) {
        const double next = measure(geometric_width(p.ell, p.kappa, steps + 1));
        if (!(next >= (1.0 + p.sigma) * current)) break;
        ++steps;
        current = next;
    }
    SudcSlab out;
    out.steps = steps;
    out.final_width = geometric_width(p.ell, p.kappa, steps);
    out.final_mass = prof.mass_at(out.final_width);
    out.final_count = static_cast<std::size_t>(count_at(out.final_width));
    return out;
}

}  // namespace

SudcReport sudc_scan(const LabeledDataset& ds, const SlabSampler& sampler, const DoublingParams& p,
                     const SudcOptions& opts) {
    p.validate();
    sampler.validate();
    if (opts.max_steps < 0) throw ValidationError("max_steps must be >= 0");
    const unsigned threads = opts.threads == 0 ? threads_from_env() : opts.threads;

    SudcReport rep;
    rep.per_slab.resize(sampler.n_slabs);
    parallel_for(sampler.n_slabs, threads, [&](std::size_t k) {
        rep.per_slab[k] = scan_one(ds, sampler.sample(ds, k, p.ell), p, opts);
    });

    CompensatedSum width, steps, mass, count;
    for (const auto& s : rep.per_slab) {
        width += s.final_width;
        steps += s.steps;
        mass += s.final_mass;
        count += static_cast<double>(s.final_count);
    }
    const double n = static_cast<double>(rep.per_slab.size());
    rep.beta_bar = width.value() / n;
    rep.mean_steps = steps.value() / n;
    rep.mean_final_mass = mass.value() / n;
    rep.mean_final_count = count.value() / n;
    return rep;
}

nlohmann::json SudcReport::to_json() const {
    return {{"n_slabs", per_slab.size()},
            {"beta_bar", beta_bar},
            {"mean_steps", mean_steps},
            {"mean_final_mass", mean_final_mass},
            {"mean_final_count", mean_final_count}};
}

void SudcReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "slab_id,steps,final_width,final_mass\n";
    for (std::size_t k = 0; k < per_slab.size(); ++k) {
        const auto& s = per_slab[k];
        out << fmt::format("{},{},{:.17g},{:.17g}\n", k, s.steps, s.final_width, s.final_mass);
    }
}

}  // namespace dgstab
