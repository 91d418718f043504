#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "dgstab/geometry.hpp"

namespace dgstab {

class LabeledDataset;

struct DoublingParams {
    double kappa = 2.0;   // doubling constant, > 1
    double sigma = 0.9;   // growth factor, > 0
    double delta = 1.0;   // mass cap, in (0, 1]
    double ell = 0.001;   // smallest checked width, > 0
    double beta = 1.0;    // largest checked width, > 0
    double m0 = 0.0;      // residual mass (non-uniform variants only)

    void validate() const;
};

enum class CenterPolicy { OnDataPoint, UniformInBoundingBox };

struct SlabSampler {
    std::size_t n_slabs = 1000;
    CenterPolicy center_policy = CenterPolicy::OnDataPoint;
    std::uint64_t seed = 0;

    void validate() const;

    /// Slab `index` of width `width`. Each index has its own RNG stream, so
    /// the result does not depend on how slabs are distributed over threads.
    Slab sample(const LabeledDataset& ds, std::size_t index, double width) const;

    std::vector<Slab> draw(const LabeledDataset& ds, double width) const;
};

struct DcFailure {
    std::size_t slab_id = 0;
    int scale_index = 0;
    double mass_before = 0.0;
    double mass_after = 0.0;

    friend bool operator==(const DcFailure&, const DcFailure&) = default;
};

struct DcVerdict {
    std::optional<DcFailure> first_failure;

    bool satisfied() const noexcept { return !first_failure.has_value(); }
    friend bool operator==(const DcVerdict&, const DcVerdict&) = default;
};

nlohmann::json to_json(const DcVerdict& v);

/// Uniform doubling condition on one truncated slab: for every i with
/// ell*kappa^i < beta, mass at width ell*kappa^(i+1) must be at least
/// min(delta, (1+sigma) * mass at width ell*kappa^i). The width of `ts` is
/// ignored; only its centre, normal and truncations matter.
DcVerdict check_uniform_dc_slab(const LabeledDataset& ds, const TruncatedSlab& ts,
                                const DoublingParams& p, std::size_t slab_id = 0);

/// Widths beta_S / kappa^j, j = 0, 1, ..., stopping once the width drops below
/// the smallest positive gap between projected offsets (at most `max_levels`).
std::vector<double> nonuniform_width_grid(std::span<const double> offsets, double beta_s,
                                          double kappa, int max_levels = 4096);

/// Non-uniform condition mass(kappa*eps) >= min(delta, max(m0, (1+sigma)*mass(eps)) - m0)
/// on the grid above; scale_index in a failure is the grid index j.
DcVerdict check_nonuniform_dc_slab(const LabeledDataset& ds, const TruncatedSlab& ts,
                                   const DoublingParams& p, double beta_s, std::size_t slab_id = 0);

struct WeightedValue {
    double value = 0.0;
    double weight = 0.0;
};

/// Uniform condition on a 1-D distribution, intervals centred at 0 with full
/// width ell*kappa^i <= beta.
DcVerdict check_uniform_dc_deltax(std::span<const WeightedValue> values, const DoublingParams& p);

/// m0 variant over the widths beta / kappa^j down to the smallest gap in |value|.
DcVerdict check_nonuniform_dc_deltax(std::span<const WeightedValue> values, const DoublingParams& p);

enum class CountMode { Points, Mass };

struct SudcOptions {
    CountMode mode = CountMode::Points;
    int max_steps = 64;
    unsigned threads = 0;  // 0: take DG_THREADS / hardware default
};

struct SudcSlab {
    int steps = 0;
    double final_width = 0.0;
    double final_mass = 0.0;      // mu-mass inside the final slab
    std::size_t final_count = 0;  // points inside the final slab

    friend bool operator==(const SudcSlab&, const SudcSlab&) = default;
};

struct SudcReport {
    std::vector<SudcSlab> per_slab;
    double beta_bar = 0.0;
    double mean_steps = 0.0;
    double mean_final_mass = 0.0;
    double mean_final_count = 0.0;

    nlohmann::json to_json() const;
    void write_csv(const std::filesystem::path& path) const;
};

/// Simplified uniform doubling scan: each sampled slab starts at width ell
/// and is widened by kappa while the count grows by at least (1+sigma).
SudcReport sudc_scan(const LabeledDataset& ds, const SlabSampler& sampler, const DoublingParams& p,
                     const SudcOptions& opts = {});

}  // namespace dgstab
