#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dgstab/dataset.hpp"
#include "dgstab/doubling.hpp"
#include "dgstab/geometry.hpp"
#include "dgstab/piecewise.hpp"

namespace dgstab {

LabeledDataset apply_abs(const LabeledDataset& ds);
LabeledDataset apply_linear(const LabeledDataset& ds, const Eigen::MatrixXd& M);
LabeledDataset apply_piecewise(const LabeledDataset& ds, const Piecewise1D& g, std::size_t coordinate);

/// Image of a truncated slab under an invertible square M: normals follow
/// M^{-T}, the width is divided by |M^{-T} u|, truncations v.x <= t become
/// (M^{-T} v).y <= t.
TruncatedSlab image_slab(const Eigen::MatrixXd& M, const TruncatedSlab& ts);

/// True when some point has a zero coordinate (where |.| folds orthants together).
bool has_mass_on_coordinate_planes(const LabeledDataset& ds);

struct LinearMap {
    Eigen::MatrixXd M;
};
struct AbsMap {};
struct PiecewiseMap {
    Piecewise1D g;
    std::size_t coordinate = 0;
};
using MapSpec = std::variant<LinearMap, AbsMap, PiecewiseMap>;

LabeledDataset apply_map(const LabeledDataset& ds, const MapSpec& map);

/// One affine branch x -> A x + c of a piecewise-affine map, valid on the
/// region cut out by `region`. Regions of a map partition the data points.
struct AffinePiece {
    Eigen::MatrixXd A;
    Eigen::VectorXd c;
    std::vector<HalfSpace> region;
};

/// Branches of the map; strict region bounds are encoded exactly as
/// x <= nextafter(a, -inf).
std::vector<AffinePiece> affine_pieces(const MapSpec& map, std::size_t dim);

/// Preimage of an image slab under one branch, restricted to its region;
/// `dilation` receives |A^T u|, the factor by which widths shrink.
TruncatedSlab pullback(const AffinePiece& piece, const Slab& image, double& dilation);

struct PredictedConstants {
    double sigma = 0.0;
    double ell_lo = 0.0;
    double ell_hi = 0.0;
    double beta = 0.0;
};

/// Constants the lemmas predict for the image data.
PredictedConstants predict_constants(const MapSpec& map, const LabeledDataset& ds, const DoublingParams& p);

struct Counterexample {
    std::size_t slab_id = 0;
    std::vector<double> center;
    std::vector<double> normal;
    double ell_prime = 0.0;
    std::string reason;
    int scale_index = -1;
    double mass_before = 0.0;
    double mass_after = 0.0;
};

struct PropagationVerdict {
    std::size_t n_slabs = 0;
    std::size_t n_premise = 0;
    std::size_t n_conclusion = 0;  // conclusion held among premise slabs
    std::vector<Counterexample> counterexamples;

    double conditional_rate() const;
    nlohmann::json to_json() const;
    void write_counterexamples_csv(const std::filesystem::path& path) const;
};

/// For every sampled image slab E: pull E back through each branch; if every
/// preimage piece satisfies the uniform condition at (kappa, sigma, delta,
/// ell'/s_j, beta) with ell' = ell * max_j s_j, then E must satisfy it at
/// (kappa, predicted sigma, delta, ell', predicted beta) and ell' must lie in
/// the predicted range.
PropagationVerdict verify_propagation(const LabeledDataset& ds, const MapSpec& map, const DoublingParams& p,
                                      const SlabSampler& sampler, const PredictedConstants& predicted,
                                      unsigned threads = 0);

}  // namespace dgstab
