#include "dgstab/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/SVD>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "dgstab/errors.hpp"
#include "dgstab/parallel.hpp"

namespace dgstab {

LabeledDataset apply_abs(const LabeledDataset& ds) {
    std::vector<double> pts = ds.coordinates();
    for (double& x : pts) x = std::abs(x);
    return ds.with_coordinates(ds.dim(), std::move(pts));
}

LabeledDataset apply_linear(const LabeledDataset& ds, const Eigen::MatrixXd& M) {
    if (static_cast<std::size_t>(M.cols()) != ds.dim()) {
        throw ValidationError(fmt::format("matrix has {} columns, data dimension is {}", M.cols(), ds.dim()));
    }
    const auto out_dim = static_cast<std::size_t>(M.rows());
    std::vector<double> pts(ds.size() * out_dim);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto x = ds.point(i);
        for (std::size_t r = 0; r < out_dim; ++r) {
            double acc = 0.0;
            for (std::size_t j = 0; j < ds.dim(); ++j) acc += M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) * x[j];
            pts[i * out_dim + r] = acc;
        }
    }
    return ds.with_coordinates(out_dim, std::move(pts));
}

LabeledDataset apply_piecewise(const LabeledDataset& ds, const Piecewise1D& g, std::size_t coordinate) {
    if (coordinate >= ds.dim()) throw ValidationError("coordinate index out of range");
    std::vector<double> pts = ds.coordinates();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double& x = pts[i * ds.dim() + coordinate];
        x = g(x);
    }
    return ds.with_coordinates(ds.dim(), std::move(pts));
}

LabeledDataset apply_map(const LabeledDataset& ds, const MapSpec& map) {
    if (const auto* lin = std::get_if<LinearMap>(&map)) return apply_linear(ds, lin->M);
    if (const auto* pw = std::get_if<PiecewiseMap>(&map)) return apply_piecewise(ds, pw->g, pw->coordinate);
    return apply_abs(ds);
}

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> unit(std::size_t n, std::size_t k, double sign) {
    std::vector<double> e(n, 0.0);
    e[k] = sign;
    return e;
}

}  // namespace

TruncatedSlab image_slab(const Eigen::MatrixXd& M, const TruncatedSlab& ts) {
    if (M.rows() != M.cols() || static_cast<std::size_t>(M.cols()) != ts.dim()) {
        throw ValidationError("image_slab needs a square matrix matching the slab dimension");
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (!lu.isInvertible()) throw ValidationError("image_slab needs an invertible matrix");
    const Eigen::MatrixXd MinvT = lu.inverse().transpose();
    const Eigen::VectorXd n = MinvT * to_eigen(ts.slab.normal());
    const double r = n.norm();
    // (x - c).u = (y - Mc).n, so the unit-normal half-width shrinks by |n|
    Slab s(to_std(M * to_eigen(ts.slab.center())), to_std(n), ts.slab.width() / r);
    std::vector<HalfSpace> cuts;
    for (const auto& h : ts.truncations) cuts.emplace_back(to_std(MinvT * to_eigen(h.v)), h.t);
    return TruncatedSlab(std::move(s), std::move(cuts));
}

bool has_mass_on_coordinate_planes(const LabeledDataset& ds) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.weight(i) <= 0.0) continue;
        for (double x : ds.point(i)) {
            if (x == 0.0) return true;
        }
    }
    return false;
}

std::vector<AffinePiece> affine_pieces(const MapSpec& map, std::size_t dim) {
    const auto n = static_cast<Eigen::Index>(dim);
    std::vector<AffinePiece> pieces;
    if (const auto* lin = std::get_if<LinearMap>(&map)) {
        if (lin->M.cols() != n) throw ValidationError("linear map does not match data dimension");
        pieces.push_back({lin->M, Eigen::VectorXd::Zero(lin->M.rows()), {}});
    } else if (const auto* pw = std::get_if<PiecewiseMap>(&map)) {
        if (pw->coordinate >= dim) throw ValidationError("coordinate index out of range");
        const auto k = static_cast<Eigen::Index>(pw->coordinate);
        for (std::size_t j = 0; j < pw->g.num_pieces(); ++j) {
            AffinePiece piece{Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n), {}};
            piece.A(k, k) = pw->g.slope(j);
            piece.c(k) = pw->g.intercept(j);
            const double lo = pw->g.piece_lo(j);
            const double hi = pw->g.piece_hi(j);
            if (std::isfinite(lo)) piece.region.emplace_back(unit(dim, pw->coordinate, -1.0), -lo);
            if (std::isfinite(hi)) {
                piece.region.emplace_back(unit(dim, pw->coordinate, 1.0),
                                          std::nextafter(hi, -std::numeric_limits<double>::infinity()));
            }
            pieces.push_back(std::move(piece));
        }
    } else {
        if (dim > 20) throw ValidationError("orthant decomposition limited to 20 dimensions");
        const double below_zero = std::nextafter(0.0, -1.0);
        for (std::size_t mask = 0; mask < (std::size_t{1} << dim); ++mask) {
            AffinePiece piece{Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n), {}};
            for (std::size_t k = 0; k < dim; ++k) {
                if (mask & (std::size_t{1} << k)) {  // x_k < 0, mapped by -1
                    piece.A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = -1.0;
                    piece.region.emplace_back(unit(dim, k, 1.0), below_zero);
                } else {  // x_k >= 0
                    piece.region.emplace_back(unit(dim, k, -1.0), 0.0);
                }
            }
            pieces.push_back(std::move(piece));
        }
    }
    return pieces;
}

TruncatedSlab pullback(const AffinePiece& piece, const Slab& image, double& dilation) {
    if (static_cast<std::size_t>(piece.A.rows()) != image.dim()) {
        throw ValidationError("image slab dimension does not match the map");
    }
    const Eigen::VectorXd u = to_eigen(image.normal());
    const Eigen::VectorXd v = piece.A.transpose() * u;
    dilation = v.norm();
    if (!(dilation > 0.0)) throw ValidationError("slab normal lies in the kernel of the map");
    // (A x + c - y0).u = s (x.v_hat - t) with t = (y0 - c).u / s
    const double t = (to_eigen(image.center()) - piece.c).dot(u) / dilation;
    const Eigen::VectorXd vhat = v / dilation;
    return TruncatedSlab(Slab(to_std(t * vhat), to_std(vhat), image.width() / dilation), piece.region);
}

PredictedConstants predict_constants(const MapSpec& map, const LabeledDataset& ds, const DoublingParams& p) {
    PredictedConstants out{p.sigma, p.ell, p.ell, p.beta};
    if (const auto* lin = std::get_if<LinearMap>(&map)) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(lin->M);
        const auto s = svd.singularValues();
        const double smax = s(0);
        double smin = smax;
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            if (s(i) > 1e-10 * smax) smin = s(i);
        }
        out.ell_lo = p.ell * smin;
        out.ell_hi = p.ell * smax;
        out.beta = p.beta * smin;
    } else if (const auto* pw = std::get_if<PiecewiseMap>(&map)) {
        out.sigma = p.sigma / 2.0;
        out.ell_lo = p.ell * std::min(1.0, pw->g.alpha_min());
        out.ell_hi = p.ell * std::max(1.0, pw->g.alpha_max());
        out.beta = p.beta * std::min(1.0, pw->g.alpha_min());
    } else if (has_mass_on_coordinate_planes(ds)) {
        out.sigma = p.sigma / 2.0;
    }
    return out;
}

double PropagationVerdict::conditional_rate() const {
    return n_premise == 0 ? 1.0 : static_cast<double>(n_conclusion) / static_cast<double>(n_premise);
}

nlohmann::json PropagationVerdict::to_json() const {
    nlohmann::json cx = nlohmann::json::array();
    for (const auto& c : counterexamples) {
        cx.push_back({{"slab_id", c.slab_id},
                      {"center", c.center},
                      {"normal", c.normal},
                      {"ell_prime", c.ell_prime},
                      {"reason", c.reason},
                      {"scale_index", c.scale_index},
                      {"mass_before", c.mass_before},
                      {"mass_after", c.mass_after}});
    }
    return {{"n_slabs", n_slabs},
            {"n_premise", n_premise},
            {"n_conclusion", n_conclusion},
            {"conditional_rate", conditional_rate()},
            {"counterexamples", cx}};
}

void PropagationVerdict::write_counterexamples_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "slab_id,center,normal,ell_prime,reason,scale_index,mass_before,mass_after\n";
    for (const auto& c : counterexamples) {
        out << fmt::format("{},{:.17g},{:.17g},{:.17g},{},{},{:.17g},{:.17g}\n", c.slab_id, fmt::join(c.center, " "),
                           fmt::join(c.normal, " "), c.ell_prime, c.reason, c.scale_index, c.mass_before,
                           c.mass_after);
    }
}

PropagationVerdict verify_propagation(const LabeledDataset& ds, const MapSpec& map, const DoublingParams& p,
                                      const SlabSampler& sampler, const PredictedConstants& predicted,
                                      unsigned threads) {
    p.validate();
    sampler.validate();
    const LabeledDataset image = apply_map(ds, map);
    const auto pieces = affine_pieces(map, ds.dim());

    DoublingParams concl = p;
    concl.sigma = predicted.sigma;
    concl.beta = predicted.beta;

    struct Outcome {
        bool premise = false;
        bool conclusion = false;
        Counterexample cx;
    };
    std::vector<Outcome> outcomes(sampler.n_slabs);
    parallel_for(sampler.n_slabs, threads == 0 ? threads_from_env() : threads, [&](std::size_t k) {
        const Slab E = sampler.sample(image, k, p.ell);
        std::vector<TruncatedSlab> pre;
        std::vector<double> dil(pieces.size());
        for (std::size_t j = 0; j < pieces.size(); ++j) pre.push_back(pullback(pieces[j], E, dil[j]));
        const double ell_prime = p.ell * *std::max_element(dil.begin(), dil.end());

        Outcome& o = outcomes[k];
        o.premise = true;
        for (std::size_t j = 0; j < pieces.size() && o.premise; ++j) {
            DoublingParams pj = p;
            pj.ell = ell_prime / dil[j];
            o.premise = check_uniform_dc_slab(ds, pre[j], pj).satisfied();
        }
        if (!o.premise) return;

        o.cx.slab_id = k;
        o.cx.center = E.center();
        o.cx.normal = E.normal();
        o.cx.ell_prime = ell_prime;
        const double tol = 1e-12 * predicted.ell_hi;
        if (ell_prime < predicted.ell_lo - tol || ell_prime > predicted.ell_hi + tol) {
            o.cx.reason = "ell_prime outside predicted range";
            return;
        }
        DoublingParams pc = concl;
        pc.ell = ell_prime;
        const auto v = check_uniform_dc_slab(image, TruncatedSlab(E), pc, k);
        if (v.satisfied()) {
            o.conclusion = true;
        } else {
            o.cx.reason = "image slab violates the predicted condition";
            o.cx.scale_index = v.first_failure->scale_index;
            o.cx.mass_before = v.first_failure->mass_before;
            o.cx.mass_after = v.first_failure->mass_after;
        }
    });

    PropagationVerdict verdict;
    verdict.n_slabs = sampler.n_slabs;
    for (auto& o : outcomes) {
        if (!o.premise) continue;
        ++verdict.n_premise;
        if (o.conclusion) {
            ++verdict.n_conclusion;
        } else {
            verdict.counterexamples.push_back(std::move(o.cx));
        }
    }
    return verdict;
}

}  // namespace dgstab
