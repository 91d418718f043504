#include "dgstab/geometry.hpp"

#include <fmt/format.h>

#include "dgstab/dataset.hpp"
#include "dgstab/errors.hpp"
#include "dgstab/numeric.hpp"

namespace dgstab {

namespace {

void require_dim(std::size_t expected, std::size_t got) {
    if (expected != got) {
        throw ValidationError(fmt::format("dimension mismatch: expected {}, got {}", expected, got));
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
    return acc;
}

}  // namespace

Slab::Slab(std::vector<double> center, std::vector<double> normal, double width)
    : center_(std::move(center)), normal_(std::move(normal)), width_(width) {
    if (center_.empty()) throw ValidationError("slab centre must have at least one coordinate");
    require_dim(center_.size(), normal_.size());
    if (!(width_ > 0.0) || !std::isfinite(width_)) throw ValidationError("slab width must be positive");
    const double norm = std::sqrt(dot(normal_, normal_));
    if (!(norm >= 1e-12) || !std::isfinite(norm)) throw ValidationError("slab normal is (numerically) zero");
    for (double& u : normal_) u /= norm;
}

double Slab::offset(std::span<const double> x) const {
    require_dim(center_.size(), x.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) acc += (x[j] - center_[j]) * normal_[j];
    return acc;
}

Slab Slab::with_width(double width) const {
    Slab s = *this;
    if (!(width > 0.0) || !std::isfinite(width)) throw ValidationError("slab width must be positive");
    s.width_ = width;
    return s;
}

HalfSpace::HalfSpace(std::vector<double> v_, double t_) : v(std::move(v_)), t(t_) {
    bool nonzero = false;
    for (double c : v) nonzero = nonzero || c != 0.0;
    if (!nonzero) throw ValidationError("half-space normal must be nonzero");
}

bool HalfSpace::contains(std::span<const double> x) const {
    require_dim(v.size(), x.size());
    return dot(v, x) <= t;
}

TruncatedSlab::TruncatedSlab(Slab s, std::vector<HalfSpace> cuts)
    : slab(std::move(s)), truncations(std::move(cuts)) {
    for (const auto& h : truncations) require_dim(slab.dim(), h.v.size());
}

bool TruncatedSlab::admits(std::span<const double> x) const {
    for (const auto& h : truncations) {
        if (!h.contains(x)) return false;
    }
    return true;
}

bool slab_contains(const Slab& s, std::span<const double> x) {
    return within_width(s.offset(x), s.width());
}

bool truncated_contains(const TruncatedSlab& ts, std::span<const double> x) {
    return slab_contains(ts.slab, x) && ts.admits(x);
}

TruncatedSlab scale(const TruncatedSlab& ts, double factor) {
    if (!(factor > 0.0)) throw ValidationError("scale factor must be positive");
    return with_width(ts, ts.slab.width() * factor);
}

TruncatedSlab with_width(const TruncatedSlab& ts, double width) {
    TruncatedSlab out = ts;
    out.slab = ts.slab.with_width(width);
    return out;
}

double mass(const LabeledDataset& ds, const TruncatedSlab& ts) {
    require_dim(ts.dim(), ds.dim());
    CompensatedSum total;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (truncated_contains(ts, ds.point(i))) total += ds.weight(i);
    }
    return total.value();
}

}  // namespace dgstab
