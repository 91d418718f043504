#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace dgstab {

class LabeledDataset;

/// Region {x : |(x - center)·normal| <= width/2}. The normal is normalised
/// on construction.
class Slab {
  public:
    Slab(std::vector<double> center, std::vector<double> normal, double width);

    const std::vector<double>& center() const noexcept { return center_; }
    const std::vector<double>& normal() const noexcept { return normal_; }
    double width() const noexcept { return width_; }
    std::size_t dim() const noexcept { return center_.size(); }

    /// Signed distance (x - center)·normal; throws on dimension mismatch.
    double offset(std::span<const double> x) const;

    Slab with_width(double width) const;

    friend bool operator==(const Slab&, const Slab&) = default;

  private:
    std::vector<double> center_;
    std::vector<double> normal_;
    double width_;
};

/// Constraint v·x <= t.
struct HalfSpace {
    std::vector<double> v;
    double t = 0.0;

    HalfSpace(std::vector<double> v, double t);
    bool contains(std::span<const double> x) const;

    friend bool operator==(const HalfSpace&, const HalfSpace&) = default;
};

struct TruncatedSlab {
    Slab slab;
    std::vector<HalfSpace> truncations;

    explicit TruncatedSlab(Slab s, std::vector<HalfSpace> cuts = {});

    std::size_t dim() const noexcept { return slab.dim(); }

    /// True when every truncation constraint holds; ignores the slab itself.
    bool admits(std::span<const double> x) const;

    friend bool operator==(const TruncatedSlab&, const TruncatedSlab&) = default;
};

/// The single membership test shared by every checker, so fast paths and
/// reference recounts agree on boundary points.
inline bool within_width(double offset, double width) noexcept {
    return std::abs(offset) <= 0.5 * width;
}

/// Width ell * kappa^i evaluated directly rather than by repeated products.
inline double geometric_width(double ell, double kappa, int i) noexcept {
    return ell * std::pow(kappa, i);
}

bool slab_contains(const Slab& s, std::span<const double> x);
bool truncated_contains(const TruncatedSlab& ts, std::span<const double> x);

/// Width multiplied by `factor`; centre, normal and truncations unchanged.
TruncatedSlab scale(const TruncatedSlab& ts, double factor);

/// Same slab with its width replaced; truncations unchanged.
TruncatedSlab with_width(const TruncatedSlab& ts, double width);

/// mu(points inside ts), accumulated with compensated summation in dataset order.
double mass(const LabeledDataset& ds, const TruncatedSlab& ts);

}  // namespace dgstab
