#pragma once

#include <cstddef>
#include <vector>

namespace dgstab {

/// Continuous piecewise-linear g: R -> R with finitely many breakpoints.
///
/// Piece k covers [breakpoint k-1, breakpoint k) with the outer pieces
/// unbounded, so a breakpoint belongs to the piece on its right.
class Piecewise1D {
  public:
    /// `slopes` has one entry more than `breakpoints`. `anchor` is g at the
    /// first breakpoint, or g(0) when there are none.
    Piecewise1D(std::vector<double> breakpoints, std::vector<double> slopes, double anchor = 0.0);

    static Piecewise1D absolute_value();
    static Piecewise1D linear(double slope);

    double operator()(double x) const noexcept;
    /// Slope of the piece containing x (the right-hand slope at a breakpoint).
    double derivative(double x) const noexcept;
    std::size_t piece_of(double x) const noexcept;

    std::size_t num_pieces() const noexcept { return slopes_.size(); }
    double slope(std::size_t piece) const { return slopes_.at(piece); }
    /// g(x) = slope(k) * x + intercept(k) on piece k.
    double intercept(std::size_t piece) const;
    /// Lower/upper end of a piece (infinite for the outer pieces).
    double piece_lo(std::size_t piece) const;
    double piece_hi(std::size_t piece) const;

    const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
    const std::vector<double>& slopes() const noexcept { return slopes_; }
    /// g evaluated at each breakpoint.
    const std::vector<double>& critical_values() const noexcept { return values_; }
    double anchor() const noexcept { return anchor_; }

    double alpha_min() const noexcept;
    double alpha_max() const noexcept;
    /// Smallest |g(x_{k+1}) - g(x_k)| over neighbouring breakpoints; +inf with fewer than two.
    double critical_gap() const noexcept;

    friend bool operator==(const Piecewise1D& a, const Piecewise1D& b) {
        return a.breakpoints_ == b.breakpoints_ && a.slopes_ == b.slopes_ && a.anchor_ == b.anchor_;
    }

  private:
    std::vector<double> breakpoints_;
    std::vector<double> slopes_;
    double anchor_;
    std::vector<double> values_;
};

}  // namespace dgstab
