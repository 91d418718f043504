#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace dgstab {

/// Neumaier-compensated accumulator carried in extended precision.
///
/// Masses and losses go through this so that the same multiset of addends,
/// visited in the same order, always rounds to the same double.
class CompensatedSum {
  public:
    CompensatedSum& operator+=(double x) noexcept {
        const long double v = x;
        const long double t = sum_ + v;
        if (std::fabs(sum_) >= std::fabs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
        return *this;
    }

    double value() const noexcept { return static_cast<double>(sum_ + comp_); }
    long double extended() const noexcept { return sum_ + comp_; }

  private:
    long double sum_ = 0.0L;
    long double comp_ = 0.0L;
};

inline double compensated_sum(std::span<const double> xs) noexcept {
    CompensatedSum s;
    for (double x : xs) s += x;
    return s.value();
}

/// SplitMix64 finaliser; derives independent stream seeds from (seed, index).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace dgstab
