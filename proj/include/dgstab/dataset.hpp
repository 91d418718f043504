#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dgstab {

/// Weighted, labelled point cloud in R^n. The weights are the measure mu on
/// the training set and always sum to one.
class LabeledDataset {
  public:
    /// `points` is row-major with `dim` coordinates per sample. Empty
    /// `weights` means uniform. Weights are renormalised when their sum is
    /// off by more than 1e-9; use `was_renormalized()` to detect that.
    LabeledDataset(std::size_t dim, std::size_t num_classes, std::vector<double> points,
                   std::vector<int> labels, std::vector<double> weights = {});

    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t num_classes() const noexcept { return num_classes_; }

    std::span<const double> point(std::size_t i) const noexcept {
        return {points_.data() + i * dim_, dim_};
    }
    int label(std::size_t i) const noexcept { return labels_[i]; }
    double weight(std::size_t i) const noexcept { return weights_[i]; }

    const std::vector<double>& coordinates() const noexcept { return points_; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    bool was_renormalized() const noexcept { return renormalized_; }

    /// Same points and labels with per-point coordinates replaced.
    LabeledDataset with_coordinates(std::size_t dim, std::vector<double> points) const;

    /// Subset by index; weights are renormalised within the subset.
    LabeledDataset subset(std::span<const std::size_t> indices) const;

    friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

  private:
    std::size_t dim_;
    std::size_t num_classes_;
    std::vector<double> points_;
    std::vector<int> labels_;
    std::vector<double> weights_;
    bool renormalized_ = false;
};

/// Example-1 style decision boundary data: a random polynomial in x with
/// points shifted above (label 1, "red") or below (label 0, "blue").
struct PolyBoundarySpec {
    int degree = 6;
    std::size_t n_samples = 1000;
    double x_min = -1.0;
    double x_max = 1.0;
    double vertical_shift = 0.2;
    double noise_std = 0.1;  // Gaussian, applied to y
    std::uint64_t seed = 0;

    void validate() const;
};

/// Polynomial actually used for generation, after rescaling to unit height.
struct BoundaryPolynomial {
    std::vector<double> coefficients;  // ascending powers, before rescaling
    double offset = 0.0;               // subtracted after evaluation
    double scale = 1.0;                // divides after subtracting offset

    double operator()(double x) const;
};

struct PolyBoundaryData {
    LabeledDataset dataset;
    BoundaryPolynomial boundary;
};

PolyBoundaryData generate_poly_boundary(const PolyBoundarySpec& spec);

/// Uniform shuffle, first `n_train` rows become the training part.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, std::size_t n_train,
                                                std::uint64_t seed);

/// CSV with header `x0,...,x{n-1},label[,weight]`, 17 significant digits.
void save_csv(const LabeledDataset& ds, const std::filesystem::path& path, bool with_weights = true);

/// Parses a dataset CSV. Throws ParseError with the line number on malformed
/// rows. A non-normalised weight column is renormalised and reported through
/// `warnings` when provided.
LabeledDataset load_csv(const std::filesystem::path& path,
                        std::vector<std::string>* warnings = nullptr);

}  // namespace dgstab
