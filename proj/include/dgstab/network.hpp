#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dgstab/doubling.hpp"
#include "dgstab/piecewise.hpp"

namespace dgstab {

class LabeledDataset;

struct AbsoluteValue {
    friend bool operator==(const AbsoluteValue&, const AbsoluteValue&) = default;
};
/// max(x, 0) + slope * min(x, 0); slope 0 is plain ReLU.
struct LeakyRelu {
    double slope = 0.01;
    friend bool operator==(const LeakyRelu&, const LeakyRelu&) = default;
};
struct PiecewiseLinear {
    Piecewise1D g;
    friend bool operator==(const PiecewiseLinear&, const PiecewiseLinear&) = default;
};
using Activation = std::variant<AbsoluteValue, LeakyRelu, PiecewiseLinear>;

double activate(const Activation& act, double x);
/// Derivative used by backpropagation: 0 for |x| at 0, the positive slope for
/// LeakyReLU at 0, the right-hand slope at piecewise breakpoints.
double activate_derivative(const Activation& act, double x);
/// Kink locations of the activation.
std::vector<double> activation_kinks(const Activation& act);
nlohmann::json to_json(const Activation& act);
Activation activation_from_json(const nlohmann::json& j);

struct Layer {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;  // out
};

/// X = act ∘ M_L ∘ ... ∘ act ∘ M_1 with M_k(x) = W_k x + b_k.
class MlpModel {
  public:
    MlpModel(std::vector<Layer> layers, Activation act, double softmax_base = std::numbers::e,
             bool activate_output = true);

    /// Layer widths dims[0] -> dims[1] -> ... ; weights and biases drawn
    /// uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)].
    static MlpModel random(const std::vector<std::size_t>& dims, Activation act, std::uint64_t seed,
                           double softmax_base = std::numbers::e, bool activate_output = true);

    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& mutable_layers() noexcept { return layers_; }
    const Activation& activation() const noexcept { return act_; }
    double softmax_base() const noexcept { return base_; }
    bool activate_output() const noexcept { return activate_output_; }
    std::size_t input_dim() const noexcept { return layers_.front().W.cols(); }
    std::size_t num_classes() const noexcept { return layers_.back().W.rows(); }
    std::vector<std::size_t> dims() const;

    std::size_t parameter_count() const noexcept;
    /// Per layer: W row-major, then b.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> theta);

  private:
    std::vector<Layer> layers_;
    Activation act_;
    double base_;
    bool activate_output_;
};

/// Named architectures: "small" = 2 hidden layers of 32, "paper" = 4 of 1000.
std::vector<std::size_t> preset_dims(const std::string& preset, std::size_t input_dim, std::size_t classes);

Eigen::VectorXd forward(const MlpModel& m, std::span<const double> x);
/// Logits for many inputs; column i is the input column i of `inputs`.
Eigen::MatrixXd forward_batch(const MlpModel& m, const Eigen::MatrixXd& inputs);
/// Pre-activations of every layer for every input column.
std::vector<Eigen::MatrixXd> pre_activations(const MlpModel& m, const Eigen::MatrixXd& inputs);

/// b^{X_i} / sum_j b^{X_j}, evaluated with max subtraction.
Eigen::VectorXd softmax_b(const Eigen::VectorXd& logits, double base);

struct DeltaXEntry {
    double delta = 0.0;
    double weight = 0.0;
    int label = 0;
    int predicted = 0;
};

struct DeltaXVector {
    std::vector<DeltaXEntry> entries;

    std::vector<WeightedValue> weighted() const;
};

/// Data points as columns of a matrix.
Eigen::MatrixXd data_matrix(const LabeledDataset& ds);

DeltaXVector delta_x(const MlpModel& m, const LabeledDataset& ds);
/// Weight of samples with strictly positive confidence.
double accuracy(const DeltaXVector& dx);
/// Weighted cross-entropy (natural log) under the model's softmax base.
double cross_entropy(const MlpModel& m, const LabeledDataset& ds);

struct LossGradient {
    double loss = 0.0;
    std::vector<double> gradient;  // same layout as MlpModel::parameters()
};

/// Loss and its gradient over the dataset, or over `subset` with the
/// weights renormalised inside it.
LossGradient loss_and_gradient(const MlpModel& m, const LabeledDataset& ds,
                               std::span<const std::size_t> subset = {});

/// Smallest distance from any pre-activation to a kink of the activation.
double min_kink_distance(const MlpModel& m, const LabeledDataset& ds);

struct GoodBad {
    double good = 0.0;  // mu(delta > eta)
    double bad = 0.0;   // mu(delta < -eta)
};
GoodBad good_bad_sets(const DeltaXVector& dx, double eta);

struct Sgd {
    double lr = 0.01;
};
struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};
using Optimizer = std::variant<Sgd, Adam>;

struct TrainOptions {
    std::size_t epochs = 1;
    Optimizer optimizer = Adam{};
    std::uint64_t seed = 0;
    std::size_t batch_size = 0;  // 0: full batch
    bool record_delta_x = false;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
    std::optional<DeltaXVector> delta_x;
};

struct TrainTrace {
    std::vector<EpochRecord> epochs;  // epoch 0 is the model before training

    void write_csv(const std::filesystem::path& path) const;
};

/// Trains in place. Throws TrainingError on a non-finite loss or gradient.
TrainTrace train(MlpModel& m, const LabeledDataset& ds, const TrainOptions& opts);

struct Spectrum {
    double d_min = 0.0;  // squared smallest nonzero singular value
    double d_max = 0.0;  // squared largest singular value
    std::vector<double> singular_values;  // descending, of W_L ... W_1
    std::size_t rank = 0;
};
Spectrum singular_spectrum(const MlpModel& m);
Eigen::MatrixXd weight_product(const MlpModel& m);

struct AbsoluteThreshold {
    double tau = 0.0;
};
struct MedianMultiple {
    double c = 2.858;
};
using TruncationPolicy = std::variant<AbsoluteThreshold, MedianMultiple>;

/// SVD reconstruction with singular values below the threshold removed.
Eigen::MatrixXd truncate_singular_values(const Eigen::MatrixXd& W, const TruncationPolicy& policy);

void save_checkpoint(const MlpModel& m, const std::filesystem::path& path);
MlpModel load_checkpoint(const std::filesystem::path& path);

}  // namespace dgstab
