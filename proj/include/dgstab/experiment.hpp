#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgstab/dataset.hpp"
#include "dgstab/doubling.hpp"
#include "dgstab/network.hpp"

namespace dgstab {

/// "abs", "relu", "leaky_relu" or "leaky_relu:<slope>".
Activation parse_activation(const std::string& s);
std::string activation_name(const Activation& a);

struct ExperimentConfig {
    std::size_t n_datasets = 20;
    std::size_t n_min = 200;
    std::size_t n_max = 15000;
    std::size_t n_train_min = 100;
    PolyBoundarySpec data;  // n_samples and seed are drawn per dataset

    std::string preset = "small";
    std::string activation = "leaky_relu";
    std::string optimizer = "adam";  // or "sgd"
    double lr = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 2;

    DoublingParams doubling{2.0, 0.9, 1.0, 0.001, 1.0, 0.0};
    std::size_t n_slabs = 2000;
    CenterPolicy center_policy = CenterPolicy::OnDataPoint;

    std::uint64_t seed = 0;
    unsigned threads = 0;  // 0: DG_THREADS / hardware default

    void validate() const;
    nlohmann::json to_json() const;

    /// Named settings: "desk" (20 datasets, 2 epochs, 2000 slabs, small
    /// network) and "paper-ex-3.2" (100 datasets, 5 epochs, 50000 slabs,
    /// 4 x 1000 network).
    static ExperimentConfig preset_named(const std::string& name);
};

struct DatasetResult {
    std::size_t index = 0;
    std::size_t n_total = 0;
    std::size_t n_train = 0;
    double loss = 0.0;
    double accuracy = 0.0;
    double beta_bar = 0.0;
    double mean_steps = 0.0;
    bool ok = false;
    bool selected = false;
    std::string error;
};

struct PipelineResult {
    std::vector<DatasetResult> datasets;
    double mean_accuracy = 0.0;
    std::optional<double> spearman;  // beta_bar vs loss on the selected half
    std::optional<double> pearson;
    std::vector<std::string> warnings;

    nlohmann::json summary_json() const;
};

/// Runs one dataset end to end: generate, split, train, scan the training set.
DatasetResult run_dataset(const ExperimentConfig& cfg, std::size_t index);

/// Marks the ceil(n/2) successful runs whose accuracy is closest to the mean
/// and computes the correlations on them.
void select_and_correlate(PipelineResult& result);

PipelineResult run_pipeline(const ExperimentConfig& cfg);

void write_results_csv(const std::vector<DatasetResult>& results, const std::filesystem::path& path);
std::vector<DatasetResult> load_results_csv(const std::filesystem::path& path);

/// Writes results.csv, correlation.json, loss_vs_beta.{svg,csv,dat} and
/// points_vs_beta.{svg,csv,dat}; returns the paths written.
std::vector<std::filesystem::path> write_pipeline_outputs(const PipelineResult& result,
                                                          const std::filesystem::path& dir);

/// Scatter of training-set size against beta-bar for the successful runs.
std::vector<std::filesystem::path> report_points_vs_beta(const std::vector<DatasetResult>& results,
                                                         const std::filesystem::path& dir);

}  // namespace dgstab

namespace dgstab {

/// Small 2-D problem where gradient descent on the cross-entropy trades
/// accuracy for loss: 70% class 1 at small positive x, 20% class 0 at small
/// negative x, 10% class 0 outliers far out at x ~ 8. A linear model starts
/// at the accuracy-optimal direction, so the outliers dominate the loss.
struct InstabilityFixture {
    LabeledDataset data;
    MlpModel model;
    TrainOptions options;
};
InstabilityFixture make_instability_fixture(std::uint64_t seed = 11, std::size_t n = 500);

struct LossAccuracyWindow {
    std::size_t first = 0;
    std::size_t last = 0;
    double accuracy_drop = 0.0;
};
/// Among all windows of strictly decreasing loss spanning at least
/// `min_epochs` epochs, the one with the largest accuracy drop.
std::optional<LossAccuracyWindow> find_instability_window(const TrainTrace& trace, std::size_t min_epochs);

}  // namespace dgstab
