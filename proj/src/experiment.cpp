#include "dgstab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "dgstab/errors.hpp"
#include "dgstab/numeric.hpp"
#include "dgstab/parallel.hpp"
#include "dgstab/report.hpp"

namespace dgstab {

Activation parse_activation(const std::string& s) {
    if (s == "abs") return AbsoluteValue{};
    if (s == "relu") return LeakyRelu{0.0};
    if (s == "leaky_relu") return LeakyRelu{0.01};
    if (s.rfind("leaky_relu:", 0) == 0) {
        try {
            return LeakyRelu{std::stod(s.substr(11))};
        } catch (const std::logic_error&) {
            throw ValidationError("bad leaky_relu slope in '" + s + "'");
        }
    }
    throw ValidationError("unknown activation '" + s + "' (abs, relu, leaky_relu[:slope])");
}

std::string activation_name(const Activation& a) {
    if (std::holds_alternative<AbsoluteValue>(a)) return "abs";
    if (const auto* l = std::get_if<LeakyRelu>(&a)) return l->slope == 0.0 ? "relu" : fmt::format("leaky_relu:{}", l->slope);
    return "piecewise";
}

void ExperimentConfig::validate() const {
    if (n_datasets < 1) throw ValidationError("n_datasets must be >= 1");
    if (n_min < 2 || n_max < n_min) throw ValidationError("sample-size range must satisfy 2 <= min <= max");
    if (n_train_min < 1) throw ValidationError("n_train_min must be >= 1");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (n_slabs < 1) throw ValidationError("n_slabs must be >= 1");
    if (!(lr >= 0.0)) throw ValidationError("lr must be >= 0");
    if (optimizer != "adam" && optimizer != "sgd") throw ValidationError("optimizer must be adam or sgd");
    (void)preset_dims(preset, 2, 2);
    (void)parse_activation(activation);
    doubling.validate();
    PolyBoundarySpec probe = data;
    probe.n_samples = n_min;
    probe.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
    return {{"n_datasets", n_datasets},
            {"n_min", n_min},
            {"n_max", n_max},
            {"n_train_min", n_train_min},
            {"data",
             {{"degree", data.degree},
              {"x_min", data.x_min},
              {"x_max", data.x_max},
              {"vertical_shift", data.vertical_shift},
              {"noise_std", data.noise_std},
              {"noise", "gaussian"}}},
            {"network",
             {{"preset", preset},
              {"activation", activation},
              {"optimizer", optimizer},
              {"lr", lr},
              {"batch_size", batch_size},
              {"epochs", epochs}}},
            {"doubling",
             {{"kappa", doubling.kappa},
              {"sigma", doubling.sigma},
              {"delta", doubling.delta},
              {"ell", doubling.ell},
              {"beta", doubling.beta}}},
            {"n_slabs", n_slabs},
            {"center_policy", center_policy == CenterPolicy::OnDataPoint ? "data" : "bbox"},
            {"seed", seed}};
}

ExperimentConfig ExperimentConfig::preset_named(const std::string& name) {
    ExperimentConfig c;
    if (name == "desk") return c;
    if (name == "paper-ex-3.2") {
        c.n_datasets = 100;
        c.epochs = 5;
        c.n_slabs = 50000;
        c.preset = "paper";
        return c;
    }
    throw ValidationError("unknown experiment preset '" + name + "' (desk, paper-ex-3.2)");
}

DatasetResult run_dataset(const ExperimentConfig& cfg, std::size_t index) {
    DatasetResult r;
    r.index = index;
    const std::uint64_t s = mix_seed(cfg.seed, index);
    std::mt19937_64 rng(s);
    r.n_total = std::uniform_int_distribution<std::size_t>(cfg.n_min, cfg.n_max)(rng);
    const std::size_t lo_train = std::min(cfg.n_train_min, r.n_total - 1);
    r.n_train = std::uniform_int_distribution<std::size_t>(lo_train, r.n_total - 1)(rng);

    PolyBoundarySpec spec = cfg.data;
    spec.n_samples = r.n_total;
    spec.seed = mix_seed(s, 1);
    const auto data = generate_poly_boundary(spec);
    auto [train_set, test_set] = split(data.dataset, r.n_train, mix_seed(s, 2));

    MlpModel model = MlpModel::random(preset_dims(cfg.preset, train_set.dim(), train_set.num_classes()),
                                      parse_activation(cfg.activation), mix_seed(s, 3));
    TrainOptions opts;
    opts.epochs = cfg.epochs;
    opts.seed = mix_seed(s, 4);
    opts.batch_size = cfg.batch_size;
    if (cfg.optimizer == "sgd") {
        opts.optimizer = Sgd{cfg.lr};
    } else {
        opts.optimizer = Adam{cfg.lr};
    }
    const TrainTrace trace = train(model, train_set, opts);
    r.loss = trace.epochs.back().loss;
    r.accuracy = trace.epochs.back().accuracy;

    SlabSampler sampler{cfg.n_slabs, cfg.center_policy, mix_seed(s, 5)};
    SudcOptions sopts;
    sopts.threads = 1;
    const SudcReport rep = sudc_scan(train_set, sampler, cfg.doubling, sopts);
    r.beta_bar = rep.beta_bar;
    r.mean_steps = rep.mean_steps;
    r.ok = true;
    return r;
}

void select_and_correlate(PipelineResult& result) {
    std::vector<std::size_t> ok;
    CompensatedSum acc;
    for (std::size_t i = 0; i < result.datasets.size(); ++i) {
        result.datasets[i].selected = false;
        if (result.datasets[i].ok) {
            ok.push_back(i);
            acc += result.datasets[i].accuracy;
        }
    }
    result.spearman.reset();
    result.pearson.reset();
    if (ok.empty()) {
        result.warnings.push_back("no dataset finished; correlations undefined");
        return;
    }
    result.mean_accuracy = acc.value() / static_cast<double>(ok.size());
    std::stable_sort(ok.begin(), ok.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(result.datasets[a].accuracy - result.mean_accuracy) <
               std::abs(result.datasets[b].accuracy - result.mean_accuracy);
    });
    const std::size_t keep = (ok.size() + 1) / 2;
    std::vector<std::size_t> chosen(ok.begin(), ok.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(chosen.begin(), chosen.end());
    std::vector<double> beta, loss;
    for (std::size_t i : chosen) {
        result.datasets[i].selected = true;
        beta.push_back(result.datasets[i].beta_bar);
        loss.push_back(result.datasets[i].loss);
    }
    result.spearman = spearman(beta, loss);
    result.pearson = pearson(beta, loss);
    if (!result.spearman) {
        result.warnings.push_back(
            fmt::format("correlation undefined on {} selected run(s) (need >= 3 with varying values)", chosen.size()));
    }
}

PipelineResult run_pipeline(const ExperimentConfig& cfg) {
    cfg.validate();
    PipelineResult result;
    result.datasets.resize(cfg.n_datasets);
    const unsigned threads = cfg.threads == 0 ? threads_from_env() : cfg.threads;
    parallel_for(cfg.n_datasets, threads, [&](std::size_t d) {
        try {
            result.datasets[d] = run_dataset(cfg, d);
        } catch (const std::exception& e) {
            DatasetResult failed;
            failed.index = d;
            failed.error = e.what();
            result.datasets[d] = std::move(failed);
        }
    });
    for (const auto& d : result.datasets) {
        if (!d.ok) result.warnings.push_back(fmt::format("dataset {} failed: {}", d.index, d.error));
    }
    select_and_correlate(result);
    return result;
}

nlohmann::json PipelineResult::summary_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    std::size_t n_ok = 0, n_sel = 0;
    for (const auto& d : datasets) {
        n_ok += d.ok;
        n_sel += d.selected;
    }
    return {{"n_datasets", datasets.size()},
            {"n_ok", n_ok},
            {"n_selected", n_sel},
            {"mean_accuracy", mean_accuracy},
            {"spearman_beta_loss", opt(spearman)},
            {"pearson_beta_loss", opt(pearson)},
            {"warnings", warnings}};
}

void write_results_csv(const std::vector<DatasetResult>& results, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "index,n_total,n_train,loss,accuracy,beta_bar,mean_steps,ok,selected\n";
    for (const auto& r : results) {
        out << fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{},{}\n", r.index, r.n_total, r.n_train, r.loss,
                           r.accuracy, r.beta_bar, r.mean_steps, r.ok ? 1 : 0, r.selected ? 1 : 0);
    }
}

std::vector<DatasetResult> load_results_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line.rfind("index,n_total,n_train,loss,accuracy,beta_bar", 0) != 0) {
        throw ParseError("unexpected results header", 1);
    }
    std::vector<DatasetResult> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 9) throw ParseError("expected 9 fields", lineno);
        try {
            DatasetResult r;
            r.index = std::stoul(f[0]);
            r.n_total = std::stoul(f[1]);
            r.n_train = std::stoul(f[2]);
            r.loss = std::stod(f[3]);
            r.accuracy = std::stod(f[4]);
            r.beta_bar = std::stod(f[5]);
            r.mean_steps = std::stod(f[6]);
            r.ok = f[7] == "1";
            r.selected = f[8] == "1";
            out.push_back(r);
        } catch (const std::logic_error&) {
            throw ParseError("malformed number", lineno);
        }
    }
    return out;
}

std::vector<std::filesystem::path> report_points_vs_beta(const std::vector<DatasetResult>& results,
                                                         const std::filesystem::path& dir) {
    ScatterPlot plot{"Training-set size vs beta-bar", "beta-bar", "number of elements in the training set", {}, {}};
    for (const auto& r : results) {
        if (!r.ok) continue;
        plot.x.push_back(r.beta_bar);
        plot.y.push_back(static_cast<double>(r.n_train));
    }
    return write_scatter(plot, dir, "points_vs_beta");
}

std::vector<std::filesystem::path> write_pipeline_outputs(const PipelineResult& result,
                                                          const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    write_results_csv(result.datasets, dir / "results.csv");
    written.push_back(dir / "results.csv");

    std::ofstream(dir / "correlation.json") << result.summary_json().dump(2) << '\n';
    written.push_back(dir / "correlation.json");

    ScatterPlot plot{"Training loss vs beta-bar (near-mean accuracy)", "beta-bar", "training loss", {}, {}};
    for (const auto& r : result.datasets) {
        if (!r.selected) continue;
        plot.x.push_back(r.beta_bar);
        plot.y.push_back(r.loss);
    }
    for (auto& p : write_scatter(plot, dir, "loss_vs_beta")) written.push_back(p);
    for (auto& p : report_points_vs_beta(result.datasets, dir)) written.push_back(p);
    return written;
}

}  // namespace dgstab

namespace dgstab {

InstabilityFixture make_instability_fixture(std::uint64_t seed, std::size_t n) {
    if (n < 10) throw ValidationError("instability fixture needs at least 10 points");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> pts;
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = i % 10;
        double x;
        int label;
        if (k < 7) {
            x = 0.05 + 0.95 * u(rng);
            label = 1;
        } else if (k < 9) {
            x = -0.05 - 0.95 * u(rng);
            label = 0;
        } else {
            x = 8.0 + u(rng);
            label = 0;
        }
        pts.push_back(x);
        pts.push_back(u(rng) - 0.5);
        labels.push_back(label);
    }
    Layer layer{Eigen::MatrixXd(2, 2), Eigen::VectorXd::Zero(2)};
    layer.W << -1.0, 0.0, 1.0, 0.0;
    TrainOptions opts;
    opts.epochs = 80;
    opts.optimizer = Sgd{0.02};
    opts.seed = seed;
    return {LabeledDataset(2, 2, std::move(pts), std::move(labels)),
            MlpModel({layer}, AbsoluteValue{}, std::numbers::e, false), opts};
}

std::optional<LossAccuracyWindow> find_instability_window(const TrainTrace& trace, std::size_t min_epochs) {
    const auto& e = trace.epochs;
    std::optional<LossAccuracyWindow> best;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= e.size(); ++i) {
        const bool continues = i < e.size() && e[i].loss < e[i - 1].loss;
        if (continues) continue;
        // [start, i-1] is a maximal strictly decreasing run; scan its sub-windows
        for (std::size_t a = start; a < i; ++a) {
            for (std::size_t b = a + min_epochs; b < i; ++b) {
                const double drop = e[a].accuracy - e[b].accuracy;
                if (!best || drop > best->accuracy_drop) best = LossAccuracyWindow{e[a].epoch, e[b].epoch, drop};
            }
        }
        start = i;
    }
    return best;
}

}  // namespace dgstab
