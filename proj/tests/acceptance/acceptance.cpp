// Acceptance run: one PASS/FAIL line per criterion. Criteria 1-9 run twice,
// under DG_THREADS=1 and DG_THREADS=4, and criterion 10 compares every CSV
// the two passes wrote.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "../unit/support.hpp"
#include "dgstab/constants.hpp"
#include "dgstab/dataset.hpp"
#include "dgstab/doubling.hpp"
#include "dgstab/experiment.hpp"
#include "dgstab/network.hpp"
#include "dgstab/propagation.hpp"

using namespace dgstab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- 1-3: constants -------------------------------------------------------

Outcome c2_reproduction(const fs::path& out) {
    const auto t0 = Clock::now();
    const auto r = c2(C2Inputs{});
    const double dt = seconds_since(t0);
    write_sweep_csv(out / "c2.csv", "xi_star", {{r.xi_star, r.value}});
    return {r.value >= 0.04 && r.value <= 0.06 && dt < 1.0, fmt::format("C2 = {:.6g} in {:.3f} s", r.value, dt)};
}

Outcome c3_reproduction(const fs::path& out) {
    const auto t0 = Clock::now();
    const double v = c3(C3Inputs{});
    const double dt = seconds_since(t0);
    write_sweep_csv(out / "c3.csv", "eta", {{18.0, v}});
    return {v >= 0.042 && v <= 0.052 && dt < 1.0, fmt::format("C3 = {:.6g} in {:.3f} s", v, dt)};
}

Outcome base_sweep(const fs::path& out) {
    C2Inputs in;
    in.xi_lo = in.xi_hi = 0.4;
    std::vector<SweepRow> rows;
    for (double b : {2.0, 3.0, 4.0, 5.0}) {
        in.base = b;
        rows.push_back({b, c2(in).value});
    }
    write_sweep_csv(out / "base_sweep.csv", "base", rows);
    bool monotone = true;
    for (std::size_t i = 1; i < rows.size(); ++i) monotone = monotone && rows[i].constant <= rows[i - 1].constant;
    const bool ok = std::abs(rows[0].constant - 0.06) <= 0.01 && std::abs(rows[3].constant - 0.03) <= 0.01 && monotone;
    return {ok, fmt::format("b=2..5: {:.4f} {:.4f} {:.4f} {:.4f}", rows[0].constant, rows[1].constant,
                            rows[2].constant, rows[3].constant)};
}

// ---- 4: loss/accuracy inequalities ----------------------------------------

Outcome inequality_suite(const fs::path& out) {
    std::ofstream csv(out / "inequalities.csv");
    csv << "run,epoch,loss,accuracy,lower,upper\n";
    std::size_t violations = 0, records = 0;
    const int runs = 25;
    for (int run = 0; run < runs; ++run) {
        PolyBoundarySpec spec;
        spec.n_samples = 300;
        spec.degree = 2 + run % 7;
        spec.seed = 1000 + static_cast<std::uint64_t>(run);
        auto data = generate_poly_boundary(spec).dataset;
        // every other run gets a third class on the right-hand strip
        const std::size_t K = run % 2 ? 3 : 2;
        if (K == 3) {
            std::vector<double> pts;
            std::vector<int> labels;
            for (std::size_t i = 0; i < data.size(); ++i) {
                pts.insert(pts.end(), data.point(i).begin(), data.point(i).end());
                labels.push_back(data.point(i)[0] > 0.5 ? 2 : data.label(i));
            }
            data = LabeledDataset(2, 3, pts, labels);
        }
        const Activation act = run % 3 == 0   ? Activation{AbsoluteValue{}}
                               : run % 3 == 1 ? Activation{LeakyRelu{0.01}}
                                              : Activation{PiecewiseLinear{Piecewise1D({-0.5, 0.5}, {0.3, 1.5, 0.6})}};
        const double b = run % 4 < 2 ? std::numbers::e : 2.0 + 0.25 * run;
        auto model = MlpModel::random({2, 16, 16, K}, act, static_cast<std::uint64_t>(run), b, run % 4 != 0);
        TrainOptions opts;
        opts.epochs = 6;
        opts.optimizer = Adam{1e-2};
        opts.batch_size = 32;
        opts.seed = static_cast<std::uint64_t>(run);
        opts.record_delta_x = true;
        const auto trace = train(model, data, opts);
        for (const auto& e : trace.epochs) {
            ++records;
            long double lo = 0, hi = 0;
            for (const auto& d : e.delta_x->entries) {
                lo += d.weight * std::log1p(std::pow(b, -d.delta));
                hi += d.weight * std::log1p(static_cast<double>(K - 1) * std::pow(b, -d.delta));
            }
            bool ok = 1.0 - e.accuracy <= e.loss / std::numbers::ln2 + 1e-12;
            ok = ok && static_cast<double>(lo) <= e.loss + 1e-9 && e.loss <= static_cast<double>(hi) + 1e-9;
            for (double eta_star : {0.0, 0.5, 1.0, 2.0}) {
                const double outside = 1.0 - good_bad_sets(*e.delta_x, eta_star).good;
                ok = ok && outside * std::log1p(std::pow(b, -eta_star)) <= e.loss + 1e-12;
            }
            violations += !ok;
            csv << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", run, e.epoch, e.loss, e.accuracy,
                               static_cast<double>(lo), static_cast<double>(hi));
        }
    }
    return {violations == 0, fmt::format("{} runs of distinct random models, {} epoch records, {} violations", runs,
                                         records, violations)};
}

// ---- 5: gradients ----------------------------------------------------------

Outcome gradient_check(const fs::path& out) {
    std::ofstream csv(out / "gradients.csv");
    csv << "point,relative_error\n";
    double worst = 0;
    int points = 0;
    for (std::uint64_t seed = 0; points < 100 && seed < 1000; ++seed) {
        PolyBoundarySpec spec;
        spec.n_samples = 40;
        spec.seed = seed;
        const auto data = generate_poly_boundary(spec).dataset;
        const Activation act = seed % 3 == 0   ? Activation{AbsoluteValue{}}
                               : seed % 3 == 1 ? Activation{LeakyRelu{0.1}}
                                               : Activation{PiecewiseLinear{Piecewise1D({-0.3, 0.4}, {0.5, 2, 0.2})}};
        auto m = MlpModel::random({2, 6, 5, 2}, act, seed, seed % 2 ? std::numbers::e : 3.0, seed % 4 != 0);
        if (min_kink_distance(m, data) < 1e-4) continue;
        const auto g = loss_and_gradient(m, data);
        auto theta = m.parameters();
        const double h = 1e-5;
        double diff = 0, nfd = 0, ng = 0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            auto t = theta;
            t[i] = theta[i] + h;
            m.set_parameters(t);
            const double fp = cross_entropy(m, data);
            t[i] = theta[i] - h;
            m.set_parameters(t);
            const double fd = (fp - cross_entropy(m, data)) / (2 * h);
            diff += (fd - g.gradient[i]) * (fd - g.gradient[i]);
            nfd += fd * fd;
            ng += g.gradient[i] * g.gradient[i];
        }
        const double rel = std::sqrt(diff / std::max(nfd, ng));
        worst = std::max(worst, rel);
        csv << fmt::format("{},{:.3e}\n", points, rel);
        ++points;
    }
    return {points == 100 && worst < 1e-5, fmt::format("{} points, max relative error {:.2e}", points, worst)};
}

// ---- 6: oracle equivalence -------------------------------------------------

Outcome oracle_equivalence(const fs::path& out) {
    const auto t0 = Clock::now();
    std::size_t mismatches = 0, comparisons = 0;
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1, 1);
    for (std::uint64_t d = 0; d < 50; ++d) {
        const std::size_t n = 20 + (d * 97) % 481;
        const auto ds = dgtest::random_cloud(n, 600 + d, 1.0, d % 2 == 1);
        const DoublingParams p{d % 3 ? 2.0 : 3.0, 0.3 + 0.02 * static_cast<double>(d % 30), d % 5 ? 1.0 : 0.3,
                               0.01, 1.0, d % 4 ? 0.0 : 0.01};
        const SlabSampler sampler{200, d % 2 ? CenterPolicy::OnDataPoint : CenterPolicy::UniformInBoundingBox, d};
        for (const bool by_mass : {false, true}) {
            SudcOptions o;
            o.mode = by_mass ? CountMode::Mass : CountMode::Points;
            const auto rep = sudc_scan(ds, sampler, p, o);
            rep.write_csv(out / fmt::format("sudc_{}_{}.csv", d, by_mass ? "mass" : "points"));
            for (std::size_t k = 0; k < sampler.n_slabs; ++k) {
                ++comparisons;
                const auto slow = dgtest::naive_sudc(ds, sampler.sample(ds, k, p.ell), p, by_mass, o.max_steps);
                mismatches += !(rep.per_slab[k] == slow);
            }
        }
        for (std::size_t k = 0; k < sampler.n_slabs; ++k) {
            const Slab s = sampler.sample(ds, k, p.ell);
            std::vector<HalfSpace> cuts;
            if (k % 2) cuts.emplace_back(std::vector<double>{u(rng), u(rng) + 2.5}, 0.5 * u(rng));
            const TruncatedSlab ts(s, cuts);
            comparisons += 4;
            mismatches += !(check_uniform_dc_slab(ds, ts, p) == dgtest::naive_uniform(ds, ts, p));
            mismatches += !(check_nonuniform_dc_slab(ds, ts, p, 0.5) == dgtest::naive_nonuniform(ds, ts, p, 0.5));
            std::vector<WeightedValue> v;
            for (std::size_t i = 0; i < ds.size(); ++i) v.push_back({4 * s.offset(ds.point(i)), ds.weight(i)});
            DoublingParams q = p;
            q.ell = 0.05;
            q.beta = 4.0;
            mismatches += !(check_uniform_dc_deltax(v, q) == dgtest::naive_uniform_deltax(v, q));
            mismatches += !(check_nonuniform_dc_deltax(v, q) == dgtest::naive_nonuniform_deltax(v, q));
        }
    }
    const double dt = seconds_since(t0);
    return {mismatches == 0 && dt < 30.0,
            fmt::format("50 datasets, {} comparisons, {} mismatches, {:.1f} s", comparisons, mismatches, dt)};
}

// ---- 7: propagation --------------------------------------------------------

LabeledDataset square_cloud(std::size_t n, std::uint64_t seed, bool on_axis) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> pts;
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = u(rng), y = u(rng);
        pts.push_back(on_axis && i % 10 == 0 ? 0.0 : x);
        pts.push_back(y);
        labels.push_back(static_cast<int>(i % 2));
    }
    return LabeledDataset(2, 2, pts, labels);
}

Outcome propagation_harness(const fs::path& out) {
    const DoublingParams p{2.0, 0.5, 0.2, 0.02, 0.5, 0.0};
    const SlabSampler sampler{500, CenterPolicy::OnDataPoint, 3};
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1, 1), outer(0.5, 2.0), middle(3.0, 4.0);
    std::ofstream csv(out / "propagation.csv");
    csv << "case,n_premise,n_conclusion,counterexamples,sigma_prime\n";
    std::size_t cx = 0, vacuous = 0, cases = 0;
    bool sigma_ok = true, gap_ok = true;
    auto run = [&](const std::string& name, const LabeledDataset& ds, const MapSpec& map) {
        const auto pc = predict_constants(map, ds, p);
        const auto v = verify_propagation(ds, map, p, sampler, pc);
        v.write_counterexamples_csv(out / fmt::format("counterexamples_{}.csv", name));
        csv << fmt::format("{},{},{},{},{:.17g}\n", name, v.n_premise, v.n_conclusion, v.counterexamples.size(),
                           pc.sigma);
        cx += v.counterexamples.size();
        vacuous += v.n_premise == 0;
        ++cases;
        return pc;
    };
    for (int t = 0; t < 10; ++t) {
        Eigen::MatrixXd M(2, 2);
        do M << u(rng), u(rng), u(rng), u(rng);
        while (std::abs(M.determinant()) < 0.1);
        run(fmt::format("linear{}", t), square_cloud(2500, 100 + t, false), LinearMap{M});
    }
    sigma_ok = sigma_ok && run("abs_off_axes", square_cloud(2500, 200, false), AbsMap{}).sigma == p.sigma;
    sigma_ok = sigma_ok && run("abs_on_axes", square_cloud(2500, 201, true), AbsMap{}).sigma == p.sigma / 2;
    for (int t = 0; t < 5; ++t) {
        const Piecewise1D g({-0.4, 0.4}, {outer(rng), middle(rng), outer(rng)}, u(rng));
        gap_ok = gap_ok && g.critical_gap() > 2 * p.kappa * p.beta;
        run(fmt::format("piecewise{}", t), square_cloud(2500, 300 + t, false),
            PiecewiseMap{g, static_cast<std::size_t>(t % 2)});
    }
    return {cx == 0 && vacuous == 0 && sigma_ok && gap_ok,
            fmt::format("{} maps x 500 slabs, {} counterexamples, {} vacuous cases, sigma' rule {}, gaps {}", cases,
                        cx, vacuous, sigma_ok ? "ok" : "wrong", gap_ok ? "ok" : "too small")};
}

// ---- 8: desk-scale trend ---------------------------------------------------

Outcome desk_trend(const fs::path& out) {
    const auto t0 = Clock::now();
    int nonpositive = 0;
    std::string values;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto cfg = ExperimentConfig::preset_named("desk");
        cfg.seed = seed;
        const auto r = run_pipeline(cfg);
        const fs::path dir = out / fmt::format("desk_seed{}", seed);
        fs::create_directories(dir);
        write_pipeline_outputs(r, dir);
        nonpositive += r.spearman && *r.spearman <= 0;
        values += r.spearman ? fmt::format(" {:.3f}", *r.spearman) : " undefined";
    }
    const double dt = seconds_since(t0);
    return {nonpositive >= 4 && dt < 900,
            fmt::format("Spearman per seed:{}; {} of 5 <= 0; {:.0f} s", values, nonpositive, dt)};
}

// ---- 9: instability fixture ------------------------------------------------

Outcome instability_demo(const fs::path& out) {
    auto fx = make_instability_fixture();
    const auto trace = train(fx.model, fx.data, fx.options);
    trace.write_csv(out / "instability_trace.csv");
    const auto w = find_instability_window(trace, 10);
    if (!w) return {false, "no window of >= 10 epochs with decreasing loss"};
    return {w->accuracy_drop >= 0.05,
            fmt::format("loss decreasing over epochs {}-{}, accuracy drop {:.4f}", w->first, w->last,
                        w->accuracy_drop)};
}

// ---- 10: determinism -------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome compare_csv_trees(const fs::path& a, const fs::path& b) {
    std::size_t files = 0, differing = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
        ++files;
        const fs::path other = b / fs::relative(e.path(), a);
        if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
            ++differing;
            fmt::print(stderr, "differs: {}\n", fs::relative(e.path(), a).string());
        }
    }
    return {files > 0 && differing == 0,
            fmt::format("{} CSV files compared between DG_THREADS=1 and DG_THREADS=4, {} differ", files, differing)};
}

struct Criterion {
    const char* name;
    std::function<Outcome(const fs::path&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "dgstab_acceptance";
    const std::vector<Criterion> criteria{
        {"AC1 C2 reproduction", c2_reproduction},         {"AC2 C3 reproduction", c3_reproduction},
        {"AC3 softmax-base sweep", base_sweep},           {"AC4 loss/accuracy inequalities", inequality_suite},
        {"AC5 gradient correctness", gradient_check},     {"AC6 oracle equivalence", oracle_equivalence},
        {"AC7 propagation harness", propagation_harness}, {"AC8 desk-scale trend", desk_trend},
        {"AC9 instability demo", instability_demo},
    };

    bool all = true;
    for (const char* threads : {"1", "4"}) {
        setenv("DG_THREADS", threads, 1);
        const fs::path dir = root / fmt::format("threads{}", threads);
        fs::remove_all(dir);
        fs::create_directories(dir);
        for (const auto& c : criteria) {
            Outcome o;
            try {
                o = c.run(dir);
            } catch (const std::exception& e) {
                o = {false, std::string("exception: ") + e.what()};
            }
            if (std::string(threads) == "1") {
                fmt::print("{} {}: {}\n", o.pass ? "PASS" : "FAIL", c.name, o.detail);
                std::fflush(stdout);
                all = all && o.pass;
            }
        }
    }
    const auto det = compare_csv_trees(root / "threads1", root / "threads4");
    fmt::print("{} AC10 determinism: {}\n", det.pass ? "PASS" : "FAIL", det.detail);
    all = all && det.pass;
    return all ? 0 : 1;
}
