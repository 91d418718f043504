#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "dgstab/constants.hpp"
#include "dgstab/dataset.hpp"
#include "dgstab/doubling.hpp"
#include "dgstab/errors.hpp"
#include "dgstab/experiment.hpp"
#include "dgstab/network.hpp"
#include "dgstab/propagation.hpp"
#include "dgstab/report.hpp"

namespace fs = std::filesystem;
using namespace dgstab;
using nlohmann::json;

namespace {

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    for (std::string cell; std::getline(ss, cell, ',');) {
        if (cell.empty()) continue;
        try {
            out.push_back(std::stod(cell));
        } catch (const std::logic_error&) {
            throw ValidationError("not a number in list: '" + cell + "'");
        }
    }
    return out;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_deltax_csv(const DeltaXVector& dx, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "index,delta_x,weight,label,predicted\n";
    for (std::size_t i = 0; i < dx.entries.size(); ++i) {
        const auto& e = dx.entries[i];
        out << fmt::format("{},{:.17g},{:.17g},{},{}\n", i, e.delta, e.weight, e.label, e.predicted);
    }
}

struct DoublingFlags {
    DoublingParams p;

    void attach(CLI::App* app, bool with_m0 = false) {
        app->add_option("--kappa", p.kappa, "doubling constant")->capture_default_str();
        app->add_option("--sigma", p.sigma, "growth factor")->capture_default_str();
        app->add_option("--delta", p.delta, "mass cap")->capture_default_str();
        app->add_option("--ell", p.ell, "smallest checked width")->capture_default_str();
        app->add_option("--beta", p.beta, "largest checked width")->capture_default_str();
        if (with_m0) app->add_option("--m0", p.m0, "residual mass")->capture_default_str();
    }

    json to_json() const {
        return {{"kappa", p.kappa}, {"sigma", p.sigma}, {"delta", p.delta},
                {"ell", p.ell},     {"beta", p.beta},   {"m0", p.m0}};
    }
};

CenterPolicy parse_center(const std::string& s) {
    if (s == "data") return CenterPolicy::OnDataPoint;
    if (s == "bbox") return CenterPolicy::UniformInBoundingBox;
    throw ValidationError("center policy must be data or bbox");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Doubling conditions, stability constants and loss/accuracy experiments"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI/TOML file; [section] names select the subcommand");
    std::string out_dir = "dgstab-out";

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate polynomial decision-boundary data");
    PolyBoundarySpec gspec;
    gen->add_option("--degree", gspec.degree)->capture_default_str();
    gen->add_option("--n", gspec.n_samples, "number of samples")->capture_default_str();
    gen->add_option("--seed", gspec.seed)->capture_default_str();
    gen->add_option("--x-min", gspec.x_min)->capture_default_str();
    gen->add_option("--x-max", gspec.x_max)->capture_default_str();
    gen->add_option("--shift", gspec.vertical_shift)->capture_default_str();
    gen->add_option("--noise", gspec.noise_std, "Gaussian noise std on y")->capture_default_str();
    gen->add_option("--out", out_dir)->capture_default_str();

    // train
    auto* tr = app.add_subcommand("train", "Train an MLP on a dataset CSV");
    std::string data_path, preset = "small", act_name = "leaky_relu", opt_name = "adam", layers_str, fixture;
    double lr = 1e-3, base = std::numbers::e;
    std::size_t epochs = 10, batch = 0;
    std::uint64_t seed = 0;
    bool record_dx = false, linear_output = false;
    tr->add_option("--data", data_path, "dataset CSV");
    tr->add_option("--preset", preset, "small (2x32) or paper (4x1000)")->capture_default_str();
    tr->add_option("--layers", layers_str, "hidden widths, e.g. 64,64 (overrides --preset)");
    tr->add_option("--activation", act_name, "abs | relu | leaky_relu[:slope]")->capture_default_str();
    tr->add_option("--optimizer", opt_name, "adam | sgd")->capture_default_str();
    tr->add_option("--lr", lr)->capture_default_str();
    tr->add_option("--batch", batch, "mini-batch size, 0 = full batch")->capture_default_str();
    tr->add_option("--epochs", epochs)->capture_default_str();
    tr->add_option("--seed", seed)->capture_default_str();
    tr->add_option("--base", base, "softmax base b > 1")->capture_default_str();
    tr->add_flag("--linear-output", linear_output, "do not apply the activation to the output layer");
    tr->add_flag("--record-deltax", record_dx, "write the confidence vector of every epoch");
    tr->add_option("--fixture", fixture, "built-in scenario instead of --data: instability");
    tr->add_option("--out", out_dir)->capture_default_str();

    // sudc
    auto* su = app.add_subcommand("sudc", "Simplified uniform doubling scan and beta-bar");
    DoublingFlags sflags;
    std::size_t n_slabs = 2000;
    std::string center = "data", mode = "points";
    int max_steps = 64;
    unsigned threads = 0;
    su->add_option("--data", data_path)->required();
    sflags.attach(su);
    su->add_option("--slabs", n_slabs)->capture_default_str();
    su->add_option("--seed", seed)->capture_default_str();
    su->add_option("--center", center, "data | bbox")->capture_default_str();
    su->add_option("--mode", mode, "points | mass")->capture_default_str();
    su->add_option("--max-steps", max_steps)->capture_default_str();
    su->add_option("--threads", threads, "0 = DG_THREADS or hardware default")->capture_default_str();
    su->add_option("--out", out_dir)->capture_default_str();

    // deltax
    auto* dxc = app.add_subcommand("deltax", "Classification confidences and their doubling conditions");
    std::string model_path;
    DoublingFlags dflags;
    dflags.p.ell = 0.7;
    dflags.p.delta = 0.2;
    dflags.p.beta = 40.0;
    std::vector<double> etas{0.0};
    dxc->add_option("--model", model_path)->required();
    dxc->add_option("--data", data_path)->required();
    dflags.attach(dxc, true);
    dxc->add_option("--eta", etas, "margins for the good/bad sets")->capture_default_str();
    dxc->add_option("--out", out_dir)->capture_default_str();

    // constants
    auto* co = app.add_subcommand("constants", "Stability constants and bounds");
    co->require_subcommand(1);
    double eta = 18, K = 2, kappa = 2, sigma = 0.9, ell = 0.001, xi = 0.7, delta0 = 0.2, dmin = 0.01, dmax = 800,
           gamma = 1.0, c3_ell = 0.7;
    std::optional<double> xi_lo, xi_hi, beta_opt;
    std::string sweep_base, tail = "default", p_rule = "log-kappa";
    std::optional<std::string> co_out;
    auto add_common = [&](CLI::App* a) {
        a->add_option("--eta", eta)->capture_default_str();
        a->add_option("--K", K)->capture_default_str();
        a->add_option("--kappa", kappa)->capture_default_str();
        a->add_option("--sigma", sigma)->capture_default_str();
        a->add_option("--out", co_out, "directory for a JSON report");
    };
    auto* cc1 = co->add_subcommand("c1", "Constant of the non-uniform delta-X theorem");
    add_common(cc1);
    cc1->add_option("--gamma", gamma)->capture_default_str();
    auto* cc2 = co->add_subcommand("c2", "Constant of the training-set uniform theorem");
    add_common(cc2);
    cc2->add_option("--ell", ell)->capture_default_str();
    cc2->add_option("--delta0", delta0)->capture_default_str();
    cc2->add_option("--dmin", dmin)->capture_default_str();
    cc2->add_option("--dmax", dmax)->capture_default_str();
    cc2->add_option("--xi-lo", xi_lo);
    cc2->add_option("--xi-hi", xi_hi);
    cc2->add_option("--beta", beta_opt, "report d_min*beta/2 >= eta");
    cc2->add_option("--base", base)->capture_default_str();
    cc2->add_option("--sweep-base", sweep_base, "comma-separated bases; writes sweep.csv under --out");
    cc2->add_option("--tail", tail, "xi (default) | ell")->capture_default_str();
    cc2->add_option("--p-rule", p_rule, "log-kappa | kappa")->capture_default_str();
    auto* cc3 = co->add_subcommand("c3", "Constant of the delta-X uniform proposition");
    add_common(cc3);
    cc3->add_option("--ell", c3_ell)->capture_default_str();
    cc3->add_option("--xi", xi)->capture_default_str();
    cc3->add_option("--delta0", delta0)->capture_default_str();
    cc3->add_option("--base", base)->capture_default_str();
    cc3->add_option("--sweep-base", sweep_base, "comma-separated bases; writes sweep.csv under --out");
    cc3->add_option("--tail", tail, "ell (default) | xi")->capture_default_str();
    cc3->add_option("--p-rule", p_rule, "log-kappa | kappa")->capture_default_str();
    auto* cb = co->add_subcommand("bounds", "Accuracy bounds and propagated constants");
    std::optional<double> loss, epsilon, eta_star, m0, bell, bbeta, bdmin, bdmax;
    std::string widths;
    cb->add_option("--loss", loss, "accuracy bound 1 - loss/ln 2");
    cb->add_option("--epsilon", epsilon);
    cb->add_option("--eta-star", eta_star, "with --epsilon: good-set tail bound");
    cb->add_option("--widths", widths, "layer widths for the non-uniform propagated constants");
    cb->add_option("--K", K)->capture_default_str();
    cb->add_option("--m0", m0);
    cb->add_option("--sigma", sigma)->capture_default_str();
    cb->add_option("--kappa", kappa)->capture_default_str();
    cb->add_option("--ell", bell);
    cb->add_option("--beta", bbeta);
    cb->add_option("--dmin", bdmin);
    cb->add_option("--dmax", bdmax);
    cb->add_option("--out", co_out, "directory for a JSON report");
    auto* cp = co->add_subcommand("preconditions", "Check the premises of a stability theorem");
    std::string theorem = "data-uniform";
    TheoremInputs ti;
    cp->add_option("--theorem", theorem, "data-uniform | deltax-uniform | deltax-dc")->capture_default_str();
    cp->add_option("--eta", ti.eta);
    cp->add_option("--xi", ti.xi);
    cp->add_option("--delta0", ti.delta0);
    cp->add_option("--delta", ti.delta);
    cp->add_option("--beta", ti.beta);
    cp->add_option("--ell", ti.ell);
    cp->add_option("--dmin", ti.d_min);
    cp->add_option("--dmax", ti.d_max);
    cp->add_option("--kappa", ti.kappa);
    cp->add_option("--sigma", ti.sigma);
    cp->add_option("--K", ti.K);
    cp->add_option("--base", ti.base);
    cp->add_option("--gamma", ti.gamma);
    cp->add_option("--epsilon", ti.epsilon);
    cp->add_option("--m0", ti.m0);
    cp->add_option("--good-mass", ti.good_mass, "mu(G_eta) at t0");
    cp->add_option("--min-delta", ti.min_delta, "smallest delta X at t0");
    cp->add_option("--out", co_out, "directory for a JSON report");

    // propagate
    auto* pr = app.add_subcommand("propagate", "Check how doubling behaviour transforms under a map");
    std::string map_kind = "linear", matrix_str = "2,0,0,2", breaks_str, slopes_str;
    double anchor = 0.0;
    std::size_t coordinate = 0;
    DoublingFlags pflags;
    pflags.p.ell = 0.05;
    pflags.p.beta = 2.0;
    pflags.p.delta = 0.3;
    pflags.p.sigma = 0.5;
    n_slabs = 500;
    pr->add_option("--data", data_path)->required();
    pr->add_option("--map", map_kind, "linear | abs | piecewise")->capture_default_str();
    pr->add_option("--matrix", matrix_str, "row-major entries of a square matrix")->capture_default_str();
    pr->add_option("--breakpoints", breaks_str);
    pr->add_option("--slopes", slopes_str);
    pr->add_option("--anchor", anchor, "value at the first breakpoint")->capture_default_str();
    pr->add_option("--coord", coordinate)->capture_default_str();
    pflags.attach(pr);
    pr->add_option("--slabs", n_slabs)->capture_default_str();
    pr->add_option("--seed", seed)->capture_default_str();
    pr->add_option("--out", out_dir)->capture_default_str();

    // pipeline
    auto* pl = app.add_subcommand("pipeline", "Loss vs beta-bar experiment over many datasets");
    std::string pl_preset = "desk";
    std::optional<std::size_t> o_datasets, o_nmin, o_nmax, o_epochs, o_slabs, o_batch;
    std::optional<std::string> o_net, o_act, o_opt;
    std::optional<double> o_lr, o_kappa, o_sigma, o_ell;
    std::optional<std::uint64_t> o_seed;
    std::optional<unsigned> o_threads;
    pl->add_option("--preset", pl_preset, "desk | paper-ex-3.2")->capture_default_str();
    pl->add_option("--datasets", o_datasets);
    pl->add_option("--n-min", o_nmin);
    pl->add_option("--n-max", o_nmax);
    pl->add_option("--epochs", o_epochs);
    pl->add_option("--slabs", o_slabs);
    pl->add_option("--batch", o_batch);
    pl->add_option("--net", o_net, "small | paper");
    pl->add_option("--activation", o_act);
    pl->add_option("--optimizer", o_opt);
    pl->add_option("--lr", o_lr);
    pl->add_option("--kappa", o_kappa);
    pl->add_option("--sigma", o_sigma);
    pl->add_option("--ell", o_ell);
    pl->add_option("--seed", o_seed);
    pl->add_option("--threads", o_threads);
    pl->add_option("--out", out_dir)->capture_default_str();

    // report
    auto* rp = app.add_subcommand("report", "Re-plot pipeline results");
    std::string results_path;
    rp->add_option("--results", results_path, "results.csv from a pipeline run")->required();
    rp->add_option("--out", out_dir)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            const auto data = generate_poly_boundary(gspec);
            fs::create_directories(out_dir);
            const fs::path csv = fs::path(out_dir) / "data.csv";
            save_csv(data.dataset, csv);
            const fs::path poly = fs::path(out_dir) / "boundary.json";
            write_json(poly, {{"coefficients", data.boundary.coefficients},
                              {"offset", data.boundary.offset},
                              {"scale", data.boundary.scale},
                              {"noise", "gaussian"}});
            Manifest m("gen-data", {{"degree", gspec.degree},
                                    {"n", gspec.n_samples},
                                    {"seed", gspec.seed},
                                    {"x_range", {gspec.x_min, gspec.x_max}},
                                    {"shift", gspec.vertical_shift},
                                    {"noise_std", gspec.noise_std}});
            m.add(csv);
            m.add(poly);
            m.write(out_dir);
            fmt::print("wrote {} points to {}\n", data.dataset.size(), csv.string());
        } else if (tr->parsed()) {
            std::optional<MlpModel> model;
            std::optional<LabeledDataset> ds;
            TrainOptions opts;
            json cfg;
            if (!fixture.empty()) {
                if (fixture != "instability") throw ValidationError("unknown fixture '" + fixture + "'");
                auto fx = make_instability_fixture(seed == 0 ? 11 : seed);
                ds = std::move(fx.data);
                model = std::move(fx.model);
                opts = fx.options;
                if (tr->count("--epochs")) opts.epochs = epochs;
                cfg = {{"fixture", fixture}, {"seed", seed == 0 ? 11 : seed}, {"epochs", opts.epochs}};
            } else {
                if (data_path.empty()) throw ValidationError("train needs --data or --fixture");
                std::vector<std::string> warnings;
                ds = load_csv(data_path, &warnings);
                for (const auto& w : warnings) fmt::print(stderr, "warning: {}\n", w);
                std::vector<std::size_t> dims;
                if (!layers_str.empty()) {
                    dims.push_back(ds->dim());
                    for (double w : parse_list(layers_str)) {
                        if (w < 1 || w != std::floor(w)) throw ValidationError("layer widths must be positive integers");
                        dims.push_back(static_cast<std::size_t>(w));
                    }
                    dims.push_back(ds->num_classes());
                } else {
                    dims = preset_dims(preset, ds->dim(), ds->num_classes());
                }
                model = MlpModel::random(dims, parse_activation(act_name), seed, base, !linear_output);
                opts.epochs = epochs;
                opts.seed = seed;
                opts.batch_size = batch;
                if (opt_name == "sgd") {
                    opts.optimizer = Sgd{lr};
                } else if (opt_name == "adam") {
                    opts.optimizer = Adam{lr};
                } else {
                    throw ValidationError("optimizer must be adam or sgd");
                }
                cfg = {{"data", data_path}, {"dims", dims},     {"activation", act_name}, {"optimizer", opt_name},
                       {"lr", lr},          {"batch", batch},   {"epochs", epochs},       {"seed", seed},
                       {"base", base},      {"linear_output", linear_output}};
            }
            opts.record_delta_x = record_dx;
            const TrainTrace trace = train(*model, *ds, opts);
            fs::create_directories(out_dir);
            Manifest m("train", cfg);
            const fs::path tpath = fs::path(out_dir) / "trace.csv";
            trace.write_csv(tpath);
            m.add(tpath);
            const fs::path ck = fs::path(out_dir) / "model.ckpt";
            save_checkpoint(*model, ck);
            m.add(ck);
            const fs::path dpath = fs::path(out_dir) / "deltax.csv";
            write_deltax_csv(delta_x(*model, *ds), dpath);
            m.add(dpath);
            if (record_dx) {
                const fs::path dir = fs::path(out_dir) / "deltax_epochs";
                fs::create_directories(dir);
                for (const auto& e : trace.epochs) {
                    const fs::path p = dir / fmt::format("epoch_{:05}.csv", e.epoch);
                    write_deltax_csv(*e.delta_x, p);
                    m.add(p);
                }
            }
            if (auto w = find_instability_window(trace, 10)) {
                fmt::print("longest loss-decreasing window with accuracy change: epochs {}-{}, accuracy drop {:.4f}\n",
                           w->first, w->last, w->accuracy_drop);
            }
            m.write(out_dir);
            fmt::print("final loss {:.6g}, accuracy {:.4f}\n", trace.epochs.back().loss, trace.epochs.back().accuracy);
        } else if (su->parsed()) {
            const LabeledDataset ds = load_csv(data_path);
            SlabSampler sampler{n_slabs, parse_center(center), seed};
            SudcOptions so;
            if (mode == "mass") {
                so.mode = CountMode::Mass;
            } else if (mode != "points") {
                throw ValidationError("mode must be points or mass");
            }
            so.max_steps = max_steps;
            so.threads = threads;
            const SudcReport rep = sudc_scan(ds, sampler, sflags.p, so);
            fs::create_directories(out_dir);
            Manifest m("sudc", {{"data", data_path}, {"slabs", n_slabs}, {"seed", seed}, {"center", center},
                                {"mode", mode},      {"max_steps", max_steps}, {"doubling", sflags.to_json()}});
            const fs::path jp = fs::path(out_dir) / "sudc.json";
            const fs::path cp2 = fs::path(out_dir) / "sudc.csv";
            write_json(jp, rep.to_json());
            rep.write_csv(cp2);
            m.add(jp);
            m.add(cp2);
            m.write(out_dir);
            fmt::print("beta_bar {:.6g}  mean_steps {:.4f}  mean_final_mass {:.6g}\n", rep.beta_bar, rep.mean_steps,
                       rep.mean_final_mass);
        } else if (dxc->parsed()) {
            const MlpModel model = load_checkpoint(model_path);
            const LabeledDataset ds = load_csv(data_path);
            const DeltaXVector dx = delta_x(model, ds);
            const auto values = dx.weighted();
            const double L = cross_entropy(model, ds);
            json good = json::array();
            for (double e : etas) {
                const auto gb = good_bad_sets(dx, e);
                good.push_back({{"eta", e}, {"good_mass", gb.good}, {"bad_mass", gb.bad}});
            }
            double min_delta = std::numeric_limits<double>::infinity();
            for (const auto& e : dx.entries) min_delta = std::min(min_delta, e.delta);
            const json report{{"accuracy", accuracy(dx)},
                              {"loss", L},
                              {"acc_bound_from_loss", acc_bound_from_loss(L)},
                              {"min_delta", min_delta},
                              {"good_bad", good},
                              {"uniform_dc", to_json(check_uniform_dc_deltax(values, dflags.p))},
                              {"nonuniform_dc", to_json(check_nonuniform_dc_deltax(values, dflags.p))}};
            fs::create_directories(out_dir);
            Manifest m("deltax", {{"model", model_path}, {"data", data_path}, {"doubling", dflags.to_json()}, {"eta", etas}});
            const fs::path cp2 = fs::path(out_dir) / "deltax.csv";
            const fs::path jp = fs::path(out_dir) / "deltax.json";
            write_deltax_csv(dx, cp2);
            write_json(jp, report);
            m.add(cp2);
            m.add(jp);
            m.write(out_dir);
            std::cout << report.dump(2) << '\n';
        } else if (co->parsed()) {
            json report;
            std::vector<SweepRow> sweep;
            if (cc1->parsed()) {
                const double v = c1(eta, K, kappa, sigma, gamma);
                report = {{"constant", "C1"}, {"value", v}, {"gamma_max", gamma_max(sigma, kappa)}};
                fmt::print("C1 = {:.6g}\n", v);
            } else if (cc2->parsed()) {
                C2Inputs in;
                in.eta = eta, in.K = K, in.kappa = kappa, in.sigma = sigma, in.ell = ell, in.delta0 = delta0;
                in.d_min = dmin, in.d_max = dmax, in.base = base, in.xi_lo = xi_lo, in.xi_hi = xi_hi, in.beta = beta_opt;
                if (tail == "ell") in.tail = TailScale::Ell;
                if (p_rule == "kappa") in.p_rule = PRule::Kappa;
                const C2Result r = c2(in);
                report = {{"constant", "C2"},
                          {"value", r.value},
                          {"xi_star", r.xi_star},
                          {"loss_bound", std::log(2.0) * r.value},
                          {"acc_bound", 1.0 - r.value}};
                if (r.beta_slack) report["dmin_beta_half_minus_eta"] = *r.beta_slack;
                fmt::print("C2 = {:.6g}  (xi* = {:.6g}, loss <= {:.6g}, acc >= {:.6g})\n", r.value, r.xi_star,
                           std::log(2.0) * r.value, 1.0 - r.value);
                for (double b : parse_list(sweep_base)) {
                    in.base = b;
                    sweep.push_back({b, c2(in).value});
                }
            } else if (cc3->parsed()) {
                C3Inputs in{eta, K, kappa, sigma, c3_ell, xi, delta0, base};
                if (tail == "xi") in.tail = TailScale::Xi;
                if (p_rule == "kappa") in.p_rule = PRule::Kappa;
                const double v = c3(in);
                report = {{"constant", "C3"},
                          {"value", v},
                          {"tail_terms", c3_tail_terms(in)},
                          {"loss_bound", std::log(2.0) * v},
                          {"acc_bound", 1.0 - v}};
                fmt::print("C3 = {:.6g}  (loss <= {:.6g}, acc >= {:.6g})\n", v, std::log(2.0) * v, 1.0 - v);
                for (double b : parse_list(sweep_base)) {
                    in.base = b;
                    sweep.push_back({b, c3(in)});
                }
            } else if (cb->parsed()) {
                if (loss) {
                    report["acc_bound_from_loss"] = acc_bound_from_loss(*loss);
                    fmt::print("accuracy >= {:.6g} (from loss {:.6g})\n", acc_bound_from_loss(*loss), *loss);
                }
                if (epsilon && eta_star) {
                    const double t = eta_star_tail_bound(*epsilon, *eta_star);
                    report["eta_star_tail_bound"] = t;
                    fmt::print("mu(G_eta*) >= {:.6g}\n", t);
                }
                if (!widths.empty()) {
                    if (!m0) throw ValidationError("--widths needs --m0");
                    const auto nc = nonuniform_propagated_constants(parse_list(widths), K, *m0, sigma, kappa);
                    report["nonuniform"] = {{"log2_m0", nc.log2_m0}, {"log2_sigma", nc.log2_sigma}, {"kappa", nc.kappa}};
                    fmt::print("m0' = 2^{:.6g}, sigma' = 2^{:.6g}, kappa' = {:.6g}\n", nc.log2_m0, nc.log2_sigma, nc.kappa);
                }
                if (bell || bbeta || bdmin || bdmax) {
                    if (!(bell && bbeta && bdmin && bdmax)) throw ValidationError("--ell, --beta, --dmin, --dmax go together");
                    const auto uc = propagated_uniform_constants(*bell, *bbeta, *bdmin, *bdmax);
                    report["uniform"] = {{"ell_lo", uc.ell_lo}, {"ell_hi", uc.ell_hi}, {"beta", uc.beta}};
                    fmt::print("ell' in [{:.6g}, {:.6g}], beta' = {:.6g}\n", uc.ell_lo, uc.ell_hi, uc.beta);
                }
                if (report.is_null()) throw ValidationError("bounds: nothing to compute; pass --loss, --epsilon/--eta-star, --widths or --ell/--beta/--dmin/--dmax");
            } else if (cp->parsed()) {
                const auto r = check_theorem_preconditions(theorem_from_string(theorem), ti);
                report = r.to_json();
                std::cout << report.dump(2) << '\n';
            }
            if (co_out) {
                fs::create_directories(*co_out);
                Manifest m("constants", report);
                const fs::path jp = fs::path(*co_out) / "constants.json";
                write_json(jp, report);
                m.add(jp);
                if (!sweep.empty()) {
                    const fs::path sp = fs::path(*co_out) / "sweep.csv";
                    write_sweep_csv(sp, "base", sweep);
                    m.add(sp);
                }
                m.write(*co_out);
            }
        } else if (pr->parsed()) {
            const LabeledDataset ds = load_csv(data_path);
            MapSpec map;
            if (map_kind == "linear") {
                const auto v = parse_list(matrix_str);
                const auto n = static_cast<Eigen::Index>(std::lround(std::sqrt(static_cast<double>(v.size()))));
                if (n * n != static_cast<Eigen::Index>(v.size())) throw ValidationError("--matrix needs n*n entries");
                Eigen::MatrixXd M(n, n);
                for (Eigen::Index i = 0; i < n; ++i)
                    for (Eigen::Index j = 0; j < n; ++j) M(i, j) = v[static_cast<std::size_t>(i * n + j)];
                map = LinearMap{M};
            } else if (map_kind == "abs") {
                map = AbsMap{};
            } else if (map_kind == "piecewise") {
                map = PiecewiseMap{Piecewise1D(parse_list(breaks_str), parse_list(slopes_str), anchor), coordinate};
            } else {
                throw ValidationError("map must be linear, abs or piecewise");
            }
            const auto predicted = predict_constants(map, ds, pflags.p);
            const auto verdict = verify_propagation(ds, map, pflags.p, SlabSampler{n_slabs, CenterPolicy::OnDataPoint, seed}, predicted);
            json j = verdict.to_json();
            j["predicted"] = {{"sigma", predicted.sigma}, {"ell_lo", predicted.ell_lo}, {"ell_hi", predicted.ell_hi}, {"beta", predicted.beta}};
            fs::create_directories(out_dir);
            Manifest m("propagate", {{"data", data_path}, {"map", map_kind}, {"matrix", matrix_str}, {"breakpoints", breaks_str},
                                     {"slopes", slopes_str}, {"anchor", anchor}, {"coord", coordinate},
                                     {"doubling", pflags.to_json()}, {"slabs", n_slabs}, {"seed", seed}});
            const fs::path jp = fs::path(out_dir) / "propagation.json";
            const fs::path cp2 = fs::path(out_dir) / "counterexamples.csv";
            write_json(jp, j);
            verdict.write_counterexamples_csv(cp2);
            m.add(jp);
            m.add(cp2);
            m.write(out_dir);
            fmt::print("slabs {}  premise {}  conclusion {}  rate {:.4f}  counterexamples {}\n", verdict.n_slabs,
                       verdict.n_premise, verdict.n_conclusion, verdict.conditional_rate(), verdict.counterexamples.size());
        } else if (pl->parsed()) {
            ExperimentConfig cfg = ExperimentConfig::preset_named(pl_preset);
            if (o_datasets) cfg.n_datasets = *o_datasets;
            if (o_nmin) cfg.n_min = *o_nmin;
            if (o_nmax) cfg.n_max = *o_nmax;
            if (o_epochs) cfg.epochs = *o_epochs;
            if (o_slabs) cfg.n_slabs = *o_slabs;
            if (o_batch) cfg.batch_size = *o_batch;
            if (o_net) cfg.preset = *o_net;
            if (o_act) cfg.activation = *o_act;
            if (o_opt) cfg.optimizer = *o_opt;
            if (o_lr) cfg.lr = *o_lr;
            if (o_kappa) cfg.doubling.kappa = *o_kappa;
            if (o_sigma) cfg.doubling.sigma = *o_sigma;
            if (o_ell) cfg.doubling.ell = *o_ell;
            if (o_seed) cfg.seed = *o_seed;
            if (o_threads) cfg.threads = *o_threads;
            const PipelineResult res = run_pipeline(cfg);
            for (const auto& w : res.warnings) fmt::print(stderr, "warning: {}\n", w);
            Manifest m("pipeline", cfg.to_json());
            for (const auto& p : write_pipeline_outputs(res, out_dir)) m.add(p);
            m.write(out_dir);
            std::cout << res.summary_json().dump(2) << '\n';
        } else if (rp->parsed()) {
            const auto results = load_results_csv(results_path);
            PipelineResult res;
            res.datasets = results;
            std::vector<double> b, l;
            for (const auto& r : results) {
                if (!r.selected) continue;
                b.push_back(r.beta_bar);
                l.push_back(r.loss);
            }
            Manifest m("report", {{"results", results_path}, {"results_sha256", sha256_file(results_path)}});
            for (const auto& p : report_points_vs_beta(results, out_dir)) m.add(p);
            for (const auto& p : write_scatter({"Training loss vs beta-bar (near-mean accuracy)", "beta-bar", "training loss", b, l}, out_dir, "loss_vs_beta")) m.add(p);
            m.write(out_dir);
            const auto s = spearman(b, l);
            fmt::print("selected runs {}  spearman {}\n", b.size(), s ? fmt::format("{:.4f}", *s) : "undefined");
        }
    } catch (const ValidationError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
