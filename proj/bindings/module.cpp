#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dgstab/constants.hpp"
#include "dgstab/dataset.hpp"
#include "dgstab/doubling.hpp"
#include "dgstab/errors.hpp"
#include "dgstab/experiment.hpp"
#include "dgstab/network.hpp"
#include "dgstab/propagation.hpp"

namespace py = pybind11;
using namespace dgstab;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

LabeledDataset make_dataset(py::array_t<double, py::array::c_style | py::array::forcecast> points,
                            std::vector<int> labels, std::optional<std::size_t> num_classes,
                            std::vector<double> weights) {
    if (points.ndim() != 2) throw ValidationError("points must be a 2-D array (n, dim)");
    const auto n = static_cast<std::size_t>(points.shape(0));
    const auto dim = static_cast<std::size_t>(points.shape(1));
    std::vector<double> flat(points.data(), points.data() + n * dim);
    std::size_t k = num_classes.value_or(0);
    if (!num_classes) {
        for (int l : labels) k = std::max<std::size_t>(k, static_cast<std::size_t>(std::max(l, 0)) + 1);
        k = std::max<std::size_t>(k, 2);
    }
    return LabeledDataset(dim, k, std::move(flat), std::move(labels), std::move(weights));
}

py::array_t<double> points_array(const LabeledDataset& ds) {
    py::array_t<double> out({ds.size(), ds.dim()});
    std::copy(ds.coordinates().begin(), ds.coordinates().end(), out.mutable_data());
    return out;
}

CenterPolicy parse_center(const std::string& s) {
    if (s == "data") return CenterPolicy::OnDataPoint;
    if (s == "bbox") return CenterPolicy::UniformInBoundingBox;
    throw ValidationError("center must be 'data' or 'bbox'");
}

Optimizer make_optimizer(const std::string& name, double lr) {
    if (name == "adam") return Adam{lr};
    if (name == "sgd") return Sgd{lr};
    throw ValidationError("optimizer must be 'adam' or 'sgd'");
}

}  // namespace

PYBIND11_MODULE(_dgstab, m) {
    m.doc() = "Doubling-condition measurements and stability constants for small classifiers";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

    py::class_<DoublingParams>(m, "DoublingParams")
        .def(py::init([](double kappa, double sigma, double delta, double ell, double beta, double m0) {
                 DoublingParams p{kappa, sigma, delta, ell, beta, m0};
                 p.validate();
                 return p;
             }),
             py::arg("kappa") = 2.0, py::arg("sigma") = 0.9, py::arg("delta") = 1.0, py::arg("ell") = 0.001,
             py::arg("beta") = 1.0, py::arg("m0") = 0.0)
        .def_readwrite("kappa", &DoublingParams::kappa)
        .def_readwrite("sigma", &DoublingParams::sigma)
        .def_readwrite("delta", &DoublingParams::delta)
        .def_readwrite("ell", &DoublingParams::ell)
        .def_readwrite("beta", &DoublingParams::beta)
        .def_readwrite("m0", &DoublingParams::m0);

    py::class_<LabeledDataset>(m, "LabeledDataset")
        .def(py::init(&make_dataset), py::arg("points"), py::arg("labels"), py::arg("num_classes") = py::none(),
             py::arg("weights") = std::vector<double>{})
        .def("__len__", &LabeledDataset::size)
        .def_property_readonly("dim", &LabeledDataset::dim)
        .def_property_readonly("num_classes", &LabeledDataset::num_classes)
        .def_property_readonly("points", &points_array)
        .def_property_readonly("labels", &LabeledDataset::labels)
        .def_property_readonly("weights", &LabeledDataset::weights)
        .def_property_readonly("was_renormalized", &LabeledDataset::was_renormalized)
        .def("save_csv", [](const LabeledDataset& ds, const std::filesystem::path& p) { save_csv(ds, p); });

    m.def("load_csv", [](const std::filesystem::path& p) { return load_csv(p); }, py::arg("path"));

    m.def(
        "generate_poly_boundary",
        [](int degree, std::size_t n, double x_min, double x_max, double shift, double noise, std::uint64_t seed) {
            PolyBoundarySpec s{degree, n, x_min, x_max, shift, noise, seed};
            return generate_poly_boundary(s).dataset;
        },
        py::arg("degree") = 6, py::arg("n") = 1000, py::arg("x_min") = -1.0, py::arg("x_max") = 1.0,
        py::arg("shift") = 0.2, py::arg("noise") = 0.1, py::arg("seed") = 0);

    m.def(
        "sudc_scan",
        [](const LabeledDataset& ds, const DoublingParams& p, std::size_t n_slabs, std::uint64_t seed,
           const std::string& center, const std::string& mode, int max_steps, unsigned threads) {
            if (mode != "points" && mode != "mass") throw ValidationError("mode must be 'points' or 'mass'");
            const SlabSampler sampler{n_slabs, parse_center(center), seed};
            SudcOptions o;
            o.mode = mode == "mass" ? CountMode::Mass : CountMode::Points;
            o.max_steps = max_steps;
            o.threads = threads;
            const auto rep = sudc_scan(ds, sampler, p, o);
            py::dict d = to_python(rep.to_json());
            std::vector<int> steps;
            std::vector<double> widths;
            for (const auto& s : rep.per_slab) {
                steps.push_back(s.steps);
                widths.push_back(s.final_width);
            }
            d["steps"] = steps;
            d["final_width"] = widths;
            return d;
        },
        py::arg("dataset"), py::arg("params") = DoublingParams{}, py::arg("n_slabs") = 1000, py::arg("seed") = 0,
        py::arg("center") = "data", py::arg("mode") = "points", py::arg("max_steps") = 64, py::arg("threads") = 0);

    m.def(
        "c3",
        [](double eta, double K, double kappa, double sigma, double ell, double xi, double delta0, double base) {
            return c3(C3Inputs{eta, K, kappa, sigma, ell, xi, delta0, base});
        },
        py::arg("eta") = 18.0, py::arg("K") = 2.0, py::arg("kappa") = 2.0, py::arg("sigma") = 0.9,
        py::arg("ell") = 0.7, py::arg("xi") = 0.7, py::arg("delta0") = 0.2, py::arg("base") = std::numbers::e);

    m.def(
        "c2",
        [](double eta, double K, double kappa, double sigma, double ell, double delta0, double d_min, double d_max,
           double base, std::optional<double> xi_lo, std::optional<double> xi_hi) {
            C2Inputs in;
            in.eta = eta;
            in.K = K;
            in.kappa = kappa;
            in.sigma = sigma;
            in.ell = ell;
            in.delta0 = delta0;
            in.d_min = d_min;
            in.d_max = d_max;
            in.base = base;
            in.xi_lo = xi_lo;
            in.xi_hi = xi_hi;
            const auto r = c2(in);
            return py::make_tuple(r.value, r.xi_star);
        },
        py::arg("eta") = 18.0, py::arg("K") = 2.0, py::arg("kappa") = 2.0, py::arg("sigma") = 0.9,
        py::arg("ell") = 0.001, py::arg("delta0") = 0.2, py::arg("d_min") = 0.01, py::arg("d_max") = 800.0,
        py::arg("base") = std::numbers::e, py::arg("xi_lo") = py::none(), py::arg("xi_hi") = py::none(),
        "Returns (C2, maximising xi).");

    m.def("c1", &c1, py::arg("eta"), py::arg("K"), py::arg("kappa"), py::arg("sigma"), py::arg("gamma"));
    m.def("acc_bound_from_loss", &acc_bound_from_loss, py::arg("loss"));

    m.def(
        "check_preconditions",
        [](const std::string& theorem, py::dict inputs) {
            TheoremInputs in;
            auto take = [&](const char* key, std::optional<double>& field) {
                if (inputs.contains(key)) field = inputs[key].cast<double>();
            };
            take("eta", in.eta), take("xi", in.xi), take("delta0", in.delta0), take("delta", in.delta);
            take("beta", in.beta), take("ell", in.ell), take("d_min", in.d_min), take("d_max", in.d_max);
            take("kappa", in.kappa), take("sigma", in.sigma), take("K", in.K), take("base", in.base);
            take("gamma", in.gamma), take("epsilon", in.epsilon), take("m0", in.m0);
            take("good_mass", in.good_mass), take("min_delta", in.min_delta);
            return to_python(check_theorem_preconditions(theorem_from_string(theorem), in).to_json());
        },
        py::arg("theorem"), py::arg("inputs"));

    py::class_<MlpModel>(m, "MlpModel")
        .def_static(
            "random",
            [](const std::vector<std::size_t>& dims, const std::string& activation, std::uint64_t seed, double base) {
                return MlpModel::random(dims, parse_activation(activation), seed, base);
            },
            py::arg("dims"), py::arg("activation") = "abs", py::arg("seed") = 0, py::arg("base") = std::numbers::e)
        .def_property_readonly("dims", &MlpModel::dims)
        .def_property_readonly("softmax_base", &MlpModel::softmax_base)
        .def("parameters", &MlpModel::parameters)
        .def("set_parameters", [](MlpModel& mm, const std::vector<double>& t) { mm.set_parameters(t); })
        .def("forward", [](const MlpModel& mm, const std::vector<double>& x) { return forward(mm, x); })
        .def("save", [](const MlpModel& mm, const std::filesystem::path& p) { save_checkpoint(mm, p); });

    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
    m.def("cross_entropy", &cross_entropy, py::arg("model"), py::arg("dataset"));
    m.def(
        "loss_and_gradient",
        [](const MlpModel& mm, const LabeledDataset& ds) {
            const auto g = loss_and_gradient(mm, ds);
            return py::make_tuple(g.loss, g.gradient);
        },
        py::arg("model"), py::arg("dataset"));
    m.def(
        "delta_x",
        [](const MlpModel& mm, const LabeledDataset& ds) {
            std::vector<double> out;
            for (const auto& e : delta_x(mm, ds).entries) out.push_back(e.delta);
            return py::array_t<double>(static_cast<py::ssize_t>(out.size()), out.data());
        },
        py::arg("model"), py::arg("dataset"));
    m.def(
        "train",
        [](MlpModel& mm, const LabeledDataset& ds, std::size_t epochs, const std::string& optimizer, double lr,
           std::size_t batch_size, std::uint64_t seed) {
            TrainOptions o;
            o.epochs = epochs;
            o.optimizer = make_optimizer(optimizer, lr);
            o.batch_size = batch_size;
            o.seed = seed;
            py::list rows;
            for (const auto& e : train(mm, ds, o).epochs) rows.append(py::make_tuple(e.epoch, e.loss, e.accuracy));
            return rows;
        },
        py::arg("model"), py::arg("dataset"), py::arg("epochs") = 1, py::arg("optimizer") = "adam",
        py::arg("lr") = 1e-3, py::arg("batch_size") = 0, py::arg("seed") = 0,
        "Trains in place; returns [(epoch, loss, accuracy), ...] starting at epoch 0.");
    m.def(
        "singular_spectrum",
        [](const MlpModel& mm) {
            const auto s = singular_spectrum(mm);
            py::dict d;
            d["d_min"] = s.d_min;
            d["d_max"] = s.d_max;
            d["singular_values"] = s.singular_values;
            d["rank"] = s.rank;
            return d;
        },
        py::arg("model"));

    m.def(
        "verify_propagation",
        [](const LabeledDataset& ds, const std::string& kind, std::optional<Eigen::MatrixXd> matrix,
           const DoublingParams& p, std::size_t n_slabs, std::uint64_t seed, unsigned threads) {
            MapSpec map = AbsMap{};
            if (kind == "linear") {
                if (!matrix) throw ValidationError("a linear map needs a matrix");
                map = LinearMap{*matrix};
            } else if (kind != "abs") {
                throw ValidationError("map must be 'linear' or 'abs'");
            }
            const SlabSampler sampler{n_slabs, CenterPolicy::OnDataPoint, seed};
            const auto v = verify_propagation(ds, map, p, sampler, predict_constants(map, ds, p), threads);
            return to_python(v.to_json());
        },
        py::arg("dataset"), py::arg("map"), py::arg("matrix") = py::none(), py::arg("params") = DoublingParams{},
        py::arg("n_slabs") = 500, py::arg("seed") = 0, py::arg("threads") = 0);
}
