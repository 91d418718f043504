#include "dgstab/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "dgstab/dataset.hpp"
#include "dgstab/errors.hpp"
#include "dgstab/numeric.hpp"

namespace dgstab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

}  // namespace

double activate(const Activation& act, double x) {
    return std::visit(overloaded{[x](const AbsoluteValue&) { return std::abs(x); },
                                 [x](const LeakyRelu& a) { return x >= 0.0 ? x : a.slope * x; },
                                 [x](const PiecewiseLinear& p) { return p.g(x); }},
                      act);
}

double activate_derivative(const Activation& act, double x) {
    return std::visit(overloaded{[x](const AbsoluteValue&) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); },
                                 [x](const LeakyRelu& a) { return x >= 0.0 ? 1.0 : a.slope; },
                                 [x](const PiecewiseLinear& p) { return p.g.derivative(x); }},
                      act);
}

std::vector<double> activation_kinks(const Activation& act) {
    return std::visit(overloaded{[](const AbsoluteValue&) { return std::vector<double>{0.0}; },
                                 [](const LeakyRelu&) { return std::vector<double>{0.0}; },
                                 [](const PiecewiseLinear& p) { return p.g.breakpoints(); }},
                      act);
}

nlohmann::json to_json(const Activation& act) {
    return std::visit(overloaded{[](const AbsoluteValue&) { return nlohmann::json{{"kind", "abs"}}; },
                                 [](const LeakyRelu& a) {
                                     return nlohmann::json{{"kind", "leaky_relu"}, {"slope", a.slope}};
                                 },
                                 [](const PiecewiseLinear& p) {
                                     return nlohmann::json{{"kind", "piecewise"},
                                                           {"breakpoints", p.g.breakpoints()},
                                                           {"slopes", p.g.slopes()},
                                                           {"anchor", p.g.anchor()}};
                                 }},
                      act);
}

Activation activation_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "abs") return AbsoluteValue{};
    if (kind == "leaky_relu") return LeakyRelu{j.at("slope").get<double>()};
    if (kind == "piecewise") {
        return PiecewiseLinear{Piecewise1D(j.at("breakpoints").get<std::vector<double>>(),
                                           j.at("slopes").get<std::vector<double>>(), j.at("anchor").get<double>())};
    }
    throw ValidationError("unknown activation kind '" + kind + "'");
}

MlpModel::MlpModel(std::vector<Layer> layers, Activation act, double softmax_base, bool activate_output)
    : layers_(std::move(layers)), act_(std::move(act)), base_(softmax_base), activate_output_(activate_output) {
    if (layers_.empty()) throw ValidationError("model needs at least one layer");
    if (!(base_ > 1.0) || !std::isfinite(base_)) throw ValidationError("softmax base must be > 1");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        const auto& L = layers_[k];
        if (L.W.rows() == 0 || L.W.cols() == 0) throw ValidationError("empty weight matrix");
        if (L.b.size() != L.W.rows()) throw ValidationError(fmt::format("layer {}: bias length mismatch", k));
        if (k > 0 && L.W.cols() != layers_[k - 1].W.rows()) {
            throw ValidationError(fmt::format("layer {} expects {} inputs, previous layer has {} outputs", k,
                                              L.W.cols(), layers_[k - 1].W.rows()));
        }
    }
    if (const auto* a = std::get_if<LeakyRelu>(&act_); a && !(a->slope >= 0.0 && a->slope < 1.0)) {
        throw ValidationError("leaky ReLU slope must lie in [0, 1)");
    }
}

MlpModel MlpModel::random(const std::vector<std::size_t>& dims, Activation act, std::uint64_t seed,
                          double softmax_base, bool activate_output) {
    if (dims.size() < 2) throw ValidationError("need at least input and output widths");
    std::mt19937_64 rng(seed);
    std::vector<Layer> layers;
    for (std::size_t k = 1; k < dims.size(); ++k) {
        if (dims[k] == 0 || dims[k - 1] == 0) throw ValidationError("layer widths must be positive");
        const double r = 1.0 / std::sqrt(static_cast<double>(dims[k - 1]));
        std::uniform_real_distribution<double> u(-r, r);
        Layer L{Eigen::MatrixXd(dims[k], dims[k - 1]), Eigen::VectorXd(dims[k])};
        for (Eigen::Index i = 0; i < L.W.rows(); ++i)
            for (Eigen::Index j = 0; j < L.W.cols(); ++j) L.W(i, j) = u(rng);
        for (Eigen::Index i = 0; i < L.b.size(); ++i) L.b(i) = u(rng);
        layers.push_back(std::move(L));
    }
    return MlpModel(std::move(layers), std::move(act), softmax_base, activate_output);
}

std::vector<std::size_t> MlpModel::dims() const {
    std::vector<std::size_t> d{static_cast<std::size_t>(layers_.front().W.cols())};
    for (const auto& L : layers_) d.push_back(static_cast<std::size_t>(L.W.rows()));
    return d;
}

std::size_t MlpModel::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& L : layers_) n += static_cast<std::size_t>(L.W.size() + L.b.size());
    return n;
}

std::vector<double> MlpModel::parameters() const {
    std::vector<double> theta;
    theta.reserve(parameter_count());
    for (const auto& L : layers_) {
        for (Eigen::Index i = 0; i < L.W.rows(); ++i)
            for (Eigen::Index j = 0; j < L.W.cols(); ++j) theta.push_back(L.W(i, j));
        for (Eigen::Index i = 0; i < L.b.size(); ++i) theta.push_back(L.b(i));
    }
    return theta;
}

void MlpModel::set_parameters(std::span<const double> theta) {
    if (theta.size() != parameter_count()) {
        throw ValidationError(fmt::format("expected {} parameters, got {}", parameter_count(), theta.size()));
    }
    std::size_t k = 0;
    for (auto& L : layers_) {
        for (Eigen::Index i = 0; i < L.W.rows(); ++i)
            for (Eigen::Index j = 0; j < L.W.cols(); ++j) L.W(i, j) = theta[k++];
        for (Eigen::Index i = 0; i < L.b.size(); ++i) L.b(i) = theta[k++];
    }
}

std::vector<std::size_t> preset_dims(const std::string& preset, std::size_t input_dim, std::size_t classes) {
    std::vector<std::size_t> d{input_dim};
    if (preset == "small") {
        d.insert(d.end(), 2, 32);
    } else if (preset == "paper") {
        d.insert(d.end(), 4, 1000);
    } else {
        throw ValidationError("unknown network preset '" + preset + "' (expected small or paper)");
    }
    d.push_back(classes);
    return d;
}

namespace {

Eigen::MatrixXd apply_activation(const Activation& act, const Eigen::MatrixXd& Z) {
    return Z.unaryExpr([&act](double z) { return activate(act, z); });
}

bool activated(const MlpModel& m, std::size_t k) {
    return k + 1 < m.layers().size() || m.activate_output();
}

}  // namespace

std::vector<Eigen::MatrixXd> pre_activations(const MlpModel& m, const Eigen::MatrixXd& inputs) {
    if (static_cast<std::size_t>(inputs.rows()) != m.input_dim()) {
        throw ValidationError(fmt::format("input dimension {} does not match model input {}", inputs.rows(),
                                          m.input_dim()));
    }
    std::vector<Eigen::MatrixXd> zs;
    Eigen::MatrixXd a = inputs;
    for (std::size_t k = 0; k < m.layers().size(); ++k) {
        const auto& L = m.layers()[k];
        Eigen::MatrixXd z = L.W * a;
        z.colwise() += L.b;
        a = activated(m, k) ? apply_activation(m.activation(), z) : z;
        zs.push_back(std::move(z));
    }
    return zs;
}

Eigen::MatrixXd forward_batch(const MlpModel& m, const Eigen::MatrixXd& inputs) {
    auto zs = pre_activations(m, inputs);
    return m.activate_output() ? apply_activation(m.activation(), zs.back()) : zs.back();
}

Eigen::VectorXd forward(const MlpModel& m, std::span<const double> x) {
    Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    return forward_batch(m, in).col(0);
}

Eigen::VectorXd softmax_b(const Eigen::VectorXd& logits, double base) {
    if (!(base > 1.0)) throw ValidationError("softmax base must be > 1");
    const double c = std::log(base);
    const Eigen::VectorXd z = c * logits;
    const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
    return e / e.sum();
}

std::vector<WeightedValue> DeltaXVector::weighted() const {
    std::vector<WeightedValue> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back({e.delta, e.weight});
    return out;
}

Eigen::MatrixXd data_matrix(const LabeledDataset& ds) {
    Eigen::MatrixXd X(ds.dim(), ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto p = ds.point(i);
        for (std::size_t j = 0; j < ds.dim(); ++j) X(j, i) = p[j];
    }
    return X;
}

namespace {

void require_compatible(const MlpModel& m, const LabeledDataset& ds) {
    if (m.input_dim() != ds.dim()) {
        throw ValidationError(fmt::format("model input {} vs data dimension {}", m.input_dim(), ds.dim()));
    }
    if (m.num_classes() != ds.num_classes()) {
        throw ValidationError(fmt::format("model has {} outputs, data has {} classes", m.num_classes(),
                                          ds.num_classes()));
    }
    if (m.num_classes() < 2) throw ValidationError("classification needs at least two classes");
}

/// log sum_j b^{X_j} - log b^{X_label}, natural log.
double sample_loss(const Eigen::Ref<const Eigen::VectorXd>& logits, int label, double c) {
    const Eigen::VectorXd z = c * logits;
    const double zmax = z.maxCoeff();
    const double lse = zmax + std::log((z.array() - zmax).exp().sum());
    return lse - z(label);
}

}  // namespace

DeltaXVector delta_x(const MlpModel& m, const LabeledDataset& ds) {
    require_compatible(m, ds);
    const Eigen::MatrixXd X = forward_batch(m, data_matrix(ds));
    DeltaXVector dx;
    dx.entries.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const int label = ds.label(i);
        double best_other = -std::numeric_limits<double>::infinity();
        Eigen::Index arg = 0;
        for (Eigen::Index j = 0; j < X.rows(); ++j) {
            if (X(j, i) > X(arg, i)) arg = j;
            if (j != label) best_other = std::max(best_other, X(j, i));
        }
        dx.entries.push_back({X(label, i) - best_other, ds.weight(i), label, static_cast<int>(arg)});
    }
    return dx;
}

double accuracy(const DeltaXVector& dx) {
    CompensatedSum s;
    for (const auto& e : dx.entries) {
        if (e.delta > 0.0) s += e.weight;
    }
    return s.value();
}

double cross_entropy(const MlpModel& m, const LabeledDataset& ds) {
    require_compatible(m, ds);
    const Eigen::MatrixXd X = forward_batch(m, data_matrix(ds));
    const double c = std::log(m.softmax_base());
    CompensatedSum s;
    for (std::size_t i = 0; i < ds.size(); ++i) s += ds.weight(i) * sample_loss(X.col(i), ds.label(i), c);
    return s.value();
}

LossGradient loss_and_gradient(const MlpModel& m, const LabeledDataset& ds, std::span<const std::size_t> subset) {
    require_compatible(m, ds);
    std::vector<std::size_t> all;
    if (subset.empty()) {
        all.resize(ds.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        subset = all;
    }
    const auto B = static_cast<Eigen::Index>(subset.size());
    Eigen::MatrixXd A0(ds.dim(), B);
    Eigen::VectorXd w(B);
    CompensatedSum wsum;
    for (Eigen::Index s = 0; s < B; ++s) {
        const std::size_t i = subset[static_cast<std::size_t>(s)];
        if (i >= ds.size()) throw ValidationError("sample index out of range");
        auto p = ds.point(i);
        for (std::size_t j = 0; j < ds.dim(); ++j) A0(static_cast<Eigen::Index>(j), s) = p[j];
        w(s) = ds.weight(i);
        wsum += w(s);
    }
    if (!(wsum.value() > 0.0)) throw ValidationError("selected samples carry zero weight");
    w /= wsum.value();

    const auto& layers = m.layers();
    const std::size_t L = layers.size();
    std::vector<Eigen::MatrixXd> zs;
    std::vector<Eigen::MatrixXd> as{A0};
    for (std::size_t k = 0; k < L; ++k) {
        Eigen::MatrixXd z = layers[k].W * as.back();
        z.colwise() += layers[k].b;
        as.push_back(activated(m, k) ? apply_activation(m.activation(), z) : z);
        zs.push_back(std::move(z));
    }

    const double c = std::log(m.softmax_base());
    const Eigen::MatrixXd& X = as.back();
    Eigen::MatrixXd dZ(X.rows(), B);
    CompensatedSum loss;
    for (Eigen::Index s = 0; s < B; ++s) {
        const int label = ds.label(subset[static_cast<std::size_t>(s)]);
        loss += w(s) * sample_loss(X.col(s), label, c);
        Eigen::VectorXd g = softmax_b(X.col(s), m.softmax_base());
        g(label) -= 1.0;
        dZ.col(s) = (w(s) * c) * g;
    }

    LossGradient out;
    out.loss = loss.value();
    std::vector<Eigen::MatrixXd> dW(L);
    std::vector<Eigen::VectorXd> db(L);
    for (std::size_t k = L; k-- > 0;) {
        if (activated(m, k)) {
            dZ.array() *= zs[k].unaryExpr([&](double z) { return activate_derivative(m.activation(), z); }).array();
        }
        dW[k] = dZ * as[k].transpose();
        db[k] = dZ.rowwise().sum();
        if (k > 0) dZ = layers[k].W.transpose() * dZ;
    }
    out.gradient.reserve(m.parameter_count());
    for (std::size_t k = 0; k < L; ++k) {
        for (Eigen::Index i = 0; i < dW[k].rows(); ++i)
            for (Eigen::Index j = 0; j < dW[k].cols(); ++j) out.gradient.push_back(dW[k](i, j));
        for (Eigen::Index i = 0; i < db[k].size(); ++i) out.gradient.push_back(db[k](i));
    }
    return out;
}

double min_kink_distance(const MlpModel& m, const LabeledDataset& ds) {
    const auto kinks = activation_kinks(m.activation());
    const auto zs = pre_activations(m, data_matrix(ds));
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < zs.size(); ++k) {
        if (!activated(m, k)) continue;
        for (double z : zs[k].reshaped())
            for (double q : kinks) best = std::min(best, std::abs(z - q));
    }
    return best;
}

GoodBad good_bad_sets(const DeltaXVector& dx, double eta) {
    if (!(eta >= 0.0)) throw ValidationError("eta must be >= 0");
    CompensatedSum good, bad;
    for (const auto& e : dx.entries) {
        if (e.delta > eta) good += e.weight;
        if (e.delta < -eta) bad += e.weight;
    }
    return {good.value(), bad.value()};
}

namespace {

class OptimizerState {
  public:
    OptimizerState(const Optimizer& opt, std::size_t n) : opt_(opt), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::vector<double>& theta, const std::vector<double>& grad) {
        if (const auto* sgd = std::get_if<Sgd>(&opt_)) {
            for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= sgd->lr * grad[i];
            return;
        }
        const auto& a = std::get<Adam>(opt_);
        ++t_;
        const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m_[i] = a.beta1 * m_[i] + (1.0 - a.beta1) * grad[i];
            v_[i] = a.beta2 * v_[i] + (1.0 - a.beta2) * grad[i] * grad[i];
            theta[i] -= a.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + a.eps);
        }
    }

  private:
    Optimizer opt_;
    std::vector<double> m_, v_;
    std::uint64_t t_ = 0;
};

EpochRecord evaluate(const MlpModel& m, const LabeledDataset& ds, std::size_t epoch, bool keep_dx) {
    EpochRecord r;
    r.epoch = epoch;
    r.loss = cross_entropy(m, ds);
    if (!std::isfinite(r.loss)) throw TrainingError(fmt::format("non-finite loss at epoch {}", epoch));
    DeltaXVector dx = delta_x(m, ds);
    r.accuracy = accuracy(dx);
    if (keep_dx) r.delta_x = std::move(dx);
    return r;
}

}  // namespace

TrainTrace train(MlpModel& m, const LabeledDataset& ds, const TrainOptions& opts) {
    if (opts.epochs < 1) throw ValidationError("epochs must be >= 1");
    std::visit(overloaded{[](const Sgd& s) {
                              if (!(s.lr >= 0.0)) throw ValidationError("learning rate must be >= 0");
                          },
                          [](const Adam& a) {
                              if (!(a.lr >= 0.0) || !(a.beta1 >= 0.0 && a.beta1 < 1.0) ||
                                  !(a.beta2 >= 0.0 && a.beta2 < 1.0) || !(a.eps > 0.0))
                                  throw ValidationError("invalid Adam hyperparameters");
                          }},
               opts.optimizer);

    TrainTrace trace;
    trace.epochs.push_back(evaluate(m, ds, 0, opts.record_delta_x));

    std::vector<double> theta = m.parameters();
    OptimizerState state(opts.optimizer, theta.size());
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batch = opts.batch_size == 0 ? ds.size() : std::min(opts.batch_size, ds.size());

    for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
        if (opts.batch_size != 0) {
            std::mt19937_64 rng(mix_seed(opts.seed, epoch));
            std::shuffle(order.begin(), order.end(), rng);
        }
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t len = std::min(batch, order.size() - start);
            auto lg = loss_and_gradient(m, ds, std::span<const std::size_t>(order).subspan(start, len));
            if (!std::isfinite(lg.loss)) throw TrainingError(fmt::format("non-finite loss in epoch {}", epoch));
            for (double g : lg.gradient) {
                if (!std::isfinite(g)) throw TrainingError(fmt::format("non-finite gradient in epoch {}", epoch));
            }
            state.step(theta, lg.gradient);
            m.set_parameters(theta);
        }
        trace.epochs.push_back(evaluate(m, ds, epoch, opts.record_delta_x));
    }
    return trace;
}

void TrainTrace::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "epoch,loss,accuracy\n";
    for (const auto& e : epochs) out << fmt::format("{},{:.17g},{:.17g}\n", e.epoch, e.loss, e.accuracy);
}

Eigen::MatrixXd weight_product(const MlpModel& m) {
    Eigen::MatrixXd P = m.layers().front().W;
    for (std::size_t k = 1; k < m.layers().size(); ++k) P = m.layers()[k].W * P;
    return P;
}

Spectrum singular_spectrum(const MlpModel& m) {
    const Eigen::MatrixXd P = weight_product(m);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(P);
    const Eigen::VectorXd s = svd.singularValues();
    Spectrum out;
    out.singular_values.assign(s.data(), s.data() + s.size());
    if (s.size() == 0 || s(0) == 0.0) return out;
    const double cutoff = 1e-10 * s(0);
    double smallest = s(0);
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff) {
            smallest = s(i);
            ++out.rank;
        }
    }
    out.d_max = s(0) * s(0);
    out.d_min = smallest * smallest;
    return out;
}

Eigen::MatrixXd truncate_singular_values(const Eigen::MatrixXd& W, const TruncationPolicy& policy) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd s = svd.singularValues();
    const double tau = std::visit(
        overloaded{[](const AbsoluteThreshold& a) {
                       if (!(a.tau >= 0.0)) throw ValidationError("threshold must be >= 0");
                       return a.tau;
                   },
                   [&s](const MedianMultiple& mm) {
                       if (!(mm.c > 0.0)) throw ValidationError("median multiple must be > 0");
                       std::vector<double> v(s.data(), s.data() + s.size());
                       if (v.empty()) return 0.0;
                       std::sort(v.begin(), v.end());
                       const std::size_t n = v.size();
                       const double med = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
                       return mm.c * med;
                   }},
        policy);
    bool removed = false;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) < tau) {
            s(i) = 0.0;
            removed = true;
        }
    }
    if (!removed) return W;
    return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

namespace {

void write_le(std::ostream& out, double x) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    unsigned char buf[8];
    for (int k = 0; k < 8; ++k) buf[k] = static_cast<unsigned char>(bits >> (8 * k));
    out.write(reinterpret_cast<const char*>(buf), 8);
}

double read_le(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw std::runtime_error("checkpoint payload truncated");
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(buf[k]) << (8 * k);
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const MlpModel& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    const nlohmann::json header{{"format", "dgstab-mlp"},
                                {"version", 1},
                                {"dims", m.dims()},
                                {"activation", to_json(m.activation())},
                                {"softmax_base", m.softmax_base()},
                                {"activate_output", m.activate_output()},
                                {"parameters", m.parameter_count()}};
    out << header.dump() << '\n';
    for (double x : m.parameters()) write_le(out, x);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing checkpoint header", 1);
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad checkpoint header: ") + e.what(), 1);
    }
    if (h.value("format", "") != "dgstab-mlp") throw ParseError("not a model checkpoint", 1);
    const auto dims = h.at("dims").get<std::vector<std::size_t>>();
    MlpModel m = MlpModel::random(dims, activation_from_json(h.at("activation")), 0,
                                  h.at("softmax_base").get<double>(), h.value("activate_output", true));
    const std::size_t n = h.at("parameters").get<std::size_t>();
    if (n != m.parameter_count()) throw ParseError("parameter count does not match dims", 1);
    std::vector<double> theta(n);
    for (double& x : theta) x = read_le(in);
    m.set_parameters(theta);
    return m;
}

}  // namespace dgstab
