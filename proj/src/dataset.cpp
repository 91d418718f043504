#include "dgstab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "dgstab/errors.hpp"
#include "dgstab/numeric.hpp"

namespace dgstab {

LabeledDataset::LabeledDataset(std::size_t dim, std::size_t num_classes, std::vector<double> points,
                               std::vector<int> labels, std::vector<double> weights)
    : dim_(dim),
      num_classes_(num_classes),
      points_(std::move(points)),
      labels_(std::move(labels)),
      weights_(std::move(weights)) {
    if (dim_ == 0) throw ValidationError("dataset dimension must be positive");
    if (num_classes_ == 0) throw ValidationError("dataset needs at least one class");
    if (labels_.empty()) throw ValidationError("dataset must contain at least one point");
    if (points_.size() != labels_.size() * dim_) {
        throw ValidationError(fmt::format("expected {} coordinates for {} points of dimension {}, got {}",
                                          labels_.size() * dim_, labels_.size(), dim_, points_.size()));
    }
    for (int l : labels_) {
        if (l < 0 || static_cast<std::size_t>(l) >= num_classes_) {
            throw ValidationError(fmt::format("label {} outside [0, {})", l, num_classes_));
        }
    }
    for (double x : points_) {
        if (!std::isfinite(x)) throw ValidationError("dataset coordinates must be finite");
    }
    if (weights_.empty()) {
        weights_.assign(labels_.size(), 1.0 / static_cast<double>(labels_.size()));
        return;
    }
    if (weights_.size() != labels_.size()) {
        throw ValidationError("weights and labels differ in length");
    }
    for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("weights must be finite and >= 0");
    }
    const double total = compensated_sum(weights_);
    if (!(total > 0.0)) throw ValidationError("weights sum to zero");
    if (std::abs(total - 1.0) > 1e-9) {
        for (double& w : weights_) w /= total;
        renormalized_ = true;
    }
}

LabeledDataset LabeledDataset::with_coordinates(std::size_t dim, std::vector<double> points) const {
    return LabeledDataset(dim, num_classes_, std::move(points), labels_, weights_);
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
    std::vector<double> pts;
    std::vector<int> lab;
    std::vector<double> w;
    pts.reserve(indices.size() * dim_);
    lab.reserve(indices.size());
    w.reserve(indices.size());
    CompensatedSum total;
    for (std::size_t idx : indices) {
        if (idx >= size()) throw ValidationError("subset index out of range");
        auto p = point(idx);
        pts.insert(pts.end(), p.begin(), p.end());
        lab.push_back(labels_[idx]);
        w.push_back(weights_[idx]);
        total += weights_[idx];
    }
    const double t = total.value();
    if (t > 0.0) {
        for (double& x : w) x /= t;
    }
    return LabeledDataset(dim_, num_classes_, std::move(pts), std::move(lab), std::move(w));
}

void PolyBoundarySpec::validate() const {
    if (degree < 0 || degree > 12) throw ValidationError("degree must lie in [0, 12]");
    if (n_samples < 2) throw ValidationError("n_samples must be >= 2");
    if (!(x_max > x_min)) throw ValidationError("x_range must be a non-empty interval");
    if (!(vertical_shift > 0.0)) throw ValidationError("vertical_shift must be > 0");
    if (!(noise_std >= 0.0)) throw ValidationError("noise_std must be >= 0");
}

double BoundaryPolynomial::operator()(double x) const {
    double acc = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
    return (acc - offset) / scale;
}

PolyBoundaryData generate_poly_boundary(const PolyBoundarySpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);

    BoundaryPolynomial poly;
    poly.coefficients.resize(static_cast<std::size_t>(spec.degree) + 1);
    for (double& c : poly.coefficients) c = coef(rng);

    constexpr int grid = 2049;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int k = 0; k < grid; ++k) {
        const double x = spec.x_min + (spec.x_max - spec.x_min) * k / (grid - 1);
        const double y = poly(x);
        lo = std::min(lo, y);
        hi = std::max(hi, y);
    }
    if (hi - lo > 0.0) {
        poly.offset = lo + 0.5 * (hi - lo);
        poly.scale = hi - lo;
    } else {
        poly.offset = lo;
    }

    std::uniform_real_distribution<double> xs(spec.x_min, spec.x_max);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> pts;
    std::vector<int> labels;
    pts.reserve(2 * spec.n_samples);
    labels.reserve(spec.n_samples);
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
        const int label = (i % 2 == 0) ? 1 : 0;
        const double x = xs(rng);
        const double shift = label == 1 ? spec.vertical_shift : -spec.vertical_shift;
        const double eps = noise(rng);
        pts.push_back(x);
        pts.push_back(poly(x) + shift + spec.noise_std * eps);
        labels.push_back(label);
    }
    return {LabeledDataset(2, 2, std::move(pts), std::move(labels)), std::move(poly)};
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, std::size_t n_train,
                                                std::uint64_t seed) {
    if (n_train < 1 || n_train >= ds.size()) {
        throw ValidationError(fmt::format("n_train must lie in [1, {}), got {}", ds.size(), n_train));
    }
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::span<const std::size_t> all(order);
    return {ds.subset(all.first(n_train)), ds.subset(all.subspan(n_train))};
}

void save_csv(const LabeledDataset& ds, const std::filesystem::path& path, bool with_weights) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (std::size_t j = 0; j < ds.dim(); ++j) out << 'x' << j << ',';
    out << "label";
    if (with_weights) out << ",weight";
    out << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (double x : ds.point(i)) out << fmt::format("{:.17g},", x);
        out << ds.label(i);
        if (with_weights) out << fmt::format(",{:.17g}", ds.weight(i));
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw ParseError("trailing characters in number '" + s + "'", line);
        return v;
    } catch (const std::logic_error&) {
        throw ParseError("not a number: '" + s + "'", line);
    }
}

}  // namespace

LabeledDataset load_csv(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto header = split_fields(line);
    std::size_t dim = 0;
    while (dim < header.size() && header[dim] == "x" + std::to_string(dim)) ++dim;
    const bool has_weight = header.size() == dim + 2 && header[dim + 1] == "weight";
    if (dim == 0 || header.size() < dim + 1 || header[dim] != "label" ||
        (header.size() != dim + 1 && !has_weight)) {
        throw ParseError("header must be x0,...,x{n-1},label[,weight]", 1);
    }

    std::vector<double> pts;
    std::vector<int> labels;
    std::vector<double> weights;
    std::size_t lineno = 1;
    int max_label = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            throw ParseError(fmt::format("expected {} fields, found {}", header.size(), fields.size()), lineno);
        }
        for (std::size_t j = 0; j < dim; ++j) pts.push_back(parse_double(fields[j], lineno));
        const double lab = parse_double(fields[dim], lineno);
        if (lab < 0 || lab != std::floor(lab) || lab > 1e9) {
            throw ParseError("label must be a non-negative integer", lineno);
        }
        labels.push_back(static_cast<int>(lab));
        max_label = std::max(max_label, labels.back());
        if (has_weight) {
            const double w = parse_double(fields[dim + 1], lineno);
            if (!(w >= 0.0)) throw ParseError("weight must be >= 0", lineno);
            weights.push_back(w);
        }
    }
    if (labels.empty()) throw ParseError("no data rows", lineno);

    const std::size_t classes = std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1);
    LabeledDataset ds(dim, classes, std::move(pts), std::move(labels), std::move(weights));
    if (ds.was_renormalized() && warnings != nullptr) {
        warnings->push_back(path.string() + ": weights did not sum to 1; renormalised");
    }
    return ds;
}

}  // namespace dgstab
