#include "dgstab/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/math/statistics/bivariate_statistics.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>

#include "dgstab/errors.hpp"

namespace dgstab {

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ValidationError("correlation inputs differ in length");
    if (x.size() < 3) return std::nullopt;
    const auto allsame = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
    };
    if (allsame(x) || allsame(y)) return std::nullopt;
    const double r = boost::math::statistics::correlation_coefficient(x, y);
    if (!std::isfinite(r)) return std::nullopt;
    return std::clamp(r, -1.0, 1.0);
}

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
        i = j + 1;
    }
    return rank;
}

std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ValidationError("correlation inputs differ in length");
    return pearson(average_ranks(x), average_ranks(y));
}

namespace {

struct Axis {
    double lo, hi;

    static Axis of(const std::vector<double>& v) {
        if (v.empty()) return {0.0, 1.0};
        auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        double lo = *mn, hi = *mx;
        if (hi == lo) {
            const double pad = lo == 0.0 ? 1.0 : 0.05 * std::abs(lo);
            lo -= pad;
            hi += pad;
        } else {
            const double pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        return {lo, hi};
    }
};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::vector<std::filesystem::path> write_scatter(const ScatterPlot& plot, const std::filesystem::path& dir,
                                                 const std::string& stem) {
    if (plot.x.size() != plot.y.size()) throw ValidationError("scatter x and y differ in length");
    std::filesystem::create_directories(dir);
    const auto svg_path = dir / (stem + ".svg");
    const auto csv_path = dir / (stem + ".csv");
    const auto dat_path = dir / (stem + ".dat");

    constexpr double W = 640, H = 480, L = 80, R = 20, T = 40, B = 60;
    const Axis ax = Axis::of(plot.x);
    const Axis ay = Axis::of(plot.y);
    auto px = [&](double x) { return L + (x - ax.lo) / (ax.hi - ax.lo) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - ay.lo) / (ay.hi - ay.lo) * (H - T - B); };

    std::ostringstream svg;
    svg << fmt::format(R"svg(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">)svg", W, H,
                       W, H)
        << '\n';
    svg << R"svg(<rect width="100%" height="100%" fill="white"/>)svg" << '\n';
    svg << fmt::format(R"svg(<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>)svg",
                       W / 2, escape(plot.title))
        << '\n';
    svg << fmt::format(R"svg(<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/>)svg", L, H - B, W - R) << '\n';
    svg << fmt::format(R"svg(<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>)svg", L, T, H - B) << '\n';
    for (int k = 0; k <= 4; ++k) {
        const double xv = ax.lo + (ax.hi - ax.lo) * k / 4.0;
        const double yv = ay.lo + (ay.hi - ay.lo) * k / 4.0;
        svg << fmt::format(
                   R"svg(<text x="{:.2f}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{:.4g}</text>)svg",
                   px(xv), H - B + 18, xv)
            << '\n';
        svg << fmt::format(
                   R"svg(<text x="{}" y="{:.2f}" text-anchor="end" font-family="sans-serif" font-size="11">{:.4g}</text>)svg",
                   L - 6, py(yv) + 4, yv)
            << '\n';
    }
    svg << fmt::format(R"svg(<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>)svg",
                       (L + W - R) / 2, H - 16, escape(plot.x_label))
        << '\n';
    svg << fmt::format(
               R"svg(<text x="18" y="{0}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {0})">{1}</text>)svg",
               (T + H - B) / 2, escape(plot.y_label))
        << '\n';
    for (std::size_t i = 0; i < plot.x.size(); ++i) {
        svg << fmt::format(R"svg(<circle cx="{:.2f}" cy="{:.2f}" r="3" fill="steelblue"/>)svg", px(plot.x[i]), py(plot.y[i]))
            << '\n';
    }
    svg << "</svg>\n";

    std::ofstream(svg_path) << svg.str();
    std::ofstream csv(csv_path);
    std::ofstream dat(dat_path);
    csv << "x,y\n";
    dat << "# " << plot.x_label << "\t" << plot.y_label << '\n';
    for (std::size_t i = 0; i < plot.x.size(); ++i) {
        csv << fmt::format("{:.17g},{:.17g}\n", plot.x[i], plot.y[i]);
        dat << fmt::format("{:.17g}\t{:.17g}\n", plot.x[i], plot.y[i]);
    }
    if (!csv || !dat) throw std::runtime_error("failed writing scatter sidecars in " + dir.string());
    return {svg_path, csv_path, dat_path};
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
    return hex;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

Manifest::Manifest(std::string command, nlohmann::json config)
    : command_(std::move(command)), config_(std::move(config)) {}

void Manifest::add(const std::filesystem::path& artifact) { artifacts_.push_back(artifact); }

void Manifest::write(const std::filesystem::path& dir) const {
    nlohmann::json arts = nlohmann::json::array();
    for (const auto& a : artifacts_) {
        arts.push_back({{"path", std::filesystem::relative(a, dir).generic_string()}, {"sha256", sha256_file(a)}});
    }
    const nlohmann::json m{{"tool", "dgstab"},
                           {"command", command_},
                           {"config", config_},
                           {"config_sha256", sha256_hex(config_.dump())},
                           {"artifacts", arts}};
    std::ofstream out(dir / "manifest.json");
    out << m.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
}

}  // namespace dgstab
