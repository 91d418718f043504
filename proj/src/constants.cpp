#include "dgstab/constants.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "dgstab/errors.hpp"
#include "dgstab/numeric.hpp"

namespace dgstab {

namespace {

const double kLn2 = std::log(2.0);

void require(bool ok, const char* msg) {
    if (!ok) throw ValidationError(msg);
}

void check_common(double eta, double K, double kappa, double sigma, double delta0, double base) {
    require(eta > 0.0 && std::isfinite(eta), "eta must be > 0");
    require(K >= 1.0 && std::isfinite(K), "K must be >= 1");
    require(kappa > 1.0 && std::isfinite(kappa), "kappa must be > 1");
    require(sigma >= 0.0 && std::isfinite(sigma), "sigma must be >= 0");
    require(delta0 >= 0.0 && delta0 < 1.0, "delta0 must lie in [0, 1)");
    require(base > 1.0 && std::isfinite(base), "softmax base must be > 1");
}

int p_count(double eta, double scale, double xi, double kappa, PRule rule) {
    const double raw = rule == PRule::LogKappa ? std::log(eta / scale) / std::log(kappa) : std::log(eta / xi) / kappa;
    return std::max(0, static_cast<int>(std::floor(raw)));
}

/// The four-term sum without any grid checks; `scale` runs through the tail.
double c3_raw(double eta, double K, double kappa, double sigma, double scale, double xi, double delta0, double base,
              PRule rule) {
    const double lb = std::log(base);
    const double lk = std::log(kappa);
    CompensatedSum s;
    s += std::log1p((K - 1.0) * std::exp(-eta * lb));
    s += delta0 * std::log1p((K - 1.0) * std::exp(-eta / kappa * lb));
    s += delta0 / std::pow(1.0 + sigma, std::log(eta / xi) / lk - 1.0) * std::log1p(std::exp(xi * lb) * (K - 1.0));
    const int p = p_count(eta, scale, xi, kappa, rule);
    for (int i = 0; i < p; ++i) {
        const double w = scale * std::pow(kappa, i + 1);
        s += delta0 / std::pow(1.0 + sigma, std::log(eta / w) / lk - 1.0) * std::log1p((K - 1.0) * std::exp(-w * lb));
    }
    return s.value() / kLn2;
}

}  // namespace

int c3_tail_terms(const C3Inputs& in) {
    const double scale = in.tail == TailScale::Ell ? in.ell : in.xi;
    return p_count(in.eta, scale, in.xi, in.kappa, in.p_rule);
}

double c3(const C3Inputs& in) {
    check_common(in.eta, in.K, in.kappa, in.sigma, in.delta0, in.base);
    require(in.ell > 0.0 && std::isfinite(in.ell), "ell must be > 0");
    require(in.xi > 0.0 && std::isfinite(in.xi), "xi must be > 0");
    const double i = std::round(std::log(in.xi / in.ell) / std::log(in.kappa));
    if (i < 0.0 || std::abs(in.ell * std::pow(in.kappa, i) - in.xi) > 1e-9 * std::max(1.0, in.xi)) {
        throw ValidationError(fmt::format("xi={} is not of the form ell*kappa^i (ell={}, kappa={})", in.xi, in.ell,
                                          in.kappa));
    }
    if (in.eta < in.xi) throw ValidationError(fmt::format("eta={} must be >= xi={}", in.eta, in.xi));
    const double scale = in.tail == TailScale::Ell ? in.ell : in.xi;
    return c3_raw(in.eta, in.K, in.kappa, in.sigma, scale, in.xi, in.delta0, in.base, in.p_rule);
}

double c2_objective(const C2Inputs& in, double xi) {
    const double scale = in.tail == TailScale::Xi ? xi : in.ell;
    return c3_raw(in.eta, in.K, in.kappa, in.sigma, scale, xi, in.delta0, in.base, in.p_rule);
}

C2Result c2(const C2Inputs& in) {
    check_common(in.eta, in.K, in.kappa, in.sigma, in.delta0, in.base);
    require(in.ell > 0.0, "ell must be > 0");
    require(in.d_min > 0.0 && in.d_min <= in.d_max, "need 0 < d_min <= d_max");
    const double lo = in.xi_lo.value_or(in.d_min * in.ell);
    const double hi = in.xi_hi.value_or(in.d_max * in.ell);
    if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi)) {
        throw ValidationError(fmt::format("empty xi range [{}, {}]", lo, hi));
    }

    C2Result best{c2_objective(in, lo), lo, std::nullopt};
    auto consider = [&](double xi) {
        const double v = c2_objective(in, xi);
        if (v > best.value) best = {v, xi, std::nullopt};
        return v;
    };
    if (hi > lo) {
        constexpr int grid = 4096;
        const double llo = std::log(lo);
        const double lhi = std::log(hi);
        auto at = [&](int k) { return k == grid - 1 ? hi : std::exp(llo + (lhi - llo) * k / (grid - 1)); };
        int kbest = 0;
        for (int k = 1; k < grid; ++k) {
            const double before = best.value;
            consider(at(k));
            if (best.value > before) kbest = k;
        }
        // ternary refinement in log-xi between the neighbours of the best grid point
        double a = std::log(at(std::max(0, kbest - 1)));
        double b = std::log(at(std::min(grid - 1, kbest + 1)));
        for (int it = 0; it < 100 && b - a > 1e-15; ++it) {
            const double m1 = a + (b - a) / 3.0;
            const double m2 = b - (b - a) / 3.0;
            if (consider(std::exp(m1)) < consider(std::exp(m2))) {
                a = m1;
            } else {
                b = m2;
            }
        }
    }
    if (in.beta) best.beta_slack = in.d_min * *in.beta / 2.0 - in.eta;
    return best;
}

double gamma_max(double sigma, double kappa) { return std::min(1.0, std::log1p(sigma) / std::log(kappa)); }

double c1(double eta, double K, double kappa, double sigma, double gamma) {
    check_common(eta, K, kappa, sigma, 0.0, std::numbers::e);
    const double gmax = gamma_max(sigma, kappa);
    if (!(gamma > 0.0) || gamma > gmax * (1.0 + 1e-12)) {
        throw ValidationError(fmt::format("gamma={} outside (0, {}]", gamma, gmax));
    }
    const int p = std::max(0, static_cast<int>(std::floor(std::log(eta) / std::log(kappa))));
    CompensatedSum a;
    for (int k = 1; k <= p; ++k) a += std::pow(1.0 + sigma, k);
    const double second = kappa * 6.0 * (K - 1.0) * (sigma + 1.0) * a.value() *
                          (std::numbers::e + 2.0 * std::pow(kappa, gamma)) / kLn2;
    return std::max(6.0 * std::pow(eta, gamma), second);
}

double acc_bound_from_loss(double loss) {
    require(loss >= 0.0, "loss must be >= 0");
    return std::max(0.0, 1.0 - loss / kLn2);
}

double eta_star_tail_bound(double epsilon, double eta_star) {
    require(epsilon >= 0.0 && eta_star >= 0.0, "epsilon and eta* must be >= 0");
    return std::clamp(1.0 - 2.0 * kLn2 * epsilon * std::exp(eta_star), 0.0, 1.0);
}

double NonuniformConstants::m0() const { return std::exp2(log2_m0); }
double NonuniformConstants::sigma() const { return std::exp2(log2_sigma); }

NonuniformConstants nonuniform_propagated_constants(const std::vector<double>& widths, double K, double m0,
                                                    double sigma, double kappa) {
    require(!widths.empty(), "need at least one layer width");
    for (double c : widths) require(c > 0.0 && std::isfinite(c), "layer widths must be positive");
    require(K >= 1.0, "K must be >= 1");
    require(m0 > 0.0, "m0 must be > 0");
    require(sigma > 0.0, "sigma must be > 0");
    require(kappa > 1.0, "kappa must be > 1");
    CompensatedSum total;
    for (double c : widths) total += c;
    const double log2_m0 = total.value() + std::log2(K) + std::log2(m0);
    return {log2_m0, std::log2(sigma) - log2_m0, kappa};
}

UniformConstants propagated_uniform_constants(double ell, double beta, double d_min, double d_max) {
    require(ell > 0.0 && beta > 0.0, "ell and beta must be > 0");
    require(d_min > 0.0 && d_min <= d_max, "need 0 < d_min <= d_max");
    return {ell * d_min, ell * d_max, beta * d_min};
}

Theorem theorem_from_string(const std::string& s) {
    if (s == "data-uniform" || s == "c2") return Theorem::DataUniformDc;
    if (s == "deltax-uniform" || s == "c3") return Theorem::DeltaXUniformDc;
    if (s == "deltax-dc" || s == "c1") return Theorem::DeltaXDc;
    throw ValidationError("unknown theorem '" + s + "' (expected data-uniform, deltax-uniform or deltax-dc)");
}

std::string to_string(Theorem t) {
    switch (t) {
        case Theorem::DataUniformDc: return "data-uniform";
        case Theorem::DeltaXUniformDc: return "deltax-uniform";
        case Theorem::DeltaXDc: return "deltax-dc";
    }
    return "?";
}

bool StabilityReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

nlohmann::json StabilityReport::to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json j{{"theorem", to_string(theorem)},
                     {"constant", opt(constant)},
                     {"loss_bound", opt(loss_bound)},
                     {"acc_bound", opt(acc_bound)},
                     {"all_pass", all_pass()}};
    if (c1) j["c1"] = *c1;
    if (xi_star) j["xi_star"] = *xi_star;
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks) j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"slack", c.slack}});
    return j;
}

namespace {

class Requirements {
  public:
    explicit Requirements(const TheoremInputs& in) : in_(in) {}

    double get(const std::optional<double> TheoremInputs::*field, const char* name) {
        const auto& v = in_.*field;
        if (!v) {
            missing_.push_back(name);
            return std::numeric_limits<double>::quiet_NaN();
        }
        return *v;
    }

    void finish() const {
        if (missing_.empty()) return;
        std::string list;
        for (const auto& m : missing_) list += (list.empty() ? "" : ", ") + m;
        throw ValidationError("missing inputs: " + list);
    }

  private:
    const TheoremInputs& in_;
    std::vector<std::string> missing_;
};

PreconditionCheck strict(std::string name, double slack) { return {std::move(name), slack > 0.0, slack}; }
PreconditionCheck loose(std::string name, double slack) { return {std::move(name), slack >= 0.0, slack}; }

void set_constant(StabilityReport& r, double c) {
    r.constant = c;
    r.loss_bound = kLn2 * c;
    r.acc_bound = 1.0 - c;
}

}  // namespace

StabilityReport check_theorem_preconditions(Theorem which, const TheoremInputs& in) {
    using T = TheoremInputs;
    Requirements req(in);
    StabilityReport r;
    r.theorem = which;
    const double base = in.base.value_or(std::numbers::e);

    if (which == Theorem::DataUniformDc) {
        const double eta = req.get(&T::eta, "eta"), xi = req.get(&T::xi, "xi"), delta0 = req.get(&T::delta0, "delta0"),
                     delta = req.get(&T::delta, "delta"), beta = req.get(&T::beta, "beta"), ell = req.get(&T::ell, "ell"),
                     dmin = req.get(&T::d_min, "d_min"), dmax = req.get(&T::d_max, "d_max"),
                     kappa = req.get(&T::kappa, "kappa"), sigma = req.get(&T::sigma, "sigma"), K = req.get(&T::K, "K"),
                     good = req.get(&T::good_mass, "good_mass"), mind = req.get(&T::min_delta, "min_delta");
        req.finish();
        r.checks = {loose("d_min*beta/2 >= eta", dmin * beta / 2.0 - eta),
                    loose("xi in [d_min*ell, d_max*ell]", std::min(xi - dmin * ell, dmax * ell - xi)),
                    strict("xi < eta", eta - xi),
                    strict("delta0 < delta", delta - delta0),
                    strict("0 < ell < 1", std::min(ell, 1.0 - ell)),
                    strict("mu(G_eta) > 1 - delta0", good - (1.0 - delta0)),
                    loose("B_{-xi} empty", mind + xi)};
        C2Inputs c;
        c.eta = eta, c.K = K, c.kappa = kappa, c.sigma = sigma, c.ell = ell, c.delta0 = delta0, c.d_min = dmin,
        c.d_max = dmax, c.base = base;
        const auto res = c2(c);
        set_constant(r, res.value);
        r.xi_star = res.xi_star;
    } else if (which == Theorem::DeltaXUniformDc) {
        const double eta = req.get(&T::eta, "eta"), xi = req.get(&T::xi, "xi"), delta0 = req.get(&T::delta0, "delta0"),
                     delta = req.get(&T::delta, "delta"), beta = req.get(&T::beta, "beta"), ell = req.get(&T::ell, "ell"),
                     kappa = req.get(&T::kappa, "kappa"), sigma = req.get(&T::sigma, "sigma"), K = req.get(&T::K, "K"),
                     good = req.get(&T::good_mass, "good_mass"), mind = req.get(&T::min_delta, "min_delta");
        req.finish();
        const double i = std::max(0.0, std::round(std::log(xi / ell) / std::log(kappa)));
        const double grid_err = std::abs(ell * std::pow(kappa, i) - xi);
        r.checks = {loose("beta/2 >= eta", beta / 2.0 - eta),
                    {"xi = ell*kappa^i", grid_err <= 1e-9 * std::max(1.0, xi), -grid_err},
                    loose("xi <= eta", eta - xi),
                    strict("delta0 < delta", delta - delta0),
                    strict("0 < ell < 1", std::min(ell, 1.0 - ell)),
                    strict("mu(G_eta) > 1 - delta0", good - (1.0 - delta0)),
                    loose("B_{-xi} empty", mind + xi)};
        if (r.checks[1].pass && r.checks[2].pass) {
            set_constant(r, c3({eta, K, kappa, sigma, ell, xi, delta0, base}));
        }
    } else {
        const double eta = req.get(&T::eta, "eta"), K = req.get(&T::K, "K"), kappa = req.get(&T::kappa, "kappa"),
                     sigma = req.get(&T::sigma, "sigma"), gamma = req.get(&T::gamma, "gamma"),
                     eps = req.get(&T::epsilon, "epsilon"), m0 = req.get(&T::m0, "m0"), beta = req.get(&T::beta, "beta"),
                     delta0 = req.get(&T::delta0, "delta0"), good = req.get(&T::good_mass, "good_mass"),
                     mind = req.get(&T::min_delta, "min_delta");
        req.finish();
        require(eps > 0.0, "epsilon must be > 0");
        const double C1 = c1(eta, K, kappa, sigma, gamma);
        r.c1 = C1;
        r.checks = {loose("m0 <= eps/(2*C1)", eps / (2.0 * C1) - m0),
                    loose("kappa*(log(1/eps)+C1) <= eta", eta - kappa * (std::log(1.0 / eps) + C1)),
                    loose("eta <= beta/2", beta / 2.0 - eta),
                    loose("delta0 <= (eps/C1)*eta^gamma", eps / C1 * std::pow(eta, gamma) - delta0),
                    strict("mu(G_eta) > 1 - delta0", good - (1.0 - delta0)),
                    loose("B_{-1} empty", mind + 1.0)};
        r.constant = eps;
        r.acc_bound = 1.0 - eps;
    }
    return r;
}

void write_sweep_csv(const std::filesystem::path& path, const std::string& param, const std::vector<SweepRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "param,value,C,loss_bound,acc_bound\n";
    for (const auto& r : rows) {
        out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", param, r.value, r.constant, kLn2 * r.constant,
                           1.0 - r.constant);
    }
}

}  // namespace dgstab
