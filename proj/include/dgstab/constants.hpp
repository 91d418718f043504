#pragma once

#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace dgstab {

/// Which scale runs through the tail sum of the C3-type expression.
enum class TailScale {
    Ell,  // ell * kappa^(i+1), p from ell
    Xi,   // xi * kappa^(i+1), p from xi
};

/// How p is computed: floor(log(eta/s) / log(kappa)) or the variant
/// floor(log(eta/xi) / kappa).
enum class PRule { LogKappa, Kappa };

struct C3Inputs {
    double eta = 18.0;
    double K = 2.0;
    double kappa = 2.0;
    double sigma = 0.9;
    double ell = 0.7;
    double xi = 0.7;
    double delta0 = 0.2;
    double base = std::numbers::e;
    TailScale tail = TailScale::Ell;
    PRule p_rule = PRule::LogKappa;
};

/// Checks that xi = ell * kappa^i for an integer i >= 0 (within 1e-9) and
/// eta >= xi, then evaluates the four-term constant.
double c3(const C3Inputs& in);

/// Number of tail terms.
int c3_tail_terms(const C3Inputs& in);

struct C2Inputs {
    double eta = 18.0;
    double K = 2.0;
    double kappa = 2.0;
    double sigma = 0.9;
    double ell = 0.001;
    double delta0 = 0.2;
    double d_min = 0.01;
    double d_max = 800.0;
    double base = std::numbers::e;
    std::optional<double> xi_lo;  // default d_min * ell
    std::optional<double> xi_hi;  // default d_max * ell
    std::optional<double> beta;   // enables the d_min*beta/2 >= eta report
    TailScale tail = TailScale::Xi;
    PRule p_rule = PRule::LogKappa;
};

struct C2Result {
    double value = 0.0;
    double xi_star = 0.0;
    std::optional<double> beta_slack;  // d_min*beta/2 - eta when beta is given
};

/// Maximum of the C3-type expression over xi in the range: 4096-point
/// geometric grid, then ternary refinement around the best grid point.
C2Result c2(const C2Inputs& in);

/// Value of the C2 objective at one xi.
double c2_objective(const C2Inputs& in, double xi);

/// C1 = max{6 eta^gamma, kappa*6(K-1)(sigma+1) a_p (e + 2 kappa^gamma) / ln 2}.
double c1(double eta, double K, double kappa, double sigma, double gamma);
double gamma_max(double sigma, double kappa);

double acc_bound_from_loss(double loss);
double eta_star_tail_bound(double epsilon, double eta_star);

struct NonuniformConstants {
    double log2_m0;     // log2 of 2^{sum c} K m0
    double log2_sigma;  // log2 of sigma / (2^{sum c} K m0)
    double kappa;
    double m0() const;     // may overflow to +inf
    double sigma() const;  // may underflow to 0
};
NonuniformConstants nonuniform_propagated_constants(const std::vector<double>& widths, double K, double m0,
                                                    double sigma, double kappa);

struct UniformConstants {
    double ell_lo;
    double ell_hi;
    double beta;
};
UniformConstants propagated_uniform_constants(double ell, double beta, double d_min, double d_max);

enum class Theorem {
    DataUniformDc,    // uniform DC on the training set, constant C2
    DeltaXUniformDc,  // uniform DC on delta X, constant C3
    DeltaXDc,         // non-uniform DC on delta X, constant C1
};
Theorem theorem_from_string(const std::string& s);
std::string to_string(Theorem t);

struct TheoremInputs {
    std::optional<double> eta, xi, delta0, delta, beta, ell, d_min, d_max, kappa, sigma, K, base;
    std::optional<double> gamma, epsilon, m0;
    std::optional<double> good_mass;  // mu(G_eta) at t0
    std::optional<double> min_delta;  // smallest delta X at t0 (bad-set emptiness)
};

struct PreconditionCheck {
    std::string name;
    bool pass = false;
    double slack = 0.0;  // positive means room to spare
};

struct StabilityReport {
    Theorem theorem = Theorem::DataUniformDc;
    std::optional<double> constant;
    std::optional<double> loss_bound;  // ln 2 * constant
    std::optional<double> acc_bound;   // 1 - constant
    std::optional<double> c1;          // only for DeltaXDc
    std::optional<double> xi_star;     // only for DataUniformDc
    std::vector<PreconditionCheck> checks;

    bool all_pass() const;
    nlohmann::json to_json() const;
};

/// Evaluates every premise of the theorem. Throws ValidationError listing
/// all missing inputs.
StabilityReport check_theorem_preconditions(Theorem which, const TheoremInputs& in);

struct SweepRow {
    double value;
    double constant;
};
/// CSV `param,value,C,loss_bound,acc_bound`.
void write_sweep_csv(const std::filesystem::path& path, const std::string& param, const std::vector<SweepRow>& rows);

}  // namespace dgstab
