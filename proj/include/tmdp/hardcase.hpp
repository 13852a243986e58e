#pragma once

// Lower-bound hard-case family.
//
// State layout for K X-states and L actions per X-state:
//   x_k        = k                      (L actions, labels 0..L-1)
//   y1(k, l)   = K + k*L + l            (one action, label 0)
//   y2(k, l)   = K + K*L + k*L + l      (one action, label 0)
// Action l at x_k moves to y1(k, l) deterministically. y1(k, l) stays with
// probability p(k, l) and otherwise falls into the absorbing y2(k, l).
// Reward is 1 exactly on transitions into a y1 state, so
// Q(x_k, l) = 1 / (1 - gamma p(k, l)).

#include "tmdp/candidates.hpp"
#include "tmdp/distance.hpp"
#include "tmdp/mdp.hpp"
#include "tmdp/mdp_json.hpp"
#include "tmdp/planning.hpp"
#include "tmdp/sampling.hpp"
#include "tmdp/transfer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace tmdp {

/// (4 gamma - 1) / (3 gamma), the floor of p0^k.
inline double hardcase_floor(double gamma) { return (4.0 * gamma - 1.0) / (3.0 * gamma); }

/// Lower end of the admissible discount range for radius beta.
inline double hardcase_gamma_min(double beta) { return std::max(0.4, 1.0 - 10.0 * beta); }

inline bool hardcase_gamma_valid(double beta, double gamma) {
    return beta > 0.0 && beta < 2.0 && gamma > hardcase_gamma_min(beta) && gamma < 1.0;
}

/// beta gamma (1 - p) / (16 (1 - gamma p)^2) for one X-state.
inline double hardcase_eps0_term(double beta, double gamma, double p0k) {
    const double d = 1.0 - gamma * p0k;
    return beta * gamma * (1.0 - p0k) / (16.0 * d * d);
}

/// Solves 1/(1-gamma(p+a)) - 1/(1-gamma p) = 2 eps for a.
inline double hardcase_alpha1(double gamma, double p0k, double eps) {
    return (1.0 - 1.0 / (1.0 / (1.0 - gamma * p0k) + 2.0 * eps)) / gamma - p0k;
}

inline double hardcase_alpha2(double gamma, double p0k, double eps) {
    const double d = 1.0 - gamma * p0k;
    return 4.0 * d * d * eps / gamma;
}

/// Lower threshold in the closed two-case form, with v the prior's optimal
/// value at the X-state.
inline double hardcase_c_lower(double beta, double gamma, double eps, double v) {
    const double h = 1.0 - gamma;
    if (beta / 2.0 + hardcase_floor(gamma) >= 1.0)
        return v - 9.0 / (12.0 * h - 64.0 * h * h * eps + 4.5 * beta * gamma);
    const double w = 1.0 + gamma * beta * v / 2.0;
    return v - v * v / (v + beta * gamma * v * v + 4.0 * eps * w * w);
}

/// Lower threshold read directly off the construction:
/// v - 1/(1 - gamma (p0k + alpha2 - beta/2)).
inline double hardcase_c_lower_direct(double beta, double gamma, double p0k, double alpha2,
                                      double v) {
    return v - 1.0 / (1.0 - gamma * (p0k + alpha2 - beta / 2.0));
}

struct HardCaseParams {
    std::size_t K = 1;
    std::size_t L = 2;
    double beta = 0.2;
    double gamma = 0.9;
    /// K rows of L self-loop probabilities, each row nonincreasing.
    std::vector<std::vector<double>> p0;
    double eps = 0.01;

    /// Structural checks that do not depend on eps0.
    void validate_shape() const {
        if (K == 0 || L == 0)
            throw ParameterDomainError("K and L must be positive");
        if (!(beta > 0.0 && beta < 2.0))
            throw ParameterDomainError("beta must lie in (0,2)");
        if (!hardcase_gamma_valid(beta, gamma))
            throw ParameterDomainError("gamma must lie in (max{0.4, 1-10 beta}, 1) = (" +
                                       format_double(hardcase_gamma_min(beta)) + ", 1)");
        if (p0.size() != K)
            throw ParameterDomainError("p0 must have K rows");
        const double floor = hardcase_floor(gamma);
        for (std::size_t k = 0; k < K; ++k) {
            const auto& row = p0[k];
            if (row.size() != L)
                throw ParameterDomainError("p0 row " + std::to_string(k) + " must have L entries");
            if (!(row[0] < 1.0))
                throw ParameterDomainError("p0(x_k, a_1) must be below 1 (row " +
                                           std::to_string(k) + ")");
            if (!(row[0] > floor))
                throw ParameterDomainError("p0(x_k, a_1) must exceed (4 gamma - 1)/(3 gamma) = " +
                                           format_double(floor) + " (row " + std::to_string(k) +
                                           ")");
            for (std::size_t l = 0; l < L; ++l) {
                if (!(row[l] >= 0.0))
                    throw ParameterDomainError("p0 entries must be nonnegative");
                if (l > 0 && row[l] > row[l - 1])
                    throw ParameterDomainError("p0 row " + std::to_string(k) +
                                               " must be nonincreasing");
            }
        }
    }
};

struct HardCaseDerived {
    std::vector<double> p0k;
    double eps0 = 0.0;
    std::vector<double> alpha1;
    std::vector<double> alpha2;
    std::vector<std::size_t> Lk;
    /// Prior optimal value at each X-state, 1/(1 - gamma p0(x_k, a_1)).
    std::vector<double> v_prior;
    /// Two-case closed form per X-state.
    std::vector<double> c_lower;
    /// v - 1/(1 - gamma(p0k + alpha2 - beta/2)) per X-state.
    std::vector<double> c_lower_direct;
    double c_bar = 0.0;
};

/// Derived constants of the family. Throws ParameterDomainError when eps is
/// not in (0, eps0) or when a defining relation fails to hold numerically.
inline HardCaseDerived derive_params(const HardCaseParams& p) {
    p.validate_shape();
    const double g = p.gamma;
    HardCaseDerived d;
    d.eps0 = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < p.K; ++k) {
        const double p0k = std::max(p.p0[k][0] - p.beta / 2.0, hardcase_floor(g));
        d.p0k.push_back(p0k);
        d.eps0 = std::min(d.eps0, hardcase_eps0_term(p.beta, g, p0k));
    }
    if (!(p.eps > 0.0))
        throw ParameterDomainError("eps must be positive");
    if (!(p.eps < d.eps0))
        throw ParameterDomainError("eps = " + format_double(p.eps) + " must be below eps0 = " +
                                   format_double(d.eps0));

    for (std::size_t k = 0; k < p.K; ++k) {
        const double p0k = d.p0k[k];
        const double a1 = hardcase_alpha1(g, p0k, p.eps);
        const double a2 = hardcase_alpha2(g, p0k, p.eps);
        const double q0 = 1.0 / (1.0 - g * p0k);
        const double q1 = 1.0 / (1.0 - g * (p0k + a1));
        const double q2 = 1.0 / (1.0 - g * (p0k + a2));
        if (std::abs(q1 - q0 - 2.0 * p.eps) > 1e-10)
            throw ParameterDomainError("alpha1 residual exceeds 1e-10 at row " + std::to_string(k));
        if (!(q2 - q1 >= 2.0 * p.eps - 1e-10))
            throw ParameterDomainError("alpha2 separation below 2 eps at row " + std::to_string(k));
        if (!(0.0 < a1 && a1 < a2 && a2 < p.beta / 2.0 && p0k + a2 < 1.0))
            throw ParameterDomainError("0 < alpha1 < alpha2 < beta/2 violated at row " +
                                       std::to_string(k));
        d.alpha1.push_back(a1);
        d.alpha2.push_back(a2);

        std::size_t count = 0;
        for (double v : p.p0[k])
            if (std::abs(p0k + a2 - v) <= p.beta / 2.0)
                ++count;
        d.Lk.push_back(count);

        const double v = 1.0 / (1.0 - g * p.p0[k][0]);
        d.v_prior.push_back(v);
        d.c_lower.push_back(hardcase_c_lower(p.beta, g, p.eps, v));
        d.c_lower_direct.push_back(hardcase_c_lower_direct(p.beta, g, p0k, a2, v));
    }
    d.c_bar = compute_c_bar(p.beta, g, p.eps);
    return d;
}

struct HardCaseHypothesis {
    std::size_t k = 0;
    /// Action label whose value is raised, 1 <= l < Lk.
    std::size_t l = 0;
    Mdp mdp;
};

struct HardCaseFamily {
    HardCaseParams params;
    HardCaseDerived derived;
    Mdp prior;
    Mdp hypothesis_m1;
    std::vector<HardCaseHypothesis> hypotheses_kl;

    std::size_t num_hypotheses() const { return 1 + hypotheses_kl.size(); }

    /// Hypothesis by index: 0 is M1, i >= 1 is hypotheses_kl[i-1].
    const Mdp& hypothesis(std::size_t i) const {
        return i == 0 ? hypothesis_m1 : hypotheses_kl.at(i - 1).mdp;
    }
};

namespace detail {

inline Layout hardcase_layout(std::size_t K, std::size_t L) {
    std::vector<std::vector<ActionId>> actions(K + 2 * K * L);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t l = 0; l < L; ++l)
            actions[k].push_back(l);
    for (std::size_t s = K; s < actions.size(); ++s)
        actions[s] = {0};
    return Layout(std::move(actions));
}

inline Mdp hardcase_mdp(const LayoutPtr& layout, std::size_t K, std::size_t L, double gamma,
                        const std::vector<std::vector<double>>& p) {
    const std::size_t n = layout->num_states();
    std::vector<double> trans(layout->num_pairs() * n, 0.0), rew(trans.size(), 0.0);
    auto y1 = [&](std::size_t k, std::size_t l) { return K + k * L + l; };
    auto y2 = [&](std::size_t k, std::size_t l) { return K + K * L + k * L + l; };
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t l = 0; l < L; ++l) {
            const std::size_t px = layout->pair_index(k, l);
            trans[px * n + y1(k, l)] = 1.0;
            rew[px * n + y1(k, l)] = 1.0;
            const std::size_t py1 = layout->pair_index(y1(k, l), 0);
            trans[py1 * n + y1(k, l)] = p[k][l];
            trans[py1 * n + y2(k, l)] = 1.0 - p[k][l];
            rew[py1 * n + y1(k, l)] = 1.0;
            const std::size_t py2 = layout->pair_index(y2(k, l), 0);
            trans[py2 * n + y2(k, l)] = 1.0;
        }
    return Mdp(layout, std::move(trans), std::move(rew), gamma);
}

} // namespace detail

/// Self-loop probabilities of M1 given derived constants.
inline std::vector<std::vector<double>> hardcase_m1_probs(const HardCaseParams& p,
                                                          const HardCaseDerived& d) {
    std::vector<std::vector<double>> out = p.p0;
    for (std::size_t k = 0; k < p.K; ++k) {
        out[k][0] = d.p0k[k] + d.alpha1[k];
        for (std::size_t l = 1; l < d.Lk[k]; ++l)
            out[k][l] = d.p0k[k];
    }
    return out;
}

/// Builds the prior, M1 and every M_{k,l} from explicitly supplied derived
/// constants (which need not satisfy the usual relations).
inline HardCaseFamily build_family(const HardCaseParams& p, const HardCaseDerived& d) {
    p.validate_shape();
    const auto layout = std::make_shared<const Layout>(detail::hardcase_layout(p.K, p.L));
    const auto m1 = hardcase_m1_probs(p, d);
    HardCaseFamily fam{p, d, detail::hardcase_mdp(layout, p.K, p.L, p.gamma, p.p0),
                       detail::hardcase_mdp(layout, p.K, p.L, p.gamma, m1), {}};
    for (std::size_t k = 0; k < p.K; ++k)
        for (std::size_t l = 1; l < d.Lk[k]; ++l) {
            auto probs = m1;
            probs[k][l] = d.p0k[k] + d.alpha2[k];
            fam.hypotheses_kl.push_back(
                {k, l, detail::hardcase_mdp(layout, p.K, p.L, p.gamma, probs)});
        }
    return fam;
}

inline HardCaseFamily build_family(const HardCaseParams& p) {
    return build_family(p, derive_params(p));
}

/// Whether every hypothesis lies within TV distance beta of the prior.
inline bool verify_ball_membership(const HardCaseFamily& fam) {
    for (std::size_t i = 0; i < fam.num_hypotheses(); ++i)
        if (!(tv_distance(fam.prior, fam.hypothesis(i)) <= fam.params.beta))
            return false;
    return true;
}

struct SeparationMargin {
    /// 0 for M1, otherwise index into hypotheses_kl plus one.
    std::size_t hypothesis = 0;
    std::size_t k = 0;
    /// Expected best action at x_k.
    std::size_t best = 0;
    std::size_t argmax = 0;
    /// Q(x_k, best) minus the best other action value.
    double margin = 0.0;
    bool passed = false;
};

struct SeparationReport {
    std::vector<SeparationMargin> margins;
    bool passed = true;
};

/// Exact checks that each hypothesis singles out its intended best action.
///
/// M1: a_1 is the argmax at every x_k; the runner-up gap is exactly 2 eps when
/// Lk >= 2 and at least 2 eps otherwise. M_{k,l}: a_l is the argmax at x_k and
/// leads a_1 by at least 2 eps.
inline SeparationReport separation_check(const HardCaseFamily& fam, double tol = 1e-9) {
    const auto& p = fam.params;
    const double two_eps = 2.0 * p.eps;
    SeparationReport report;
    auto add = [&](SeparationMargin m) {
        report.passed = report.passed && m.passed;
        report.margins.push_back(m);
    };

    const PlanResult m1 = value_iteration(fam.hypothesis_m1, 1e-12);
    for (std::size_t k = 0; k < p.K; ++k) {
        const auto row = m1.q.row(k);
        double runner = -std::numeric_limits<double>::infinity();
        for (std::size_t l = 1; l < row.size(); ++l)
            runner = std::max(runner, row[l]);
        SeparationMargin m{0, k, 0, m1.q.argmax(k), p.L > 1 ? row[0] - runner : 0.0, false};
        if (p.L == 1)
            m.passed = m.argmax == 0;
        else if (fam.derived.Lk[k] >= 2)
            m.passed = m.argmax == 0 && std::abs(m.margin - two_eps) <= tol;
        else
            m.passed = m.argmax == 0 && m.margin >= two_eps - tol;
        add(m);
    }

    for (std::size_t i = 0; i < fam.hypotheses_kl.size(); ++i) {
        const auto& h = fam.hypotheses_kl[i];
        const PlanResult plan = value_iteration(h.mdp, 1e-12);
        const auto row = plan.q.row(h.k);
        double others = -std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < row.size(); ++l)
            if (l != h.l)
                others = std::max(others, row[l]);
        SeparationMargin m{i + 1, h.k, h.l, plan.q.argmax(h.k), row[h.l] - row[0], false};
        m.passed = m.argmax == h.l && row[h.l] > others && m.margin >= two_eps - tol;
        add(m);
    }
    return report;
}

/// Number of actions at x_k kept by the prior's candidate set at `threshold`.
inline std::size_t hardcase_set_size(const HardCaseFamily& fam, std::size_t k, double threshold) {
    const PlanResult plan = value_iteration(fam.prior, 1e-12);
    return candidate_set(plan.q, threshold).size(k);
}

/// Oracle over hypothesis i (0 is M1).
inline GenerativeModel hardcase_oracle(const HardCaseFamily& fam, std::size_t i,
                                       std::uint64_t seed) {
    return GenerativeModel(fam.hypothesis(i), seed);
}

/// Writes every model as JSON plus manifest.json with the derived constants.
inline void write_family_manifest(const HardCaseFamily& fam, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& p = fam.params;
    const auto& d = fam.derived;
    nlohmann::ordered_json j;
    j["K"] = p.K;
    j["L"] = p.L;
    j["beta"] = p.beta;
    j["gamma"] = p.gamma;
    j["eps"] = p.eps;
    j["p0"] = p.p0;
    j["derived"] = {{"p0k", d.p0k},       {"eps0", d.eps0},
                    {"alpha1", d.alpha1}, {"alpha2", d.alpha2},
                    {"Lk", d.Lk},         {"v_prior", d.v_prior},
                    {"c_lower", d.c_lower}, {"c_lower_direct", d.c_lower_direct},
                    {"c_bar", d.c_bar}};
    save_mdp(fam.prior, dir / "prior.json");
    j["prior"] = "prior.json";
    save_mdp(fam.hypothesis_m1, dir / "hypothesis_m1.json");
    nlohmann::ordered_json hyps = nlohmann::ordered_json::array();
    hyps.push_back({{"name", "M1"}, {"file", "hypothesis_m1.json"}});
    for (const auto& h : fam.hypotheses_kl) {
        const std::string file =
            "hypothesis_k" + std::to_string(h.k) + "_l" + std::to_string(h.l) + ".json";
        save_mdp(h.mdp, dir / file);
        hyps.push_back({{"name", "M_k_l"}, {"k", h.k}, {"l", h.l}, {"file", file}});
    }
    j["hypotheses"] = std::move(hyps);
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    out << j.dump(2) << '\n';
}

/// One cell of the parameter-relation grid, with p0^k pinned to its floor
/// (4 gamma - 1)/(3 gamma) and p0(x_k, a_1) = min{floor + beta/2, 1}.
struct LowerBoundCell {
    double beta = 0.0;
    double gamma = 0.0;
    double gamma_min = 0.0;
    bool valid = false;
    /// beta/2 + floor < 1, so p0^k = p0(x_k, a_1) - beta/2 is attainable.
    bool shifted_case = false;
    double eps0 = 0.0;
    double eps = 0.0;
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double c_bar = 0.0;
    double c_lower = 0.0;
    /// Empty when the cell is valid and every derived relation holds.
    std::string violation;
};

inline LowerBoundCell lower_bound_cell(double beta, double gamma, double eps_fraction) {
    LowerBoundCell c;
    c.beta = beta;
    c.gamma = gamma;
    c.gamma_min = hardcase_gamma_min(beta);
    c.valid = hardcase_gamma_valid(beta, gamma);
    const double floor = hardcase_floor(gamma);
    c.shifted_case = beta / 2.0 + floor < 1.0;
    if (!c.valid)
        return c;
    const double p0k = floor;
    c.eps0 = hardcase_eps0_term(beta, gamma, p0k);
    c.eps = eps_fraction * c.eps0;
    c.alpha1 = hardcase_alpha1(gamma, p0k, c.eps);
    c.alpha2 = hardcase_alpha2(gamma, p0k, c.eps);
    const double top = std::min(floor + beta / 2.0, 1.0);
    const double v = 1.0 / (1.0 - gamma * top);
    c.c_bar = compute_c_bar(beta, gamma, c.eps);
    c.c_lower = hardcase_c_lower_direct(beta, gamma, p0k, c.alpha2, v);

    const double q0 = 1.0 / (1.0 - gamma * p0k);
    const double q1 = 1.0 / (1.0 - gamma * (p0k + c.alpha1));
    const double q2 = 1.0 / (1.0 - gamma * (p0k + c.alpha2));
    if (!(c.eps > 0.0 && c.eps < c.eps0))
        c.violation = "eps outside (0, eps0)";
    else if (!(0.0 < c.alpha1 && c.alpha1 < c.alpha2 && c.alpha2 < beta / 2.0))
        c.violation = "alpha ordering";
    else if (!(p0k + c.alpha2 < 1.0))
        c.violation = "p0k + alpha2 >= 1";
    else if (std::abs(q1 - q0 - 2.0 * c.eps) > 1e-10 || !(q2 - q1 >= 2.0 * c.eps))
        c.violation = "alpha relations";
    else if (!std::isfinite(c.c_lower) || !(c.c_lower <= c.c_bar))
        c.violation = "c_lower > c_bar";
    return c;
}

/// Evaluates every (beta, gamma) pair; cells are ordered gamma-major.
inline std::vector<LowerBoundCell> lower_bound_curves(const std::vector<double>& betas,
                                                      const std::vector<double>& gammas,
                                                      double eps_fraction) {
    std::vector<LowerBoundCell> out;
    out.reserve(betas.size() * gammas.size());
    for (double g : gammas)
        for (double b : betas)
            out.push_back(lower_bound_cell(b, g, eps_fraction));
    return out;
}

} // namespace tmdp
