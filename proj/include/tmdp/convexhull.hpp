#pragma once

// Transfer when the target lies in the convex hull of K known base models:
// pick K anchor pairs whose stacked transition rows identify the mixture,
// estimate the mixing weights from samples at the anchors, then plan on the
// mixed model.

#include "tmdp/mdp.hpp"
#include "tmdp/mdp_json.hpp"
#include "tmdp/planning.hpp"
#include "tmdp/rng.hpp"
#include "tmdp/sampling.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <utility>
#include <vector>

namespace tmdp {

inline constexpr double kRankTolerance = 1e-10;

struct AnchorPair {
    StateId state = 0;
    ActionId action = 0;
    friend bool operator==(const AnchorPair&, const AnchorPair&) = default;
};

struct HullModel {
    std::vector<Mdp> bases;
    std::vector<AnchorPair> anchors;
    /// (K*S) x K; column k stacks base k's anchor rows, each divided by K.
    Eigen::MatrixXd u_trun;
    double lambda_min = 0.0;
    double lambda_max = 0.0;

    std::size_t size() const noexcept { return bases.size(); }
    std::size_t num_states() const { return bases.front().num_states(); }
    double gamma() const { return bases.front().gamma(); }
};

/// Numerical rank by singular values above kRankTolerance.
inline std::size_t numerical_rank(const Eigen::MatrixXd& m) {
    if (m.size() == 0)
        return 0;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    std::size_t r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > kRankTolerance)
            ++r;
    return r;
}

namespace detail {

/// S x K block: column k is p_k(.|pair).
inline Eigen::MatrixXd anchor_block(const std::vector<Mdp>& bases, std::size_t pair) {
    const std::size_t n = bases.front().num_states();
    Eigen::MatrixXd block(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(bases.size()));
    for (std::size_t k = 0; k < bases.size(); ++k) {
        const auto row = bases[k].transition(pair);
        for (std::size_t t = 0; t < n; ++t)
            block(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = row[t];
    }
    return block;
}

inline Eigen::MatrixXd stack_blocks(const std::vector<Mdp>& bases,
                                    const std::vector<std::size_t>& pairs) {
    const auto n = static_cast<Eigen::Index>(bases.front().num_states());
    Eigen::MatrixXd out(n * static_cast<Eigen::Index>(pairs.size()),
                        static_cast<Eigen::Index>(bases.size()));
    for (std::size_t i = 0; i < pairs.size(); ++i)
        out.middleRows(static_cast<Eigen::Index>(i) * n, n) = anchor_block(bases, pairs[i]);
    return out;
}

} // namespace detail

/// Greedy rank augmentation over pairs in index order. Pairs that raise the
/// rank of the running stack are kept until the rank reaches K; if fewer than
/// K pairs were needed, the kept pairs are repeated to make K anchors.
inline HullModel select_anchor_pairs(std::vector<Mdp> bases) {
    if (bases.empty())
        throw AssumptionViolation("at least one base model is required");
    for (std::size_t k = 1; k < bases.size(); ++k)
        require_compatible(bases[0], bases[k]);
    const std::size_t K = bases.size();
    const Layout& layout = bases[0].layout();

    std::vector<std::size_t> chosen;
    std::size_t rank = 0;
    for (std::size_t pair = 0; pair < layout.num_pairs() && rank < K; ++pair) {
        auto trial = chosen;
        trial.push_back(pair);
        const std::size_t r = numerical_rank(detail::stack_blocks(bases, trial));
        if (r > rank) {
            chosen = std::move(trial);
            rank = r;
        }
    }
    if (rank < K)
        throw AssumptionViolation("stacked base transitions have column rank " +
                                  std::to_string(rank) + " < K = " + std::to_string(K) +
                                  "; full column rank is required");
    for (std::size_t i = 0; chosen.size() < K; ++i)
        chosen.push_back(chosen[i]);

    HullModel hull;
    hull.u_trun = detail::stack_blocks(bases, chosen) / static_cast<double>(K);
    for (std::size_t pair : chosen)
        hull.anchors.push_back({layout.state_of_pair(pair), layout.action_of_pair(pair)});
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hull.u_trun.transpose() *
                                                             hull.u_trun);
    hull.lambda_min = eig.eigenvalues().minCoeff();
    hull.lambda_max = eig.eigenvalues().maxCoeff();
    hull.bases = std::move(bases);
    return hull;
}

/// Euclidean projection onto the probability simplex.
inline std::vector<double> project_simplex(const std::vector<double>& v) {
    if (v.empty())
        return {};
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0, theta = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        cumulative += u[i];
        const double t = (cumulative - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0)
            theta = t;
    }
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = std::max(v[i] - theta, 0.0);
    return out;
}

struct CoefficientEstimate {
    std::vector<double> coefficients;
    /// Normalised hit vector of length K*S.
    std::vector<double> p_hat;
    std::uint64_t samples = 0;
};

/// Least-squares weights for a stacked anchor vector, then simplex projection.
inline std::vector<double> solve_coefficients(const HullModel& hull, const std::vector<double>& p) {
    const Eigen::Map<const Eigen::VectorXd> rhs(p.data(), static_cast<Eigen::Index>(p.size()));
    const Eigen::VectorXd c = hull.u_trun.colPivHouseholderQr().solve(rhs);
    return project_simplex(std::vector<double>(c.data(), c.data() + c.size()));
}

/// Stacked anchor rows of an explicit target, each divided by K.
inline std::vector<double> exact_anchor_vector(const HullModel& hull, const Mdp& target) {
    const std::size_t K = hull.size(), n = hull.num_states();
    std::vector<double> p(K * n);
    for (std::size_t j = 0; j < K; ++j) {
        const auto row = target.transition(hull.anchors[j].state, hull.anchors[j].action);
        for (std::size_t t = 0; t < n; ++t)
            p[j * n + t] = row[t] / static_cast<double>(K);
    }
    return p;
}

/// Noise-free estimate from the target's exact anchor rows.
inline std::vector<double> estimate_coefficients_exact(const HullModel& hull, const Mdp& target) {
    return solve_coefficients(hull, exact_anchor_vector(hull, target));
}

/// Draws `samples` transitions, each at a uniformly chosen anchor (choice
/// stream seeded by `seed`), and estimates the mixing weights.
inline CoefficientEstimate estimate_coefficients(const HullModel& hull, GenerativeModel& gm,
                                                 std::uint64_t samples, std::uint64_t seed) {
    if (samples == 0)
        throw ParameterDomainError("sample count must be at least 1");
    const std::size_t K = hull.size(), n = hull.num_states();
    CoefficientEstimate est;
    est.p_hat.assign(K * n, 0.0);
    Rng rng(seed);
    for (std::uint64_t i = 0; i < samples; ++i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(K));
        const Transition tr = gm.sample(hull.anchors[j].state, hull.anchors[j].action);
        est.p_hat[j * n + tr.next] += 1.0;
    }
    for (double& x : est.p_hat)
        x /= static_cast<double>(samples);
    est.coefficients = solve_coefficients(hull, est.p_hat);
    est.samples = samples;
    return est;
}

/// sum_k c_k M^k for kernels and rewards alike.
inline Mdp mix(const std::vector<Mdp>& bases, const std::vector<double>& c) {
    if (bases.empty() || c.size() != bases.size())
        throw ModelError("mixing weights must match the number of bases");
    std::vector<double> p(bases[0].transition_table().size(), 0.0), r(p.size(), 0.0);
    for (std::size_t k = 0; k < bases.size(); ++k) {
        require_compatible(bases[0], bases[k]);
        const auto& pk = bases[k].transition_table();
        const auto& rk = bases[k].reward_table();
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] += c[k] * pk[i];
            r[i] += c[k] * rk[i];
        }
    }
    for (double& x : r)
        x = std::clamp(x, 0.0, 1.0);
    const std::size_t n = bases[0].num_states();
    for (std::size_t pair = 0; pair < bases[0].num_pairs(); ++pair) {
        double sum = 0.0;
        for (std::size_t t = 0; t < n; ++t)
            sum += p[pair * n + t];
        for (std::size_t t = 0; t < n; ++t)
            p[pair * n + t] /= sum;
    }
    return Mdp(bases[0].layout_ptr(), std::move(p), std::move(r), bases[0].gamma());
}

/// ceil(432 K lambda_max / (eps^2 (1-gamma)^4 lambda_min^2) log((1+K S)/delta)).
inline double theoretical_sample_count(const HullModel& hull, double eps, double delta) {
    const double K = static_cast<double>(hull.size());
    const double S = static_cast<double>(hull.num_states());
    const double h = 1.0 - hull.gamma();
    return std::ceil(432.0 * K * hull.lambda_max /
                     (eps * eps * h * h * h * h * hull.lambda_min * hull.lambda_min) *
                     std::log((1.0 + K * S) / delta));
}

/// eps/2 + 6 alpha sqrt(K)/(1-gamma)^2, the value-gap guarantee for a
/// coefficient error alpha.
inline double hull_gap_bound(double eps, double alpha, std::size_t K, double gamma) {
    const double h = 1.0 - gamma;
    return eps / 2.0 + 6.0 * alpha * std::sqrt(static_cast<double>(K)) / (h * h);
}

struct HullTransferResult {
    CoefficientEstimate estimate;
    Policy policy;
    SampleBudgetReport report;
};

/// Estimate the weights with scale * theoretical samples (at least one), mix
/// the bases and plan on the mixture.
inline HullTransferResult hull_transfer(const HullModel& hull, GenerativeModel& gm, double eps,
                                        double delta, double scale, std::uint64_t seed) {
    if (!(eps > 0.0))
        throw ParameterDomainError("eps must be positive");
    if (!(delta > 0.0 && delta < 1.0))
        throw ParameterDomainError("delta must lie in (0,1)");
    if (!(scale > 0.0))
        throw ParameterDomainError("sample scale must be positive");
    if (!(gm.layout() == hull.bases.front().layout()) || gm.gamma() != hull.gamma())
        throw IncompatibleModels("target differs from the base models in structure or discount");
    const double n = std::max(1.0, std::ceil(scale * theoretical_sample_count(hull, eps, delta)));
    HullTransferResult out;
    out.estimate = estimate_coefficients(hull, gm, static_cast<std::uint64_t>(n), seed);
    const Mdp surrogate = mix(hull.bases, out.estimate.coefficients);
    out.policy = value_iteration(surrogate, kPlanningTol).policy;
    out.report = gm.report();
    return out;
}

/// Base models as JSON files plus manifest.json with anchors and eigenvalues.
inline void write_hull_manifest(const HullModel& hull, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json j;
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < hull.size(); ++k) {
        const std::string file = "base_" + std::to_string(k) + ".json";
        save_mdp(hull.bases[k], dir / file);
        files.push_back(file);
    }
    j["bases"] = std::move(files);
    nlohmann::ordered_json anchors = nlohmann::ordered_json::array();
    for (const auto& a : hull.anchors)
        anchors.push_back({a.state, a.action});
    j["anchors"] = std::move(anchors);
    j["lambda_min"] = hull.lambda_min;
    j["lambda_max"] = hull.lambda_max;
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    out << j.dump(2) << '\n';
}

} // namespace tmdp
