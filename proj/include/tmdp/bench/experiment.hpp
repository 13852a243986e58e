#pragma once

// Experiment runners. Each run writes CSV files, SVG charts and summary.json
// into the output directory. Pass/fail flags are computed afterwards from the
// CSV files alone (check_outputs), so they can be re-derived from disk.

#include "tmdp/bench/config.hpp"
#include "tmdp/bench/csv.hpp"
#include "tmdp/bench/parallel.hpp"
#include "tmdp/bench/svg.hpp"
#include "tmdp/convexhull.hpp"
#include "tmdp/distance.hpp"
#include "tmdp/hardcase.hpp"
#include "tmdp/instances.hpp"
#include "tmdp/learners.hpp"
#include "tmdp/mdp_json.hpp"
#include "tmdp/sailing.hpp"
#include "tmdp/transfer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace tmdp::bench {

struct Criterion {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ExperimentResult {
    std::filesystem::path output_dir;
    std::vector<Criterion> criteria;

    bool passed() const {
        return !criteria.empty() &&
               std::all_of(criteria.begin(), criteria.end(), [](const auto& c) { return c.passed; });
    }
};

inline double median(std::vector<double> v) {
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

inline double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
}

namespace detail {

inline std::string fmt(double x) { return format_double(x); }

/// Error messages may contain commas or newlines; keep them on one CSV cell.
inline std::string clean(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r')
            c = ';';
    return s;
}

struct TrialError {
    std::uint64_t seed = 0;
    std::string message;
};

inline void write_errors(const std::filesystem::path& dir, const std::vector<TrialError>& errors) {
    std::ostringstream out;
    out << "seed,message\n";
    for (const auto& e : errors)
        out << e.seed << ',' << clean(e.message) << '\n';
    write_text(dir / "errors.csv", out.str());
}

inline Criterion no_errors_criterion(const std::filesystem::path& dir) {
    const CsvTable t = read_csv(dir / "errors.csv");
    return {"no_trial_errors", t.rows.empty(),
            std::to_string(t.rows.size()) + " trial(s) aborted"};
}

// ---------------------------------------------------------------- transfer

inline void run_transfer(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    const auto& c = cfg.transfer;
    const Mdp prior = c.prior_file ? load_mdp(*c.prior_file)
                                   : ranked_action_mdp(c.states, c.actions, c.gamma, c.gap,
                                                       c.instance_seed, c.single_action_states);
    save_mdp(prior, dir / "prior.json");
    const Policy prior_policy = value_iteration(prior, kPlanningTol).policy;

    const std::size_t trials = c.budget_scales.size() * cfg.seeds.size();
    std::vector<std::string> rows(trials), direct(trials);
    std::vector<std::optional<TrialError>> errors(trials);
    parallel_for(trials, cfg.workers, [&](std::size_t i) {
        const double scale = c.budget_scales[i / cfg.seeds.size()];
        const std::uint64_t seed = cfg.seeds[i % cfg.seeds.size()];
        try {
            const Mdp truth = c.truth == "prior"
                                  ? prior
                                  : perturb_within_ball(prior, c.beta, stream_seed(seed, 1));
            GenerativeModel gm(truth, stream_seed(seed, 2));
            TransferConfig tc;
            tc.beta = c.beta;
            tc.eps = c.eps;
            tc.delta = c.delta;
            tc.variant = c.variant;
            tc.learner.budget_scale = scale;
            const TransferOutcome o = transfer_learn(prior, gm, tc);
            const bool ok = is_eps_optimal(truth, o.policy, c.eps).optimal;
            std::ostringstream row;
            row << fmt(scale) << ',';
            write_outcome_csv_row(row, seed, tc, prior.gamma(), o, ok);
            rows[i] = row.str();
            direct[i] = fmt(scale) + "," + std::to_string(seed) + "," +
                        fmt(optimality_gap(truth, prior_policy, 1e-12)) + "\n";
        } catch (const std::exception& e) {
            errors[i] = TrialError{seed, e.what()};
        }
    });

    std::ostringstream out, dout;
    out << "budget_scale,";
    write_outcome_csv_header(out);
    dout << "budget_scale,seed,prior_policy_gap\n";
    std::vector<TrialError> errs;
    for (std::size_t i = 0; i < trials; ++i) {
        out << rows[i];
        dout << direct[i];
        if (errors[i])
            errs.push_back(*errors[i]);
    }
    write_text(dir / "outcomes.csv", out.str());
    write_text(dir / "direct_transfer.csv", dout.str());
    write_errors(dir, errs);
}

inline std::vector<Criterion> check_transfer(const ExperimentConfig& cfg,
                                             const std::filesystem::path& dir) {
    const auto& c = cfg.transfer;
    const CsvTable t = read_csv(dir / "outcomes.csv");
    std::vector<Criterion> out{no_errors_criterion(dir)};

    std::map<double, std::pair<double, double>> by_scale; // scale -> (successes, trials)
    bool audit = true, kept = true, singletons = true, full = true;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        auto& [wins, total] = by_scale[t.number(r, "budget_scale")];
        wins += t.number(r, "success");
        total += 1.0;
        double retained = 0.0;
        for (const auto& part : split(t.text(r, "candidate_sizes"), ';'))
            retained += std::stod(part);
        audit = audit && t.number(r, "samples_total") == t.number(r, "samples_per_pair") * retained;
        if (c.max_kept_fraction)
            kept = kept && t.number(r, "n_bar") <= *c.max_kept_fraction * t.number(r, "n_full");
        singletons = singletons && t.number(r, "n_bar") == t.number(r, "multi_action_states");
        full = full && t.number(r, "eliminated_fraction") == 0.0;
    }
    const double last_scale = c.budget_scales.back();
    const auto it = by_scale.find(last_scale);
    const double rate = it == by_scale.end() || it->second.second == 0
                            ? 0.0
                            : it->second.first / it->second.second;
    out.push_back({"success_rate", it != by_scale.end() && rate >= c.min_success_rate,
                   "eps-optimal in a fraction " + fmt(rate) + " of trials at budget_scale " +
                       fmt(last_scale) + " (need >= " + fmt(c.min_success_rate) + ")"});
    out.push_back({"budget_audit", audit && !t.rows.empty(),
                   "samples_total == samples_per_pair * sum |A^s(c_bar)| on every row"});
    if (c.max_kept_fraction)
        out.push_back({"elimination", kept && !t.rows.empty(),
                       "n_bar <= " + fmt(*c.max_kept_fraction) + " * n_full on every row"});
    if (c.expect_singletons)
        out.push_back({"singleton_sets", singletons && !t.rows.empty(),
                       "n_bar equals the number of multi-action states"});
    if (c.require_full_sets)
        out.push_back({"full_sets", full && !t.rows.empty(),
                       "no action eliminated on any row"});
    if (c.require_prior_policy_optimal) {
        const CsvTable d = read_csv(dir / "direct_transfer.csv");
        double worst = 0.0;
        for (double g : d.numbers("prior_policy_gap"))
            worst = std::max(worst, g);
        out.push_back({"prior_policy_optimal", !d.rows.empty() && worst <= 1e-8,
                       "largest value gap of the prior's optimal policy on the target: " +
                           fmt(worst)});
    }
    if (c.monotone_success) {
        bool mono = true;
        double prev = -1.0;
        std::string rates;
        for (double s : c.budget_scales) {
            const auto& [w, n] = by_scale[s];
            const double r = n > 0 ? w / n : 0.0;
            mono = mono && r >= prev;
            prev = r;
            rates += (rates.empty() ? "" : " ") + fmt(r);
        }
        out.push_back({"monotone_success", mono, "success rates by budget: " + rates});
    }
    return out;
}

// ---------------------------------------------------------------- hardcase

inline void run_hardcase(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    const auto& c = cfg.hardcase;
    const auto betas = c.betas.points();
    const auto gammas = c.gammas.points();
    const auto cells = lower_bound_curves(betas, gammas, c.eps_fraction);

    std::ostringstream params_csv, thresholds_csv;
    params_csv << "beta,gamma,gamma_min,valid,shifted_case,eps0\n";
    thresholds_csv << "beta,gamma,eps,eps0,c_bar,c_lower,violation\n";
    for (const auto& cell : cells) {
        params_csv << fmt(cell.beta) << ',' << fmt(cell.gamma) << ',' << fmt(cell.gamma_min) << ','
           << cell.valid << ',' << cell.shifted_case << ',' << fmt(cell.eps0) << '\n';
        if (cell.valid)
            thresholds_csv << fmt(cell.beta) << ',' << fmt(cell.gamma) << ',' << fmt(cell.eps) << ','
               << fmt(cell.eps0) << ',' << fmt(cell.c_bar) << ',' << fmt(cell.c_lower) << ','
               << (cell.violation.empty() ? "none" : clean(cell.violation)) << '\n';
    }
    write_text(dir / "hardcase_parameters.csv", params_csv.str());
    write_text(dir / "elimination_thresholds.csv", thresholds_csv.str());

    // Charts for a handful of discount rows.
    std::vector<Series> eps_series, c_series;
    const std::size_t stride = std::max<std::size_t>(1, gammas.size() / 5);
    for (std::size_t gi = 0; gi < gammas.size(); gi += stride) {
        Series e{"gamma=" + fmt(gammas[gi]), {}, {}, false};
        Series up{"C_bar g=" + fmt(gammas[gi]), {}, {}, false};
        Series lo{"C_low g=" + fmt(gammas[gi]), {}, {}, true};
        for (const auto& cell : cells)
            if (cell.gamma == gammas[gi] && cell.valid) {
                e.x.push_back(cell.beta);
                e.y.push_back(cell.eps0);
                up.x.push_back(cell.beta);
                up.y.push_back(cell.c_bar);
                lo.x.push_back(cell.beta);
                lo.y.push_back(cell.c_lower);
            }
        if (e.x.empty())
            continue;
        eps_series.push_back(std::move(e));
        c_series.push_back(std::move(up));
        c_series.push_back(std::move(lo));
    }
    write_text(dir / "hardcase_eps0.svg", line_chart("eps0 with p0k at its floor", "beta", "eps0",
                                                 eps_series));
    write_text(dir / "elimination_thresholds.svg",
               line_chart("Upper (solid) and lower (dashed) thresholds", "beta", "threshold",
                          c_series));

    std::ostringstream chk;
    chk << "instance,beta,gamma,eps,hypotheses,ball_membership,separation,min_margin,two_eps,"
           "lk,lk_closed_form,lk_direct\n";
    std::vector<TrialError> errs;
    for (std::size_t i = 0; i < c.instances.size(); ++i) {
        const auto& inst = c.instances[i];
        try {
            HardCaseParams p;
            p.K = inst.p0.size();
            p.L = inst.p0.empty() ? 0 : inst.p0[0].size();
            p.beta = inst.beta;
            p.gamma = inst.gamma;
            p.eps = inst.eps;
            p.p0 = inst.p0;
            const HardCaseFamily fam = build_family(p);
            write_family_manifest(fam, dir / "families" / ("instance_" + std::to_string(i)));
            const bool ball = verify_ball_membership(fam);
            const SeparationReport sep = separation_check(fam);
            double min_margin = std::numeric_limits<double>::infinity();
            for (const auto& m : sep.margins)
                if (m.hypothesis > 0)
                    min_margin = std::min(min_margin, m.margin);
            std::string lk, lk_t, lk_d;
            for (std::size_t k = 0; k < p.K; ++k) {
                const std::string sep_char = k ? ";" : "";
                lk += sep_char + std::to_string(fam.derived.Lk[k]);
                lk_t += sep_char + std::to_string(hardcase_set_size(fam, k, fam.derived.c_lower[k]));
                lk_d += sep_char +
                        std::to_string(hardcase_set_size(fam, k, fam.derived.c_lower_direct[k]));
            }
            // With no M_{k,l} the margin check is vacuous; record 2 eps itself.
            if (!std::isfinite(min_margin))
                min_margin = 2.0 * p.eps;
            chk << i << ',' << fmt(p.beta) << ',' << fmt(p.gamma) << ',' << fmt(p.eps) << ','
                << fam.num_hypotheses() << ',' << ball << ',' << sep.passed << ','
                << fmt(min_margin) << ',' << fmt(2.0 * p.eps) << ',' << lk << ',' << lk_t << ','
                << lk_d << '\n';
        } catch (const std::exception& e) {
            errs.push_back({i, e.what()});
        }
    }
    write_text(dir / "hardcase_checks.csv", chk.str());
    write_errors(dir, errs);
}

inline std::vector<Criterion> check_hardcase(const ExperimentConfig& cfg,
                                             const std::filesystem::path& dir) {
    std::vector<Criterion> out{no_errors_criterion(dir)};
    const CsvTable params_csv = read_csv(dir / "hardcase_parameters.csv");
    const CsvTable thresholds_csv = read_csv(dir / "elimination_thresholds.csv");

    std::size_t violations = 0, ordered = 0;
    for (std::size_t r = 0; r < thresholds_csv.rows.size(); ++r) {
        if (thresholds_csv.text(r, "violation") != "none")
            ++violations;
        if (thresholds_csv.number(r, "c_lower") <= thresholds_csv.number(r, "c_bar"))
            ++ordered;
    }
    out.push_back({"domain", violations == 0 && !thresholds_csv.rows.empty(),
                   std::to_string(violations) + " violation(s) over " +
                       std::to_string(thresholds_csv.rows.size()) + " valid cells"});
    out.push_back({"lower_below_upper", ordered == thresholds_csv.rows.size() && !thresholds_csv.rows.empty(),
                   std::to_string(ordered) + " of " + std::to_string(thresholds_csv.rows.size()) +
                       " valid cells have c_lower <= c_bar"});

    std::map<double, std::pair<std::vector<double>, std::vector<double>>> rows;
    for (std::size_t r = 0; r < params_csv.rows.size(); ++r)
        if (params_csv.number(r, "valid") == 1.0) {
            auto& [b, e] = rows[params_csv.number(r, "gamma")];
            b.push_back(params_csv.number(r, "beta"));
            e.push_back(params_csv.number(r, "eps0"));
        }
    double worst = 1.0;
    std::size_t tested = 0;
    for (const auto& [g, be] : rows)
        if (be.first.size() >= 3) {
            worst = std::min(worst, pearson(be.first, be.second));
            ++tested;
        }
    out.push_back({"eps0_linear_in_beta", tested > 0 && worst >= cfg.hardcase.min_correlation,
                   "smallest per-gamma correlation " + fmt(worst) + " over " +
                       std::to_string(tested) + " rows"});

    if (!cfg.hardcase.instances.empty()) {
        const CsvTable chk = read_csv(dir / "hardcase_checks.csv");
        bool ok = chk.rows.size() == cfg.hardcase.instances.size();
        for (std::size_t r = 0; r < chk.rows.size(); ++r) {
            ok = ok && chk.number(r, "ball_membership") == 1.0 &&
                 chk.number(r, "separation") == 1.0 &&
                 chk.number(r, "min_margin") >= chk.number(r, "two_eps") - 1e-9 &&
                 chk.text(r, "lk") == chk.text(r, "lk_closed_form") &&
                 chk.text(r, "lk") == chk.text(r, "lk_direct");
        }
        out.push_back({"hardcase_instances", ok,
                       "ball membership, separation margins and both L_k thresholds on " +
                           std::to_string(chk.rows.size()) + " instance(s)"});
    }
    return out;
}

// ---------------------------------------------------------------- warmstart

inline void run_warmstart(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    const auto& c = cfg.warmstart;
    const Mdp prior = make_sailing(c.sailing, c.instance_seed);
    save_mdp(prior, dir / "prior.json");
    const QFunction prior_q = value_iteration(prior, kPlanningTol).q;
    const auto checkpoints = regular_checkpoints(c.sweeps, c.checkpoint_every);

    struct Trial {
        std::vector<CurvePoint> warm, scratch;
        double warm_gap = 0.0, scratch_gap = 0.0;
    };
    const std::size_t n = cfg.seeds.size();
    std::vector<Trial> trials(n);
    std::vector<std::optional<TrialError>> errors(n);
    parallel_for(n, cfg.workers, [&](std::size_t i) {
        const std::uint64_t seed = cfg.seeds[i];
        try {
            const Mdp truth = perturb_within_ball(prior, c.beta, stream_seed(seed, 1));
            const ValueFunction vstar = value_iteration(truth, kPlanningTol).values;
            LearnerConfig lc;
            lc.max_iters = c.sweeps;
            lc.step_h = c.step_h;
            const EvalSchedule schedule{checkpoints, exact_evaluator(truth)};
            auto final_gap = [&](const LearningCurve& curve) {
                const ValueFunction v = policy_evaluation_exact(truth, greedy_policy(curve.final_q));
                double worst = 0.0;
                for (StateId s = 0; s < v.size(); ++s)
                    worst = std::max(worst, vstar[s] - v[s]);
                return worst;
            };
            GenerativeModel warm_gm(truth, stream_seed(seed, 2));
            const QFunction init(truth.layout_ptr(), truth.gamma(), prior_q.values());
            const LearningCurve warm = q_learning(warm_gm, init, lc, schedule);
            GenerativeModel scratch_gm(truth, stream_seed(seed, 2));
            const LearningCurve scratch = q_learning(
                scratch_gm, QFunction::zeros(truth.layout_ptr(), truth.gamma()), lc, schedule);
            trials[i].warm = warm.points;
            trials[i].scratch = scratch.points;
            trials[i].warm_gap = final_gap(warm);
            trials[i].scratch_gap = final_gap(scratch);
        } catch (const std::exception& e) {
            errors[i] = TrialError{seed, e.what()};
        }
    });

    std::ostringstream tr;
    tr << "seed,warm_first,scratch_first,warm_final,scratch_final,warm_final_gap,"
          "scratch_final_gap,eps\n";
    std::vector<TrialError> errs;
    std::vector<CurvePoint> mean_warm, mean_scratch;
    std::size_t good = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (errors[i]) {
            errs.push_back(*errors[i]);
            continue;
        }
        const auto& t = trials[i];
        tr << cfg.seeds[i] << ',' << fmt(t.warm.front().mean_value) << ','
           << fmt(t.scratch.front().mean_value) << ',' << fmt(t.warm.back().mean_value) << ','
           << fmt(t.scratch.back().mean_value) << ',' << fmt(t.warm_gap) << ','
           << fmt(t.scratch_gap) << ',' << fmt(c.eps) << '\n';
        auto accumulate_curve = [](std::vector<CurvePoint>& acc, const std::vector<CurvePoint>& add) {
            if (acc.empty()) {
                acc = add;
                return;
            }
            for (std::size_t k = 0; k < acc.size(); ++k) {
                acc[k].min_value += add[k].min_value;
                acc[k].mean_value += add[k].mean_value;
            }
        };
        accumulate_curve(mean_warm, t.warm);
        accumulate_curve(mean_scratch, t.scratch);
        ++good;
    }
    for (auto* curve : {&mean_warm, &mean_scratch})
        for (auto& p : *curve) {
            p.min_value /= static_cast<double>(good);
            p.mean_value /= static_cast<double>(good);
        }
    write_text(dir / "warmstart_trials.csv", tr.str());
    std::ostringstream cw, cs;
    write_curve_csv(cw, mean_warm);
    write_curve_csv(cs, mean_scratch);
    write_text(dir / "curve_warm.csv", cw.str());
    write_text(dir / "curve_scratch.csv", cs.str());

    Series sw{"warm start", {}, {}, false}, ss{"from scratch", {}, {}, true};
    for (const auto& p : mean_warm) {
        sw.x.push_back(static_cast<double>(p.samples_used));
        sw.y.push_back(p.mean_value);
    }
    for (const auto& p : mean_scratch) {
        ss.x.push_back(static_cast<double>(p.samples_used));
        ss.y.push_back(p.mean_value);
    }
    write_text(dir / "warmstart.svg",
               line_chart("Q-learning on the target model", "samples",
                          "mean greedy-policy value", {sw, ss}));
    write_errors(dir, errs);
}

inline std::vector<Criterion> check_warmstart(const ExperimentConfig& cfg,
                                              const std::filesystem::path& dir) {
    const auto& c = cfg.warmstart;
    std::vector<Criterion> out{no_errors_criterion(dir)};
    const CsvTable t = read_csv(dir / "warmstart_trials.csv");
    double jump = 0.0, final_ok = 0.0;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (t.number(r, "warm_first") > t.number(r, "scratch_first"))
            jump += 1.0;
        const double limit = c.final_gap_multiplier * t.number(r, "eps");
        if (t.number(r, "warm_final_gap") <= limit && t.number(r, "scratch_final_gap") <= limit)
            final_ok += 1.0;
    }
    const double n = static_cast<double>(t.rows.size());
    const double jf = n > 0 ? jump / n : 0.0, ff = n > 0 ? final_ok / n : 0.0;
    out.push_back({"jumpstart", n > 0 && jf >= c.min_jumpstart_fraction,
                   "warm start ahead at the first checkpoint for a fraction " + fmt(jf) + " of seeds"});
    out.push_back({"final_near_optimal", n > 0 && ff >= c.min_final_fraction,
                   "both final greedy policies within " + fmt(c.final_gap_multiplier) +
                       " eps of V* for a fraction " + fmt(ff) + " of seeds"});
    return out;
}

// ---------------------------------------------------------------- hull

inline std::vector<Mdp> hull_bases(const HullSweepConfig& c) {
    std::vector<Mdp> bases;
    for (std::size_t k = 0; k < c.bases; ++k)
        bases.push_back(random_uniform_mdp(c.states, c.actions, c.gamma,
                                           stream_seed(c.instance_seed, k)));
    return bases;
}

inline void run_hull(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    const auto& c = cfg.hull;
    const HullModel hull = select_anchor_pairs(hull_bases(c));
    write_hull_manifest(hull, dir / "hull");
    const std::size_t K = hull.size();

    std::ostringstream nf;
    nf << "trial,error\n";
    for (std::size_t t = 0; t < c.noise_free_trials; ++t) {
        Rng rng(stream_seed(c.instance_seed, 1000 + t));
        const auto coeffs = random_distribution(rng, K);
        const auto est = estimate_coefficients_exact(hull, mix(hull.bases, coeffs));
        nf << t << ',' << fmt(l2_distance(est, coeffs)) << '\n';
    }
    write_text(dir / "hull_noise_free.csv", nf.str());

    const Mdp fixed_target = mix(hull.bases, c.coefficients);
    const std::size_t n_seeds = cfg.seeds.size();
    const std::size_t sampled = c.sample_sizes.size() * n_seeds;
    std::vector<std::string> srows(sampled), trows(n_seeds);
    std::vector<std::optional<TrialError>> errors(sampled + n_seeds);
    parallel_for(sampled + n_seeds, cfg.workers, [&](std::size_t i) {
        const std::uint64_t seed = cfg.seeds[i % n_seeds];
        try {
            if (i < sampled) {
                const std::uint64_t L = c.sample_sizes[i / n_seeds];
                GenerativeModel gm(fixed_target, stream_seed(seed, 2 * L));
                const auto est = estimate_coefficients(hull, gm, L, stream_seed(seed, 2 * L + 1));
                srows[i] = std::to_string(seed) + "," + std::to_string(L) + "," +
                           fmt(l2_distance(est.coefficients, c.coefficients)) + "\n";
                return;
            }
            Rng rng(stream_seed(seed, 7));
            const auto coeffs = random_distribution(rng, K);
            const Mdp target = mix(hull.bases, coeffs);
            GenerativeModel gm(target, stream_seed(seed, 8));
            const auto res = hull_transfer(hull, gm, c.eps, c.delta, c.sample_scale,
                                           stream_seed(seed, 9));
            const double alpha = l2_distance(res.estimate.coefficients, coeffs);
            const double gap = optimality_gap(target, res.policy, 1e-12);
            trows[i - sampled] = std::to_string(seed) + "," + std::to_string(res.estimate.samples) +
                                 "," + fmt(alpha) + "," + fmt(gap) + "," +
                                 fmt(hull_gap_bound(c.eps, alpha, K, c.gamma)) + "\n";
        } catch (const std::exception& e) {
            errors[i] = TrialError{seed, e.what()};
        }
    });

    std::ostringstream so, to;
    so << "seed,L,error\n";
    to << "seed,L,coef_error,policy_gap,bound\n";
    for (const auto& r : srows)
        so << r;
    for (const auto& r : trows)
        to << r;
    write_text(dir / "hull_sampling.csv", so.str());
    write_text(dir / "hull_trials.csv", to.str());
    std::vector<TrialError> errs;
    for (const auto& e : errors)
        if (e)
            errs.push_back(*e);
    write_errors(dir, errs);

    Series med{"median coefficient error", {}, {}, false};
    const CsvTable st = read_csv(dir / "hull_sampling.csv");
    for (std::uint64_t L : c.sample_sizes) {
        std::vector<double> errs_l;
        for (std::size_t r = 0; r < st.rows.size(); ++r)
            if (st.number(r, "L") == static_cast<double>(L))
                errs_l.push_back(st.number(r, "error"));
        med.x.push_back(std::log10(static_cast<double>(L)));
        med.y.push_back(median(errs_l));
    }
    write_text(dir / "hull_error.svg",
               line_chart("Coefficient error against samples", "log10 L", "median ||C_hat - C||",
                          {med}));
}

inline std::vector<Criterion> check_hull(const ExperimentConfig& cfg,
                                         const std::filesystem::path& dir) {
    const auto& c = cfg.hull;
    std::vector<Criterion> out{no_errors_criterion(dir)};

    const CsvTable nf = read_csv(dir / "hull_noise_free.csv");
    double worst = 0.0;
    for (double e : nf.numbers("error"))
        worst = std::max(worst, e);
    out.push_back({"noise_free_recovery", nf.rows.size() == c.noise_free_trials &&
                                              worst <= c.noise_free_tol,
                   "largest error " + fmt(worst) + " over " + std::to_string(nf.rows.size()) +
                       " points"});

    const CsvTable st = read_csv(dir / "hull_sampling.csv");
    std::vector<double> medians;
    for (std::uint64_t L : c.sample_sizes) {
        std::vector<double> errs;
        for (std::size_t r = 0; r < st.rows.size(); ++r)
            if (st.number(r, "L") == static_cast<double>(L))
                errs.push_back(st.number(r, "error"));
        medians.push_back(median(errs));
    }
    bool ratios_ok = medians.size() >= 2;
    std::string ratios;
    for (std::size_t i = 1; i < medians.size(); ++i) {
        const double ratio = medians[i] / medians[i - 1];
        ratios_ok = ratios_ok && ratio >= c.min_ratio && ratio <= c.max_ratio;
        ratios += (ratios.empty() ? "" : " ") + fmt(ratio);
    }
    out.push_back({"error_scaling", ratios_ok, "successive median ratios: " + ratios});

    const CsvTable tt = read_csv(dir / "hull_trials.csv");
    std::size_t held = 0;
    for (std::size_t r = 0; r < tt.rows.size(); ++r)
        if (tt.number(r, "policy_gap") <= tt.number(r, "bound"))
            ++held;
    out.push_back({"gap_bound", !tt.rows.empty() && held == tt.rows.size(),
                   std::to_string(held) + " of " + std::to_string(tt.rows.size()) +
                       " trials within eps/2 + 6 alpha sqrt(K)/(1-gamma)^2"});
    return out;
}

} // namespace detail

/// Pass/fail flags recomputed from the files in `dir`.
inline std::vector<Criterion> check_outputs(const ExperimentConfig& cfg,
                                            const std::filesystem::path& dir) {
    switch (cfg.kind) {
    case ExperimentKind::TransferSweep: return detail::check_transfer(cfg, dir);
    case ExperimentKind::HardcaseFigures: return detail::check_hardcase(cfg, dir);
    case ExperimentKind::Warmstart: return detail::check_warmstart(cfg, dir);
    case ExperimentKind::HullSweep: return detail::check_hull(cfg, dir);
    }
    return {};
}

inline void write_summary(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                          const std::vector<Criterion>& criteria) {
    nlohmann::ordered_json j;
    j["name"] = cfg.name;
    j["kind"] = to_string(cfg.kind);
    j["seeds"] = cfg.seeds.size();
    bool all = !criteria.empty();
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& c : criteria) {
        list.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        all = all && c.passed;
    }
    j["passed"] = all;
    j["criteria"] = std::move(list);
    write_text(dir / "summary.json", j.dump(2) + "\n");
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    ExperimentResult result;
    result.output_dir = cfg.resolved_output_dir();
    std::filesystem::create_directories(result.output_dir);
    switch (cfg.kind) {
    case ExperimentKind::TransferSweep: detail::run_transfer(cfg, result.output_dir); break;
    case ExperimentKind::HardcaseFigures: detail::run_hardcase(cfg, result.output_dir); break;
    case ExperimentKind::Warmstart: detail::run_warmstart(cfg, result.output_dir); break;
    case ExperimentKind::HullSweep: detail::run_hull(cfg, result.output_dir); break;
    }
    result.criteria = check_outputs(cfg, result.output_dir);
    write_summary(cfg, result.output_dir, result.criteria);
    return result;
}

} // namespace tmdp::bench
