#include "tmdp/bench/experiment.hpp"
#include "tmdp/tmdp.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace tmdp;

std::vector<std::vector<double>> parse_rows(const std::string& text) {
    std::vector<std::vector<double>> rows;
    for (const auto& row : bench::split(text, ';')) {
        rows.emplace_back();
        for (const auto& cell : bench::split(row, ','))
            rows.back().push_back(std::stod(cell));
    }
    return rows;
}

void print_criteria(const std::vector<bench::Criterion>& criteria) {
    for (const auto& c : criteria)
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
}

int cmd_run(const std::string& path, const std::string& output_dir) {
    bench::ExperimentConfig cfg = bench::load_config(path);
    if (!output_dir.empty())
        cfg.output_dir = output_dir;
    const auto result = bench::run_experiment(cfg);
    std::cout << cfg.name << " (" << bench::to_string(cfg.kind) << ") -> "
              << result.output_dir.string() << '\n';
    print_criteria(result.criteria);
    return result.passed() ? 0 : 1;
}

int cmd_validate(const std::string& path) {
    try {
        const Mdp mdp = load_mdp(path);
        std::cout << path << ": ok, " << mdp.num_states() << " states, " << mdp.num_pairs()
                  << " state-action pairs, " << mdp.layout().multi_action_states().size()
                  << " multi-action states, gamma " << mdp.gamma() << '\n';
        return 0;
    } catch (const ModelFileError& e) {
        for (const auto& d : e.diagnostics())
            std::cerr << path << ':' << d.line << ": " << d.message << '\n';
        return 1;
    } catch (const ModelError& e) {
        std::cerr << path << ": " << e.what() << '\n';
        return 1;
    }
}

int cmd_hardcase(double beta, double gamma, double eps, const std::string& p0,
                 const std::string& out_dir) {
    HardCaseParams p;
    p.beta = beta;
    p.gamma = gamma;
    p.eps = eps;
    p.p0 = parse_rows(p0);
    p.K = p.p0.size();
    p.L = p.p0.empty() ? 0 : p.p0[0].size();
    const HardCaseFamily fam = build_family(p);
    const auto& d = fam.derived;
    std::cout << "eps0 " << d.eps0 << "\nc_bar " << d.c_bar << '\n';
    for (std::size_t k = 0; k < p.K; ++k)
        std::cout << "x" << k << ": p0k " << d.p0k[k] << " alpha1 " << d.alpha1[k] << " alpha2 "
                  << d.alpha2[k] << " Lk " << d.Lk[k] << " c_lower " << d.c_lower[k]
                  << " c_lower_direct " << d.c_lower_direct[k] << '\n';
    const bool ball = verify_ball_membership(fam);
    const auto sep = separation_check(fam);
    bool lk_ok = true;
    for (std::size_t k = 0; k < p.K; ++k)
        lk_ok = lk_ok && hardcase_set_size(fam, k, d.c_lower[k]) == d.Lk[k] &&
                hardcase_set_size(fam, k, d.c_lower_direct[k]) == d.Lk[k];
    std::cout << "hypotheses " << fam.num_hypotheses() << '\n'
              << (ball ? "PASS" : "FAIL") << " ball membership\n"
              << (sep.passed ? "PASS" : "FAIL") << " separation\n"
              << (lk_ok ? "PASS" : "FAIL") << " L_k thresholds agree\n";
    if (!out_dir.empty()) {
        write_family_manifest(fam, out_dir);
        std::cout << "wrote " << out_dir << "/manifest.json\n";
    }
    return ball && sep.passed && lk_ok ? 0 : 1;
}

int cmd_hull(const std::vector<std::string>& base_files, const std::string& target_file,
             const std::vector<double>& coefficients, double eps, double delta, double scale,
             std::uint64_t seed, const std::string& transcript, const std::string& out_dir) {
    std::vector<Mdp> bases;
    for (const auto& f : base_files)
        bases.push_back(load_mdp(f));
    const HullModel hull = select_anchor_pairs(std::move(bases));
    std::cout << "anchors";
    for (const auto& a : hull.anchors)
        std::cout << " (" << a.state << ',' << a.action << ')';
    std::cout << "\nlambda_min " << hull.lambda_min << " lambda_max " << hull.lambda_max << '\n';
    if (!out_dir.empty())
        write_hull_manifest(hull, out_dir);

    std::optional<Mdp> target;
    if (!target_file.empty())
        target = load_mdp(target_file);
    else if (!coefficients.empty())
        target = mix(hull.bases, coefficients);
    else
        throw ParameterDomainError("hull needs --target or --coefficients");

    GenerativeModel gm(*target, seed);
    gm.enable_transcript(!transcript.empty());
    const auto res = hull_transfer(hull, gm, eps, delta, scale, stream_seed(seed, 1));
    std::cout << "samples " << res.estimate.samples << "\ncoefficients";
    for (double c : res.estimate.coefficients)
        std::cout << ' ' << c;
    const double gap = optimality_gap(*target, res.policy, 1e-12);
    std::cout << "\npolicy gap on target " << gap << '\n';
    if (!coefficients.empty()) {
        const double alpha = bench::l2_distance(res.estimate.coefficients, coefficients);
        const double bound = hull_gap_bound(eps, alpha, hull.size(), hull.gamma());
        std::cout << "coefficient error " << alpha << "\nbound " << bound << '\n'
                  << (gap <= bound ? "PASS" : "FAIL") << " gap bound\n";
        if (gap > bound)
            return 1;
    }
    if (!transcript.empty()) {
        std::ofstream out(transcript, std::ios::binary);
        gm.write_transcript_csv(out);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transfer reinforcement learning experiments on tabular MDPs"};
    app.require_subcommand(1);

    std::string config, output_dir;
    auto* run = app.add_subcommand("run", "Run an experiment config and check its criteria");
    run->add_option("config", config, "Experiment TOML file")->required()->check(CLI::ExistingFile);
    run->add_option("--output-dir", output_dir, "Override the configured output directory");

    std::string model;
    auto* validate = app.add_subcommand("validate", "Validate an MDP JSON file");
    validate->add_option("mdp", model, "MDP JSON file")->required();

    double beta = 0.2, gamma = 0.9, eps = 0.01;
    std::string p0, hc_out;
    auto* hard = app.add_subcommand("hardcase", "Build and check a lower-bound family");
    hard->add_option("--beta", beta, "TV radius")->required();
    hard->add_option("--gamma", gamma, "Discount factor")->required();
    hard->add_option("--eps", eps, "Accuracy, below eps0")->required();
    hard->add_option("--p0", p0, "Prior self-loop probabilities, rows ';'-separated, e.g. "
                                 "\"0.97,0.9,0.87,0.7\"")
        ->required();
    hard->add_option("--out", hc_out, "Write model files and manifest.json here");

    std::vector<std::string> base_files;
    std::string target_file, transcript, hull_out;
    std::vector<double> coefficients;
    double hull_eps = 0.1, delta = 0.05, scale = 1e-4;
    std::uint64_t seed = 1;
    auto* hull = app.add_subcommand("hull", "Convex-hull transfer against a target model");
    hull->add_option("--bases", base_files, "Base MDP JSON files")->required();
    hull->add_option("--target", target_file, "Target MDP JSON file");
    hull->add_option("--coefficients", coefficients, "Mix the target from the bases");
    hull->add_option("--eps", hull_eps, "Accuracy");
    hull->add_option("--delta", delta, "Failure probability");
    hull->add_option("--scale", scale, "Multiplier on the theoretical sample count");
    hull->add_option("--seed", seed, "Oracle seed");
    hull->add_option("--transcript", transcript, "Write every oracle draw to this CSV");
    hull->add_option("--out", hull_out, "Write base files and manifest.json here");

    SailingInstance sail;
    std::uint64_t sail_seed = 1;
    std::string sail_out;
    auto* sailing = app.add_subcommand("sailing", "Write a sailing gridworld as MDP JSON");
    sailing->add_option("--width", sail.width);
    sailing->add_option("--height", sail.height);
    sailing->add_option("--winds", sail.wind_directions);
    sailing->add_option("--wind-change", sail.wind_change);
    sailing->add_option("--gamma", sail.gamma);
    sailing->add_option("--seed", sail_seed);
    sailing->add_option("--out", sail_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run)
            return cmd_run(config, output_dir);
        if (*validate)
            return cmd_validate(model);
        if (*hard)
            return cmd_hardcase(beta, gamma, eps, p0, hc_out);
        if (*hull)
            return cmd_hull(base_files, target_file, coefficients, hull_eps, delta, scale, seed,
                            transcript, hull_out);
        if (*sailing) {
            sail.goal_x = sail.width - 1;
            sail.goal_y = sail.height - 1;
            save_mdp(make_sailing(sail, sail_seed), sail_out);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
