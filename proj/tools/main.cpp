// Command-line driver for the synthetic-panel analysis pipeline.
//
// Subcommands mirror the pipeline stages: `generate` writes a synthetic
// panel; `step1`..`step4` and `attrition` run one analysis stage against a
// panel (generated in memory when no --input is given); `run-all` chains
// everything and writes a digest manifest.  Exit codes: 0 success, 2 bad
// configuration or input, 3 estimation/runtime failure.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qmig/pipeline.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::string input;
    std::string out_dir;
    std::string seed; // string so "unset" is distinguishable from 0
    bool no_dwelling = false;
    bool unweighted = false;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--config", opt.config_path, "config file (key = value with [sections])");
    cmd->add_option("--input", opt.input, "panel CSV to analyze (default: generate in memory)");
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--seed", opt.seed, "master seed (unsigned 64-bit)");
    cmd->add_flag("--no-dwelling", opt.no_dwelling,
                  "drop the dwelling-quality block from the welfare model");
    cmd->add_flag("--unweighted", opt.unweighted,
                  "ignore survey weights in all estimators and ECDFs");
    cmd->add_option("--opt", opt.overrides, "override a config key, e.g. --opt generate.n_lgas=60")
        ->take_all();
}

qmig::PipelineConfig build_config(const CliOptions& opt) {
    qmig::PipelineConfig config;
    if (!opt.config_path.empty()) config = qmig::load_config_file(opt.config_path);
    for (const auto& kv : opt.overrides) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("--opt expects key=value, got '" + kv + "'");
        }
        qmig::apply_config_option(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!opt.input.empty()) qmig::apply_config_option(config, "pipeline.input_panel", opt.input);
    if (!opt.out_dir.empty()) qmig::apply_config_option(config, "pipeline.out_dir", opt.out_dir);
    if (!opt.seed.empty()) qmig::apply_config_option(config, "pipeline.seed", opt.seed);
    if (opt.no_dwelling) config.dwelling_terms = false;
    if (opt.unweighted) config.weighted = false;
    config.validate();
    return config;
}

void print_files(const std::vector<std::string>& files, const std::string& out_dir) {
    for (const auto& f : files) std::printf("wrote %s/%s\n", out_dir.c_str(), f.c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantile-preference migration analysis pipeline"};
    app.require_subcommand(1);

    CliOptions opt;
    CLI::App* generate = app.add_subcommand("generate", "write a synthetic panel dataset");
    CLI::App* step1 = app.add_subcommand("step1", "welfare model and counterfactual predictions");
    CLI::App* step2 = app.add_subcommand("step2", "observed vs counterfactual CDF dominance");
    CLI::App* step3 = app.add_subcommand("step3", "migration-on-risk-aversion probits");
    CLI::App* step4 = app.add_subcommand("step4", "conflict x migration difference-in-differences");
    CLI::App* attrition = app.add_subcommand("attrition", "attrition diagnostics");
    CLI::App* run_all = app.add_subcommand("run-all", "run every stage and write a manifest");
    for (CLI::App* cmd : {generate, step1, step2, step3, step4, attrition, run_all}) {
        add_common(cmd, opt);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        qmig::PipelineConfig config = build_config(opt);
        if (generate->parsed()) {
            print_files(qmig::generate_outputs(config), config.out_dir);
        } else if (step1->parsed()) {
            qmig::Step1Result r = qmig::step1_welfare(config);
            std::printf("welfare fit: n=%zu predicted=%zu r_squared=%.4f\n", r.n_fit,
                        r.n_predicted, r.fit.r_squared);
            print_files(r.files, config.out_dir);
        } else if (step2->parsed()) {
            qmig::Step2Result r = qmig::step2_dominance(config);
            std::printf("verdict=%s crossings=%zu prediction=%s\n",
                        qmig::to_string(r.report.verdict).c_str(), r.report.crossings.size(),
                        r.qm_prediction.c_str());
            print_files(r.files, config.out_dir);
        } else if (step3->parsed()) {
            qmig::Step3Result r = qmig::step3_migration_models(config);
            for (const auto& m : r.models) {
                if (m.ok) {
                    std::printf("%s: risk_averse=%.4f (z=%.2f) n=%zu\n", m.sample.c_str(),
                                m.fit.coef_of("risk_averse"), m.fit.stat_of("risk_averse"),
                                m.fit.n_obs);
                } else {
                    std::printf("%s: failed (%s)\n", m.sample.c_str(), m.error.c_str());
                }
            }
            print_files(r.files, config.out_dir);
        } else if (step4->parsed()) {
            qmig::Step4Result r = qmig::step4_did(config);
            const std::string did = "conflict_exposed:not_migrated";
            std::printf("theta=%.4f (z=%.2f) with_covariates=%.4f (z=%.2f)\n",
                        r.base.coef_of(did), r.base.stat_of(did),
                        r.with_covariates.coef_of(did), r.with_covariates.stat_of(did));
            print_files(r.files, config.out_dir);
        } else if (attrition->parsed()) {
            qmig::AttritionResult r = qmig::attrition_checks(config);
            std::printf("attrited=%zu survivors=%zu expenditure=%s risk=%s\n", r.n_attrited,
                        r.n_survivors, qmig::to_string(r.expenditure.verdict).c_str(),
                        qmig::to_string(r.risk.verdict).c_str());
            print_files(r.files, config.out_dir);
        } else if (run_all->parsed()) {
            qmig::RunAllResult r = qmig::run_all(config);
            print_files(r.artifacts, config.out_dir);
            std::printf("wrote %s/%s\n", config.out_dir.c_str(), r.manifest_file.c_str());
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
