#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qmig/empirical.hpp"
#include "qmig/estimators.hpp"
#include "qmig/synthdata.hpp"

// End-to-end analysis pipeline over a household panel: welfare prediction
// for conflict areas, stochastic-dominance comparison of observed versus
// counterfactual expenditure, migration-on-risk-aversion probits over
// nested origin samples, a difference-in-differences confound check, and
// attrition diagnostics.  Every step reads CSV inputs, writes CSV outputs
// into a common directory, and is deterministic given the config and seed.

namespace qmig {

struct DominanceSettings {
    std::size_t grid = 512;       // max grid points for CDF comparisons
    std::size_t replicates = 500; // bootstrap replicates for bands
    double level = 0.95;          // band coverage
};

struct PipelineConfig {
    // [pipeline] -- IO, step toggles, global switches
    std::string input_panel;  // empty: generate a synthetic panel in memory
    std::string input_lgas;   // empty: sibling lgas.csv of input_panel
    std::string input_agents; // optional preference truth (not used by steps)
    std::string out_dir = "out";
    std::uint64_t seed = 42;
    bool run_generate = true; // run-all only: write panel/lgas/agents first
    bool run_step1 = true;
    bool run_step2 = true;
    bool run_step3 = true;
    bool run_step4 = true;
    bool run_attrition = true;
    bool weighted = true; // survey weights in regressions and ECDFs
    // [generate]
    GeneratorConfig generate;
    // [dominance]
    DominanceSettings dominance;
    // [did] -- minimum origin conflict class counting as exposed (1 = some
    // or always, 2 = always only)
    int did_min_class = 1;
    // [step1] -- include the dwelling-quality block in the welfare model
    bool dwelling_terms = true;

    void validate() const; // throws std::invalid_argument
};

// Applies one dotted override like "generate.n_households=8000"; unknown
// keys or unparsable values throw std::invalid_argument.
void apply_config_option(PipelineConfig& config, const std::string& key,
                         const std::string& value);

// Flat key = value file with [section] headers; '#' starts a comment.
PipelineConfig parse_config_text(const std::string& text);
PipelineConfig load_config_file(const std::string& path);

// Writes panel.csv, lgas.csv, agents.csv for the configured synthetic world.
// Returns the file names written (relative to out_dir).
std::vector<std::string> generate_outputs(const PipelineConfig& config);

struct Step1Result {
    ModelFit fit;                    // welfare regression on non-conflict rows
    std::size_t n_fit = 0;           // rows used in the fit
    std::size_t n_predicted = 0;     // conflict rows predicted
    std::vector<std::string> files;  // outputs written, relative to out_dir
};

// Fits log expenditure on household covariates plus state fixed effects
// over rows observed in non-conflict LGAs, predicts the counterfactual
// level (with smearing retransformation) for rows in conflict LGAs, and
// writes table4.csv + counterfactual.csv.
Step1Result step1_welfare(const PipelineConfig& config);

struct Step2Result {
    DominanceReport report;   // a = observed, b = counterfactual
    std::string qm_prediction;
    std::vector<std::string> files;
};

// Compares the final-wave observed expenditure distribution in conflict
// LGAs against the counterfactual predictions from step 1 (bootstrap bands
// included) and derives the quantile-preference reading of the curves;
// writes figure6.csv.  Requires counterfactual.csv in out_dir.
Step2Result step2_dominance(const PipelineConfig& config);

// Preference reading of a dominance report comparing observed (a) against
// counterfactual (b): who would leave, who would stay.  Pure function of
// the report.
std::string qm_prediction_text(const DominanceReport& report);

struct Step3Model {
    std::string sample;  // "all", "some_conflict", "always_conflict"
    bool ok = false;
    std::string error;   // set when the fit failed (separation, empty, ...)
    ModelFit fit;        // valid when ok
};

struct Step3Result {
    std::vector<Step3Model> models;
    std::vector<std::string> files;
};

// Probit of final-wave migration status (1 = household never migrated,
// 0 = household migrated) on the risk-aversion answer plus controls, over
// three nested origin samples: everyone, origins with at least some
// conflict, origins always in conflict.  A failing column is reported in
// its slot without aborting the others.  Writes table6.csv.
Step3Result step3_migration_models(const PipelineConfig& config);

struct Step4Result {
    ModelFit base;            // outcome on treat, group, interaction
    ModelFit with_covariates; // same plus household controls
    DidCells cells;           // weighted cell means underlying `base`
    std::vector<std::string> files;
};

// Difference-in-differences of the risk-aversion answer on conflict
// exposure (origin class) x never-migrated, without and with covariates;
// writes table7.csv.
Step4Result step4_did(const PipelineConfig& config);

struct AttritionMeanRow {
    std::string variable;
    MeanTest weighted;
    MeanTest unweighted;
};

struct AttritionResult {
    std::vector<AttritionMeanRow> means;   // attrited (0) vs surviving (1)
    DominanceReport expenditure;           // predicted expenditure, full vs survivors
    DominanceReport risk;                  // predicted P(risk-averse), full vs survivors
    std::size_t n_attrited = 0;
    std::size_t n_survivors = 0;
    std::vector<std::string> files;
};

// Attrition diagnostics: per-covariate mean-equality F tests between
// attrited and surviving households, plus CDF comparisons of model
// predictions (baseline expenditure; probability of reporting risk
// aversion) between the full baseline sample and the survivors.  Writes
// table3.csv, figure4.csv, figure5_risk.csv.
AttritionResult attrition_checks(const PipelineConfig& config);

struct RunAllResult {
    std::vector<std::string> artifacts; // every file written, relative names
    std::string manifest_file;          // "manifest.csv"
};

// Orchestrates generate (optional) -> step1 -> step2 -> step3 -> step4 ->
// attrition checks per the config toggles, then writes manifest.csv listing
// every artifact with its byte count and FNV-1a 64 digest.  A failing step
// aborts with a step-named diagnostic; outputs of earlier steps remain on
// disk.
RunAllResult run_all(const PipelineConfig& config);

} // namespace qmig
