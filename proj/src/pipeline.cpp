#include "qmig/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "qmig/csv.hpp"
#include "qmig/design.hpp"
#include "qmig/rng.hpp"

namespace fs = std::filesystem;

namespace qmig {

namespace {

// Per-step bootstrap seed tags.
constexpr std::uint64_t kTagFigure6 = 0xf6;
constexpr std::uint64_t kTagFigure4 = 0xf4;
constexpr std::uint64_t kTagFigure5 = 0xf5;

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw std::invalid_argument("option " + key + ": expected a boolean, got '" + value + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    if (value.empty() || value[0] == '-') {
        throw std::invalid_argument("option " + key + ": expected an unsigned integer");
    }
    errno = 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (errno != 0 || end == value.c_str() || *end != '\0') {
        throw std::invalid_argument("option " + key + ": cannot parse '" + value + "'");
    }
    return v;
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        return csv::parse_double(value);
    } catch (const std::exception&) {
        throw std::invalid_argument("option " + key + ": cannot parse '" + value + "'");
    }
}

int parse_i(const std::string& key, const std::string& value) {
    try {
        return static_cast<int>(csv::parse_int(value));
    } catch (const std::exception&) {
        throw std::invalid_argument("option " + key + ": cannot parse '" + value + "'");
    }
}

} // namespace

void PipelineConfig::validate() const {
    generate.validate();
    if (out_dir.empty()) throw std::invalid_argument("pipeline: out_dir must be set");
    if (dominance.grid < 2) throw std::invalid_argument("pipeline: dominance grid must be >= 2");
    if (dominance.replicates < 100) {
        throw std::invalid_argument("pipeline: dominance replicates must be >= 100");
    }
    if (!(dominance.level > 0.0 && dominance.level < 1.0)) {
        throw std::invalid_argument("pipeline: dominance level must lie in (0, 1)");
    }
    if (did_min_class != 1 && did_min_class != 2) {
        throw std::invalid_argument("pipeline: did min_class must be 1 or 2");
    }
}

void apply_config_option(PipelineConfig& c, const std::string& key, const std::string& value) {
    GeneratorConfig& g = c.generate;
    if (key == "pipeline.input_panel") c.input_panel = value;
    else if (key == "pipeline.input_lgas") c.input_lgas = value;
    else if (key == "pipeline.input_agents") c.input_agents = value;
    else if (key == "pipeline.out_dir") c.out_dir = value;
    else if (key == "pipeline.seed") c.seed = parse_u64(key, value);
    else if (key == "pipeline.generate") c.run_generate = parse_bool(key, value);
    else if (key == "pipeline.step1") c.run_step1 = parse_bool(key, value);
    else if (key == "pipeline.step2") c.run_step2 = parse_bool(key, value);
    else if (key == "pipeline.step3") c.run_step3 = parse_bool(key, value);
    else if (key == "pipeline.step4") c.run_step4 = parse_bool(key, value);
    else if (key == "pipeline.attrition") c.run_attrition = parse_bool(key, value);
    else if (key == "pipeline.weighted") c.weighted = parse_bool(key, value);
    else if (key == "generate.n_households") g.n_households = parse_i(key, value);
    else if (key == "generate.n_lgas") g.n_lgas = parse_i(key, value);
    else if (key == "generate.n_states") g.n_states = parse_i(key, value);
    else if (key == "generate.share_some_conflict") g.share_some_conflict = parse_real(key, value);
    else if (key == "generate.share_always_conflict") g.share_always_conflict = parse_real(key, value);
    else if (key == "generate.state_effect_sd") g.state_effect_sd = parse_real(key, value);
    else if (key == "generate.noise_sd") g.noise_sd = parse_real(key, value);
    else if (key == "generate.conflict_penalty") g.conflict_penalty = parse_real(key, value);
    else if (key == "generate.conflict_noise_sd") g.conflict_noise_sd = parse_real(key, value);
    else if (key == "generate.weight_log_sd") g.weight_log_sd = parse_real(key, value);
    else if (key == "generate.tau_maxmin_share") g.tau_maxmin_share = parse_real(key, value);
    else if (key == "generate.tau_maxmax_share") g.tau_maxmax_share = parse_real(key, value);
    else if (key == "generate.threshold_tau") g.threshold_tau = parse_real(key, value);
    else if (key == "generate.risk_noise_rate") g.risk_noise_rate = parse_real(key, value);
    else if (key == "generate.conflict_ra_effect") g.conflict_ra_effect = parse_real(key, value);
    else if (key == "generate.background_migration_rate") g.background_migration_rate = parse_real(key, value);
    else if (key == "generate.random_migration_rate") g.random_migration_rate = parse_real(key, value);
    else if (key == "generate.move_friction") g.move_friction = parse_real(key, value);
    else if (key == "generate.within_state_share") g.within_state_share = parse_real(key, value);
    else if (key == "generate.lottery_atoms") g.lottery_atoms = parse_i(key, value);
    else if (key == "generate.attrition_rate") g.attrition_rate = parse_real(key, value);
    else if (key == "generate.tracked_rate") g.tracked_rate = parse_real(key, value);
    else if (key == "generate.migration_mode") {
        if (value == "quantile") g.migration_mode = MigrationMode::QuantileDecision;
        else if (value == "coin") g.migration_mode = MigrationMode::RandomCoin;
        else throw std::invalid_argument("option " + key + ": expected quantile|coin");
    } else if (key == "generate.attrition_mode") {
        if (value == "random") g.attrition_mode = AttritionMode::Random;
        else if (value == "poorest_decile") g.attrition_mode = AttritionMode::PoorestDecile;
        else throw std::invalid_argument("option " + key + ": expected random|poorest_decile");
    } else if (key == "generate.attrition_mix") {
        std::array<double, 5> mix{};
        std::size_t start = 0, idx = 0;
        while (idx < 5) {
            std::size_t sep = value.find(';', start);
            std::string part = sep == std::string::npos ? value.substr(start)
                                                        : value.substr(start, sep - start);
            mix[idx++] = parse_real(key, trim(part));
            if (sep == std::string::npos) break;
            start = sep + 1;
        }
        if (idx != 5) {
            throw std::invalid_argument("option " + key + ": expected 5 ';'-separated shares");
        }
        g.attrition_mix = mix;
    } else if (key == "dominance.grid") {
        c.dominance.grid = static_cast<std::size_t>(parse_u64(key, value));
    } else if (key == "dominance.replicates") {
        c.dominance.replicates = static_cast<std::size_t>(parse_u64(key, value));
    } else if (key == "dominance.level") {
        c.dominance.level = parse_real(key, value);
    } else if (key == "did.min_class") {
        c.did_min_class = parse_i(key, value);
    } else if (key == "step1.dwelling") {
        c.dwelling_terms = parse_bool(key, value);
    } else {
        throw std::invalid_argument("unknown config option: " + key);
    }
}

PipelineConfig parse_config_text(const std::string& text) {
    PipelineConfig config;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw std::invalid_argument("config line " + std::to_string(line_no) +
                                            ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
        }
        apply_config_option(config, section.empty() ? key : section + "." + key, value);
    }
    return config;
}

PipelineConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

// --- Shared step plumbing ---------------------------------------------------

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void write_text_file(const std::string& dir, const std::string& name, const std::string& body) {
    fs::create_directories(dir);
    csv::write_file(join_path(dir, name), body);
}

struct Loaded {
    PanelDataset panel;
    std::vector<LgaProfile> lgas;
    DataTable table;
};

Loaded load_inputs(const PipelineConfig& config) {
    Loaded loaded;
    if (config.input_panel.empty()) {
        SynthWorld world = make_world(config.generate, config.seed);
        loaded.panel = std::move(world.panel);
        loaded.lgas = std::move(world.lgas);
    } else {
        std::ifstream pin(config.input_panel);
        if (!pin) throw std::invalid_argument("cannot open panel file: " + config.input_panel);
        loaded.panel = read_panel_csv(pin);
        std::string lga_path = config.input_lgas;
        if (lga_path.empty()) {
            lga_path = (fs::path(config.input_panel).parent_path() / "lgas.csv").string();
        }
        std::ifstream lin(lga_path);
        if (!lin) throw std::invalid_argument("cannot open lga file: " + lga_path);
        loaded.lgas = read_lgas_csv(lin);
    }
    loaded.table = panel_to_table(loaded.panel, loaded.lgas);

    // Derived analysis columns: migration status with the survey's polarity
    // (1 = household never migrated, 0 = household migrated at some point)
    // and the DiD exposure dummy from the origin's conflict class.
    const std::size_t n = loaded.table.n_rows();
    const auto& ever = loaded.table.column("migrated_ever");
    const auto& origin_class = loaded.table.column("origin_class");
    std::vector<double> not_migrated(n), exposed(n);
    for (std::size_t i = 0; i < n; ++i) {
        not_migrated[i] = 1.0 - ever[i];
        exposed[i] = origin_class[i] >= static_cast<double>(config.did_min_class) ? 1.0 : 0.0;
    }
    loaded.table.add_column("not_migrated", std::move(not_migrated));
    loaded.table.add_column("conflict_exposed", std::move(exposed));
    return loaded;
}

// Covariate block shared by the welfare model and, in reduced form, the
// binary-outcome models.
std::vector<Term> head_demographics() {
    return {
        Term::continuous("hhsize"),      Term::continuous("dep_share"),
        Term::continuous("hh_sex"),      Term::continuous("hh_agey"),
        Term::continuous("hh_eduyrs"),   Term::continuous("hh_empl"),
        Term::continuous("hh_marstat"),  Term::interaction("hh_sex", "hh_marstat"),
    };
}

std::vector<Term> asset_terms() {
    return {
        Term::continuous("own_tv"),     Term::continuous("own_fridge"),
        Term::continuous("own_stove"),  Term::continuous("own_bcycle"),
        Term::continuous("own_car"),    Term::continuous("own_iron"),
    };
}

DesignSpec welfare_spec(const PipelineConfig& config) {
    DesignSpec spec;
    spec.response = "ln_pcexp";
    spec.terms = head_demographics();
    spec.terms.push_back(Term::continuous("rururb"));
    spec.terms.push_back(Term::categorical("hh_language", 1));
    if (config.dwelling_terms) {
        spec.terms.push_back(Term::continuous("dwel_rooms"));
        spec.terms.push_back(Term::categorical("dwel_roof", 1));
        spec.terms.push_back(Term::categorical("dwel_wall", 1));
        spec.terms.push_back(Term::categorical("dwel_floor", 1));
        spec.terms.push_back(Term::categorical("dwel_toilet", 1));
        spec.terms.push_back(Term::categorical("dwel_fuellight", 1));
        spec.terms.push_back(Term::categorical("dwel_fuelcook", 1));
        spec.terms.push_back(Term::categorical("dwel_gdisp", 1));
    }
    for (auto& t : asset_terms()) spec.terms.push_back(t);
    spec.terms.push_back(Term::fixed_effect("state_id"));
    if (config.weighted) spec.weight = "weight";
    return spec;
}

// Controls for the migration probits, the DiD and the risk logit: household
// demographics, rooms, wall quality, assets.  Deliberately no language and
// no state effects (they almost perfectly separate the conflict samples)
// and no expenditure (an outcome).
std::vector<Term> control_terms() {
    std::vector<Term> terms = head_demographics();
    terms.push_back(Term::continuous("dwel_rooms"));
    terms.push_back(Term::categorical("dwel_wall", 1));
    for (auto& t : asset_terms()) terms.push_back(t);
    return terms;
}

std::vector<bool> column_mask(const DataTable& table, const std::string& name,
                              double lo, double hi) {
    const auto& col = table.column(name);
    std::vector<bool> keep(col.size());
    for (std::size_t i = 0; i < col.size(); ++i) keep[i] = col[i] >= lo && col[i] <= hi;
    return keep;
}

std::string sanitize_note(std::string s) {
    for (char& ch : s) {
        if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
    }
    return s;
}

void append_fit_rows(std::ostringstream& out, const std::string& model, const ModelFit& fit) {
    for (std::size_t i = 0; i < fit.labels.size(); ++i) {
        out << model << ',' << fit.labels[i] << ',' << csv::format_double(fit.coef(static_cast<Eigen::Index>(i)))
            << ',' << csv::format_double(fit.se(i)) << ','
            << csv::format_double(fit.coef(static_cast<Eigen::Index>(i)) / fit.se(i)) << ','
            << csv::format_double(fit.p_value(i)) << ",\n";
    }
    out << model << ",n_obs," << fit.n_obs << ",,,,\n";
    if (fit.kind == ModelKind::Ols) {
        out << model << ",r_squared," << csv::format_double(fit.r_squared) << ",,,,\n";
    } else {
        out << model << ",pseudo_r_squared," << csv::format_double(fit.pseudo_r_squared)
            << ",,,,\n";
    }
    out << model << ",converged," << (fit.converged ? 1 : 0) << ",,,,\n";
    for (const auto& d : fit.dropped_columns) {
        out << model << ",dropped_column,,,,," << sanitize_note(d) << "\n";
    }
    for (const auto& w : fit.warnings) {
        out << model << ",warning,,,,," << sanitize_note(w) << "\n";
    }
}

std::vector<WeightedPoint> weighted_points(const std::vector<double>& values,
                                           const std::vector<double>& weights,
                                           const std::vector<bool>& keep, bool use_weights) {
    std::vector<WeightedPoint> pts;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!keep[i]) continue;
        pts.push_back({values[i], use_weights ? weights[i] : 1.0});
    }
    return pts;
}

} // namespace

std::vector<std::string> generate_outputs(const PipelineConfig& config) {
    config.validate();
    SynthWorld world = make_world(config.generate, config.seed);
    fs::create_directories(config.out_dir);
    {
        std::ofstream out(join_path(config.out_dir, "panel.csv"));
        write_panel_csv(out, world.panel);
    }
    {
        std::ofstream out(join_path(config.out_dir, "lgas.csv"));
        write_lgas_csv(out, world.lgas);
    }
    {
        std::ofstream out(join_path(config.out_dir, "agents.csv"));
        write_agents_csv(out, world.agents);
    }
    return {"panel.csv", "lgas.csv", "agents.csv"};
}

Step1Result step1_welfare(const PipelineConfig& config) {
    config.validate();
    Loaded loaded = load_inputs(config);

    // Only rows actually observed by the survey enter the analysis.
    DataTable observed = loaded.table.filter(column_mask(loaded.table, "responding", 0.5, 1.5));
    DesignSpec spec = welfare_spec(config);
    DesignMatrix design = build_design(observed, spec, /*for_prediction=*/true);

    const auto& cls = observed.column("conflict_class");
    std::vector<bool> fit_rows(design.n_rows()), predict_rows(design.n_rows());
    std::size_t n_fit = 0, n_pred = 0;
    for (std::size_t i = 0; i < design.n_rows(); ++i) {
        bool conflict_area = cls[design.row_index[i]] != 0.0;
        fit_rows[i] = !conflict_area;
        predict_rows[i] = conflict_area;
        (conflict_area ? n_pred : n_fit) += 1;
    }
    if (n_fit == 0) throw std::invalid_argument("step1: no non-conflict rows to fit on");
    if (n_pred == 0) throw std::invalid_argument("step1: no conflict rows to predict for");

    Step1Result result;
    result.n_fit = n_fit;
    result.n_predicted = n_pred;
    DesignMatrix fit_design = design.select_rows(fit_rows);
    result.fit = ols_fit(fit_design, /*robust=*/true);

    DesignMatrix pred_design = design.select_rows(predict_rows);
    Eigen::VectorXd log_pred = predict_linear(result.fit, pred_design);
    Eigen::VectorXd level_pred = smearing_retransform(result.fit, log_pred);

    write_text_file(config.out_dir, "table4.csv", result.fit.to_csv());

    std::ostringstream cf;
    cf << "household_id,wave,lga_id,state_id,pcexp,weight,predicted_log,predicted_level\n";
    const auto& hh = observed.column("household_id");
    const auto& wave = observed.column("wave");
    const auto& lga = observed.column("lga_id");
    const auto& state = observed.column("state_id");
    const auto& pcexp = observed.column("pcexp");
    const auto& weight = observed.column("weight");
    for (std::size_t i = 0; i < pred_design.n_rows(); ++i) {
        std::size_t r = pred_design.row_index[i];
        cf << static_cast<long long>(hh[r]) << ',' << static_cast<int>(wave[r]) << ','
           << static_cast<int>(lga[r]) << ',' << static_cast<int>(state[r]) << ','
           << csv::format_double(pcexp[r]) << ',' << csv::format_double(weight[r]) << ','
           << csv::format_double(log_pred(static_cast<Eigen::Index>(i))) << ','
           << csv::format_double(level_pred(static_cast<Eigen::Index>(i))) << '\n';
    }
    write_text_file(config.out_dir, "counterfactual.csv", cf.str());
    result.files = {"table4.csv", "counterfactual.csv"};
    return result;
}

std::string qm_prediction_text(const DominanceReport& report) {
    switch (report.verdict) {
        case CdfVerdict::Equal: return "indeterminate";
        case CdfVerdict::ADominates: return "stay for all tau";
        case CdfVerdict::BDominates: return "leave for all tau";
        case CdfVerdict::Cross: break;
    }
    // diff = F_obs - F_cf.  Positive diff at the bottom: the counterfactual
    // puts less mass on low outcomes, so low-quantile maximizers leave.
    // Negative diff at the top: the observed (stay) distribution keeps the
    // fatter upper tail, so high-quantile maximizers stay.
    constexpr double tol = 1e-12;
    int first_sign = 0, last_sign = 0;
    for (double d : report.diff) {
        int sign = d > tol ? 1 : (d < -tol ? -1 : 0);
        if (sign == 0) continue;
        if (first_sign == 0) first_sign = sign;
        last_sign = sign;
    }
    std::string low = first_sign > 0 ? "maxmin leave" : "maxmin stay";
    std::string high = last_sign < 0 ? "maxmax stay" : "maxmax leave";
    return low + "; " + high;
}

Step2Result step2_dominance(const PipelineConfig& config) {
    config.validate();
    Loaded loaded = load_inputs(config);

    const std::string cf_path = join_path(config.out_dir, "counterfactual.csv");
    std::ifstream cf(cf_path);
    if (!cf) {
        throw std::invalid_argument("step2: missing " + cf_path +
                                    " (run step1 into the same output directory first)");
    }
    std::string line;
    if (!std::getline(cf, line)) throw std::invalid_argument("step2: empty counterfactual file");
    std::vector<WeightedPoint> counterfactual;
    while (std::getline(cf, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = csv::split_line(line);
        if (f.size() != 8) throw std::invalid_argument("step2: malformed counterfactual row");
        if (csv::parse_int(f[1]) != 6) continue; // final wave only
        counterfactual.push_back(
            {csv::parse_double(f[7]), config.weighted ? csv::parse_double(f[5]) : 1.0});
    }
    if (counterfactual.empty()) {
        throw std::invalid_argument("step2: counterfactual file has no final-wave rows");
    }

    const DataTable& table = loaded.table;
    const auto& wave = table.column("wave");
    const auto& responding = table.column("responding");
    const auto& cls = table.column("conflict_class");
    std::vector<bool> keep(table.n_rows());
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        keep[i] = wave[i] == 6.0 && responding[i] == 1.0 && cls[i] != 0.0;
    }
    std::vector<WeightedPoint> observed = weighted_points(
        table.column("pcexp"), table.column("weight"), keep, config.weighted);
    if (observed.empty()) {
        throw std::invalid_argument("step2: no final-wave conflict-area observations");
    }

    Step2Result result;
    result.report = dominance_bands(EmpiricalDistribution(std::move(observed)),
                                    EmpiricalDistribution(std::move(counterfactual)),
                                    config.dominance.replicates, config.dominance.level,
                                    derive_seed(config.seed, kTagFigure6),
                                    config.dominance.grid);
    result.qm_prediction = qm_prediction_text(result.report);

    std::ostringstream out;
    out << "# samples a=observed b=counterfactual\n";
    out << "# qm_prediction=" << result.qm_prediction << '\n';
    result.report.write_csv(out);
    write_text_file(config.out_dir, "figure6.csv", out.str());
    result.files = {"figure6.csv"};
    return result;
}

Step3Result step3_migration_models(const PipelineConfig& config) {
    config.validate();
    Loaded loaded = load_inputs(config);

    // Final-wave respondents with a risk answer.
    const DataTable& table = loaded.table;
    const auto& wave = table.column("wave");
    const auto& responding = table.column("responding");
    const auto& risk = table.column("risk_averse");
    std::vector<bool> keep(table.n_rows());
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        keep[i] = wave[i] == 6.0 && responding[i] == 1.0 && !std::isnan(risk[i]);
    }
    DataTable base = table.filter(keep);

    DesignSpec spec;
    spec.response = "not_migrated";
    spec.terms.push_back(Term::continuous("risk_averse"));
    for (auto& t : control_terms()) spec.terms.push_back(t);
    if (config.weighted) spec.weight = "weight";

    struct SampleDef {
        const char* name;
        double lo;
    };
    // Origin classes: 0 none, 1 some, 2 always.  The samples nest.
    const SampleDef samples[3] = {{"all", 0.0}, {"some_conflict", 1.0}, {"always_conflict", 2.0}};

    Step3Result result;
    for (const auto& def : samples) {
        Step3Model model;
        model.sample = def.name;
        DataTable sub = base.filter(column_mask(base, "origin_class", def.lo, 2.0));
        if (sub.n_rows() == 0) {
            model.error = "empty sample";
        } else {
            try {
                model.fit = binary_mle_fit(build_design(sub, spec), ModelKind::Probit,
                                           /*robust=*/true);
                model.ok = true;
            } catch (const std::exception& e) {
                model.error = e.what();
            }
        }
        result.models.push_back(std::move(model));
    }

    std::ostringstream out;
    out << "model,term,coef,se,stat,p,note\n";
    for (const auto& model : result.models) {
        if (model.ok) {
            append_fit_rows(out, model.sample, model.fit);
        } else {
            out << model.sample << ",error,,,,," << sanitize_note(model.error) << "\n";
        }
    }
    write_text_file(config.out_dir, "table6.csv", out.str());
    result.files = {"table6.csv"};
    return result;
}

Step4Result step4_did(const PipelineConfig& config) {
    config.validate();
    Loaded loaded = load_inputs(config);

    const DataTable& table = loaded.table;
    const auto& wave = table.column("wave");
    const auto& responding = table.column("responding");
    const auto& risk = table.column("risk_averse");
    std::vector<bool> keep(table.n_rows());
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        keep[i] = wave[i] == 6.0 && responding[i] == 1.0 && !std::isnan(risk[i]);
    }
    DataTable base = table.filter(keep);

    DidSpec spec;
    spec.outcome = "risk_averse";
    spec.treat = "conflict_exposed";
    spec.group = "not_migrated";
    if (config.weighted) spec.weight = "weight";

    Step4Result result;
    result.base = did_fit(base, spec, /*robust=*/true);
    result.cells = did_cell_means(base, spec.outcome, spec.treat, spec.group, spec.weight);
    spec.covariates = control_terms();
    result.with_covariates = did_fit(base, spec, /*robust=*/true);

    std::ostringstream out;
    out << "model,term,coef,se,stat,p,note\n";
    append_fit_rows(out, "base", result.base);
    append_fit_rows(out, "covariates", result.with_covariates);
    out << "cells,m00," << csv::format_double(result.cells.m00) << ",,,,n=" << result.cells.n00
        << "\n";
    out << "cells,m01," << csv::format_double(result.cells.m01) << ",,,,n=" << result.cells.n01
        << "\n";
    out << "cells,m10," << csv::format_double(result.cells.m10) << ",,,,n=" << result.cells.n10
        << "\n";
    out << "cells,m11," << csv::format_double(result.cells.m11) << ",,,,n=" << result.cells.n11
        << "\n";
    write_text_file(config.out_dir, "table7.csv", out.str());
    result.files = {"table7.csv"};
    return result;
}

AttritionResult attrition_checks(const PipelineConfig& config) {
    config.validate();
    Loaded loaded = load_inputs(config);

    // Baseline covariates live on the first wave; survivorship is whether
    // the household still responds in the final wave.
    DataTable w1 = loaded.table.filter(column_mask(loaded.table, "wave", 1.0, 1.0));
    const auto& survivor = w1.column("survivor");
    AttritionResult result;
    for (double s : survivor) (s == 1.0 ? result.n_survivors : result.n_attrited) += 1;

    static const char* kTestVariables[] = {
        "rururb", "hhsize", "dep_share", "hh_sex", "hh_agey", "hh_eduyrs", "hh_empl",
        "hh_marstat", "dwel_rooms", "own_tv", "own_fridge", "own_stove", "own_bcycle",
        "own_car", "own_iron", "ln_pcexp"};

    const std::string weight_col = config.weighted ? "weight" : "";
    for (const char* var : kTestVariables) {
        AttritionMeanRow row;
        row.variable = var;
        if (result.n_attrited == 0 || result.n_survivors == 0) {
            // Nothing to compare: identical-sample degenerate report.
            const auto& col = w1.column(var);
            const auto& w = w1.column("weight");
            double sum = 0.0, wsum = 0.0;
            for (std::size_t i = 0; i < col.size(); ++i) {
                double wi = config.weighted ? w[i] : 1.0;
                sum += wi * col[i];
                wsum += wi;
            }
            double mean = wsum > 0.0 ? sum / wsum : 0.0;
            row.weighted = {0.0, 1.0, mean, mean, result.n_attrited, result.n_survivors};
            row.unweighted = row.weighted;
        } else {
            row.weighted = mean_equality_test(w1, var, "survivor", weight_col);
            row.unweighted = mean_equality_test(w1, var, "survivor", "");
        }
        result.means.push_back(row);
    }

    std::ostringstream t3;
    t3 << "variable,mean_attrited,mean_survivors,f_weighted,p_weighted,f_unweighted,"
          "p_unweighted,n_attrited,n_survivors\n";
    for (const auto& row : result.means) {
        t3 << row.variable << ',' << csv::format_double(row.weighted.mean0) << ','
           << csv::format_double(row.weighted.mean1) << ','
           << csv::format_double(row.weighted.f) << ',' << csv::format_double(row.weighted.p)
           << ',' << csv::format_double(row.unweighted.f) << ','
           << csv::format_double(row.unweighted.p) << ',' << row.weighted.n0 << ','
           << row.weighted.n1 << '\n';
    }
    write_text_file(config.out_dir, "table3.csv", t3.str());

    // Predicted baseline expenditure, full sample vs survivors.
    DesignSpec wspec = welfare_spec(config);
    DesignMatrix wdesign = build_design(w1, wspec, /*for_prediction=*/true);
    ModelFit wfit = ols_fit(wdesign, /*robust=*/true);
    Eigen::VectorXd wlog = predict_linear(wfit, wdesign);
    Eigen::VectorXd wlevel = smearing_retransform(wfit, wlog);
    std::vector<double> pred_level(wdesign.n_rows());
    std::vector<double> pred_weight(wdesign.n_rows());
    std::vector<bool> all_rows(wdesign.n_rows(), true), surv_rows(wdesign.n_rows());
    const auto& w1_weight = w1.column("weight");
    for (std::size_t i = 0; i < wdesign.n_rows(); ++i) {
        std::size_t r = wdesign.row_index[i];
        pred_level[i] = wlevel(static_cast<Eigen::Index>(i));
        pred_weight[i] = w1_weight[r];
        surv_rows[i] = survivor[r] == 1.0;
    }
    result.expenditure = dominance_bands(
        EmpiricalDistribution(weighted_points(pred_level, pred_weight, all_rows, config.weighted)),
        EmpiricalDistribution(weighted_points(pred_level, pred_weight, surv_rows, config.weighted)),
        config.dominance.replicates, config.dominance.level,
        derive_seed(config.seed, kTagFigure4), config.dominance.grid);
    {
        std::ostringstream out;
        out << "# samples a=full b=survivors metric=predicted_expenditure\n";
        result.expenditure.write_csv(out);
        write_text_file(config.out_dir, "figure4.csv", out.str());
    }

    // Predicted probability of the risk-averse answer (a time-invariant
    // trait, so the final-wave answer is modeled on baseline covariates),
    // full sample vs survivors.
    std::unordered_map<long long, double> risk_by_household;
    for (const auto& r : loaded.panel.records) {
        if (r.wave == 6 && r.risk_averse >= 0) {
            risk_by_household[r.household_id] = static_cast<double>(r.risk_averse);
        }
    }
    const auto& w1_hh = w1.column("household_id");
    std::vector<double> risk_answer(w1.n_rows(), std::nan(""));
    for (std::size_t i = 0; i < w1.n_rows(); ++i) {
        auto it = risk_by_household.find(static_cast<long long>(w1_hh[i]));
        if (it != risk_by_household.end()) risk_answer[i] = it->second;
    }
    DataTable w1r = w1;
    w1r.add_column("risk_answer", std::move(risk_answer));

    DesignSpec rspec;
    rspec.response = "risk_answer";
    rspec.terms = control_terms();
    rspec.terms.push_back(Term::continuous("ln_pcexp"));
    if (config.weighted) rspec.weight = "weight";
    DesignMatrix rdesign = build_design(w1r, rspec, /*for_prediction=*/true);
    std::vector<bool> has_answer(rdesign.n_rows());
    for (std::size_t i = 0; i < rdesign.n_rows(); ++i) {
        has_answer[i] = !std::isnan(rdesign.y(static_cast<Eigen::Index>(i)));
    }
    ModelFit rfit = binary_mle_fit(rdesign.select_rows(has_answer), ModelKind::Logit,
                                   /*robust=*/true);
    Eigen::VectorXd prob = predict_response(rfit, rdesign);
    std::vector<double> prob_v(rdesign.n_rows());
    std::vector<double> prob_w(rdesign.n_rows());
    std::vector<bool> prob_all(rdesign.n_rows(), true), prob_surv(rdesign.n_rows());
    for (std::size_t i = 0; i < rdesign.n_rows(); ++i) {
        std::size_t r = rdesign.row_index[i];
        prob_v[i] = prob(static_cast<Eigen::Index>(i));
        prob_w[i] = w1_weight[r];
        prob_surv[i] = survivor[r] == 1.0;
    }
    result.risk = dominance_bands(
        EmpiricalDistribution(weighted_points(prob_v, prob_w, prob_all, config.weighted)),
        EmpiricalDistribution(weighted_points(prob_v, prob_w, prob_surv, config.weighted)),
        config.dominance.replicates, config.dominance.level,
        derive_seed(config.seed, kTagFigure5), config.dominance.grid);
    {
        std::ostringstream out;
        out << "# samples a=full b=survivors metric=predicted_risk_aversion\n";
        result.risk.write_csv(out);
        write_text_file(config.out_dir, "figure5_risk.csv", out.str());
    }

    result.files = {"table3.csv", "figure4.csv", "figure5_risk.csv"};
    return result;
}

RunAllResult run_all(const PipelineConfig& config) {
    config.validate();
    fs::create_directories(config.out_dir);

    PipelineConfig local = config;
    RunAllResult result;
    auto run_step = [&](const char* name, auto&& fn) {
        try {
            std::vector<std::string> files = fn();
            result.artifacts.insert(result.artifacts.end(), files.begin(), files.end());
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string(name) + ": " + e.what());
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string(name) + ": " + e.what());
        }
    };

    if (local.run_generate) {
        run_step("generate", [&] { return generate_outputs(local); });
        local.input_panel = join_path(local.out_dir, "panel.csv");
        local.input_lgas = join_path(local.out_dir, "lgas.csv");
        local.input_agents = join_path(local.out_dir, "agents.csv");
    }
    if (local.run_step1) run_step("step1", [&] { return step1_welfare(local).files; });
    if (local.run_step2) run_step("step2", [&] { return step2_dominance(local).files; });
    if (local.run_step3) run_step("step3", [&] { return step3_migration_models(local).files; });
    if (local.run_step4) run_step("step4", [&] { return step4_did(local).files; });
    if (local.run_attrition) run_step("attrition", [&] { return attrition_checks(local).files; });

    std::vector<std::string> sorted = result.artifacts;
    std::sort(sorted.begin(), sorted.end());
    std::ostringstream manifest;
    manifest << "file,bytes,fnv1a64\n";
    for (const auto& name : sorted) {
        std::ifstream in(join_path(local.out_dir, name), std::ios::binary);
        if (!in) throw std::runtime_error("manifest: cannot reread artifact " + name);
        std::ostringstream buf;
        buf << in.rdbuf();
        std::string body = buf.str();
        char digest[17];
        std::snprintf(digest, sizeof digest, "%016llx",
                      static_cast<unsigned long long>(csv::fnv1a64(body)));
        manifest << name << ',' << body.size() << ',' << digest << '\n';
    }
    write_text_file(local.out_dir, "manifest.csv", manifest.str());
    result.manifest_file = "manifest.csv";
    return result;
}

} // namespace qmig
