#include "doctest.h"

#include "qmig/csv.hpp"
#include "qmig/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unistd.h>
#include <vector>

using namespace qmig;
namespace fs = std::filesystem;

namespace {

// Scratch directory, removed when the test scope ends.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("qmig_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Small but estimable world for end-to-end runs.
PipelineConfig quick_config(const std::string& out_dir, std::uint64_t seed = 5) {
    PipelineConfig c;
    c.out_dir = out_dir;
    c.seed = seed;
    c.generate.n_households = 800;
    c.dominance.replicates = 120;
    return c;
}

} // namespace

TEST_CASE("config text parses sections, comments, and overrides") {
    std::string text =
        "# survey pipeline configuration\n"
        "[pipeline]\n"
        "seed = 99\n"
        "out_dir = results\n"
        "weighted = false\n"
        "step4 = no\n"
        "\n"
        "[generate]\n"
        "n_households = 1200   # sample size\n"
        "migration_mode = coin\n"
        "attrition_mode = poorest_decile\n"
        "attrition_mix = 0.2; 0.2; 0.2; 0.2; 0.2\n"
        "move_friction = 0.1\n"
        "\n"
        "[dominance]\n"
        "grid = 101\n"
        "replicates = 150\n"
        "level = 0.9\n"
        "\n"
        "[did]\n"
        "min_class = 2\n"
        "\n"
        "[step1]\n"
        "dwelling = false\n";
    PipelineConfig c = parse_config_text(text);
    CHECK(c.seed == 99);
    CHECK(c.out_dir == "results");
    CHECK_FALSE(c.weighted);
    CHECK_FALSE(c.run_step4);
    CHECK(c.run_step3); // untouched default
    CHECK(c.generate.n_households == 1200);
    CHECK(c.generate.migration_mode == MigrationMode::RandomCoin);
    CHECK(c.generate.attrition_mode == AttritionMode::PoorestDecile);
    CHECK(c.generate.attrition_mix[3] == 0.2);
    CHECK(c.generate.move_friction == 0.1);
    CHECK(c.dominance.grid == 101);
    CHECK(c.dominance.replicates == 150);
    CHECK(c.dominance.level == 0.9);
    CHECK(c.did_min_class == 2);
    CHECK_FALSE(c.dwelling_terms);
}

TEST_CASE("config errors carry context") {
    auto message_of = [](const std::string& text) {
        try {
            parse_config_text(text);
        } catch (const std::invalid_argument& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    std::string m = message_of("[pipeline]\nseed = banana\n");
    CHECK(m.find("seed") != std::string::npos);
    m = message_of("[pipeline]\nnot_a_key = 1\n");
    CHECK(m.find("not_a_key") != std::string::npos);
    m = message_of("[nowhere]\nx = 1\n");
    CHECK(!m.empty());
    m = message_of("stray line without equals\n");
    CHECK(m.find("line 1") != std::string::npos);

    PipelineConfig c;
    CHECK_THROWS_AS(apply_config_option(c, "generate.attrition_mix", "0.5;0.5"),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_config_option(c, "generate.migration_mode", "flip"),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_config_option(c, "pipeline.step1", "maybe"), std::invalid_argument);
    // Validation happens separately from parsing.
    apply_config_option(c, "dominance.replicates", "3");
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    PipelineConfig c2;
    c2.out_dir = "";
    CHECK_THROWS_AS(c2.validate(), std::invalid_argument);
    PipelineConfig c3;
    c3.did_min_class = 3;
    CHECK_THROWS_AS(c3.validate(), std::invalid_argument);
}

TEST_CASE("config file loading") {
    TempDir dir("cfg");
    csv::write_file(dir.file("run.cfg"), "[pipeline]\nseed = 7\n[generate]\nn_households = 900\n");
    PipelineConfig c = load_config_file(dir.file("run.cfg"));
    CHECK(c.seed == 7);
    CHECK(c.generate.n_households == 900);
    CHECK_THROWS_AS(load_config_file(dir.file("absent.cfg")), std::invalid_argument);
}

TEST_CASE("qm prediction text is a pure function of the report") {
    DominanceReport r;
    r.verdict = CdfVerdict::Equal;
    CHECK(qm_prediction_text(r) == "indeterminate");
    r.verdict = CdfVerdict::ADominates;
    CHECK(qm_prediction_text(r) == "stay for all tau");
    r.verdict = CdfVerdict::BDominates;
    CHECK(qm_prediction_text(r) == "leave for all tau");

    // Observed (a) above the counterfactual (b) at the bottom, below at the
    // top: the risk averse leave, the risk loving stay.
    r.verdict = CdfVerdict::Cross;
    r.grid = {1.0, 2.0, 3.0};
    r.diff = {0.2, 0.0, -0.2};
    r.crossings = {2.0};
    std::string p = qm_prediction_text(r);
    CHECK(p == "maxmin leave; maxmax stay");
    // And the mirrored shape flips both readings.
    r.diff = {-0.2, 0.0, 0.2};
    CHECK(qm_prediction_text(r) == "maxmin stay; maxmax leave");
    // Identical reports give identical strings.
    CHECK(qm_prediction_text(r) == qm_prediction_text(r));
}

TEST_CASE("end to end run writes a faithful manifest") {
    TempDir dir("runall");
    PipelineConfig c = quick_config(dir.str());
    RunAllResult res = run_all(c);

    CHECK(res.manifest_file == "manifest.csv");
    // Generated inputs + all five steps' outputs.
    std::vector<std::string> expect = {"panel.csv",   "lgas.csv",   "agents.csv",
                                       "table4.csv",  "counterfactual.csv", "figure6.csv",
                                       "table6.csv",  "table7.csv", "table3.csv",
                                       "figure4.csv", "figure5_risk.csv"};
    for (const auto& name : expect) {
        bool found = false;
        for (const auto& a : res.artifacts) found = found || a == name;
        CHECK_MESSAGE(found, "missing artifact ", name);
        CHECK(fs::exists(dir.path / name));
    }

    // The manifest lists every artifact with its byte count and digest.
    std::string manifest = slurp(dir.file("manifest.csv"));
    std::istringstream lines(manifest);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "file,bytes,fnv1a64");
    std::map<std::string, std::pair<std::string, std::string>> listed;
    while (std::getline(lines, line)) {
        auto f = csv::split_line(line);
        REQUIRE(f.size() == 3);
        listed[f[0]] = {f[1], f[2]};
    }
    CHECK(listed.size() == res.artifacts.size());
    for (const auto& a : res.artifacts) {
        REQUIRE(listed.count(a));
        std::string body = slurp(dir.file(a));
        CHECK(listed[a].first == std::to_string(body.size()));
        char digest[32];
        std::snprintf(digest, sizeof digest, "%016llx",
                      static_cast<unsigned long long>(csv::fnv1a64(body)));
        CHECK(listed[a].second == digest);
    }
}

TEST_CASE("pipeline runs are byte identical given the seed") {
    TempDir d1("det1"), d2("det2");
    PipelineConfig c1 = quick_config(d1.str());
    c1.generate.n_households = 600;
    PipelineConfig c2 = quick_config(d2.str());
    c2.generate.n_households = 600;
    run_all(c1);
    run_all(c2);
    for (const auto& entry : fs::directory_iterator(d1.path)) {
        std::string name = entry.path().filename().string();
        CHECK_MESSAGE(slurp(d1.file(name)) == slurp(d2.file(name)), "differs: ", name);
    }
}

TEST_CASE("step toggles limit the manifest") {
    TempDir dir("toggle");
    PipelineConfig c = quick_config(dir.str());
    c.run_step3 = false;
    c.run_step4 = false;
    c.run_attrition = false;
    RunAllResult res = run_all(c);
    std::vector<std::string> want = {"panel.csv", "lgas.csv",           "agents.csv",
                                     "table4.csv", "counterfactual.csv", "figure6.csv",
                                     "manifest.csv"};
    for (const auto& name : want) CHECK(fs::exists(dir.path / name));
    CHECK_FALSE(fs::exists(dir.path / "table6.csv"));
    CHECK_FALSE(fs::exists(dir.path / "table7.csv"));
    CHECK_FALSE(fs::exists(dir.path / "table3.csv"));
    for (const auto& a : res.artifacts) {
        CHECK(a != "table6.csv");
        CHECK(a != "table7.csv");
    }
}

TEST_CASE("welfare step fits clean areas and predicts conflict areas") {
    TempDir dir("step1");
    PipelineConfig c = quick_config(dir.str());
    generate_outputs(c);
    c.input_panel = dir.file("panel.csv");

    Step1Result s1 = step1_welfare(c);
    CHECK(s1.n_fit > 0);
    CHECK(s1.n_predicted > 0);
    CHECK(s1.fit.converged);
    CHECK(s1.fit.r_squared > 0.3);
    bool has_dwelling = false;
    for (const auto& l : s1.fit.labels) has_dwelling = has_dwelling || l.rfind("dwel_", 0) == 0;
    CHECK(has_dwelling);
    // Survey language enters the welfare model.
    CHECK(s1.fit.has("hh_language=2"));

    // Counterfactual rows cover conflict areas only, never the fit sample.
    std::string cf = slurp(dir.file("counterfactual.csv"));
    std::istringstream lines(cf);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "household_id,wave,lga_id,state_id,pcexp,weight,predicted_log,predicted_level");
    std::ifstream lin(dir.file("lgas.csv"));
    auto lgas = read_lgas_csv(lin);
    std::size_t cf_rows = 0;
    while (std::getline(lines, line)) {
        auto f = csv::split_line(line);
        REQUIRE(f.size() == 8);
        ++cf_rows;
        int lga_id = static_cast<int>(csv::parse_int(f[2]));
        CHECK(lgas[static_cast<std::size_t>(lga_id - 1)].conflict_class != ConflictClass::None);
        // Smearing retransformation connects the two prediction columns.
        double lvl = csv::parse_double(f[7]);
        double lg = csv::parse_double(f[6]);
        CHECK(lvl == doctest::Approx(std::exp(lg) * *s1.fit.smearing).epsilon(1e-12));
    }
    CHECK(cf_rows == s1.n_predicted);

    // The dwelling switch trims the model.
    PipelineConfig nd = c;
    nd.dwelling_terms = false;
    Step1Result s1b = step1_welfare(nd);
    for (const auto& l : s1b.fit.labels) CHECK(l.rfind("dwel_", 0) != 0);
    CHECK(s1b.fit.labels.size() < s1.fit.labels.size());
}

TEST_CASE("dominance step needs the welfare predictions first") {
    TempDir dir("step2");
    PipelineConfig c = quick_config(dir.str());
    CHECK_THROWS_AS(step2_dominance(c), std::invalid_argument);

    generate_outputs(c);
    c.input_panel = dir.file("panel.csv");
    step1_welfare(c);
    Step2Result s2 = step2_dominance(c);
    CHECK(s2.report.grid.size() >= 2);
    CHECK(s2.report.has_bands);
    CHECK(s2.qm_prediction == qm_prediction_text(s2.report));
    CHECK(fs::exists(dir.path / "figure6.csv"));
    std::string fig = slurp(dir.file("figure6.csv"));
    CHECK(fig.find("# samples a=observed b=counterfactual") == 0);
    CHECK(fig.find("# qm_prediction=" + s2.qm_prediction) != std::string::npos);
}

TEST_CASE("flat expenditure process makes the comparison indeterminate") {
    TempDir dir("null2");
    PipelineConfig c = quick_config(dir.str(), 21);
    // No conflict penalty, no extra dispersion, tiny noise: observed and
    // counterfactual distributions coincide up to estimation error.
    c.generate.conflict_penalty = 0.0;
    c.generate.conflict_noise_sd = 0.0;
    c.generate.noise_sd = 0.02;
    generate_outputs(c);
    c.input_panel = dir.file("panel.csv");
    step1_welfare(c);
    Step2Result s2 = step2_dominance(c);
    std::size_t cover = 0;
    for (std::size_t i = 0; i < s2.report.grid.size(); ++i) {
        if (s2.report.band_lo[i] <= 0.0 && s2.report.band_hi[i] >= 0.0) ++cover;
    }
    CHECK(cover >= s2.report.grid.size() * 9 / 10);
}

TEST_CASE("migration models run over nested origin samples") {
    TempDir dir("step3");
    PipelineConfig c = quick_config(dir.str());
    Step3Result s3 = step3_migration_models(c);
    REQUIRE(s3.models.size() == 3);
    CHECK(s3.models[0].sample == "all");
    CHECK(s3.models[1].sample == "some_conflict");
    CHECK(s3.models[2].sample == "always_conflict");

    std::size_t prev = static_cast<std::size_t>(-1);
    for (const auto& m : s3.models) {
        REQUIRE(m.ok);
        CHECK(m.fit.has("risk_averse"));
        CHECK(m.fit.n_obs <= prev);
        prev = m.fit.n_obs;
        // Migration status is coded 0 = migrant, 1 = non-migrant, so the
        // planted risk-averse movers push the coefficient negative.
        CHECK(m.fit.coef_of("risk_averse") < 0.0);
        // Survey language stays out of the migration models.
        for (const auto& l : m.fit.labels) CHECK(l.rfind("hh_language", 0) != 0);
    }
    std::string t6 = slurp(dir.file("table6.csv"));
    CHECK(t6.rfind("model,term,coef,se,stat,p,note", 0) == 0);
    CHECK(t6.find("\nall,risk_averse,") != std::string::npos);
    CHECK(t6.find("\nalways_conflict,risk_averse,") != std::string::npos);
}

TEST_CASE("did step reports cells consistent with the base fit") {
    TempDir dir("step4");
    PipelineConfig c = quick_config(dir.str());
    Step4Result s4 = step4_did(c);
    const std::string did_label = "conflict_exposed:not_migrated";
    CHECK(s4.base.has(did_label));
    CHECK(s4.with_covariates.has(did_label));
    double theta = (s4.cells.m11 - s4.cells.m10) - (s4.cells.m01 - s4.cells.m00);
    CHECK(s4.base.coef_of(did_label) == doctest::Approx(theta).epsilon(1e-8));
    CHECK(s4.cells.n00 + s4.cells.n01 + s4.cells.n10 + s4.cells.n11 == s4.base.n_obs);
    CHECK(fs::exists(dir.path / "table7.csv"));

    // Restricting exposure to always-conflict origins changes the sample
    // split but keeps the machinery intact.
    TempDir dir2("step4b");
    PipelineConfig c2 = quick_config(dir2.str());
    c2.did_min_class = 2;
    Step4Result s4b = step4_did(c2);
    CHECK(s4b.cells.n10 + s4b.cells.n11 < s4.cells.n10 + s4.cells.n11);
}

TEST_CASE("attrition diagnostics compare leavers with stayers") {
    TempDir dir("attr");
    PipelineConfig c = quick_config(dir.str());
    AttritionResult ar = attrition_checks(c);
    CHECK(ar.n_attrited > 0);
    CHECK(ar.n_survivors > 0);
    CHECK(ar.n_attrited + ar.n_survivors == 800);
    CHECK(ar.means.size() >= 10);
    for (const auto& row : ar.means) {
        CHECK(row.weighted.p >= 0.0);
        CHECK(row.weighted.p <= 1.0);
        CHECK(row.weighted.n0 == ar.n_attrited);
        CHECK(row.weighted.n1 == ar.n_survivors);
    }
    CHECK(ar.expenditure.has_bands);
    CHECK(ar.risk.has_bands);
    CHECK(fs::exists(dir.path / "table3.csv"));
    CHECK(fs::exists(dir.path / "figure4.csv"));
    CHECK(fs::exists(dir.path / "figure5_risk.csv"));
    std::string t3 = slurp(dir.file("table3.csv"));
    CHECK(t3.find("variable,mean_attrited,mean_survivors") == 0);
}

TEST_CASE("unweighted switch is honored end to end") {
    TempDir dir("unw");
    PipelineConfig c = quick_config(dir.str());
    c.weighted = false;
    RunAllResult res = run_all(c);
    CHECK(res.artifacts.size() >= 10);

    // Same seed, weighted: the estimates must differ (weights are lognormal,
    // not constant).
    TempDir dir2("unw2");
    PipelineConfig cw = quick_config(dir2.str());
    run_all(cw);
    CHECK(slurp(dir.file("table6.csv")) != slurp(dir2.file("table6.csv")));
}

TEST_CASE("existing panel inputs skip generation") {
    TempDir gen("inputs");
    PipelineConfig g = quick_config(gen.str());
    generate_outputs(g);

    TempDir out("frompanel");
    PipelineConfig c = quick_config(out.str());
    c.run_generate = false;
    c.input_panel = gen.file("panel.csv"); // lgas.csv found as a sibling
    RunAllResult res = run_all(c);
    CHECK(fs::exists(out.path / "table6.csv"));
    CHECK_FALSE(fs::exists(out.path / "panel.csv"));
    for (const auto& a : res.artifacts) CHECK(a != "panel.csv");
}
