#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "qmig/data_table.hpp"
#include "qmig/lottery.hpp"

// Synthetic household-panel generator with planted ground truth.  The world
// is a six-wave panel of households living in local government areas (LGAs)
// nested in states.  Log expenditure follows a linear index in household
// covariates plus a state effect plus noise; LGAs in conflict add an
// expenditure penalty and extra dispersion.  Each household carries a
// quantile-preference parameter tau and decides stay-vs-leave by comparing
// discretized stay/leave prospects at its own tau, which is what the
// estimation pipeline is later asked to recover.

namespace qmig {

enum class ConflictClass { None = 0, Some = 1, Always = 2 };
std::string to_string(ConflictClass c);

enum class AttritionStatus {
    Interviewed = 0,
    Tracked = 1,
    Refused = 2,
    NotFound = 3,
    Dead = 4,
    MovedUntracked = 5,
    CrisisArea = 6,
};
std::string to_string(AttritionStatus s);
AttritionStatus attrition_status_from_string(const std::string& s);

// Did the household respond at this record's wave?  Tracked households were
// found and interviewed at their new location, so they count as responding.
bool is_responding(AttritionStatus s);

struct HouseholdRecord {
    std::int64_t household_id = 0;
    int wave = 1; // 1..6
    int lga_id = 0;
    int state_id = 0;
    int rururb = 0; // 1 = rural
    double weight = 1.0;
    double pcexp = 0.0; // per-capita expenditure, money units
    int hhsize = 1;
    double dep_share = 0.0; // dependents / household size
    int hh_sex = 0;         // head gender, 1 = male
    int hh_agey = 0;        // head age in years
    int hh_eduyrs = 0;      // head education years
    int hh_empl = 0;        // head employed
    int hh_marstat = 0;     // head married
    int hh_language = 1;    // 1 Hausa, 2 Igbo, 3 Yoruba, 4 other
    int dwel_rooms = 1;
    int dwel_roof = 1;      // 1 low, 2 medium, 3 high quality
    int dwel_wall = 1;
    int dwel_floor = 1;
    int dwel_toilet = 1;    // 1 none, 2 flush, 3 improved pit, 4 open pit, 5 other
    int dwel_fuellight = 1; // 1 electric, 2 kerosene, 3 candle, 4 other
    int dwel_fuelcook = 1;  // 1 wood, 2 charcoal, 3 kerosene, 4 electric/gas, 5 other
    int dwel_gdisp = 1;     // garbage: 1 collected, 2 composted, 3 open heap
    int own_tv = 0;
    int own_fridge = 0;
    int own_stove = 0;
    int own_bcycle = 0;
    int own_car = 0;
    int own_iron = 0;
    int conflict = 0;  // fatalities in this household's LGA this wave
    int migrated = 0;  // 1 in the wave the household arrives somewhere new
    int risk_averse = -1; // wave-6 survey answer; -1 = not asked / missing
    AttritionStatus attrition_status = AttritionStatus::Interviewed;
};

struct PanelDataset {
    std::vector<HouseholdRecord> records; // household-major, waves ascending
};

struct LgaProfile {
    int lga_id = 0;
    int state_id = 0;
    ConflictClass conflict_class = ConflictClass::None;
    std::array<int, 6> fatalities{}; // per wave
};

struct AgentProfile {
    std::int64_t household_id = 0;
    double tau = 0.0;
    int risk_averse_truth = 0; // 1 iff tau below the survey threshold
};

// Coefficients of the planted log-expenditure index.  Categorical levels are
// relative to the lowest level of each variable.
struct ExpenditureIndex {
    double intercept = 11.33;
    double hhsize = -0.0949;
    double dep_share = -0.286;
    double rururb = 0.0332;
    double hh_sex = 0.201;
    double hh_agey = 0.00313;
    double hh_eduyrs = 0.0236;
    double hh_empl = 0.128;
    double hh_marstat = -0.0806;
    double sex_marstat = -0.189; // interaction male-head x married
    double lang_igbo = 0.0117;
    double lang_yoruba = -0.0349;
    double lang_other = -0.0325;
    double dwel_rooms = 0.0346;
    double roof_medium = 0.0656;
    double roof_high = 0.0231;
    double wall_medium = 0.001;
    double wall_high = -0.0255;
    double floor_medium = 0.0343;
    double floor_high = 0.125;
    double toilet_flush = 0.234;
    double toilet_improved_pit = -0.0628;
    double toilet_open_pit = 0.0431;
    double toilet_other = 0.0262;
    double light_kerosene = -0.0832;
    double light_candle = -0.0583;
    double light_other = -0.122;
    double cook_charcoal = 0.0625;
    double cook_kerosene = 0.13;
    double cook_elecgas = 0.283;
    double cook_other = 0.339;
    double gdisp_compost = -0.0722;
    double gdisp_heap = -0.056;
    double own_tv = 0.0408;
    double own_fridge = 0.0259;
    double own_stove = -0.0036;
    double own_bcycle = -0.08;
    double own_car = 0.0593;
    double own_iron = 0.007;
};

enum class MigrationMode {
    QuantileDecision, // conflict-area households decide via prefers_tau
    RandomCoin,       // every household migrates with a tau-independent coin
};

enum class AttritionMode {
    Random,        // attrition ignorable (uniform over households)
    PoorestDecile, // adversarial: attrition drawn from the poorest decile
};

struct GeneratorConfig {
    // Geography and sample size.
    int n_households = 5000;
    int n_lgas = 120;
    int n_states = 37;
    double share_some_conflict = 0.20;
    double share_always_conflict = 0.08;

    // Expenditure process.
    ExpenditureIndex index;
    double state_effect_sd = 0.15;
    double noise_sd = 0.35;          // idiosyncratic log-expenditure noise
    double conflict_penalty = 0.15;  // log-expenditure loss in conflict waves
    double conflict_noise_sd = 0.50; // extra dispersion in conflict waves
    double weight_log_sd = 0.5;      // design weights ~ exp(N(0, sd^2))

    // Preferences and the risk survey question.
    double tau_maxmin_share = 0.35; // P(tau = 0)
    double tau_maxmax_share = 0.35; // P(tau = 1); remainder uniform on (0,1)
    double threshold_tau = 0.5;     // answer risk-averse iff tau < threshold
    double risk_noise_rate = 0.10;  // probability the answer is flipped
    double conflict_ra_effect = 0.0; // planted drop in P(risk-averse) for
                                     // never-migrated conflict-exposed heads

    // Migration.
    MigrationMode migration_mode = MigrationMode::QuantileDecision;
    double background_migration_rate = 0.02; // non-conflict coin (QM mode)
    double random_migration_rate = 0.07;     // coin in RandomCoin mode
    double move_friction = 0.25;             // P(a leave-preferring household stays put)
    double within_state_share = 0.90;        // moves staying in-state
    int lottery_atoms = 100;                 // prospect discretization

    // Attrition.
    double attrition_rate = 0.083;
    AttritionMode attrition_mode = AttritionMode::Random;
    // Category mix over {refused, not_found, dead, moved_untracked,
    // crisis_area}; must sum to 1.
    std::array<double, 5> attrition_mix = {0.1124, 0.2392, 0.2009, 0.1148, 0.3327};
    double tracked_rate = 0.0096; // share of households tracked to new homes

    void validate() const; // throws std::invalid_argument with the field name
};

// A generated world: the panel plus the latent quantities the panel was
// built from.  The latent pieces (tau, state effects, household index) are
// what acceptance checks recover; they are never visible to the estimators.
struct SynthWorld {
    GeneratorConfig config;
    std::uint64_t seed = 0;
    PanelDataset panel;
    std::vector<AgentProfile> agents;  // by household id
    std::vector<LgaProfile> lgas;      // by lga id
    std::vector<double> state_effects;   // index 1..n_states
    std::vector<double> household_index; // index 1..n_households

    const LgaProfile& lga(int lga_id) const;
    ConflictClass lga_class(int lga_id) const;
};

// Builds geography, households, covariates, and expenditures for all six
// waves; nobody migrates or attrits yet.
SynthWorld generate_population(const GeneratorConfig& config, std::uint64_t seed);

// Stay/leave prospect builders: map an origin LGA to the lottery an agent
// there faces.  Builders may close over the world.
using LotteryBuilder = std::function<Lottery(const LgaProfile&)>;

// Default stay prospect: the LGA's own realized expenditure distribution
// over its conflict waves, discretized to config.lottery_atoms equal-mass
// outcomes.  Default leave prospect: the pooled expenditure distribution of
// all non-conflict LGAs.
LotteryBuilder default_stay_builder(const SynthWorld& world);
LotteryBuilder default_leave_builder(const SynthWorld& world);

// Runs the stay/leave decision for every household once, at its LGA's first
// conflict wave; a household that leaves changes LGA in the following wave,
// drawing a destination without conflict (~90% within its own state) and
// fresh post-move expenditures.  In RandomCoin mode decisions are
// tau-independent coins instead.  Deterministic given world.seed.
void simulate_migration(SynthWorld& world, const LotteryBuilder& stay,
                        const LotteryBuilder& leave);

// Marks wave-6 attrition by Table-1-style categories (crisis-area attrition
// is drawn from always-conflict residents), then reweights responding
// wave-6 households by the inverse response rate within their LGA so each
// LGA's weighted total is preserved.
void apply_attrition(SynthWorld& world);

// Wave-6 responding heads answer the risk question: risk-averse iff
// tau < threshold, flipped with probability noise_rate.  A non-zero
// config.conflict_ra_effect lowers the answer probability for
// conflict-exposed never-migrated heads (the planted DiD effect).
void assign_risk_answers(SynthWorld& world);

// generate_population + simulate_migration (default builders) +
// apply_attrition + assign_risk_answers.
SynthWorld make_world(const GeneratorConfig& config, std::uint64_t seed);

// --- Serialization -------------------------------------------------------

// Panel CSV, one row per household-wave.  Column order is fixed; risk_averse
// is empty when missing; attrition_status is the category name.
void write_panel_csv(std::ostream& out, const PanelDataset& panel);
PanelDataset read_panel_csv(std::istream& in);

void write_agents_csv(std::ostream& out, const std::vector<AgentProfile>& agents);
std::vector<AgentProfile> read_agents_csv(std::istream& in);

void write_lgas_csv(std::ostream& out, const std::vector<LgaProfile>& lgas);
std::vector<LgaProfile> read_lgas_csv(std::istream& in);

// Numeric table view of the panel for the estimators.  Carries every panel
// column (attrition_status as its integer code, risk_averse as NaN when
// missing) plus derived columns: ln_pcexp, responding, conflict_class
// (current LGA), origin_lga/origin_state/origin_class (wave-1 location),
// migrated_ever, and survivor (household responded at wave 6).
DataTable panel_to_table(const PanelDataset& panel, const std::vector<LgaProfile>& lgas);

} // namespace qmig
