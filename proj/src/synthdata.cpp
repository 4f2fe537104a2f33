#include "qmig/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "qmig/csv.hpp"
#include "qmig/empirical.hpp"
#include "qmig/rng.hpp"

namespace qmig {

namespace {
// Stream tags: each generation phase derives its own engine so that a
// change in one phase never perturbs the draws of another.
constexpr std::uint64_t kTagGeography = 0x6e01;
constexpr std::uint64_t kTagCovariates = 0x6e02;
constexpr std::uint64_t kTagTau = 0x6e03;
constexpr std::uint64_t kTagExpenditure = 0x6e04;
constexpr std::uint64_t kTagMigration = 0x6e05;
constexpr std::uint64_t kTagAttrition = 0x6e06;
constexpr std::uint64_t kTagRisk = 0x6e07;

constexpr int kWaves = 6;
} // namespace

std::string to_string(ConflictClass c) {
    switch (c) {
        case ConflictClass::None: return "none";
        case ConflictClass::Some: return "some";
        case ConflictClass::Always: return "always";
    }
    return "none";
}

std::string to_string(AttritionStatus s) {
    switch (s) {
        case AttritionStatus::Interviewed: return "interviewed";
        case AttritionStatus::Tracked: return "tracked";
        case AttritionStatus::Refused: return "refused";
        case AttritionStatus::NotFound: return "not_found";
        case AttritionStatus::Dead: return "dead";
        case AttritionStatus::MovedUntracked: return "moved_untracked";
        case AttritionStatus::CrisisArea: return "crisis_area";
    }
    return "interviewed";
}

AttritionStatus attrition_status_from_string(const std::string& s) {
    if (s == "interviewed") return AttritionStatus::Interviewed;
    if (s == "tracked") return AttritionStatus::Tracked;
    if (s == "refused") return AttritionStatus::Refused;
    if (s == "not_found") return AttritionStatus::NotFound;
    if (s == "dead") return AttritionStatus::Dead;
    if (s == "moved_untracked") return AttritionStatus::MovedUntracked;
    if (s == "crisis_area") return AttritionStatus::CrisisArea;
    throw std::invalid_argument("unknown attrition status: " + s);
}

bool is_responding(AttritionStatus s) {
    return s == AttritionStatus::Interviewed || s == AttritionStatus::Tracked;
}

namespace {

void check(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("generator config: " + msg);
}

} // namespace

void GeneratorConfig::validate() const {
    check(n_households >= 100, "n_households must be >= 100");
    check(n_lgas >= 10, "n_lgas must be >= 10");
    check(n_states >= 1 && n_states <= n_lgas, "n_states must lie in [1, n_lgas]");
    check(share_some_conflict >= 0.0 && share_some_conflict <= 1.0,
          "share_some_conflict must lie in [0, 1]");
    check(share_always_conflict >= 0.0 && share_always_conflict <= 1.0,
          "share_always_conflict must lie in [0, 1]");
    check(share_some_conflict + share_always_conflict <= 0.9,
          "conflict shares must leave at least 10% of LGAs without conflict");
    check(state_effect_sd >= 0.0, "state_effect_sd must be non-negative");
    check(noise_sd >= 0.0, "noise_sd must be non-negative");
    check(conflict_penalty >= 0.0, "conflict_penalty must be non-negative");
    check(conflict_noise_sd >= 0.0, "conflict_noise_sd must be non-negative");
    check(weight_log_sd >= 0.0, "weight_log_sd must be non-negative");
    check(tau_maxmin_share >= 0.0 && tau_maxmax_share >= 0.0 &&
              tau_maxmin_share + tau_maxmax_share <= 1.0,
          "tau point-mass shares must be non-negative and sum to at most 1");
    check(threshold_tau > 0.0 && threshold_tau < 1.0, "threshold_tau must lie in (0, 1)");
    check(risk_noise_rate >= 0.0 && risk_noise_rate < 0.5,
          "risk_noise_rate must lie in [0, 0.5)");
    check(conflict_ra_effect >= 0.0 && conflict_ra_effect <= 1.0,
          "conflict_ra_effect must lie in [0, 1]");
    check(background_migration_rate >= 0.0 && background_migration_rate <= 1.0,
          "background_migration_rate must lie in [0, 1]");
    check(random_migration_rate >= 0.0 && random_migration_rate <= 1.0,
          "random_migration_rate must lie in [0, 1]");
    check(move_friction >= 0.0 && move_friction < 1.0, "move_friction must lie in [0, 1)");
    check(within_state_share >= 0.0 && within_state_share <= 1.0,
          "within_state_share must lie in [0, 1]");
    check(lottery_atoms >= 2, "lottery_atoms must be >= 2");
    check(attrition_rate >= 0.0 && attrition_rate <= 0.3,
          "attrition_rate must lie in [0, 0.3]");
    double mix_sum = 0.0;
    for (double m : attrition_mix) {
        check(m >= 0.0, "attrition_mix entries must be non-negative");
        mix_sum += m;
    }
    check(std::fabs(mix_sum - 1.0) <= 1e-9, "attrition_mix must sum to 1");
    check(tracked_rate >= 0.0 && tracked_rate <= 0.05, "tracked_rate must lie in [0, 0.05]");
}

const LgaProfile& SynthWorld::lga(int lga_id) const {
    if (lga_id < 1 || static_cast<std::size_t>(lga_id) > lgas.size()) {
        throw std::invalid_argument("lga id out of range: " + std::to_string(lga_id));
    }
    return lgas[static_cast<std::size_t>(lga_id) - 1];
}

ConflictClass SynthWorld::lga_class(int lga_id) const { return lga(lga_id).conflict_class; }

namespace {

// 1-based categorical draw with the given level probabilities.
int pick_level(Rng& rng, std::initializer_list<double> probs) {
    double u = next_unit(rng);
    double cum = 0.0;
    int level = 0;
    for (double p : probs) {
        ++level;
        cum += p;
        if (u < cum) return level;
    }
    return level;
}

int bernoulli(Rng& rng, double p) { return next_unit(rng) < p ? 1 : 0; }

double planted_index(const ExpenditureIndex& ix, const HouseholdRecord& r) {
    double v = ix.intercept;
    v += ix.hhsize * r.hhsize;
    v += ix.dep_share * r.dep_share;
    v += ix.rururb * r.rururb;
    v += ix.hh_sex * r.hh_sex;
    v += ix.hh_agey * r.hh_agey;
    v += ix.hh_eduyrs * r.hh_eduyrs;
    v += ix.hh_empl * r.hh_empl;
    v += ix.hh_marstat * r.hh_marstat;
    v += ix.sex_marstat * (r.hh_sex * r.hh_marstat);
    if (r.hh_language == 2) v += ix.lang_igbo;
    if (r.hh_language == 3) v += ix.lang_yoruba;
    if (r.hh_language == 4) v += ix.lang_other;
    v += ix.dwel_rooms * r.dwel_rooms;
    if (r.dwel_roof == 2) v += ix.roof_medium;
    if (r.dwel_roof == 3) v += ix.roof_high;
    if (r.dwel_wall == 2) v += ix.wall_medium;
    if (r.dwel_wall == 3) v += ix.wall_high;
    if (r.dwel_floor == 2) v += ix.floor_medium;
    if (r.dwel_floor == 3) v += ix.floor_high;
    if (r.dwel_toilet == 2) v += ix.toilet_flush;
    if (r.dwel_toilet == 3) v += ix.toilet_improved_pit;
    if (r.dwel_toilet == 4) v += ix.toilet_open_pit;
    if (r.dwel_toilet == 5) v += ix.toilet_other;
    if (r.dwel_fuellight == 2) v += ix.light_kerosene;
    if (r.dwel_fuellight == 3) v += ix.light_candle;
    if (r.dwel_fuellight == 4) v += ix.light_other;
    if (r.dwel_fuelcook == 2) v += ix.cook_charcoal;
    if (r.dwel_fuelcook == 3) v += ix.cook_kerosene;
    if (r.dwel_fuelcook == 4) v += ix.cook_elecgas;
    if (r.dwel_fuelcook == 5) v += ix.cook_other;
    if (r.dwel_gdisp == 2) v += ix.gdisp_compost;
    if (r.dwel_gdisp == 3) v += ix.gdisp_heap;
    v += ix.own_tv * r.own_tv;
    v += ix.own_fridge * r.own_fridge;
    v += ix.own_stove * r.own_stove;
    v += ix.own_bcycle * r.own_bcycle;
    v += ix.own_car * r.own_car;
    v += ix.own_iron * r.own_iron;
    return v;
}

// Index of household h's record for a wave, relying on the generator's
// household-major layout.
std::size_t record_at(std::int64_t h, int wave) {
    return static_cast<std::size_t>(h - 1) * kWaves + static_cast<std::size_t>(wave - 1);
}

} // namespace

SynthWorld generate_population(const GeneratorConfig& config, std::uint64_t seed) {
    config.validate();
    SynthWorld world;
    world.config = config;
    world.seed = seed;

    const int n_lgas = config.n_lgas;
    const int n_states = config.n_states;
    const int n_hh = config.n_households;

    // --- Geography: states round-robin over a shuffled LGA order, conflict
    // classes by deterministic counts over another shuffle.
    Rng geo = make_rng(seed, kTagGeography);
    world.lgas.resize(static_cast<std::size_t>(n_lgas));
    {
        std::vector<int> order(static_cast<std::size_t>(n_lgas));
        std::iota(order.begin(), order.end(), 0);
        shuffle_portable(order, geo);
        for (int i = 0; i < n_lgas; ++i) {
            auto& lga = world.lgas[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
            lga.state_id = 1 + i % n_states;
        }
        for (int i = 0; i < n_lgas; ++i) {
            world.lgas[static_cast<std::size_t>(i)].lga_id = i + 1;
        }

        std::vector<int> cls_order(static_cast<std::size_t>(n_lgas));
        std::iota(cls_order.begin(), cls_order.end(), 0);
        shuffle_portable(cls_order, geo);
        int n_always = static_cast<int>(std::lround(config.share_always_conflict * n_lgas));
        int n_some = static_cast<int>(std::lround(config.share_some_conflict * n_lgas));
        for (int i = 0; i < n_always + n_some && i < n_lgas; ++i) {
            auto& lga = world.lgas[static_cast<std::size_t>(cls_order[static_cast<std::size_t>(i)])];
            lga.conflict_class = i < n_always ? ConflictClass::Always : ConflictClass::Some;
        }

        // Fatality paths: always-conflict LGAs burn in every wave; some-
        // conflict LGAs see late escalation in their last 1-3 waves, which
        // guarantees wave-6 exposure for the dominance analysis.  Late onset
        // also leaves a third of them no post-onset wave to move in, so
        // selection on risk attitude is strongest where conflict is chronic.
        for (auto& lga : world.lgas) {
            if (lga.conflict_class == ConflictClass::Always) {
                for (int w = 0; w < kWaves; ++w) lga.fatalities[static_cast<std::size_t>(w)] = 1 + next_poisson(geo, 6.0);
            } else if (lga.conflict_class == ConflictClass::Some) {
                int m = 1 + static_cast<int>(next_index(geo, 3)); // 1..3 conflict waves
                for (int w = kWaves - m; w < kWaves; ++w) {
                    lga.fatalities[static_cast<std::size_t>(w)] = 1 + next_poisson(geo, 3.0);
                }
            }
        }

        world.state_effects.assign(static_cast<std::size_t>(n_states) + 1, 0.0);
        for (int s = 1; s <= n_states; ++s) {
            world.state_effects[static_cast<std::size_t>(s)] =
                config.state_effect_sd * next_normal(geo);
        }
    }

    // --- Households: time-invariant covariates, design weight, tau.
    Rng cov = make_rng(seed, kTagCovariates);
    Rng tau_rng = make_rng(seed, kTagTau);
    world.agents.reserve(static_cast<std::size_t>(n_hh));
    world.household_index.assign(static_cast<std::size_t>(n_hh) + 1, 0.0);
    world.panel.records.reserve(static_cast<std::size_t>(n_hh) * kWaves);

    std::vector<HouseholdRecord> base(static_cast<std::size_t>(n_hh));
    for (int h = 1; h <= n_hh; ++h) {
        HouseholdRecord& r = base[static_cast<std::size_t>(h - 1)];
        r.household_id = h;
        r.lga_id = 1 + static_cast<int>(next_index(cov, static_cast<std::size_t>(n_lgas)));
        r.state_id = world.lga(r.lga_id).state_id;
        r.rururb = bernoulli(cov, 0.40);
        r.weight = std::exp(config.weight_log_sd * next_normal(cov));
        r.hhsize = 1 + next_poisson(cov, 4.365);
        r.dep_share = std::clamp(0.433 + 0.18 * next_normal(cov), 0.0, 1.0);
        r.hh_sex = bernoulli(cov, 0.85);
        r.hh_agey = std::clamp(static_cast<int>(std::lround(49.6 + 15.0 * next_normal(cov))), 18, 95);
        r.hh_eduyrs = bernoulli(cov, 0.25) ? 0 : 1 + static_cast<int>(next_index(cov, 16));
        r.hh_empl = bernoulli(cov, 0.91);
        r.hh_marstat = bernoulli(cov, 0.80);
        r.hh_language = pick_level(cov, {0.27, 0.17, 0.25, 0.31});
        r.dwel_rooms = 1 + next_poisson(cov, 2.2);
        r.dwel_roof = pick_level(cov, {0.18, 0.80, 0.02});
        r.dwel_wall = pick_level(cov, {0.42, 0.10, 0.48});
        r.dwel_floor = pick_level(cov, {0.11, 0.19, 0.70});
        r.dwel_toilet = pick_level(cov, {0.185, 0.19, 0.026, 0.47, 0.129});
        r.dwel_fuellight = pick_level(cov, {0.35, 0.37, 0.13, 0.15});
        r.dwel_fuelcook = pick_level(cov, {0.65, 0.01, 0.29, 0.017, 0.033});
        r.dwel_gdisp = pick_level(cov, {0.15, 0.32, 0.53});
        r.own_tv = bernoulli(cov, 0.43);
        r.own_fridge = bernoulli(cov, 0.19);
        r.own_stove = bernoulli(cov, 0.50);
        r.own_bcycle = bernoulli(cov, 0.19);
        r.own_car = bernoulli(cov, 0.10);
        r.own_iron = bernoulli(cov, 0.39);

        double u = next_unit(tau_rng);
        double tau;
        if (u < config.tau_maxmin_share) {
            tau = 0.0;
        } else if (u < config.tau_maxmin_share + config.tau_maxmax_share) {
            tau = 1.0;
        } else {
            tau = next_unit(tau_rng);
        }
        world.agents.push_back(
            {h, tau, tau < config.threshold_tau ? 1 : 0});
        world.household_index[static_cast<std::size_t>(h)] = planted_index(config.index, r);
    }

    // --- Expenditure paths, wave by wave within household.
    Rng exp_rng = make_rng(seed, kTagExpenditure);
    for (int h = 1; h <= n_hh; ++h) {
        const HouseholdRecord& proto = base[static_cast<std::size_t>(h - 1)];
        const LgaProfile& lga = world.lga(proto.lga_id);
        double index = world.household_index[static_cast<std::size_t>(h)];
        for (int wave = 1; wave <= kWaves; ++wave) {
            HouseholdRecord r = proto;
            r.wave = wave;
            r.conflict = lga.fatalities[static_cast<std::size_t>(wave - 1)];
            double lny = index + world.state_effects[static_cast<std::size_t>(r.state_id)] +
                         config.noise_sd * next_normal(exp_rng);
            if (r.conflict > 0) {
                lny += -config.conflict_penalty + config.conflict_noise_sd * next_normal(exp_rng);
            }
            r.pcexp = std::exp(lny);
            world.panel.records.push_back(r);
        }
    }
    return world;
}

namespace {

Lottery discretize(const EmpiricalDistribution& dist, int atoms) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(atoms));
    for (int i = 0; i < atoms; ++i) {
        double q = (static_cast<double>(i) + 0.5) / static_cast<double>(atoms);
        values.push_back(dist.quantile(q));
    }
    return Lottery::uniform(values);
}

} // namespace

LotteryBuilder default_stay_builder(const SynthWorld& world) {
    const SynthWorld* w = &world;
    return [w](const LgaProfile& lga) {
        std::vector<WeightedPoint> sample;
        for (const auto& r : w->panel.records) {
            if (r.lga_id == lga.lga_id &&
                lga.fatalities[static_cast<std::size_t>(r.wave - 1)] > 0) {
                sample.push_back({r.pcexp, r.weight});
            }
        }
        if (sample.empty()) {
            throw std::invalid_argument("stay prospect: LGA " + std::to_string(lga.lga_id) +
                                        " has no conflict-wave expenditure data");
        }
        return discretize(EmpiricalDistribution(std::move(sample)), w->config.lottery_atoms);
    };
}

LotteryBuilder default_leave_builder(const SynthWorld& world) {
    // The leave prospect is the same pooled non-conflict distribution for
    // every origin, so build it once.
    std::vector<WeightedPoint> sample;
    for (const auto& r : world.panel.records) {
        if (world.lga_class(r.lga_id) == ConflictClass::None) {
            sample.push_back({r.pcexp, r.weight});
        }
    }
    if (sample.empty()) {
        throw std::invalid_argument("leave prospect: no non-conflict LGA data");
    }
    Lottery pooled = discretize(EmpiricalDistribution(std::move(sample)),
                                world.config.lottery_atoms);
    return [pooled](const LgaProfile&) { return pooled; };
}

void simulate_migration(SynthWorld& world, const LotteryBuilder& stay,
                        const LotteryBuilder& leave) {
    const GeneratorConfig& cfg = world.config;
    Rng rng = make_rng(world.seed, kTagMigration);

    // Destination candidates: LGAs without conflict, globally and per state.
    std::vector<int> none_lgas;
    std::unordered_map<int, std::vector<int>> none_by_state;
    for (const auto& lga : world.lgas) {
        if (lga.conflict_class == ConflictClass::None) {
            none_lgas.push_back(lga.lga_id);
            none_by_state[lga.state_id].push_back(lga.lga_id);
        }
    }
    if (none_lgas.empty()) {
        throw std::invalid_argument("no non-conflict destination LGA available");
    }

    // Stay/leave prospects per conflict LGA, built lazily once each.
    std::unordered_map<int, std::pair<Lottery, Lottery>> prospects;
    auto lotteries_for = [&](const LgaProfile& lga) -> const std::pair<Lottery, Lottery>& {
        auto it = prospects.find(lga.lga_id);
        if (it == prospects.end()) {
            it = prospects.emplace(lga.lga_id, std::make_pair(stay(lga), leave(lga))).first;
        }
        return it->second;
    };

    // Uniform draw from pool excluding the origin (a background mover from a
    // non-conflict LGA may find its own LGA in the pool); 0 when no
    // candidate remains.
    auto draw_excluding = [&](const std::vector<int>& pool, int origin) -> int {
        std::size_t count = pool.size();
        if (std::find(pool.begin(), pool.end(), origin) != pool.end()) --count;
        if (count == 0) return 0;
        std::size_t k = next_index(rng, count);
        for (int id : pool) {
            if (id == origin) continue;
            if (k == 0) return id;
            --k;
        }
        return 0;
    };

    auto pick_destination = [&](int origin_lga, int origin_state) {
        int dest = 0;
        if (next_unit(rng) < cfg.within_state_share) {
            auto it = none_by_state.find(origin_state);
            if (it != none_by_state.end()) dest = draw_excluding(it->second, origin_lga);
        }
        if (dest == 0) dest = draw_excluding(none_lgas, origin_lga);
        if (dest == 0) {
            throw std::invalid_argument(
                "no non-conflict destination LGA distinct from the origin");
        }
        return dest;
    };

    for (std::int64_t h = 1; h <= cfg.n_households; ++h) {
        HouseholdRecord& first = world.panel.records[record_at(h, 1)];
        int origin_lga = first.lga_id;
        int origin_state = first.state_id;
        ConflictClass cls = world.lga_class(origin_lga);
        const double tau = world.agents[static_cast<std::size_t>(h - 1)].tau;

        int move_wave = 0;
        if (cfg.migration_mode == MigrationMode::RandomCoin) {
            if (next_unit(rng) < cfg.random_migration_rate) {
                move_wave = 2 + static_cast<int>(next_index(rng, 5));
            }
        } else if (cls != ConflictClass::None) {
            const LgaProfile& lga = world.lga(origin_lga);
            int first_conflict = 0;
            for (int w = 1; w <= kWaves; ++w) {
                if (lga.fatalities[static_cast<std::size_t>(w - 1)] > 0) {
                    first_conflict = w;
                    break;
                }
            }
            const auto& [stay_lot, leave_lot] = lotteries_for(lga);
            // Choice at the household's own tau; indifference resolves to
            // staying, and a friction term keeps some would-be movers in
            // place (moving costs, ties, inertia).
            if (prefers_tau(leave_lot, stay_lot, tau) == Preference::First &&
                first_conflict + 1 <= kWaves &&
                !(cfg.move_friction > 0.0 && next_unit(rng) < cfg.move_friction)) {
                move_wave = first_conflict + 1;
            }
        } else if (cfg.background_migration_rate > 0.0 &&
                   next_unit(rng) < cfg.background_migration_rate) {
            move_wave = 2 + static_cast<int>(next_index(rng, 5));
        }
        if (move_wave == 0) continue;

        int dest = pick_destination(origin_lga, origin_state);
        const LgaProfile& dest_lga = world.lga(dest);
        double index = world.household_index[static_cast<std::size_t>(h)];
        for (int wave = move_wave; wave <= kWaves; ++wave) {
            HouseholdRecord& r = world.panel.records[record_at(h, wave)];
            r.lga_id = dest;
            r.state_id = dest_lga.state_id;
            r.conflict = dest_lga.fatalities[static_cast<std::size_t>(wave - 1)];
            r.migrated = wave == move_wave ? 1 : 0;
            double lny = index +
                         world.state_effects[static_cast<std::size_t>(r.state_id)] +
                         cfg.noise_sd * next_normal(rng);
            r.pcexp = std::exp(lny);
        }
    }
}

void apply_attrition(SynthWorld& world) {
    const GeneratorConfig& cfg = world.config;
    if (cfg.attrition_rate == 0.0) return;
    Rng rng = make_rng(world.seed, kTagAttrition);
    const int n = cfg.n_households;

    const long long n_attrit = std::llround(cfg.attrition_rate * n);
    // Largest-remainder apportionment of the five category counts.
    std::array<long long, 5> counts{};
    {
        std::array<double, 5> frac{};
        long long assigned = 0;
        for (std::size_t c = 0; c < 5; ++c) {
            double exact = cfg.attrition_mix[c] * static_cast<double>(n_attrit);
            counts[c] = static_cast<long long>(std::floor(exact));
            frac[c] = exact - std::floor(exact);
            assigned += counts[c];
        }
        std::array<std::size_t, 5> order{0, 1, 2, 3, 4};
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (frac[a] != frac[b]) return frac[a] > frac[b];
            return a < b;
        });
        for (long long r = 0; r < n_attrit - assigned; ++r) ++counts[order[static_cast<std::size_t>(r) % 5]];
    }
    constexpr std::array<AttritionStatus, 5> kCategories = {
        AttritionStatus::Refused, AttritionStatus::NotFound, AttritionStatus::Dead,
        AttritionStatus::MovedUntracked, AttritionStatus::CrisisArea};

    std::vector<char> taken(static_cast<std::size_t>(n) + 1, 0);
    auto assign = [&](std::int64_t h, AttritionStatus s) {
        world.panel.records[record_at(h, kWaves)].attrition_status = s;
        taken[static_cast<std::size_t>(h)] = 1;
    };

    if (cfg.attrition_mode == AttritionMode::PoorestDecile) {
        // Adversarial variant: every category draws from the poorest decile
        // of wave-1 expenditure (the crisis-geography constraint is moot).
        std::vector<std::int64_t> ids(static_cast<std::size_t>(n));
        std::iota(ids.begin(), ids.end(), 1);
        std::sort(ids.begin(), ids.end(), [&](std::int64_t a, std::int64_t b) {
            double pa = world.panel.records[record_at(a, 1)].pcexp;
            double pb = world.panel.records[record_at(b, 1)].pcexp;
            if (pa != pb) return pa < pb;
            return a < b;
        });
        std::vector<std::int64_t> pool(ids.begin(), ids.begin() + n / 10);
        if (static_cast<long long>(pool.size()) < n_attrit) {
            throw std::invalid_argument(
                "infeasible attrition category mix: poorest decile smaller than target");
        }
        shuffle_portable(pool, rng);
        std::size_t next = 0;
        for (std::size_t c = 0; c < 5; ++c) {
            for (long long k = 0; k < counts[c]; ++k) assign(pool[next++], kCategories[c]);
        }
    } else {
        // Crisis-area attrition is concentrated where enumeration became
        // impossible: households residing in a conflict LGA at the final
        // wave.
        std::vector<std::int64_t> crisis_pool;
        for (std::int64_t h = 1; h <= n; ++h) {
            const auto& r6 = world.panel.records[record_at(h, kWaves)];
            if (world.lga_class(r6.lga_id) != ConflictClass::None) crisis_pool.push_back(h);
        }
        if (static_cast<long long>(crisis_pool.size()) < counts[4]) {
            throw std::invalid_argument(
                "infeasible attrition category mix: not enough conflict-area residents "
                "for crisis-area attrition");
        }
        shuffle_portable(crisis_pool, rng);
        for (long long k = 0; k < counts[4]; ++k) {
            assign(crisis_pool[static_cast<std::size_t>(k)], AttritionStatus::CrisisArea);
        }
        std::vector<std::int64_t> general;
        general.reserve(static_cast<std::size_t>(n));
        for (std::int64_t h = 1; h <= n; ++h) {
            if (!taken[static_cast<std::size_t>(h)]) general.push_back(h);
        }
        shuffle_portable(general, rng);
        std::size_t next = 0;
        for (std::size_t c = 0; c < 4; ++c) {
            for (long long k = 0; k < counts[c]; ++k) assign(general[next++], kCategories[c]);
        }
    }

    // A small share of surviving movers was tracked to a new dwelling; they
    // respond, so they are attrition-neutral.
    long long n_tracked = std::llround(cfg.tracked_rate * n);
    if (n_tracked > 0) {
        std::vector<std::int64_t> survivors;
        for (std::int64_t h = 1; h <= n; ++h) {
            if (!taken[static_cast<std::size_t>(h)]) survivors.push_back(h);
        }
        shuffle_portable(survivors, rng);
        n_tracked = std::min<long long>(n_tracked, static_cast<long long>(survivors.size()));
        for (long long k = 0; k < n_tracked; ++k) {
            world.panel.records[record_at(survivors[static_cast<std::size_t>(k)], kWaves)]
                .attrition_status = AttritionStatus::Tracked;
        }
    }

    // Inverse response-rate reweighting within the wave-6 LGA: responding
    // households absorb the weight of their LGA's non-respondents, so each
    // LGA's weighted total is unchanged.
    std::unordered_map<int, double> w_all, w_resp;
    for (std::int64_t h = 1; h <= n; ++h) {
        const auto& r6 = world.panel.records[record_at(h, kWaves)];
        w_all[r6.lga_id] += r6.weight;
        if (is_responding(r6.attrition_status)) w_resp[r6.lga_id] += r6.weight;
    }
    for (std::int64_t h = 1; h <= n; ++h) {
        auto& r6 = world.panel.records[record_at(h, kWaves)];
        if (!is_responding(r6.attrition_status)) continue;
        double denom = w_resp[r6.lga_id];
        if (denom > 0.0) r6.weight *= w_all[r6.lga_id] / denom;
    }
}

void assign_risk_answers(SynthWorld& world) {
    const GeneratorConfig& cfg = world.config;
    Rng rng = make_rng(world.seed, kTagRisk);
    for (std::int64_t h = 1; h <= cfg.n_households; ++h) {
        auto& r6 = world.panel.records[record_at(h, kWaves)];
        if (!is_responding(r6.attrition_status)) {
            r6.risk_averse = -1;
            continue;
        }
        const AgentProfile& agent = world.agents[static_cast<std::size_t>(h - 1)];
        double p = agent.tau < cfg.threshold_tau ? 1.0 - cfg.risk_noise_rate
                                                 : cfg.risk_noise_rate;
        if (cfg.conflict_ra_effect > 0.0) {
            bool exposed = world.lga_class(world.panel.records[record_at(h, 1)].lga_id) !=
                           ConflictClass::None;
            bool never_migrated = true;
            for (int wave = 1; wave <= kWaves; ++wave) {
                if (world.panel.records[record_at(h, wave)].migrated == 1) {
                    never_migrated = false;
                    break;
                }
            }
            if (exposed && never_migrated) {
                p = std::clamp(p - cfg.conflict_ra_effect, 0.0, 1.0);
            }
        }
        r6.risk_averse = next_unit(rng) < p ? 1 : 0;
    }
}

SynthWorld make_world(const GeneratorConfig& config, std::uint64_t seed) {
    SynthWorld world = generate_population(config, seed);
    if (config.migration_mode == MigrationMode::QuantileDecision) {
        simulate_migration(world, default_stay_builder(world), default_leave_builder(world));
    } else {
        // Builders are irrelevant for coin-flip migration but the call site
        // is shared; pass cheap stand-ins.
        LotteryBuilder noop = [](const LgaProfile&) { return Lottery::uniform({0.0}); };
        simulate_migration(world, noop, noop);
    }
    apply_attrition(world);
    assign_risk_answers(world);
    return world;
}

// --- Serialization ---------------------------------------------------------

namespace {

const char* kPanelHeader =
    "household_id,wave,lga_id,state_id,rururb,weight,pcexp,hhsize,dep_share,hh_sex,"
    "hh_agey,hh_eduyrs,hh_empl,hh_marstat,hh_language,dwel_rooms,dwel_roof,dwel_wall,"
    "dwel_floor,dwel_toilet,dwel_fuellight,dwel_fuelcook,dwel_gdisp,own_tv,own_fridge,"
    "own_stove,own_bcycle,own_car,own_iron,conflict,migrated,risk_averse,attrition_status";

} // namespace

void write_panel_csv(std::ostream& out, const PanelDataset& panel) {
    out << kPanelHeader << '\n';
    for (const auto& r : panel.records) {
        out << r.household_id << ',' << r.wave << ',' << r.lga_id << ',' << r.state_id << ','
            << r.rururb << ',' << csv::format_double(r.weight) << ','
            << csv::format_double(r.pcexp) << ',' << r.hhsize << ','
            << csv::format_double(r.dep_share) << ',' << r.hh_sex << ',' << r.hh_agey << ','
            << r.hh_eduyrs << ',' << r.hh_empl << ',' << r.hh_marstat << ',' << r.hh_language
            << ',' << r.dwel_rooms << ',' << r.dwel_roof << ',' << r.dwel_wall << ','
            << r.dwel_floor << ',' << r.dwel_toilet << ',' << r.dwel_fuellight << ','
            << r.dwel_fuelcook << ',' << r.dwel_gdisp << ',' << r.own_tv << ',' << r.own_fridge
            << ',' << r.own_stove << ',' << r.own_bcycle << ',' << r.own_car << ',' << r.own_iron
            << ',' << r.conflict << ',' << r.migrated << ',';
        if (r.risk_averse >= 0) out << r.risk_averse;
        out << ',' << to_string(r.attrition_status) << '\n';
    }
}

PanelDataset read_panel_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("panel csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kPanelHeader) throw std::runtime_error("panel csv: unexpected header");
    PanelDataset panel;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = csv::split_line(line);
        if (f.size() != 33) {
            throw std::runtime_error("panel csv: expected 33 fields, got " +
                                     std::to_string(f.size()));
        }
        HouseholdRecord r;
        std::size_t i = 0;
        r.household_id = csv::parse_int(f[i++]);
        r.wave = static_cast<int>(csv::parse_int(f[i++]));
        r.lga_id = static_cast<int>(csv::parse_int(f[i++]));
        r.state_id = static_cast<int>(csv::parse_int(f[i++]));
        r.rururb = static_cast<int>(csv::parse_int(f[i++]));
        r.weight = csv::parse_double(f[i++]);
        r.pcexp = csv::parse_double(f[i++]);
        r.hhsize = static_cast<int>(csv::parse_int(f[i++]));
        r.dep_share = csv::parse_double(f[i++]);
        r.hh_sex = static_cast<int>(csv::parse_int(f[i++]));
        r.hh_agey = static_cast<int>(csv::parse_int(f[i++]));
        r.hh_eduyrs = static_cast<int>(csv::parse_int(f[i++]));
        r.hh_empl = static_cast<int>(csv::parse_int(f[i++]));
        r.hh_marstat = static_cast<int>(csv::parse_int(f[i++]));
        r.hh_language = static_cast<int>(csv::parse_int(f[i++]));
        r.dwel_rooms = static_cast<int>(csv::parse_int(f[i++]));
        r.dwel_roof = static_cast<int>(csv::parse_int(f[i++]));
        r.dwel_wall = static_cast<int>(csv::parse_int(f[i++]));
        r.dwel_floor = static_cast<int>(csv::parse_int(f[i++]));
        r.dwel_toilet = static_cast<int>(csv::parse_int(f[i++]));
        r.dwel_fuellight = static_cast<int>(csv::parse_int(f[i++]));
        r.dwel_fuelcook = static_cast<int>(csv::parse_int(f[i++]));
        r.dwel_gdisp = static_cast<int>(csv::parse_int(f[i++]));
        r.own_tv = static_cast<int>(csv::parse_int(f[i++]));
        r.own_fridge = static_cast<int>(csv::parse_int(f[i++]));
        r.own_stove = static_cast<int>(csv::parse_int(f[i++]));
        r.own_bcycle = static_cast<int>(csv::parse_int(f[i++]));
        r.own_car = static_cast<int>(csv::parse_int(f[i++]));
        r.own_iron = static_cast<int>(csv::parse_int(f[i++]));
        r.conflict = static_cast<int>(csv::parse_int(f[i++]));
        r.migrated = static_cast<int>(csv::parse_int(f[i++]));
        r.risk_averse = f[i].empty() ? -1 : static_cast<int>(csv::parse_int(f[i]));
        ++i;
        r.attrition_status = attrition_status_from_string(f[i]);
        panel.records.push_back(r);
    }
    return panel;
}

void write_agents_csv(std::ostream& out, const std::vector<AgentProfile>& agents) {
    out << "household_id,tau,risk_averse_truth\n";
    for (const auto& a : agents) {
        out << a.household_id << ',' << csv::format_double(a.tau) << ','
            << a.risk_averse_truth << '\n';
    }
}

std::vector<AgentProfile> read_agents_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("agents csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "household_id,tau,risk_averse_truth") {
        throw std::runtime_error("agents csv: unexpected header");
    }
    std::vector<AgentProfile> agents;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = csv::split_line(line);
        if (f.size() != 3) throw std::runtime_error("agents csv: expected 3 fields");
        agents.push_back({csv::parse_int(f[0]), csv::parse_double(f[1]),
                          static_cast<int>(csv::parse_int(f[2]))});
    }
    return agents;
}

void write_lgas_csv(std::ostream& out, const std::vector<LgaProfile>& lgas) {
    out << "lga_id,state_id,conflict_class,fat_w1,fat_w2,fat_w3,fat_w4,fat_w5,fat_w6\n";
    for (const auto& l : lgas) {
        out << l.lga_id << ',' << l.state_id << ',' << to_string(l.conflict_class);
        for (int w = 0; w < kWaves; ++w) out << ',' << l.fatalities[static_cast<std::size_t>(w)];
        out << '\n';
    }
}

std::vector<LgaProfile> read_lgas_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("lgas csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "lga_id,state_id,conflict_class,fat_w1,fat_w2,fat_w3,fat_w4,fat_w5,fat_w6") {
        throw std::runtime_error("lgas csv: unexpected header");
    }
    std::vector<LgaProfile> lgas;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = csv::split_line(line);
        if (f.size() != 9) throw std::runtime_error("lgas csv: expected 9 fields");
        LgaProfile l;
        l.lga_id = static_cast<int>(csv::parse_int(f[0]));
        l.state_id = static_cast<int>(csv::parse_int(f[1]));
        if (f[2] == "none") l.conflict_class = ConflictClass::None;
        else if (f[2] == "some") l.conflict_class = ConflictClass::Some;
        else if (f[2] == "always") l.conflict_class = ConflictClass::Always;
        else throw std::runtime_error("lgas csv: unknown conflict class " + f[2]);
        for (int w = 0; w < kWaves; ++w) {
            l.fatalities[static_cast<std::size_t>(w)] =
                static_cast<int>(csv::parse_int(f[static_cast<std::size_t>(3 + w)]));
        }
        lgas.push_back(l);
    }
    return lgas;
}

DataTable panel_to_table(const PanelDataset& panel, const std::vector<LgaProfile>& lgas) {
    const std::size_t n = panel.records.size();

    std::unordered_map<int, const LgaProfile*> lga_by_id;
    for (const auto& l : lgas) lga_by_id[l.lga_id] = &l;
    auto lga_of = [&](int id) -> const LgaProfile& {
        auto it = lga_by_id.find(id);
        if (it == lga_by_id.end()) {
            throw std::invalid_argument("panel references unknown LGA " + std::to_string(id));
        }
        return *it->second;
    };

    // Household-level aggregates.
    struct HouseholdAgg {
        int origin_lga = 0;
        bool migrated_ever = false;
        bool survivor = false;
        bool has_wave1 = false;
    };
    std::unordered_map<std::int64_t, HouseholdAgg> agg;
    for (const auto& r : panel.records) {
        auto& a = agg[r.household_id];
        if (r.wave == 1) {
            a.origin_lga = r.lga_id;
            a.has_wave1 = true;
        }
        if (r.migrated == 1) a.migrated_ever = true;
        if (r.wave == kWaves && is_responding(r.attrition_status)) a.survivor = true;
    }
    for (const auto& [hid, a] : agg) {
        if (!a.has_wave1) {
            throw std::invalid_argument("household " + std::to_string(hid) +
                                        " has no wave-1 record");
        }
    }

    std::vector<std::vector<double>> cols(41, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = panel.records[i];
        const auto& a = agg[r.household_id];
        const LgaProfile& cur = lga_of(r.lga_id);
        const LgaProfile& origin = lga_of(a.origin_lga);
        std::size_t c = 0;
        cols[c++][i] = static_cast<double>(r.household_id);
        cols[c++][i] = r.wave;
        cols[c++][i] = r.lga_id;
        cols[c++][i] = r.state_id;
        cols[c++][i] = r.rururb;
        cols[c++][i] = r.weight;
        cols[c++][i] = r.pcexp;
        cols[c++][i] = r.hhsize;
        cols[c++][i] = r.dep_share;
        cols[c++][i] = r.hh_sex;
        cols[c++][i] = r.hh_agey;
        cols[c++][i] = r.hh_eduyrs;
        cols[c++][i] = r.hh_empl;
        cols[c++][i] = r.hh_marstat;
        cols[c++][i] = r.hh_language;
        cols[c++][i] = r.dwel_rooms;
        cols[c++][i] = r.dwel_roof;
        cols[c++][i] = r.dwel_wall;
        cols[c++][i] = r.dwel_floor;
        cols[c++][i] = r.dwel_toilet;
        cols[c++][i] = r.dwel_fuellight;
        cols[c++][i] = r.dwel_fuelcook;
        cols[c++][i] = r.dwel_gdisp;
        cols[c++][i] = r.own_tv;
        cols[c++][i] = r.own_fridge;
        cols[c++][i] = r.own_stove;
        cols[c++][i] = r.own_bcycle;
        cols[c++][i] = r.own_car;
        cols[c++][i] = r.own_iron;
        cols[c++][i] = r.conflict;
        cols[c++][i] = r.migrated;
        cols[c++][i] = r.risk_averse < 0 ? std::nan("") : r.risk_averse;
        cols[c++][i] = static_cast<double>(static_cast<int>(r.attrition_status));
        cols[c++][i] = std::log(r.pcexp);
        cols[c++][i] = is_responding(r.attrition_status) ? 1.0 : 0.0;
        cols[c++][i] = static_cast<double>(static_cast<int>(cur.conflict_class));
        cols[c++][i] = a.origin_lga;
        cols[c++][i] = origin.state_id;
        cols[c++][i] = static_cast<double>(static_cast<int>(origin.conflict_class));
        cols[c++][i] = a.migrated_ever ? 1.0 : 0.0;
        cols[c++][i] = a.survivor ? 1.0 : 0.0;
    }

    static const char* kNames[41] = {
        "household_id", "wave", "lga_id", "state_id", "rururb", "weight", "pcexp",
        "hhsize", "dep_share", "hh_sex", "hh_agey", "hh_eduyrs", "hh_empl", "hh_marstat",
        "hh_language", "dwel_rooms", "dwel_roof", "dwel_wall", "dwel_floor", "dwel_toilet",
        "dwel_fuellight", "dwel_fuelcook", "dwel_gdisp", "own_tv", "own_fridge", "own_stove",
        "own_bcycle", "own_car", "own_iron", "conflict", "migrated", "risk_averse",
        "attrition_status", "ln_pcexp", "responding", "conflict_class", "origin_lga",
        "origin_state", "origin_class", "migrated_ever", "survivor"};
    DataTable table(n);
    for (std::size_t c = 0; c < 41; ++c) table.add_column(kNames[c], std::move(cols[c]));
    return table;
}

} // namespace qmig
