#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <set>
#include <string>

#include "fpd/experiment.hpp"

using namespace fpd;
using Catch::Approx;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.defense = DefenseKind::Fpd;
    cfg.attack = AttackKind::None;
    cfg.clients = 10;
    cfg.compromised = 0;
    cfg.rounds = 4;
    cfg.local_epochs = 1;
    cfg.synthetic_labels = 5;
    cfg.synthetic_dim = 8;
    cfg.synthetic_train = 600;
    cfg.synthetic_test = 200;
    cfg.hidden = 8;
    cfg.size_min = 20;
    cfg.size_max = 40;
    cfg.seed = 7;
    return cfg;
}

}  // namespace

TEST_CASE("detection metrics set arithmetic") {
    StageVerdicts v;
    v.selected = {0, 1, 2, 3, 4};

    SECTION("perfect detection") {
        v.removed_colluding = {1};
        v.removed_spectral = {3};
        auto [p, r] = detection_metrics(v, {1, 3});
        CHECK(p.value() == 1.0);
        CHECK(r.value() == 1.0);
    }

    SECTION("nothing removed but attackers were selected") {
        auto [p, r] = detection_metrics(v, {2});
        CHECK_FALSE(p.has_value());
        CHECK(r.value() == 0.0);
    }

    SECTION("nothing removed, nothing to catch") {
        auto [p, r] = detection_metrics(v, {17});  // not selected
        CHECK(p.value() == 1.0);
        CHECK_FALSE(r.has_value());
    }

    SECTION("half right") {
        v.removed_colluding = {0, 1};  // removed = {a, b}; compromised-selected = {b, c}
        auto [p, r] = detection_metrics(v, {1, 2});
        CHECK(p.value() == 0.5);
        CHECK(r.value() == 0.5);
    }
}

TEST_CASE("config text parsing") {
    ExperimentConfig cfg = parse_config_text(
        "# an experiment\n"
        "defense = krum\n"
        "attack = lie\n"
        "clients = 25\n"
        "compromised = 5\n"
        "rounds = 12   # trailing comment\n"
        "q = 0.5\n"
        "lie_zmax = auto\n"
        "fpd_stage2 = off\n");
    CHECK(cfg.defense == DefenseKind::Krum);
    CHECK(cfg.attack == AttackKind::Lie);
    CHECK(cfg.clients == 25);
    CHECK(cfg.compromised == 5);
    CHECK(cfg.rounds == 12);
    CHECK(cfg.lie_zmax < 0.0);
    CHECK_FALSE(cfg.fpd_stage2);

    CHECK_THROWS_AS(parse_config_text("no_such_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("clients = many\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("defense krum\n"), ConfigError);

    try {
        parse_config_text("bogus_key = 3\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "bogus_key");
    }
}

TEST_CASE("config validation names the offending field") {
    ExperimentConfig cfg = tiny_config();
    cfg.compromised = 10;  // == clients
    try {
        cfg.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "compromised");
    }

    ExperimentConfig bad_q = tiny_config();
    bad_q.q = 0.05;  // below 1/L
    CHECK_THROWS_AS(bad_q.validate(), ConfigError);

    ExperimentConfig krum_small = tiny_config();
    krum_small.defense = DefenseKind::Krum;
    krum_small.compromised = 8;  // K=10 < f+3
    CHECK_THROWS_AS(krum_small.validate(), ConfigError);
}

TEST_CASE("FPD_SEED environment override") {
    setenv("FPD_SEED", "4242", 1);
    ExperimentConfig cfg = parse_config_text("seed = 1\n");
    unsetenv("FPD_SEED");
    CHECK(cfg.seed == 4242);
}

TEST_CASE("experiment runs are byte-identical across reruns") {
    ExperimentConfig cfg = tiny_config();
    auto o1 = run_experiment(cfg);
    auto o2 = run_experiment(cfg);
    CHECK(outcomes_to_csv(o1, cfg) == outcomes_to_csv(o2, cfg));

    ExperimentConfig other = cfg;
    other.seed = 8;
    auto o3 = run_experiment(other);
    CHECK(outcomes_to_csv(o1, cfg) != outcomes_to_csv(o3, other));
}

TEST_CASE("CSV schema and row structure") {
    ExperimentConfig cfg = tiny_config();
    cfg.rounds = 2;
    auto outcomes = run_experiment(cfg);
    std::string csv = outcomes_to_csv(outcomes, cfg);

    std::string header = csv.substr(0, csv.find('\n'));
    CHECK(header ==
          "round,defense,attack,selected,removed_colluding,removed_spectral,denoised,"
          "accuracy,precision,recall,seed");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 rounds
}

TEST_CASE("round outcomes partition selected into removed and survivors") {
    ExperimentConfig cfg = tiny_config();
    cfg.attack = AttackKind::SignFlip;
    cfg.compromised = 3;
    cfg.rounds = 6;
    auto outcomes = run_experiment(cfg);
    REQUIRE(outcomes.size() == 6);
    for (const auto& o : outcomes) {
        CHECK(o.accuracy >= 0.0);
        CHECK(o.accuracy <= 1.0);
        std::set<ClientId> all = o.survivors;
        for (ClientId id : o.removed_colluding) CHECK(all.insert(id).second);
        for (ClientId id : o.removed_spectral) CHECK(all.insert(id).second);
        CHECK(all == o.selected);
        if (o.precision) {
            CHECK(*o.precision >= 0.0);
            CHECK(*o.precision <= 1.0);
        }
        if (o.recall) {
            CHECK(*o.recall >= 0.0);
            CHECK(*o.recall <= 1.0);
        }
    }
}

TEST_CASE("baseline defenses aggregate every round without verdicts") {
    for (DefenseKind d : {DefenseKind::FedAvg, DefenseKind::Median, DefenseKind::Faba}) {
        ExperimentConfig cfg = tiny_config();
        cfg.defense = d;
        cfg.rounds = 3;
        auto outcomes = run_experiment(cfg);
        for (const auto& o : outcomes) {
            CHECK(o.selected.size() == 10);
            CHECK(o.removed_colluding.empty());
            CHECK(o.removed_spectral.empty());
            CHECK(o.survivors == o.selected);
        }
    }
}

TEST_CASE("mixed attack runs deterministically end to end") {
    ExperimentConfig cfg = tiny_config();
    cfg.attack = AttackKind::Mixed;
    cfg.compromised = 4;
    cfg.rounds = 5;
    auto o1 = run_experiment(cfg);
    auto o2 = run_experiment(cfg);
    CHECK(outcomes_to_csv(o1, cfg) == outcomes_to_csv(o2, cfg));
    for (const auto& o : o1) {
        CHECK(o.accuracy >= 0.0);
        CHECK(o.accuracy <= 1.0);
    }
}

TEST_CASE("summary rows carry cell means") {
    std::vector<SummaryRow> rows = {{"fpd", "lie", 6, 0.5, 0.91, 3}};
    std::string csv = summary_to_csv(rows);
    CHECK(csv.find("defense,attack,compromised,q,mean_final_accuracy,repetitions") == 0);
    CHECK(csv.find("fpd,lie,6,0.5,0.91,3") != std::string::npos);
    std::string table = summary_to_table(rows);
    CHECK(table.find("fpd") != std::string::npos);
}

TEST_CASE("single repetition mean equals the run itself") {
    ExperimentConfig cfg = tiny_config();
    cfg.rounds = 3;
    auto outcomes = run_experiment(cfg);
    double final_acc = outcomes.back().accuracy;
    CHECK(final_acc >= 0.0);
    CHECK(final_acc <= 1.0);
    std::vector<SummaryRow> rows = {{defense_name(cfg.defense), attack_name(cfg.attack),
                                     cfg.compromised, cfg.q, final_acc, 1}};
    CHECK(rows[0].mean_final_accuracy == final_acc);
}
