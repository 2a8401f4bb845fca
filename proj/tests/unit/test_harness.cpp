#include "doctest.h"

#include "dpo/errors.hpp"
#include "dpo/harness.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dpo;
namespace fs = std::filesystem;

TEST_CASE("config parsing is strict") {
    auto doc = nlohmann::json::parse(R"({"algorithm": "tabular", "T": 10})");
    CHECK_NOTHROW(parse_config(doc));

    auto bad = doc;
    bad["instance"] = {{"layerz", {1, 2, 1}}};
    CHECK_THROWS_AS(parse_config(bad), ConfigError);

    bad = doc;
    bad["bogus"] = 1;
    CHECK_THROWS_AS(parse_config(bad), ConfigError);

    bad = doc;
    bad["T"] = "ten";
    CHECK_THROWS_AS(parse_config(bad), ConfigError);

    bad = doc;
    bad["T"] = -5;
    CHECK_THROWS_AS(parse_config(bad), ConfigError);

    bad = doc;
    bad["T"] = 2.5;
    CHECK_THROWS_AS(parse_config(bad), ConfigError);

    bad = doc;
    bad["T"] = 2e4;
    CHECK(parse_config(bad).T == 20000);

    bad = doc;
    bad["algorithm"] = "sarsa";
    CHECK_THROWS_AS(parse_config(bad), ConfigError);

    bad = doc;
    bad["params"] = {{"xi", 1.0}}; // linear-mdp key under tabular
    CHECK_THROWS_AS(parse_config(bad), ConfigError);

    bad = doc;
    bad["seeds"] = nlohmann::json::array();
    CHECK_THROWS_AS(parse_config(bad), ConfigError);

    bad = doc;
    bad.erase("T");
    CHECK_THROWS_AS(parse_config(bad), ConfigError);

    try {
        bad = doc;
        bad["instance"] = {{"layerz", 1}};
        parse_config(bad);
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("layerz") != std::string::npos);
    }
}

TEST_CASE("feature-linear losses default by algorithm") {
    CHECK_FALSE(parse_config(nlohmann::json::parse(R"({"algorithm": "tabular", "T": 10})")).feature_linear_losses);
    CHECK(parse_config(nlohmann::json::parse(R"({"algorithm": "linear-q", "T": 10})")).feature_linear_losses);
}

TEST_CASE("overrides") {
    nlohmann::json doc = {{"T", 10}};
    apply_override(doc, "params.eta=0.01");
    apply_override(doc, "instance.layers=[1,3,1]");
    apply_override(doc, "algorithm=linear-mdp");
    apply_override(doc, "T=20");
    CHECK(doc["params"]["eta"].get<double>() == 0.01);
    CHECK(doc["instance"]["layers"].size() == 3);
    CHECK(doc["algorithm"].get<std::string>() == "linear-mdp");
    CHECK(doc["T"].get<int>() == 20);
    CHECK_THROWS_AS(apply_override(doc, "no-equals-sign"), ConfigError);
}

TEST_CASE("worker count honours the environment") {
    setenv("DPO_WORKERS", "3", 1);
    CHECK(worker_count() == 3);
    setenv("DPO_WORKERS", "0", 1);
    CHECK_THROWS_AS(worker_count(), ConfigError);
    unsetenv("DPO_WORKERS");
    CHECK(worker_count() >= 1);
}

TEST_CASE("tabular defaults are echoed in the record") {
    auto doc = nlohmann::json::parse(R"({"algorithm": "tabular", "T": 10000,
        "instance": {"layers": [1, 2, 1], "actions": 2}, "seeds": [1]})");
    auto config = parse_config(doc);
    config.T = 10000;
    auto resolved = resolve(config.tabular, generate_instance(config.instance).mdp.layers(), config.T);
    CHECK(resolved.eta == doctest::Approx(0.0025).epsilon(1e-12));
    CHECK(resolved.gamma == doctest::Approx(0.01).epsilon(1e-12));

    doc["T"] = 40;
    auto result = run_experiment(parse_config(doc));
    REQUIRE(result.records.size() == 1);
    const double eta = std::stod(result.records[0].get("eta"));
    CHECK(eta == doctest::Approx(std::min(1.0 / 192.0, 1.0 / std::sqrt(4.0 * 2 * 2 * 40))));
}

TEST_CASE("experiment outputs") {
    const fs::path dir = fs::temp_directory_path() / "dpo_harness_test";
    fs::remove_all(dir);
    auto doc = nlohmann::json::parse(R"({
        "algorithm": "tabular",
        "T": 60,
        "instance": {"layers": [1, 2, 1], "actions": 2, "transitions": "dirichlet", "seed": 4},
        "losses": {"kind": "iid", "seed": 2},
        "seeds": [3, 5]
    })");
    doc["output"] = {{"dir", dir.string()}, {"plot", true}};
    auto config = parse_config(doc);
    auto result = run_experiment(config);
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[0].seed == 3);
    CHECK(result.records[1].seed == 5);
    CHECK(result.uniform_regret.size() == 60);

    auto paths = write_outputs(config, result);
    CHECK(fs::exists(dir / "run0_seed3.csv"));
    CHECK(fs::exists(dir / "run1_seed5.csv"));
    CHECK(fs::exists(dir / "summary.csv"));
    CHECK(fs::exists(dir / "regret.svg"));
    CHECK(fs::exists(dir / "config.json"));
    CHECK(paths.size() >= 4);

    auto back = read_records(dir.string());
    REQUIRE(back.size() == 2);
    CHECK(back[0] == result.records[0]);
    CHECK(back[1] == result.records[1]);

    auto report = regret_report(back);
    CHECK(report.checkpoints == std::vector<std::size_t>{7, 15, 30, 60});
    CHECK(report.seeds == 2);
    CHECK(report.mean.back() ==
          doctest::Approx((back[0].final_regret() + back[1].final_regret()) / 2).epsilon(1e-12));

    std::ifstream svg(dir / "regret.svg");
    std::stringstream text;
    text << svg.rdbuf();
    CHECK(text.str().find("<svg") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("same seed gives identical records") {
    auto doc = nlohmann::json::parse(R"({"algorithm": "tabular", "T": 50,
        "instance": {"layers": [1, 3, 2, 1], "actions": 2, "seed": 9},
        "losses": {"kind": "iid", "seed": 1}, "seeds": [7, 7]})");
    auto result = run_experiment(parse_config(doc));
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[0] == result.records[1]);
}

TEST_CASE("zero losses give zero regret") {
    for (const char* algorithm : {"tabular", "linear-q"}) {
        auto doc = nlohmann::json::parse(R"({"T": 30, "instance": {"layers": [1, 2, 1], "actions": 2},
            "losses": {"kind": "zero"}, "seeds": [1]})");
        doc["algorithm"] = algorithm;
        if (std::string(algorithm) == "linear-q") doc["params"] = {{"M", 1}};
        auto result = run_experiment(parse_config(doc));
        for (const auto& row : result.records[0].rows) CHECK(row.cumulative_regret == 0.0);
        CHECK(result.uniform_regret.back() == 0.0);
    }
}

TEST_CASE("regret report rejects mismatched records") {
    CHECK_THROWS_AS(regret_report({}), InputError);
    ExperimentRecord a, b;
    a.algorithm = b.algorithm = "tabular";
    a.rows.resize(8);
    b.rows.resize(9);
    CHECK_THROWS_AS(regret_report({a, b}), InputError);
    b.rows.resize(8);
    b.algorithm = "linear-q";
    CHECK_THROWS_AS(regret_report({a, b}), InputError);
}

TEST_CASE("slope is NaN unless every checkpoint is positive") {
    ExperimentRecord a;
    a.algorithm = "tabular";
    a.rows.resize(16);
    CHECK(std::isnan(regret_report({a}).slope));
    for (std::size_t t = 0; t < 16; ++t) a.rows[t].cumulative_regret = std::sqrt(double(t + 1));
    CHECK(regret_report({a}).slope == doctest::Approx(0.5).epsilon(1e-9));
}
