// Command-line front end: run experiments, summarize record directories, and
// run the property suite.

#include "dpo/acceptance.hpp"
#include "dpo/errors.hpp"
#include "dpo/harness.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

namespace {

int cmd_run(const std::string& path, const std::vector<std::uint64_t>& seeds,
            const std::vector<std::string>& overrides, const std::string& out_dir) {
    std::ifstream in(path);
    if (!in) throw dpo::ConfigError(path + ": cannot open");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw dpo::ConfigError(path + ": " + e.what());
    }
    for (const auto& o : overrides) dpo::apply_override(doc, o);
    if (!seeds.empty()) doc["seeds"] = seeds;
    if (!out_dir.empty()) doc["output"]["dir"] = out_dir;

    const auto config = dpo::parse_config(doc);
    const auto result = dpo::run_experiment(config);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& p : dpo::write_outputs(config, result)) std::cout << "wrote " << p << "\n";
    dpo::print_report(dpo::regret_report(result.records), std::cout);
    std::cout << "uniform policy regret at T " << result.uniform_regret.back() << "\n";
    return 0;
}

int cmd_report(const std::string& dir) {
    const auto records = dpo::read_records(dir);
    dpo::print_report(dpo::regret_report(records), std::cout);
    return 0;
}

int cmd_selftest(const std::vector<int>& only, bool quick) {
    bool ok = true;
    std::vector<int> ids = only;
    if (ids.empty())
        for (int i = 1; i <= dpo::kCriteria; ++i) ids.push_back(i);
    for (int id : ids) {
        const auto r = dpo::run_criterion(id, quick);
        std::cout << dpo::format_result(r) << std::endl;
        ok = ok && r.pass;
    }
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"policy optimization with dilated bonuses: experiments and checks"};
    app.require_subcommand(1);

    std::string config_path, out_dir, records_dir;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> overrides;
    auto* run = app.add_subcommand("run", "run the experiment described by a config file");
    run->add_option("config", config_path, "config document (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seeds, "replace the seed list (repeatable)");
    run->add_option("--override", overrides, "set a config value, e.g. params.eta=0.01 (repeatable)");
    run->add_option("--out", out_dir, "output directory");

    auto* report = app.add_subcommand("report", "summarize the per-seed CSV files of a run");
    report->add_option("records", records_dir, "directory written by run")->required();

    std::vector<int> only;
    bool quick = false;
    auto* selftest = app.add_subcommand("selftest", "run the property suite");
    selftest->add_option("--only", only, "criterion ids to run")->check(CLI::Range(1, dpo::kCriteria));
    selftest->add_flag("--quick", quick, "smaller sample counts");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(config_path, seeds, overrides, out_dir);
        if (*report) return cmd_report(records_dir);
        if (*selftest) return cmd_selftest(only, quick);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
