#include "dpo/harness.hpp"

#include "dpo/errors.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

namespace dpo {

using nlohmann::json;

namespace {

const std::initializer_list<std::pair<const char*, Algorithm>> kAlgorithms = {
    {"tabular", Algorithm::tabular},
    {"linear-q", Algorithm::linear_q},
    {"linear-q-exploratory", Algorithm::linear_q_exploratory},
    {"linear-mdp", Algorithm::linear_mdp}};

// Non-negative integer, also when written as 20000.0 or 2e4.
bool is_count(const json& v) {
    if (v.is_number_unsigned()) return true;
    if (v.is_number_integer()) return v.get<std::int64_t>() >= 0;
    if (v.is_number_float()) {
        const double x = v.get<double>();
        return x >= 0 && x < 9.0e15 && x == std::floor(x);
    }
    return false;
}

// Object reader that remembers which keys were read, so leftovers can be
// reported as unknown.
class Section {
public:
    Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        if (!doc_.is_object()) fail("", "expected an object");
    }

    bool has(const std::string& key) const { return doc_.contains(key); }

    template <class T>
    std::optional<T> opt(const std::string& key) {
        used_.insert(key);
        if (!doc_.contains(key) || doc_.at(key).is_null()) return std::nullopt;
        return convert<T>(doc_.at(key), key);
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        return opt<T>(key).value_or(fallback);
    }

    template <class T>
    T require(const std::string& key) {
        auto v = opt<T>(key);
        if (!v) fail(key, "missing required key");
        return *v;
    }

    Section sub(const std::string& key) {
        used_.insert(key);
        static const json empty = json::object();
        return Section(doc_.contains(key) ? doc_.at(key) : empty, path_ + "/" + key);
    }

    void finish() const {
        for (const auto& [key, value] : doc_.items())
            if (!used_.count(key)) fail(key, "unknown key");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError((key.empty() ? path_ : path_ + "/" + key) + ": " + what);
    }

private:
    template <class T>
    T convert(const json& v, const std::string& key) const {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) fail(key, "expected a boolean");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) fail(key, "expected a string");
            return v.get<std::string>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) fail(key, "expected a number");
            return v.get<T>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!is_count(v)) fail(key, "expected a non-negative integer");
            return v.is_number_float() ? static_cast<T>(v.get<double>()) : v.get<T>();
        } else {
            // vectors of non-negative integers
            if (!v.is_array()) fail(key, "expected an array");
            T out;
            for (const auto& e : v) {
                if (!is_count(e)) fail(key, "expected non-negative integers");
                out.push_back(e.get<typename T::value_type>());
            }
            return out;
        }
    }

    const json& doc_;
    std::string path_;
    std::set<std::string> used_;
};

template <class Enum, class Parse>
Enum parse_in(Section& s, const std::string& key, Enum fallback, Parse parse) {
    const auto name = s.opt<std::string>(key);
    if (!name) return fallback;
    try {
        return parse(*name);
    } catch (const InputError& e) {
        s.fail(key, e.what());
    }
}

void read_params(Section p, RunConfig& c) {
    switch (c.algorithm) {
    case Algorithm::tabular:
        c.tabular.delta = p.get("delta", c.tabular.delta);
        c.tabular.eta = p.opt<double>("eta");
        c.tabular.gamma = p.opt<double>("gamma");
        c.tabular.check_occupancy_sandwich =
            p.get("check_occupancy_sandwich", c.tabular.check_occupancy_sandwich);
        break;
    case Algorithm::linear_q:
        c.linear_q.gamma = p.opt<double>("gamma");
        c.linear_q.beta = p.opt<double>("beta");
        c.linear_q.eta = p.opt<double>("eta");
        c.linear_q.epsilon = p.opt<double>("epsilon");
        c.linear_q.M = p.opt<std::size_t>("M");
        c.linear_q.N = p.opt<std::size_t>("N");
        c.linear_q.N_cap = p.get<std::size_t>("N_cap", 0);
        break;
    case Algorithm::linear_q_exploratory:
        c.exploratory.lambda_min = p.opt<double>("lambda_min");
        c.exploratory.delta_e = p.opt<double>("delta_e");
        c.exploratory.epsilon = p.opt<double>("epsilon");
        c.exploratory.eta = p.opt<double>("eta");
        c.exploratory.beta = p.opt<double>("beta");
        c.exploratory.M = p.opt<std::size_t>("M");
        c.exploratory.N = p.opt<std::size_t>("N");
        c.exploratory.N_cap = p.get<std::size_t>("N_cap", 0);
        break;
    case Algorithm::linear_mdp:
        c.linear_mdp.delta_e = p.opt<double>("delta_e");
        c.linear_mdp.beta = p.opt<double>("beta");
        c.linear_mdp.gamma = p.opt<double>("gamma");
        c.linear_mdp.eta = p.opt<double>("eta");
        c.linear_mdp.epsilon = p.opt<double>("epsilon");
        c.linear_mdp.delta = p.get("delta", c.linear_mdp.delta);
        c.linear_mdp.M = p.opt<std::size_t>("M");
        c.linear_mdp.N = p.opt<std::size_t>("N");
        c.linear_mdp.N_cap = p.get<std::size_t>("N_cap", 0);
        c.linear_mdp.M0 = p.opt<std::size_t>("M0");
        c.linear_mdp.N0 = p.opt<std::size_t>("N0");
        c.linear_mdp.xi = p.opt<double>("xi");
        break;
    }
    p.finish();
}

json instance_json(const InstanceSpec& s) {
    return {{"layers", s.layer_sizes},       {"actions", s.num_actions},
            {"transitions", to_string(s.transitions)}, {"concentration", s.concentration},
            {"features", to_string(s.features)}, {"feature_dim", s.feature_dim},
            {"seed", s.seed}};
}

json losses_json(const LossScheduleSpec& s, bool linear) {
    return {{"kind", to_string(s.kind)}, {"period", s.period}, {"gap", s.gap},
            {"noise", s.noise},          {"value", s.value},   {"seed", s.seed},
            {"feature_linear", linear}};
}

struct Problem {
    Instance instance;
    LossSchedule schedule;
};

Problem build_problem(const RunConfig& c) {
    Problem p{generate_instance(c.instance), {}};
    p.schedule = LossSchedule(p.instance.mdp.layers(), c.losses, c.T);
    if (c.feature_linear_losses) p.schedule = p.schedule.linear_in(p.instance.features);
    return p;
}

ExperimentRecord run_one(const RunConfig& c, const Problem& p, std::uint64_t seed) {
    const auto& mdp = p.instance.mdp;
    const auto& f = p.instance.features;
    switch (c.algorithm) {
    case Algorithm::tabular: return run_tabular(mdp, p.schedule, c.T, c.tabular, seed);
    case Algorithm::linear_q: return run_linear_q(mdp, f, p.schedule, c.T, c.linear_q, seed);
    case Algorithm::linear_q_exploratory:
        return run_linear_q_exploratory(mdp, f, p.schedule, c.T, c.exploratory, seed);
    case Algorithm::linear_mdp: return run_linear_mdp(mdp, f, p.schedule, c.T, c.linear_mdp, seed);
    }
    throw InputError("unknown algorithm");
}

void warn_if(std::vector<std::string>& out, bool bad, const std::string& what) {
    if (bad) out.push_back(what);
}

constexpr double kSlack = 1.0 + 1e-12;

} // namespace

Algorithm parse_algorithm(const std::string& name) {
    for (const auto& [n, a] : kAlgorithms)
        if (name == n) return a;
    throw InputError("unknown algorithm '" + name + "'");
}

std::string to_string(Algorithm algorithm) {
    for (const auto& [n, a] : kAlgorithms)
        if (a == algorithm) return n;
    return "?";
}

RunConfig parse_config(const json& doc) {
    RunConfig c;
    c.source = doc;
    Section top(doc, "");
    c.algorithm = parse_in(top, "algorithm", Algorithm::tabular, parse_algorithm);
    c.T = top.require<std::size_t>("T");
    if (c.T == 0) top.fail("T", "must be positive");

    Section inst = top.sub("instance");
    c.instance.layer_sizes = inst.get("layers", c.instance.layer_sizes);
    c.instance.num_actions = inst.get("actions", c.instance.num_actions);
    c.instance.transitions = parse_in(inst, "transitions", c.instance.transitions, parse_transition_kind);
    c.instance.concentration = inst.get("concentration", c.instance.concentration);
    c.instance.features = parse_in(inst, "features", c.instance.features, parse_feature_kind);
    c.instance.feature_dim = inst.get("feature_dim", c.instance.feature_dim);
    c.instance.seed = inst.get<std::uint64_t>("seed", c.instance.seed);
    inst.finish();

    Section loss = top.sub("losses");
    c.losses.kind = parse_in(loss, "kind", c.losses.kind, parse_loss_kind);
    if (c.losses.kind == LossKind::custom) loss.fail("kind", "custom schedules need tables");
    c.losses.period = loss.get("period", c.losses.period);
    c.losses.gap = loss.get("gap", c.losses.gap);
    c.losses.noise = loss.get("noise", c.losses.noise);
    c.losses.value = loss.get("value", c.losses.value);
    c.losses.seed = loss.get<std::uint64_t>("seed", c.losses.seed);
    c.feature_linear_losses = loss.get("feature_linear", c.algorithm != Algorithm::tabular);
    loss.finish();

    read_params(top.sub("params"), c);

    c.seeds = top.get("seeds", c.seeds);
    if (c.seeds.empty()) top.fail("seeds", "needs at least one seed");

    Section out = top.sub("output");
    c.out_dir = out.get<std::string>("dir", c.out_dir);
    c.plot = out.get("plot", c.plot);
    out.finish();
    top.finish();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open");
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(doc);
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    std::string pointer;
    std::stringstream keys(assignment.substr(0, eq));
    for (std::string part; std::getline(keys, part, '.');) {
        if (part.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
        pointer += "/" + part;
    }
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    doc[json::json_pointer(pointer)] = value;
}

std::vector<std::string> parameter_warnings(const RunConfig& c) {
    std::vector<std::string> w;
    const auto inst = generate_instance(c.instance);
    const auto& L = inst.mdp.layers();
    const double H = static_cast<double>(L.horizon());
    const std::size_t d = inst.features.dim();
    switch (c.algorithm) {
    case Algorithm::tabular: {
        const auto p = resolve(c.tabular, L, c.T);
        warn_if(w, p.eta > kSlack / (24.0 * H * H * H), "eta > 1/(24 H^3)");
        warn_if(w, std::abs(p.gamma - 2.0 * p.eta * H) > 1e-12 * p.gamma, "gamma != 2 eta H");
        break;
    }
    case Algorithm::linear_q: {
        const auto p = resolve(c.linear_q, d, L.horizon(), c.T);
        warn_if(w, p.eta > kSlack * p.gamma / (2.0 * H), "eta > gamma/(2H)");
        warn_if(w, p.eta > kSlack * 3.0 * p.beta / (8.0 * H * H), "eta > 3 beta/(8 H^2)");
        warn_if(w, p.eta * p.beta > kSlack * p.gamma / (12.0 * H * H), "eta beta > gamma/(12 H^2)");
        warn_if(w, !(p.gamma < 0.5 && p.beta < 0.5 && p.epsilon < 0.5), "gamma, beta or epsilon >= 1/2");
        break;
    }
    case Algorithm::linear_q_exploratory: {
        const auto p = resolve(c.exploratory, inst.mdp, inst.features, c.T);
        warn_if(w, p.beta < (2.0 * p.eta * H * H * H) / kSlack, "beta < 2 eta H^3");
        warn_if(w, p.delta_e > 0.5, "delta_e > 1/2");
        break;
    }
    case Algorithm::linear_mdp: {
        const auto p = resolve(c.linear_mdp, d, L.horizon(), c.T);
        const double H4 = H * H * H * H;
        warn_if(w, p.gamma < 36.0 * p.beta * p.beta / p.delta_e / kSlack, "gamma < 36 beta^2/delta_e");
        warn_if(w, p.beta * p.epsilon > 0.125, "beta epsilon > 1/8");
        warn_if(w, p.eta > kSlack * p.gamma / (16.0 * H4), "eta > gamma/(16 H^4)");
        warn_if(w, p.eta > kSlack * p.beta / (40.0 * H4), "eta > beta/(40 H^4)");
        break;
    }
    }
    return w;
}

int worker_count() {
    if (const char* env = std::getenv("DPO_WORKERS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n > 0) return static_cast<int>(n);
        throw ConfigError("DPO_WORKERS must be a positive integer, got '" + std::string(env) + "'");
    }
    return omp_get_max_threads();
}

std::vector<double> uniform_regret_curve(const LayeredMDP& mdp, const LossSchedule& schedule,
                                         const ExperimentRecord& record) {
    const Policy uniform = Policy::uniform(mdp.layers());
    std::vector<double> out(record.rows.size());
    double cum = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        cum += initial_value(mdp, uniform, schedule.at(record.rows[i].episode));
        out[i] = cum - record.rows[i].best_fixed_cumulative;
    }
    return out;
}

ExperimentResult run_experiment(const RunConfig& config) {
    ExperimentResult result;
    result.warnings = parameter_warnings(config);
    const Problem problem = build_problem(config);
    const std::size_t n = config.seeds.size();
    result.records.resize(n);
    std::vector<std::exception_ptr> errors(n);

#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
    for (std::size_t i = 0; i < n; ++i) {
        try {
            result.records[i] = run_one(config, problem, config.seeds[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    const std::string inst = instance_json(config.instance).dump();
    const std::string losses = losses_json(config.losses, config.feature_linear_losses).dump();
    for (auto& r : result.records) {
        r.set("instance", inst);
        r.set("losses", losses);
        for (std::size_t k = 0; k < result.warnings.size(); ++k)
            r.set("parameter_warning_" + std::to_string(k), result.warnings[k]);
    }
    result.uniform_regret = uniform_regret_curve(problem.instance.mdp, problem.schedule, result.records[0]);
    return result;
}

RegretReport regret_report(const std::vector<ExperimentRecord>& records) {
    if (records.empty()) throw InputError("no records to report");
    const auto& first = records.front();
    if (first.rows.empty()) throw InputError("record without episodes");
    for (const auto& r : records) {
        if (r.rows.size() != first.rows.size()) throw InputError("records of different length");
        if (r.algorithm != first.algorithm) throw InputError("records of different algorithms");
        if (r.get("instance") != first.get("instance") || r.get("losses") != first.get("losses"))
            throw InputError("records of different instances");
    }
    RegretReport rep;
    rep.T = first.rows.size();
    rep.seeds = records.size();
    for (std::size_t div : {8, 4, 2, 1}) rep.checkpoints.push_back(std::max<std::size_t>(1, rep.T / div));
    const double n = static_cast<double>(records.size());
    bool positive = true;
    for (std::size_t c : rep.checkpoints) {
        double sum = 0.0, sq = 0.0;
        for (const auto& r : records) sum += r.rows[c - 1].cumulative_regret;
        const double mean = sum / n;
        for (const auto& r : records) sq += std::pow(r.rows[c - 1].cumulative_regret - mean, 2);
        rep.mean.push_back(mean);
        rep.stddev.push_back(records.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0);
        rep.ratio.push_back(mean / static_cast<double>(c));
        positive = positive && mean > 0.0;
    }
    if (!positive) {
        rep.slope = std::numeric_limits<double>::quiet_NaN();
    } else {
        double mx = 0.0, my = 0.0;
        const double k = static_cast<double>(rep.checkpoints.size());
        for (std::size_t i = 0; i < rep.checkpoints.size(); ++i) {
            mx += std::log(static_cast<double>(rep.checkpoints[i])) / k;
            my += std::log(rep.mean[i]) / k;
        }
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < rep.checkpoints.size(); ++i) {
            const double dx = std::log(static_cast<double>(rep.checkpoints[i])) - mx;
            sxy += dx * (std::log(rep.mean[i]) - my);
            sxx += dx * dx;
        }
        rep.slope = sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
    }
    return rep;
}

void write_summary_csv(const RegretReport& rep, const std::vector<double>& uniform, std::ostream& out) {
    out << "# T=" << rep.T << "\n# seeds=" << rep.seeds << "\n# slope=" << format_double(rep.slope) << "\n";
    out << "checkpoint,mean_regret,stddev_regret,regret_over_t,uniform_regret\n";
    for (std::size_t i = 0; i < rep.checkpoints.size(); ++i) {
        const std::size_t c = rep.checkpoints[i];
        out << c << ',' << format_double(rep.mean[i]) << ',' << format_double(rep.stddev[i]) << ','
            << format_double(rep.ratio[i]) << ','
            << (c <= uniform.size() ? format_double(uniform[c - 1]) : std::string()) << '\n';
    }
}

void print_report(const RegretReport& rep, std::ostream& out) {
    out << "seeds " << rep.seeds << ", T " << rep.T << "\n";
    out << std::setw(10) << "episode" << std::setw(16) << "mean regret" << std::setw(14) << "stddev"
        << std::setw(14) << "regret/t" << "\n";
    for (std::size_t i = 0; i < rep.checkpoints.size(); ++i)
        out << std::setw(10) << rep.checkpoints[i] << std::setw(16) << rep.mean[i] << std::setw(14)
            << rep.stddev[i] << std::setw(14) << rep.ratio[i] << "\n";
    out << "log-log slope " << rep.slope << "\n";
}

void write_regret_svg(const std::vector<ExperimentRecord>& records, const std::vector<double>& baseline,
                      std::ostream& out) {
    if (records.empty()) throw InputError("no records to plot");
    const std::size_t T = records.front().rows.size();
    std::vector<double> mean(T, 0.0);
    double lo = 0.0, hi = 0.0;
    for (const auto& r : records)
        for (std::size_t i = 0; i < T; ++i) {
            const double v = r.rows[i].cumulative_regret;
            mean[i] += v / static_cast<double>(records.size());
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    for (double v : baseline) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;

    const double W = 800, Hgt = 500, left = 70, right = 20, top = 30, bottom = 50;
    const double pw = W - left - right, ph = Hgt - top - bottom;
    auto X = [&](std::size_t i) { return left + pw * static_cast<double>(i + 1) / static_cast<double>(T); };
    auto Y = [&](double v) { return top + ph * (1.0 - (v - lo) / (hi - lo)); };
    const std::size_t stride = std::max<std::size_t>(1, T / 600);
    auto polyline = [&](auto value, const char* style) {
        out << "<polyline fill=\"none\" " << style << " points=\"";
        for (std::size_t i = 0; i < T; i += stride) out << X(i) << ',' << Y(value(i)) << ' ';
        out << X(T - 1) << ',' << Y(value(T - 1)) << "\"/>\n";
    };

    out << std::fixed << std::setprecision(2);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hgt
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\">cumulative regret, "
        << records.front().algorithm << ", " << records.size() << " seeds</text>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = lo + (hi - lo) * k / 4.0, y = Y(v);
        const double xt = left + pw * k / 4.0;
        out << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + pw << "\" y2=\"" << y
            << "\" stroke=\"#eee\"/>\n";
        out << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
        out << "<text x=\"" << xt << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
            << static_cast<std::size_t>(std::llround(static_cast<double>(T) * k / 4.0)) << "</text>\n";
    }
    out << "<line x1=\"" << left << "\" y1=\"" << Y(0.0) << "\" x2=\"" << left + pw << "\" y2=\"" << Y(0.0)
        << "\" stroke=\"#999\"/>\n";
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<text x=\"" << left + pw / 2 << "\" y=\"" << Hgt - 10 << "\" text-anchor=\"middle\">episode</text>\n";

    for (const auto& r : records)
        polyline([&](std::size_t i) { return r.rows[i].cumulative_regret; },
                 "stroke=\"#9ecae1\" stroke-width=\"1\"");
    if (baseline.size() == T)
        polyline([&](std::size_t i) { return baseline[i]; },
                 "stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"");
    polyline([&](std::size_t i) { return mean[i]; }, "stroke=\"#08519c\" stroke-width=\"2.5\"");

    const double lx = left + 12, ly = top + 14;
    out << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 24 << "\" y2=\"" << ly
        << "\" stroke=\"#08519c\" stroke-width=\"2.5\"/><text x=\"" << lx + 30 << "\" y=\"" << ly + 4
        << "\">mean</text>\n";
    out << "<line x1=\"" << lx << "\" y1=\"" << ly + 16 << "\" x2=\"" << lx + 24 << "\" y2=\"" << ly + 16
        << "\" stroke=\"#9ecae1\"/><text x=\"" << lx + 30 << "\" y=\"" << ly + 20 << "\">per seed</text>\n";
    if (baseline.size() == T)
        out << "<line x1=\"" << lx << "\" y1=\"" << ly + 32 << "\" x2=\"" << lx + 24 << "\" y2=\"" << ly + 32
            << "\" stroke=\"#d62728\" stroke-dasharray=\"6,4\"/><text x=\"" << lx + 30 << "\" y=\""
            << ly + 36 << "\">uniform policy</text>\n";
    out << "</svg>\n";
}

std::vector<std::string> write_outputs(const RunConfig& config, const ExperimentResult& result) {
    namespace fs = std::filesystem;
    const fs::path dir(config.out_dir);
    fs::create_directories(dir);
    std::vector<std::string> written;
    for (std::size_t i = 0; i < result.records.size(); ++i) {
        const auto& r = result.records[i];
        const auto path = dir / ("run" + std::to_string(i) + "_seed" + std::to_string(r.seed) + ".csv");
        write_csv_file(r, path.string());
        written.push_back(path.string());
    }
    const auto rep = regret_report(result.records);
    {
        const auto path = dir / "summary.csv";
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        write_summary_csv(rep, result.uniform_regret, out);
        written.push_back(path.string());
    }
    if (config.plot) {
        const auto path = dir / "regret.svg";
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        write_regret_svg(result.records, result.uniform_regret, out);
        written.push_back(path.string());
    }
    {
        const auto path = dir / "config.json";
        std::ofstream out(path);
        out << config.source.dump(2) << "\n";
        written.push_back(path.string());
    }
    return written;
}

std::vector<ExperimentRecord> read_records(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw std::runtime_error(dir + " is not a directory");
    std::vector<fs::path> paths;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv" && e.path().filename() != "summary.csv")
            paths.push_back(e.path());
    std::sort(paths.begin(), paths.end());
    std::vector<ExperimentRecord> out;
    for (const auto& p : paths) out.push_back(read_csv_file(p.string()));
    std::stable_sort(out.begin(), out.end(),
                     [](const ExperimentRecord& a, const ExperimentRecord& b) { return a.seed < b.seed; });
    return out;
}

} // namespace dpo
