#include "dpo/record.hpp"

#include "dpo/envs.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace dpo {

namespace {

const std::vector<std::string> kBaseColumns = {
    "episode",         "realized_loss",   "true_value", "best_fixed_cumulative",
    "cumulative_regret", "realized_regret", "epoch",      "mean_bonus"};

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw InputError("bad number '" + s + "' in record");
    return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void ExperimentRecord::set(const std::string& key, const std::string& value) {
    if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos)
        throw InputError("metadata key/value with reserved characters: " + key);
    for (auto& [k, v] : metadata)
        if (k == key) {
            v = value;
            return;
        }
    metadata.emplace_back(key, value);
}

void ExperimentRecord::set(const std::string& key, double value) { set(key, format_double(value)); }

std::string ExperimentRecord::get(const std::string& key) const {
    for (const auto& [k, v] : metadata)
        if (k == key) return v;
    return {};
}

std::size_t ExperimentRecord::extra_index(const std::string& column) const {
    for (std::size_t i = 0; i < extra_columns.size(); ++i)
        if (extra_columns[i] == column) return i;
    throw InputError("record has no column '" + column + "'");
}

bool operator==(const EpisodeRow& a, const EpisodeRow& b) {
    return a.episode == b.episode && a.realized_loss == b.realized_loss &&
           a.true_value == b.true_value && a.best_fixed_cumulative == b.best_fixed_cumulative &&
           a.cumulative_regret == b.cumulative_regret && a.realized_regret == b.realized_regret &&
           a.epoch == b.epoch && a.mean_bonus == b.mean_bonus && a.extras == b.extras;
}

bool ExperimentRecord::operator==(const ExperimentRecord& other) const {
    return algorithm == other.algorithm && seed == other.seed && metadata == other.metadata &&
           extra_columns == other.extra_columns && rows == other.rows;
}

void attach_regret(ExperimentRecord& record, const LayeredMDP& mdp, const LossSchedule& schedule) {
    StateActionTable summed(mdp.num_states(), mdp.num_actions());
    double learner = 0.0, realized = 0.0;
    for (auto& row : record.rows) {
        summed += schedule.at(row.episode);
        row.best_fixed_cumulative = optimal_fixed_policy(mdp, summed).second;
        learner += row.true_value;
        realized += row.realized_loss;
        row.cumulative_regret = learner - row.best_fixed_cumulative;
        row.realized_regret = realized - row.best_fixed_cumulative;
    }
}

void write_csv(const ExperimentRecord& record, std::ostream& out) {
    out << "# algorithm=" << record.algorithm << '\n';
    out << "# seed=" << record.seed << '\n';
    for (const auto& [k, v] : record.metadata) out << "# " << k << '=' << v << '\n';
    for (std::size_t i = 0; i < kBaseColumns.size(); ++i) out << (i ? "," : "") << kBaseColumns[i];
    for (const auto& c : record.extra_columns) out << ',' << c;
    out << '\n';
    for (const auto& r : record.rows) {
        out << r.episode << ',' << format_double(r.realized_loss) << ','
            << format_double(r.true_value) << ',' << format_double(r.best_fixed_cumulative) << ','
            << format_double(r.cumulative_regret) << ',' << format_double(r.realized_regret) << ','
            << r.epoch << ',' << format_double(r.mean_bonus);
        for (double v : r.extras) out << ',' << format_double(v);
        out << '\n';
    }
}

ExperimentRecord read_csv(std::istream& in) {
    ExperimentRecord record;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# ", 0) == 0) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw InputError("bad metadata line: " + line);
            const std::string key = line.substr(2, eq - 2), value = line.substr(eq + 1);
            if (key == "algorithm")
                record.algorithm = value;
            else if (key == "seed")
                record.seed = std::stoull(value);
            else
                record.metadata.emplace_back(key, value);
            continue;
        }
        const auto fields = split(line, ',');
        if (!header_seen) {
            if (fields.size() < kBaseColumns.size() ||
                !std::equal(kBaseColumns.begin(), kBaseColumns.end(), fields.begin()))
                throw InputError("record header does not start with the base columns");
            record.extra_columns.assign(fields.begin() + static_cast<long>(kBaseColumns.size()),
                                        fields.end());
            header_seen = true;
            continue;
        }
        if (fields.size() != kBaseColumns.size() + record.extra_columns.size())
            throw InputError("record row with " + std::to_string(fields.size()) + " fields");
        EpisodeRow r;
        r.episode = std::stoull(fields[0]);
        r.realized_loss = parse_double(fields[1]);
        r.true_value = parse_double(fields[2]);
        r.best_fixed_cumulative = parse_double(fields[3]);
        r.cumulative_regret = parse_double(fields[4]);
        r.realized_regret = parse_double(fields[5]);
        r.epoch = std::stoull(fields[6]);
        r.mean_bonus = parse_double(fields[7]);
        for (std::size_t i = kBaseColumns.size(); i < fields.size(); ++i)
            r.extras.push_back(parse_double(fields[i]));
        record.rows.push_back(std::move(r));
    }
    if (!header_seen) throw InputError("record without header");
    return record;
}

void write_csv_file(const ExperimentRecord& record, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_csv(record, out);
}

ExperimentRecord read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    return read_csv(in);
}

} // namespace dpo
