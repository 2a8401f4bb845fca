#pragma once

#include "dpo/mdp.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace dpo {

class LossSchedule;

struct EpisodeRow {
    std::size_t episode = 0;               // 1-based
    double realized_loss = 0.0;            // sum of observed losses
    double true_value = 0.0;               // exact V^{pi_t}(x_0; l_t)
    double best_fixed_cumulative = 0.0;    // min_pi sum_{s<=t} V^pi(x_0; l_s)
    double cumulative_regret = 0.0;        // sum_{s<=t} true_value - best_fixed_cumulative
    double realized_regret = 0.0;          // sum_{s<=t} realized_loss - best_fixed_cumulative
    std::size_t epoch = 0;
    double mean_bonus = 0.0;               // mean dilated bonus over the visited pairs
    std::vector<double> extras;            // one value per ExperimentRecord::extra_columns
};

/// Per-seed output of one run: metadata (config echo) plus per-episode rows.
struct ExperimentRecord {
    std::string algorithm;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<std::string> extra_columns;
    std::vector<EpisodeRow> rows;

    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    /// Empty string when absent.
    std::string get(const std::string& key) const;

    double final_regret() const { return rows.empty() ? 0.0 : rows.back().cumulative_regret; }
    /// Index into `extras`; throws InputError when absent.
    std::size_t extra_index(const std::string& column) const;

    bool operator==(const ExperimentRecord& other) const;
};

bool operator==(const EpisodeRow& a, const EpisodeRow& b);

/// Fills the comparator and regret columns from exact evaluations: the best
/// fixed policy is recomputed on every prefix of the schedule.
void attach_regret(ExperimentRecord& record, const LayeredMDP& mdp, const LossSchedule& schedule);

/// Shortest round-trip formatting of a double.
std::string format_double(double v);

/// Comment-line metadata, then a header and one line per episode.
void write_csv(const ExperimentRecord& record, std::ostream& out);
ExperimentRecord read_csv(std::istream& in);

void write_csv_file(const ExperimentRecord& record, const std::string& path);
ExperimentRecord read_csv_file(const std::string& path);

} // namespace dpo
