#pragma once

#include "json.hpp"

#include <string>
#include <vector>

namespace dpo {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

/// Number of acceptance criteria.
inline constexpr int kCriteria = 11;

/// Evaluates one criterion. `quick` shrinks sample counts for a fast smoke
/// pass; the pass/fail thresholds are unchanged.
CriterionResult run_criterion(int id, bool quick = false);

/// Runs the listed criteria (all when empty) in order.
std::vector<CriterionResult> run_acceptance(const std::vector<int>& ids, bool quick = false);

/// "[PASS] 3 estimator bias (1.2 s): detail".
std::string format_result(const CriterionResult& result);

/// Config used by the tabular sublinearity run; also shipped in configs/.
nlohmann::json tabular_switching_config();

} // namespace dpo
