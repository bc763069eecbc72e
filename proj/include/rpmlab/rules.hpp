#pragma once

#include <optional>
#include <vector>

#include "rpmlab/puzzle.hpp"

namespace rpmlab {

// Completes a row: returns the third panel implied by the rule over the first
// two panels, or nullopt when the prefix is inconsistent with the rule or the
// implied value falls out of range (caller resamples). Attributes not touched
// by the rule are copied from the second panel.
std::optional<Panel> apply_rule(const Rule& rule, const Panel& first, const Panel& second);

// Row-wise satisfaction of a single rule. DistributeThree holds when the row
// carries exactly the rule's value triple (in any cyclic order).
bool check_rule(const Rule& rule, const Panel& a, const Panel& b, const Panel& c);

// True iff every declared rule holds on rows 1 and 2 and on row 3 completed
// with the candidate, and every attribute without a declared rule stays
// constant within each row (the implicit-Constant closure of the rule set).
bool check_problem(const RpmProblem& p, const Panel& candidate);

// Indices (0-based) of all candidates consistent with the declared rules.
// Generated problems always yield a singleton.
std::vector<int> oracle_solve(const RpmProblem& p);

}  // namespace rpmlab
