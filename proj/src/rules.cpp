#include "rpmlab/rules.hpp"

#include <algorithm>

namespace rpmlab {

namespace {

bool in_range(int v, std::pair<int, int> range) {
  return v >= range.first && v <= range.second;
}

// Third value of a row under a rule, given the first two, or nullopt on an
// inconsistent prefix / out-of-range result.
std::optional<int> third_value(const Rule& rule, int v1, int v2,
                               std::pair<int, int> range) {
  switch (rule.type) {
    case RuleType::Constant:
      if (v1 != v2) return std::nullopt;
      return v1;
    case RuleType::Progression: {
      if (v2 - v1 != rule.delta) return std::nullopt;
      int v3 = v2 + rule.delta;
      if (!in_range(v3, range)) return std::nullopt;
      return v3;
    }
    case RuleType::Arithmetic: {
      int v3 = rule.sign > 0 ? v1 + v2 : v1 - v2;
      if (!in_range(v3, range)) return std::nullopt;
      return v3;
    }
    case RuleType::DistributeThree: {
      // remaining value of the triple
      if (v1 == v2) return std::nullopt;
      bool has1 = std::find(rule.values.begin(), rule.values.end(), v1) != rule.values.end();
      bool has2 = std::find(rule.values.begin(), rule.values.end(), v2) != rule.values.end();
      if (!has1 || !has2) return std::nullopt;
      for (int v : rule.values)
        if (v != v1 && v != v2) return v;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<Panel> apply_rule(const Rule& rule, const Panel& first, const Panel& second) {
  int v1 = get_attr(first, rule.component, rule.attr);
  int v2 = get_attr(second, rule.component, rule.attr);
  auto range = attr_range(rule.attr, first.config, rule.component);
  auto v3 = third_value(rule, v1, v2, range);
  if (!v3) return std::nullopt;
  Panel out = second;
  set_attr(out, rule.component, rule.attr, *v3);
  return out;
}

bool check_rule(const Rule& rule, const Panel& a, const Panel& b, const Panel& c) {
  int v1 = get_attr(a, rule.component, rule.attr);
  int v2 = get_attr(b, rule.component, rule.attr);
  int v3 = get_attr(c, rule.component, rule.attr);
  switch (rule.type) {
    case RuleType::Constant:
      return v1 == v2 && v2 == v3;
    case RuleType::Progression:
      return v2 - v1 == rule.delta && v3 - v2 == rule.delta;
    case RuleType::Arithmetic:
      return v3 == (rule.sign > 0 ? v1 + v2 : v1 - v2);
    case RuleType::DistributeThree: {
      std::array<int, 3> row{v1, v2, v3};
      std::array<int, 3> want = rule.values;
      std::sort(row.begin(), row.end());
      std::sort(want.begin(), want.end());
      return row == want;
    }
  }
  return false;
}

bool check_problem(const RpmProblem& p, const Panel& candidate) {
  if (candidate.config != p.config) return false;
  const std::array<const Panel*, 9> cells{&p.context[0], &p.context[1], &p.context[2],
                                          &p.context[3], &p.context[4], &p.context[5],
                                          &p.context[6], &p.context[7], &candidate};
  auto row = [&](int r, int c) -> const Panel& { return *cells[r * 3 + c]; };

  for (const Rule& rule : p.rules.rules)
    for (int r = 0; r < 3; ++r)
      if (!check_rule(rule, row(r, 0), row(r, 1), row(r, 2))) return false;

  // implicit Constant over ungoverned attributes
  for (int comp = 0; comp < component_count(p.config); ++comp)
    for (AttrKind attr : governable_attrs(p.config)) {
      bool governed = false;
      for (const Rule& rule : p.rules.rules)
        governed = governed || (rule.component == comp && rule.attr == attr);
      if (governed) continue;
      for (int r = 0; r < 3; ++r) {
        int v1 = get_attr(row(r, 0), comp, attr);
        if (get_attr(row(r, 1), comp, attr) != v1 || get_attr(row(r, 2), comp, attr) != v1)
          return false;
      }
    }
  return true;
}

std::vector<int> oracle_solve(const RpmProblem& p) {
  std::vector<int> hits;
  for (int i = 0; i < 8; ++i)
    if (check_problem(p, p.candidates[i])) hits.push_back(i);
  return hits;
}

}  // namespace rpmlab
