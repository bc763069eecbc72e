#include "rpmlab/generator.hpp"

#include <algorithm>
#include <stdexcept>

#include "rpmlab/rules.hpp"

namespace rpmlab {

namespace {

int uniform_in(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<uint32_t>(hi - lo + 1)));
}

std::optional<Rule> sample_rule(Config config, int component, AttrKind attr, Rng& rng) {
  auto [lo, hi] = attr_range(attr, config, component);
  int span = hi - lo;
  std::vector<RuleType> types{RuleType::Constant, RuleType::DistributeThree};
  if (is_ordinal(attr)) {
    types.push_back(RuleType::Progression);
    types.push_back(RuleType::Arithmetic);
  }
  Rule r;
  r.component = component;
  r.attr = attr;
  r.type = types[rng.below(static_cast<uint32_t>(types.size()))];
  switch (r.type) {
    case RuleType::Constant:
      break;
    case RuleType::Progression: {
      std::vector<int> deltas;
      for (int d : {-2, -1, 1, 2})
        if (span >= 2 * std::abs(d)) deltas.push_back(d);
      if (deltas.empty()) return std::nullopt;
      r.delta = deltas[rng.below(static_cast<uint32_t>(deltas.size()))];
      break;
    }
    case RuleType::Arithmetic: {
      r.sign = rng.below(2) ? 1 : -1;
      // realizable iff some (v1, v2) keeps v1 +/- v2 in range
      bool ok = r.sign > 0 ? 2 * lo <= hi : hi - lo >= lo;
      if (!ok) return std::nullopt;
      break;
    }
    case RuleType::DistributeThree: {
      if (span + 1 < 3) return std::nullopt;
      std::vector<int> pool;
      for (int v = lo; v <= hi; ++v) pool.push_back(v);
      rng.shuffle(pool.begin(), pool.end());
      r.values = {pool[0], pool[1], pool[2]};
      std::array<int, 3> perm{0, 1, 2};
      rng.shuffle(perm.begin(), perm.end());
      r.row_shift = perm;
      break;
    }
  }
  return r;
}

// Values of one attribute across the 3x3 matrix under a rule (or implicit
// Constant when rule is null). Returns false when sampling fails.
bool sample_attr_grid(const Rule* rule, Config config, int component, AttrKind attr, Rng& rng,
                      int grid[3][3]) {
  auto [lo, hi] = attr_range(attr, config, component);
  for (int row = 0; row < 3; ++row) {
    if (!rule || rule->type == RuleType::Constant) {
      int v = uniform_in(rng, lo, hi);
      grid[row][0] = grid[row][1] = grid[row][2] = v;
    } else if (rule->type == RuleType::Progression) {
      int d = rule->delta;
      int start_lo = d > 0 ? lo : lo - 2 * d;
      int start_hi = d > 0 ? hi - 2 * d : hi;
      int v = uniform_in(rng, start_lo, start_hi);
      grid[row][0] = v;
      grid[row][1] = v + d;
      grid[row][2] = v + 2 * d;
    } else if (rule->type == RuleType::Arithmetic) {
      bool ok = false;
      for (int tries = 0; tries < 64 && !ok; ++tries) {
        int v1 = uniform_in(rng, lo, hi);
        int v2 = uniform_in(rng, lo, hi);
        int v3 = rule->sign > 0 ? v1 + v2 : v1 - v2;
        if (v3 >= lo && v3 <= hi) {
          grid[row][0] = v1;
          grid[row][1] = v2;
          grid[row][2] = v3;
          ok = true;
        }
      }
      if (!ok) return false;
    } else {  // DistributeThree
      for (int col = 0; col < 3; ++col)
        grid[row][col] = rule->values[(rule->row_shift[row] + col) % 3];
    }
  }
  return true;
}

}  // namespace

uint64_t problem_seed(uint64_t master_seed, uint64_t ordinal) {
  return mix64(master_seed ^ (0x9E3779B97F4A7C15ULL * (ordinal + 1)));
}

RuleSet sample_ruleset(Config config, Rng& rng, const GeneratorOptions& opts) {
  RuleSet rs;
  for (int comp = 0; comp < component_count(config); ++comp) {
    auto attrs = governable_attrs(config);
    int max_rules = std::min<int>(opts.max_rules_per_component, static_cast<int>(attrs.size()));
    int min_rules = std::min(opts.min_rules_per_component, max_rules);
    int n_rules = uniform_in(rng, min_rules, max_rules);
    rng.shuffle(attrs.begin(), attrs.end());
    for (int i = 0; i < n_rules; ++i) {
      std::optional<Rule> rule;
      while (!rule) rule = sample_rule(config, comp, attrs[i], rng);
      rs.rules.push_back(*rule);
    }
  }
  return rs;
}

std::optional<std::array<Panel, 7>> generate_distractors(const RpmProblem& context,
                                                         const Panel& correct, Rng& rng) {
  std::array<Panel, 7> out;
  std::vector<Panel> chosen;
  auto attrs = governable_attrs(context.config);
  for (int di = 0; di < 7; ++di) {
    bool found = false;
    for (int attempt = 0; attempt < 400 && !found; ++attempt) {
      Panel cand = correct;
      int n_perturb = 1 + static_cast<int>(rng.below(2));
      for (int k = 0; k < n_perturb; ++k) {
        int comp = static_cast<int>(rng.below(
            static_cast<uint32_t>(component_count(context.config))));
        AttrKind attr = attrs[rng.below(static_cast<uint32_t>(attrs.size()))];
        auto [lo, hi] = attr_range(attr, context.config, comp);
        int old = get_attr(cand, comp, attr);
        int v = uniform_in(rng, lo, hi);
        if (v == old) v = lo + (v - lo + 1) % (hi - lo + 1);
        set_attr(cand, comp, attr, v);
      }
      if (cand == correct) continue;
      if (std::find(chosen.begin(), chosen.end(), cand) != chosen.end()) continue;
      if (check_problem(context, cand)) continue;
      out[di] = cand;
      chosen.push_back(cand);
      found = true;
    }
    if (!found) return std::nullopt;
  }
  return out;
}

RpmProblem generate_problem(Config config, uint64_t seed, const GeneratorOptions& opts) {
  Rng rng(seed);
  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    RpmProblem problem;
    problem.config = config;
    problem.seed = seed;
    problem.rules = sample_ruleset(config, rng, opts);

    std::array<Panel, 9> cells;
    cells.fill(make_panel(config));
    bool ok = true;
    for (int comp = 0; comp < component_count(config) && ok; ++comp)
      for (AttrKind attr : governable_attrs(config)) {
        const Rule* rule = nullptr;
        for (const Rule& r : problem.rules.rules)
          if (r.component == comp && r.attr == attr) rule = &r;
        int grid[3][3];
        if (!sample_attr_grid(rule, config, comp, attr, rng, grid)) {
          ok = false;
          break;
        }
        for (int row = 0; row < 3; ++row)
          for (int col = 0; col < 3; ++col)
            set_attr(cells[row * 3 + col], comp, attr, grid[row][col]);
      }
    if (!ok) continue;

    for (int i = 0; i < 8; ++i) problem.context[i] = cells[i];
    const Panel& correct = cells[8];

    auto distractors = generate_distractors(problem, correct, rng);
    if (!distractors) continue;

    int z = static_cast<int>(rng.below(8));
    problem.answer = z;
    int di = 0;
    for (int i = 0; i < 8; ++i)
      problem.candidates[i] = i == z ? correct : (*distractors)[di++];

    auto solutions = oracle_solve(problem);
    if (solutions.size() == 1 && solutions[0] == z) return problem;
  }
  throw std::runtime_error(std::string("generate_problem: exhausted ") +
                           std::to_string(opts.max_attempts) + " attempts for config " +
                           config_name(config) + ", seed " + std::to_string(seed));
}

}  // namespace rpmlab
