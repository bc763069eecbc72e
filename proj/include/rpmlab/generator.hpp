#pragma once

#include <array>
#include <optional>

#include "rpmlab/puzzle.hpp"
#include "rpmlab/rng.hpp"

namespace rpmlab {

struct GeneratorOptions {
  int min_rules_per_component = 1;
  int max_rules_per_component = 3;
  int max_attempts = 1000;  // resamples per problem before hard failure
};

// Per-problem seed from a master seed: mix64(master ^ golden * (ordinal + 1)),
// a splitmix-style derivation fixed by the pack format.
uint64_t problem_seed(uint64_t master_seed, uint64_t ordinal);

// One rule per governed attribute; attributes without a rule are implicitly
// Constant. Every sampled rule is realizable within the attribute ranges.
RuleSet sample_ruleset(Config config, Rng& rng, const GeneratorOptions& opts = {});

// 7 distractors, each perturbing 1-2 attribute values of the correct panel;
// all pairwise distinct, none consistent with the declared rules. The context
// problem carries the 8 context panels and the rule set. nullopt when the
// perturbation space is exhausted (caller resamples the problem).
std::optional<std::array<Panel, 7>> generate_distractors(const RpmProblem& context,
                                                         const Panel& correct, Rng& rng);

// Fully deterministic in (config, seed). The produced problem has exactly one
// rule-consistent candidate and a uniformly placed answer index.
RpmProblem generate_problem(Config config, uint64_t seed, const GeneratorOptions& opts = {});

}  // namespace rpmlab
