#pragma once

#include <vector>

#include "distms/formula.hpp"

namespace distms::card {

// Totalizer over `inputs`: outputs[t-1] is true iff at least t inputs are true.
// Both implication directions are encoded, so outputs are exact counters.
struct AtMostEncoding {
  std::vector<Lit> inputs;
  std::vector<Lit> outputs;
  int first_aux = 0;  // aux vars occupy [first_aux, next_free)
  int next_free = 0;
  std::vector<Clause> clauses;

  int size() const { return static_cast<int>(inputs.size()); }
};

// Aux variables are allocated contiguously from `fresh_from`. Throws
// std::invalid_argument on empty input or repeated input variables.
AtMostEncoding encode_totalizer(const std::vector<Lit>& inputs, int fresh_from);

// Assumption literals enforcing "at most b inputs true": {~o_(b+1)} when b < n, else empty.
std::vector<Lit> bound_assumptions(const AtMostEncoding& enc, int b);

}  // namespace distms::card
