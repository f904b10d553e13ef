#include "distms/totalizer.hpp"

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>

namespace distms::card {

namespace {

std::vector<Lit> build(std::span<const Lit> inputs, int& next_var, std::vector<Clause>& clauses) {
  if (inputs.size() == 1) return {inputs[0]};
  const std::size_t half = inputs.size() / 2;
  std::vector<Lit> left = build(inputs.first(half), next_var, clauses);
  std::vector<Lit> right = build(inputs.subspan(half), next_var, clauses);

  const std::size_t n = left.size() + right.size();
  std::vector<Lit> out;
  out.reserve(n);
  for (std::size_t t = 0; t < n; ++t) out.emplace_back(next_var++, true);

  // Index 0 stands for "at least 0" (constant true); index size+1 for constant false.
  for (std::size_t i = 0; i <= left.size(); ++i) {
    for (std::size_t j = 0; j <= right.size(); ++j) {
      if (i + j > 0) {
        // left >= i and right >= j  ->  out >= i + j
        Clause up;
        if (i > 0) up.push_back(~left[i - 1]);
        if (j > 0) up.push_back(~right[j - 1]);
        up.push_back(out[i + j - 1]);
        clauses.push_back(std::move(up));
      }
      if (i + j < n) {
        // left < i + 1 and right < j + 1  ->  out < i + j + 1
        Clause down;
        if (i < left.size()) down.push_back(left[i]);
        if (j < right.size()) down.push_back(right[j]);
        down.push_back(~out[i + j]);
        clauses.push_back(std::move(down));
      }
    }
  }
  return out;
}

}  // namespace

AtMostEncoding encode_totalizer(const std::vector<Lit>& inputs, int fresh_from) {
  if (inputs.empty()) throw std::invalid_argument("totalizer needs at least one input");
  std::vector<int> vars;
  vars.reserve(inputs.size());
  for (Lit l : inputs) vars.push_back(l.var());
  std::sort(vars.begin(), vars.end());
  if (std::adjacent_find(vars.begin(), vars.end()) != vars.end()) {
    throw std::invalid_argument("totalizer inputs repeat a variable");
  }
  if (fresh_from <= vars.back()) throw std::invalid_argument("fresh variables overlap the inputs");

  AtMostEncoding enc;
  enc.inputs = inputs;
  enc.first_aux = fresh_from;
  enc.next_free = fresh_from;
  enc.outputs = build(enc.inputs, enc.next_free, enc.clauses);
  return enc;
}

std::vector<Lit> bound_assumptions(const AtMostEncoding& enc, int b) {
  if (b < 0 || b > enc.size()) {
    throw std::invalid_argument("bound " + std::to_string(b) + " outside [0, " + std::to_string(enc.size()) + "]");
  }
  if (b == enc.size()) return {};
  return {~enc.outputs[static_cast<std::size_t>(b)]};
}

}  // namespace distms::card
