#include "distms/oracle.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <string>

namespace distms::oracle {

std::optional<int> brute_force(const WcnfFormula& f) {
  if (f.num_vars > kMaxBruteForceVars) {
    throw std::invalid_argument("brute force limited to " + std::to_string(kMaxBruteForceVars) + " variables");
  }
  const std::uint32_t count = std::uint32_t{1} << f.num_vars;
  std::optional<int> best;
  Assignment a(f.num_vars);
  for (std::uint32_t bits = 0; bits < count; ++bits) {
    for (int v = 1; v <= f.num_vars; ++v) a.set(v, (bits >> (v - 1)) & 1U);
    if (!satisfies_hard(f, a)) continue;
    const int c = count_falsified_soft(f, a);
    if (!best || c < *best) best = c;
  }
  return best;
}

namespace {

Clause random_clause(std::mt19937_64& rng, int num_vars, int len) {
  std::vector<int> vars(static_cast<std::size_t>(num_vars));
  for (int v = 0; v < num_vars; ++v) vars[static_cast<std::size_t>(v)] = v + 1;
  Clause c;
  for (int k = 0; k < len; ++k) {
    const auto pick = static_cast<std::size_t>(k) + rng() % static_cast<std::uint64_t>(num_vars - k);
    std::swap(vars[static_cast<std::size_t>(k)], vars[pick]);
    c.emplace_back(vars[static_cast<std::size_t>(k)], (rng() & 1U) != 0);
  }
  normalize_clause(c);
  return c;
}

int random_len(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

}  // namespace

WcnfFormula gen_random(const RandomSpec& spec) {
  if (spec.num_vars <= 0 || spec.clause_len <= 0 || spec.num_hard < 0 || spec.num_soft < 0) {
    throw std::invalid_argument("random instance parameters must be positive");
  }
  if (spec.soft_len < 0 || spec.soft_len > spec.num_vars) throw std::invalid_argument("bad soft clause length");
  if (spec.clause_len > spec.num_vars) throw std::invalid_argument("clause length exceeds variable count");
  std::mt19937_64 rng(spec.seed);
  WcnfFormula f;
  f.num_vars = spec.num_vars;
  const int hard_min = std::min(2, spec.clause_len);
  for (int i = 0; i < spec.num_hard; ++i) {
    f.hard.push_back(random_clause(rng, spec.num_vars, random_len(rng, hard_min, spec.clause_len)));
  }
  for (int i = 0; i < spec.num_soft; ++i) {
    f.soft.push_back(random_clause(rng, spec.num_vars, random_len(rng, 1, spec.soft_len > 0 ? spec.soft_len : spec.clause_len)));
  }
  return f;
}

}  // namespace distms::oracle
