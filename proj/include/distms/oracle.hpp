#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>

#include "distms/formula.hpp"

namespace distms::oracle {

inline constexpr int kMaxBruteForceVars = 24;

// Exact optimum by enumerating every total assignment; nullopt when the hard
// clauses are unsatisfiable. Throws std::invalid_argument above 24 variables.
std::optional<int> brute_force(const WcnfFormula& f);

struct RandomSpec {
  std::uint64_t seed = 1;
  int num_vars = 8;
  int num_hard = 10;
  int num_soft = 6;
  int clause_len = 3;  // maximum clause length
  int soft_len = 0;    // maximum soft clause length; 0 means clause_len
};

// Seeded instance. Soft clauses have length 1..soft_len, hard clauses
// 2..clause_len (1 when clause_len is 1); literals within a clause use
// distinct variables.
WcnfFormula gen_random(const RandomSpec& spec);

}  // namespace distms::oracle
