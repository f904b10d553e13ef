#pragma once

#include <cstdint>
#include <cstdlib>
#include <istream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace distms {

// A literal over a 1-based variable index. Stored as 2*var + (negative ? 1 : 0)
// so that literal indices can address per-literal arrays directly.
class Lit {
 public:
  constexpr Lit() = default;
  constexpr Lit(int var, bool positive) : code_(2 * var + (positive ? 0 : 1)) {}

  static constexpr Lit from_dimacs(int d) { return Lit(d > 0 ? d : -d, d > 0); }
  static constexpr Lit from_index(int index) {
    Lit l;
    l.code_ = index;
    return l;
  }

  constexpr int var() const { return code_ >> 1; }
  constexpr bool positive() const { return (code_ & 1) == 0; }
  constexpr int index() const { return code_; }
  constexpr int to_dimacs() const { return positive() ? var() : -var(); }
  constexpr bool defined() const { return code_ >= 2; }

  constexpr Lit operator~() const { return from_index(code_ ^ 1); }
  constexpr auto operator<=>(const Lit&) const = default;

 private:
  int code_ = 0;
};

using Clause = std::vector<Lit>;

// Values of a (possibly partial) assignment.
enum class Value : std::int8_t { False = 0, True = 1, Unassigned = 2 };

// Map from variable to truth value; index 0 is unused.
class Assignment {
 public:
  Assignment() = default;
  explicit Assignment(int num_vars) : values_(static_cast<std::size_t>(num_vars) + 1, Value::Unassigned) {}
  // Total assignment built from signed DIMACS literals.
  static Assignment from_dimacs(int num_vars, std::span<const int> lits);

  int num_vars() const { return values_.empty() ? 0 : static_cast<int>(values_.size()) - 1; }
  void resize(int num_vars) { values_.resize(static_cast<std::size_t>(num_vars) + 1, Value::Unassigned); }

  Value get(int var) const { return var < static_cast<int>(values_.size()) ? values_[var] : Value::Unassigned; }
  void set(int var, bool value) {
    if (var >= static_cast<int>(values_.size())) resize(var);
    values_[var] = value ? Value::True : Value::False;
  }
  void unset(int var) {
    if (var < static_cast<int>(values_.size())) values_[var] = Value::Unassigned;
  }

  Value value(Lit l) const {
    Value v = get(l.var());
    if (v == Value::Unassigned) return v;
    return (v == Value::True) == l.positive() ? Value::True : Value::False;
  }
  bool is_true(Lit l) const { return value(l) == Value::True; }

  // True when every variable in 1..num_vars is assigned.
  bool total_over(int num_vars) const;
  // Restriction to variables 1..num_vars.
  Assignment project(int num_vars) const;
  // Signed literals for variables 1..num_vars that are assigned.
  std::vector<int> to_dimacs(int num_vars) const;

  bool operator==(const Assignment&) const = default;

 private:
  std::vector<Value> values_;
};

bool clause_satisfied(std::span<const Lit> clause, const Assignment& a);

// Sorts and deduplicates; returns false when the clause holds a complementary pair.
bool normalize_clause(Clause& clause);

struct WcnfFormula {
  int num_vars = 0;
  std::vector<Clause> hard;
  std::vector<Clause> soft;

  bool operator==(const WcnfFormula&) const = default;
};

struct RelaxedFormula {
  WcnfFormula base;
  std::vector<Clause> clauses;  // hard clauses followed by (soft_j v r_j)
  std::vector<int> relax_vars;  // r_1..r_m, in soft-clause order
  std::vector<int> relax_map;   // relax_map[r - base.num_vars - 1] = soft clause index

  int num_vars() const { return base.num_vars + static_cast<int>(relax_vars.size()); }
  int soft_index_of(int relax_var) const { return relax_map.at(static_cast<std::size_t>(relax_var - base.num_vars - 1)); }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Raised by cost() when the assignment is not total or violates a hard clause.
class InvalidAssignment : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

WcnfFormula parse_wcnf(std::istream& in);
WcnfFormula parse_wcnf(std::string_view text);
WcnfFormula read_wcnf_file(const std::string& path);

// Classic-header WCNF; top is |soft| + 1 (at least 2).
std::string write_wcnf(const WcnfFormula& f);

RelaxedFormula relax(const WcnfFormula& f);

// Number of falsified soft clauses. Throws InvalidAssignment unless `a` is
// total over f's variables and satisfies every hard clause.
int cost(const WcnfFormula& f, const Assignment& a);

// Number of falsified soft clauses without validation; unassigned literals count as false.
int count_falsified_soft(const WcnfFormula& f, const Assignment& a);

bool satisfies_hard(const WcnfFormula& f, const Assignment& a);

// "v ..." payload: space-separated signed literals over 1..num_vars.
std::string format_model(const Assignment& a, int num_vars);

}  // namespace distms
