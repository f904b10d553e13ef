#pragma once

#include <atomic>
#include <initializer_list>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "distms/formula.hpp"

namespace distms::sat {

using ClauseRef = std::uint32_t;
inline constexpr ClauseRef kNoClause = static_cast<ClauseRef>(-1);

enum class SatStatus { Sat, Unsat, Unknown };

struct SatResult {
  SatStatus status = SatStatus::Unknown;
  Assignment model;        // total over the engine's variables when Sat
  std::vector<Lit> core;   // subset of the assumptions when Unsat; empty = database alone is unsat

  bool sat() const { return status == SatStatus::Sat; }
  bool unsat() const { return status == SatStatus::Unsat; }
};

struct PropagationOutcome {
  bool conflict = false;
  std::vector<Lit> implied;             // trail minus the decisions, including level-0 facts
  ClauseRef conflict_clause = kNoClause;
  Lit falsified_decision;               // set when a decision was already false on arrival
  int decisions_applied = 0;
};

struct EngineOptions {
  double var_decay = 0.95;
  double clause_decay = 0.999;
  int restart_unit = 100;
  double learnt_cap_factor = 10.0;
  std::uint64_t seed = 0;  // 0 keeps pure index-order tie breaking
};

struct EngineStats {
  std::uint64_t decisions = 0;
  std::uint64_t propagations = 0;
  std::uint64_t conflicts = 0;
  std::uint64_t restarts = 0;
  std::uint64_t learnt_deleted = 0;
};

// CDCL solver with two watched literals, activity branching, phase saving,
// Luby restarts and solving under assumptions. Watch lists are kept eagerly:
// after propagation reaches a fixpoint, every clause with at least two
// unfalsified literals watches two of them.
class Engine {
 public:
  explicit Engine(int num_vars = 0, EngineOptions options = {});
  Engine(std::span<const Clause> clauses, int num_vars, EngineOptions options = {});

  int num_vars() const { return num_vars_; }
  int new_var();
  void ensure_vars(int num_vars);

  // Requires decision level 0. Returns false once the database is unsatisfiable.
  bool add_clause(std::span<const Lit> lits);
  bool add_clause(std::initializer_list<Lit> lits) { return add_clause(std::span<const Lit>(lits.begin(), lits.size())); }

  SatResult solve(std::span<const Lit> assumptions = {});

  // Pushes each decision on its own level and propagates. With keep_trail the
  // trail stays live (for analysis or inspection) until backtrack_to_root().
  PropagationOutcome propagate_under(std::span<const Lit> decisions, bool keep_trail = false);

  // First-UIP learning from a live conflict left by propagate_under(..., true).
  // Backtracks to level 0 and adds the returned clause to the database.
  Clause analyze_and_learn(const PropagationOutcome& outcome);

  void backtrack_to_root() { cancel_until(0); }

  std::vector<ClauseRef> watched_clauses(Lit l) const;
  std::span<const Lit> clause(ClauseRef ref) const { return clauses_[ref].lits; }
  bool is_learnt(ClauseRef ref) const { return clauses_[ref].learnt; }
  // Non-deleted clauses of size >= 2 (units live on the level-0 trail).
  std::vector<ClauseRef> live_clauses() const;
  std::size_t num_original() const { return num_original_; }
  std::size_t num_learnt() const { return num_learnt_; }

  Value value(Lit l) const;
  Value value(int var) const { return assigns_[var]; }
  int level(int var) const { return level_[var]; }
  int decision_level() const { return static_cast<int>(trail_lim_.size()); }
  std::span<const Lit> trail() const { return trail_; }
  bool okay() const { return ok_; }

  // Solve returns Unknown once the flag becomes true.
  void set_interrupt(const std::atomic<bool>* flag) { interrupt_ = flag; }
  const EngineStats& stats() const { return stats_; }

 private:
  struct ClauseData {
    std::vector<Lit> lits;
    double activity = 0.0;
    bool learnt = false;
    bool deleted = false;
  };

  ClauseRef attach(std::vector<Lit> lits, bool learnt);
  void detach(ClauseRef ref);
  void enqueue(Lit p, ClauseRef reason);
  ClauseRef propagate();
  void cancel_until(int level);
  void new_decision_level() { trail_lim_.push_back(static_cast<int>(trail_.size())); }

  void analyze(ClauseRef conflict, std::vector<Lit>& learnt, int& backtrack_level);
  std::vector<Lit> analyze_final(Lit p, std::span<const Lit> assumptions);
  std::vector<Lit> implied_by_decisions(Lit p);

  void bump_var(int v);
  void bump_clause(ClauseRef ref);
  void decay_activities();
  void reduce_learnts();

  Lit pick_branch();
  int search(int conflict_budget, std::span<const Lit> assumptions, std::vector<Lit>& core);

  // Binary heap over variables ordered by activity, ties by lowest index.
  bool heap_less(int a, int b) const;
  void heap_insert(int v);
  int heap_pop();
  void heap_up(std::size_t i);
  void heap_down(std::size_t i);
  bool heap_contains(int v) const { return v < static_cast<int>(heap_pos_.size()) && heap_pos_[v] >= 0; }

  EngineOptions options_;
  EngineStats stats_;
  int num_vars_ = 0;
  bool ok_ = true;

  std::vector<ClauseData> clauses_;
  std::vector<std::vector<ClauseRef>> watches_;  // by literal index: clauses watching that literal
  std::size_t num_original_ = 0;
  std::size_t num_learnt_ = 0;

  std::vector<Value> assigns_;
  std::vector<int> level_;
  std::vector<ClauseRef> reason_;
  std::vector<bool> saved_phase_;
  std::vector<double> activity_;
  std::vector<Lit> trail_;
  std::vector<int> trail_lim_;
  std::size_t qhead_ = 0;

  std::vector<int> heap_;
  std::vector<int> heap_pos_;

  std::vector<char> seen_;
  std::vector<Lit> analyze_toclear_;

  double var_inc_ = 1.0;
  double clause_inc_ = 1.0;
  const std::atomic<bool>* interrupt_ = nullptr;
};

// Luby sequence value for index i (0-based): 1 1 2 1 1 2 4 ...
double luby(double y, int i);

}  // namespace distms::sat
