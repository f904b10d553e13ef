#include "distms/sat_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace distms::sat {

namespace {

constexpr int kRestart = -1;
constexpr int kInterrupted = -2;
constexpr int kSat = 1;
constexpr int kUnsat = 0;

}  // namespace

double luby(double y, int x) {
  int size = 1;
  int seq = 0;
  while (size < x + 1) {
    ++seq;
    size = 2 * size + 1;
  }
  while (size - 1 != x) {
    size = (size - 1) >> 1;
    --seq;
    x = x % size;
  }
  return std::pow(y, seq);
}

Engine::Engine(int num_vars, EngineOptions options) : options_(options) { ensure_vars(num_vars); }

Engine::Engine(std::span<const Clause> clauses, int num_vars, EngineOptions options) : Engine(num_vars, options) {
  for (const Clause& c : clauses) add_clause(c);
}

void Engine::ensure_vars(int num_vars) {
  if (num_vars <= num_vars_) return;
  const auto n = static_cast<std::size_t>(num_vars) + 1;
  assigns_.resize(n, Value::Unassigned);
  level_.resize(n, 0);
  reason_.resize(n, kNoClause);
  saved_phase_.resize(n, false);
  activity_.resize(n, 0.0);
  seen_.resize(n, 0);
  heap_pos_.resize(n, -1);
  watches_.resize(2 * n);
  std::mt19937_64 rng(options_.seed + static_cast<std::uint64_t>(num_vars_));
  for (int v = num_vars_ + 1; v <= num_vars; ++v) {
    if (options_.seed != 0) activity_[v] = std::uniform_real_distribution<double>(0.0, 1e-5)(rng);
    heap_insert(v);
  }
  num_vars_ = num_vars;
}

int Engine::new_var() {
  ensure_vars(num_vars_ + 1);
  return num_vars_;
}

Value Engine::value(Lit l) const {
  Value v = assigns_[l.var()];
  if (v == Value::Unassigned) return v;
  return (v == Value::True) == l.positive() ? Value::True : Value::False;
}

bool Engine::add_clause(std::span<const Lit> lits) {
  if (decision_level() != 0) throw std::logic_error("add_clause requires decision level 0");
  if (!ok_) return false;
  Clause c(lits.begin(), lits.end());
  for (Lit l : c) {
    if (l.var() < 1 || l.var() > num_vars_) throw std::invalid_argument("clause literal out of variable range");
  }
  if (!normalize_clause(c)) return true;
  std::erase_if(c, [&](Lit l) { return value(l) == Value::False; });
  if (std::any_of(c.begin(), c.end(), [&](Lit l) { return value(l) == Value::True; })) return true;
  if (c.empty()) {
    ok_ = false;
    return false;
  }
  if (c.size() == 1) {
    enqueue(c[0], kNoClause);
    ok_ = propagate() == kNoClause;
    return ok_;
  }
  attach(std::move(c), false);
  ++num_original_;
  return true;
}

ClauseRef Engine::attach(std::vector<Lit> lits, bool learnt) {
  const auto ref = static_cast<ClauseRef>(clauses_.size());
  watches_[lits[0].index()].push_back(ref);
  watches_[lits[1].index()].push_back(ref);
  clauses_.push_back(ClauseData{std::move(lits), 0.0, learnt, false});
  return ref;
}

void Engine::detach(ClauseRef ref) {
  ClauseData& c = clauses_[ref];
  for (int k = 0; k < 2; ++k) std::erase(watches_[c.lits[k].index()], ref);
  c.deleted = true;
  if (c.learnt) --num_learnt_;
}

void Engine::enqueue(Lit p, ClauseRef reason) {
  const int v = p.var();
  assigns_[v] = p.positive() ? Value::True : Value::False;
  level_[v] = decision_level();
  reason_[v] = reason;
  trail_.push_back(p);
}

ClauseRef Engine::propagate() {
  ClauseRef conflict = kNoClause;
  while (qhead_ < trail_.size()) {
    const Lit false_lit = ~trail_[qhead_++];
    ++stats_.propagations;
    std::vector<ClauseRef>& ws = watches_[false_lit.index()];
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < ws.size()) {
      const ClauseRef cr = ws[i++];
      std::vector<Lit>& c = clauses_[cr].lits;
      if (c[0] == false_lit) std::swap(c[0], c[1]);

      bool moved = false;
      for (std::size_t k = 2; k < c.size(); ++k) {
        if (value(c[k]) != Value::False) {
          std::swap(c[1], c[k]);
          watches_[c[1].index()].push_back(cr);
          moved = true;
          break;
        }
      }
      if (moved) continue;

      ws[j++] = cr;
      const Value first = value(c[0]);
      if (first == Value::True) continue;
      if (first == Value::False) {
        conflict = cr;
        qhead_ = trail_.size();
        while (i < ws.size()) ws[j++] = ws[i++];
      } else {
        enqueue(c[0], cr);
      }
    }
    ws.resize(j);
    if (conflict != kNoClause) break;
  }
  return conflict;
}

void Engine::cancel_until(int level) {
  if (decision_level() <= level) return;
  const auto stop = static_cast<std::size_t>(trail_lim_[static_cast<std::size_t>(level)]);
  for (std::size_t i = trail_.size(); i-- > stop;) {
    const int v = trail_[i].var();
    assigns_[v] = Value::Unassigned;
    reason_[v] = kNoClause;
    saved_phase_[v] = trail_[i].positive();
    heap_insert(v);
  }
  trail_.resize(stop);
  trail_lim_.resize(static_cast<std::size_t>(level));
  qhead_ = trail_.size();
}

void Engine::analyze(ClauseRef conflict, std::vector<Lit>& learnt, int& backtrack_level) {
  int path_count = 0;
  Lit p;
  learnt.assign(1, Lit());
  std::size_t index = trail_.size();

  do {
    ClauseData& c = clauses_[conflict];
    if (c.learnt) bump_clause(conflict);
    for (std::size_t j = p.defined() ? 1 : 0; j < c.lits.size(); ++j) {
      const Lit q = c.lits[j];
      const int v = q.var();
      if (!seen_[v] && level_[v] > 0) {
        bump_var(v);
        seen_[v] = 1;
        if (level_[v] >= decision_level()) {
          ++path_count;
        } else {
          learnt.push_back(q);
        }
      }
    }
    while (!seen_[trail_[--index].var()]) {
    }
    p = trail_[index];
    conflict = reason_[p.var()];
    seen_[p.var()] = 0;
    --path_count;
  } while (path_count > 0);
  learnt[0] = ~p;

  // Drop literals whose reason is subsumed by the rest of the clause.
  analyze_toclear_.assign(learnt.begin(), learnt.end());
  std::size_t keep = 1;
  for (std::size_t i = 1; i < learnt.size(); ++i) {
    const ClauseRef r = reason_[learnt[i].var()];
    bool redundant = r != kNoClause;
    if (redundant) {
      const auto& rc = clauses_[r].lits;
      for (std::size_t k = 1; k < rc.size(); ++k) {
        const int v = rc[k].var();
        if (!seen_[v] && level_[v] > 0) {
          redundant = false;
          break;
        }
      }
    }
    if (!redundant) learnt[keep++] = learnt[i];
  }
  learnt.resize(keep);

  if (learnt.size() == 1) {
    backtrack_level = 0;
  } else {
    std::size_t max_i = 1;
    for (std::size_t i = 2; i < learnt.size(); ++i) {
      if (level_[learnt[i].var()] > level_[learnt[max_i].var()]) max_i = i;
    }
    std::swap(learnt[1], learnt[max_i]);
    backtrack_level = level_[learnt[1].var()];
  }
  for (Lit l : analyze_toclear_) seen_[l.var()] = 0;
}

std::vector<Lit> Engine::implied_by_decisions(Lit p) {
  // Decisions (positive trail literals) in the implication cone of the true literal p.
  std::vector<Lit> out;
  if (level_[p.var()] == 0) return out;
  seen_[p.var()] = 1;
  for (std::size_t i = trail_.size(); i-- > static_cast<std::size_t>(trail_lim_[0]);) {
    const int x = trail_[i].var();
    if (!seen_[x]) continue;
    if (reason_[x] == kNoClause) {
      out.push_back(trail_[i]);
    } else {
      const auto& c = clauses_[reason_[x]].lits;
      for (std::size_t j = 1; j < c.size(); ++j) {
        if (level_[c[j].var()] > 0) seen_[c[j].var()] = 1;
      }
    }
    seen_[x] = 0;
  }
  seen_[p.var()] = 0;
  return out;
}

std::vector<Lit> Engine::analyze_final(Lit p, std::span<const Lit> assumptions) {
  // p is a falsified assumption; the core is p plus the assumptions that imply ~p.
  std::vector<Lit> core{p};
  for (Lit d : implied_by_decisions(~p)) {
    if (std::find(assumptions.begin(), assumptions.end(), d) != assumptions.end() &&
        std::find(core.begin(), core.end(), d) == core.end()) {
      core.push_back(d);
    }
  }
  return core;
}

void Engine::bump_var(int v) {
  if ((activity_[v] += var_inc_) > 1e100) {
    for (int x = 1; x <= num_vars_; ++x) activity_[x] *= 1e-100;
    var_inc_ *= 1e-100;
  }
  if (heap_contains(v)) heap_up(static_cast<std::size_t>(heap_pos_[v]));
}

void Engine::bump_clause(ClauseRef ref) {
  if ((clauses_[ref].activity += clause_inc_) > 1e20) {
    for (ClauseData& c : clauses_) {
      if (c.learnt) c.activity *= 1e-20;
    }
    clause_inc_ *= 1e-20;
  }
}

void Engine::decay_activities() {
  var_inc_ /= options_.var_decay;
  clause_inc_ /= options_.clause_decay;
}

void Engine::reduce_learnts() {
  std::vector<ClauseRef> candidates;
  for (ClauseRef r = 0; r < clauses_.size(); ++r) {
    if (clauses_[r].learnt && !clauses_[r].deleted && clauses_[r].lits.size() > 2) candidates.push_back(r);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](ClauseRef a, ClauseRef b) { return clauses_[a].activity < clauses_[b].activity; });
  // Only called at level 0, where reasons are never consulted again.
  for (Lit l : trail_) reason_[l.var()] = kNoClause;
  for (std::size_t i = 0; i < candidates.size() / 2; ++i) {
    detach(candidates[i]);
    ++stats_.learnt_deleted;
  }
}

Lit Engine::pick_branch() {
  while (!heap_.empty()) {
    const int v = heap_pop();
    if (assigns_[v] == Value::Unassigned) return Lit(v, saved_phase_[v]);
  }
  return Lit();
}

int Engine::search(int conflict_budget, std::span<const Lit> assumptions, std::vector<Lit>& core) {
  int conflicts = 0;
  std::vector<Lit> learnt;
  const double cap = options_.learnt_cap_factor * static_cast<double>(std::max<std::size_t>(num_original_, 100));
  while (true) {
    if (interrupt_ != nullptr && interrupt_->load(std::memory_order_relaxed)) return kInterrupted;
    const ClauseRef conflict = propagate();
    if (conflict != kNoClause) {
      ++stats_.conflicts;
      ++conflicts;
      if (decision_level() == 0) {
        ok_ = false;
        return kUnsat;
      }
      int backtrack_level = 0;
      analyze(conflict, learnt, backtrack_level);
      cancel_until(backtrack_level);
      if (learnt.size() == 1) {
        enqueue(learnt[0], kNoClause);
      } else {
        const ClauseRef ref = attach(learnt, true);
        ++num_learnt_;
        bump_clause(ref);
        enqueue(learnt[0], ref);
      }
      decay_activities();
      continue;
    }

    if (conflicts >= conflict_budget) {
      cancel_until(0);
      return kRestart;
    }
    if (decision_level() == 0 && static_cast<double>(num_learnt_) > cap) reduce_learnts();

    Lit next;
    while (decision_level() < static_cast<int>(assumptions.size())) {
      const Lit a = assumptions[static_cast<std::size_t>(decision_level())];
      const Value v = value(a);
      if (v == Value::True) {
        new_decision_level();
      } else if (v == Value::False) {
        core = analyze_final(a, assumptions);
        return kUnsat;
      } else {
        next = a;
        break;
      }
    }
    if (!next.defined()) {
      ++stats_.decisions;
      next = pick_branch();
      if (!next.defined()) return kSat;
    }
    new_decision_level();
    enqueue(next, kNoClause);
  }
}

SatResult Engine::solve(std::span<const Lit> assumptions) {
  for (Lit a : assumptions) {
    if (a.var() < 1 || a.var() > num_vars_) throw std::invalid_argument("assumption literal out of variable range");
  }
  SatResult result;
  cancel_until(0);
  if (!ok_) {
    result.status = SatStatus::Unsat;
    return result;
  }
  for (int restarts = 0;; ++restarts) {
    const auto budget = static_cast<int>(luby(2.0, restarts) * options_.restart_unit);
    std::vector<Lit> core;
    const int code = search(budget, assumptions, core);
    if (code == kRestart) {
      ++stats_.restarts;
      continue;
    }
    if (code == kInterrupted) {
      result.status = SatStatus::Unknown;
    } else if (code == kSat) {
      result.status = SatStatus::Sat;
      result.model = Assignment(num_vars_);
      for (int v = 1; v <= num_vars_; ++v) result.model.set(v, assigns_[v] == Value::True);
    } else {
      result.status = SatStatus::Unsat;
      result.core = std::move(core);
    }
    cancel_until(0);
    return result;
  }
}

PropagationOutcome Engine::propagate_under(std::span<const Lit> decisions, bool keep_trail) {
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    for (std::size_t k = i + 1; k < decisions.size(); ++k) {
      if (decisions[i] == ~decisions[k]) throw std::invalid_argument("decisions contain a complementary pair");
    }
  }
  cancel_until(0);
  PropagationOutcome out;
  if (ok_ && propagate() != kNoClause) ok_ = false;
  if (!ok_) {
    out.conflict = true;
    return out;
  }
  for (Lit l : decisions) {
    const Value v = value(l);
    new_decision_level();
    if (v == Value::True) continue;
    if (v == Value::False) {
      out.conflict = true;
      out.falsified_decision = l;
      break;
    }
    enqueue(l, kNoClause);
    ++out.decisions_applied;
    const ClauseRef c = propagate();
    if (c != kNoClause) {
      out.conflict = true;
      out.conflict_clause = c;
      break;
    }
  }
  for (Lit l : trail_) {
    if (reason_[l.var()] != kNoClause || level_[l.var()] == 0) out.implied.push_back(l);
  }
  if (!keep_trail) cancel_until(0);
  return out;
}

Clause Engine::analyze_and_learn(const PropagationOutcome& outcome) {
  if (!outcome.conflict) throw std::logic_error("analyze_and_learn called without a conflict");
  if (!ok_ || decision_level() == 0) {
    // Conflict without decisions: the database itself is unsatisfiable.
    cancel_until(0);
    ok_ = false;
    return {};
  }
  Clause learnt;
  if (outcome.falsified_decision.defined()) {
    const Lit l = outcome.falsified_decision;
    if (value(l) != Value::False) throw std::logic_error("no live conflict to analyze");
    for (Lit d : implied_by_decisions(~l)) learnt.push_back(~d);
    learnt.push_back(~l);
  } else {
    if (outcome.conflict_clause == kNoClause) throw std::logic_error("no live conflict to analyze");
    for (Lit q : clauses_[outcome.conflict_clause].lits) {
      if (value(q) != Value::False) throw std::logic_error("no live conflict to analyze");
    }
    int backtrack_level = 0;
    analyze(outcome.conflict_clause, learnt, backtrack_level);
    decay_activities();
  }
  cancel_until(0);

  Clause c = learnt;
  if (!normalize_clause(c)) return learnt;
  std::erase_if(c, [&](Lit l) { return value(l) == Value::False; });
  if (std::any_of(c.begin(), c.end(), [&](Lit l) { return value(l) == Value::True; })) return learnt;
  if (c.empty()) {
    ok_ = false;
  } else if (c.size() == 1) {
    enqueue(c[0], kNoClause);
    if (propagate() != kNoClause) ok_ = false;
  } else {
    attach(std::move(c), true);
    ++num_learnt_;
  }
  return learnt;
}

std::vector<ClauseRef> Engine::watched_clauses(Lit l) const {
  if (l.index() >= static_cast<int>(watches_.size())) return {};
  return watches_[static_cast<std::size_t>(l.index())];
}

std::vector<ClauseRef> Engine::live_clauses() const {
  std::vector<ClauseRef> out;
  for (ClauseRef r = 0; r < clauses_.size(); ++r) {
    if (!clauses_[r].deleted) out.push_back(r);
  }
  return out;
}

bool Engine::heap_less(int a, int b) const {
  return activity_[a] > activity_[b] || (activity_[a] == activity_[b] && a < b);
}

void Engine::heap_insert(int v) {
  if (heap_contains(v)) return;
  heap_pos_[v] = static_cast<int>(heap_.size());
  heap_.push_back(v);
  heap_up(heap_.size() - 1);
}

int Engine::heap_pop() {
  const int top = heap_[0];
  heap_[0] = heap_.back();
  heap_pos_[heap_[0]] = 0;
  heap_.pop_back();
  heap_pos_[top] = -1;
  if (!heap_.empty()) heap_down(0);
  return top;
}

void Engine::heap_up(std::size_t i) {
  const int v = heap_[i];
  while (i > 0) {
    const std::size_t parent = (i - 1) / 2;
    if (!heap_less(v, heap_[parent])) break;
    heap_[i] = heap_[parent];
    heap_pos_[heap_[i]] = static_cast<int>(i);
    i = parent;
  }
  heap_[i] = v;
  heap_pos_[v] = static_cast<int>(i);
}

void Engine::heap_down(std::size_t i) {
  const int v = heap_[i];
  while (true) {
    std::size_t child = 2 * i + 1;
    if (child >= heap_.size()) break;
    if (child + 1 < heap_.size() && heap_less(heap_[child + 1], heap_[child])) ++child;
    if (!heap_less(heap_[child], v)) break;
    heap_[i] = heap_[child];
    heap_pos_[heap_[i]] = static_cast<int>(i);
    i = child;
  }
  heap_[i] = v;
  heap_pos_[v] = static_cast<int>(i);
}

}  // namespace distms::sat
