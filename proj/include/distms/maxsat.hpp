#pragma once

#include <atomic>
#include <functional>
#include <optional>
#include <vector>

#include "distms/formula.hpp"
#include "distms/sat_engine.hpp"
#include "distms/totalizer.hpp"

namespace distms::maxsat {

enum class OutcomeKind {
  Optimum,        // best cost under the search's restrictions, with model
  HardUnsat,      // the hard clauses alone are unsatisfiable
  NoImprovement,  // no model within the initial bound under the given path
  Aborted,        // interrupted before finishing
};

struct OptOutcome {
  OutcomeKind kind = OutcomeKind::Aborted;
  int cost = -1;
  Assignment model;  // over the original variables
  // The final UNSAT did not use any guiding-path literal.
  bool proof_independent = false;
};

using ImproveCallback = std::function<void(int cost, const Assignment& model)>;
using LowerBoundCallback = std::function<void(int lower_bound)>;

// SAT-UNSAT linear search over a relaxed formula: one totalizer over all
// relaxation variables, tightened with a single assumption per call.
// Each step() is one SAT call; the result is returned once the search ends.
class LinearSearch {
 public:
  LinearSearch(const RelaxedFormula& rf, int ub_init, std::vector<Lit> path, ImproveCallback on_improve = {},
               sat::EngineOptions options = {});

  std::optional<OptOutcome> step();
  // Starts a fresh search on the same engine; learned clauses are kept.
  void retarget(std::vector<Lit> path, int ub_init);
  int current_bound() const { return bound_; }
  void set_interrupt(const std::atomic<bool>* flag) { engine_.set_interrupt(flag); }

 private:
  OptOutcome finish(OutcomeKind kind, bool proof_independent);

  const WcnfFormula* base_;
  std::vector<Lit> path_;
  ImproveCallback on_improve_;
  sat::Engine engine_;
  std::optional<card::AtMostEncoding> totalizer_;
  int bound_;
  int best_cost_ = -1;
  Assignment best_model_;
};

OptOutcome linear_su(const RelaxedFormula& rf, int ub_init, const std::vector<Lit>& path,
                     const ImproveCallback& on_improve = {}, sat::EngineOptions options = {});

// Core-guided MSU3: soft clauses start unrelaxed; each core relaxes its new
// soft clauses and raises the lower bound by one.
class Msu3Search {
 public:
  explicit Msu3Search(const WcnfFormula& f, LowerBoundCallback on_lower_bound = {}, sat::EngineOptions options = {});

  std::optional<OptOutcome> step();
  int lower_bound() const { return lower_bound_; }
  int cores_found() const { return cores_; }
  void set_interrupt(const std::atomic<bool>* flag) { engine_.set_interrupt(flag); }

 private:
  const WcnfFormula* f_;
  LowerBoundCallback on_lower_bound_;
  sat::Engine engine_;
  std::vector<int> selector_;     // selector var per soft clause
  std::vector<char> relaxed_;
  std::vector<Lit> relaxed_inputs_;
  std::optional<card::AtMostEncoding> totalizer_;
  int lower_bound_ = 0;
  int cores_ = 0;
};

OptOutcome msu3(const WcnfFormula& f, const LowerBoundCallback& on_lower_bound = {}, sat::EngineOptions options = {});

}  // namespace distms::maxsat
