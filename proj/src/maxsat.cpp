#include "distms/maxsat.hpp"

#include <algorithm>

namespace distms::maxsat {

LinearSearch::LinearSearch(const RelaxedFormula& rf, int ub_init, std::vector<Lit> path, ImproveCallback on_improve,
                           sat::EngineOptions options)
    : base_(&rf.base),
      path_(std::move(path)),
      on_improve_(std::move(on_improve)),
      engine_(rf.clauses, rf.num_vars(), options),
      bound_(std::min(ub_init, static_cast<int>(rf.relax_vars.size()))) {
  if (!rf.relax_vars.empty()) {
    std::vector<Lit> inputs;
    inputs.reserve(rf.relax_vars.size());
    for (int r : rf.relax_vars) inputs.emplace_back(r, true);
    totalizer_ = card::encode_totalizer(inputs, rf.num_vars() + 1);
    engine_.ensure_vars(totalizer_->next_free - 1);
    for (const Clause& c : totalizer_->clauses) engine_.add_clause(c);
  }
}

OptOutcome LinearSearch::finish(OutcomeKind kind, bool proof_independent) {
  OptOutcome out;
  out.kind = kind;
  out.proof_independent = proof_independent;
  if (kind == OutcomeKind::Optimum) {
    out.cost = best_cost_;
    out.model = best_model_;
  }
  return out;
}

std::optional<OptOutcome> LinearSearch::step() {
  if (bound_ < 0) {
    // No cost below zero exists, whatever the path.
    return finish(best_cost_ >= 0 ? OutcomeKind::Optimum : OutcomeKind::NoImprovement, true);
  }
  std::vector<Lit> assumptions;
  if (totalizer_) assumptions = card::bound_assumptions(*totalizer_, bound_);
  assumptions.insert(assumptions.end(), path_.begin(), path_.end());
  sat::SatResult r = engine_.solve(assumptions);
  if (r.status == sat::SatStatus::Unknown) return finish(OutcomeKind::Aborted, false);
  if (r.sat()) {
    best_model_ = r.model.project(base_->num_vars);
    best_cost_ = count_falsified_soft(*base_, best_model_);
    bound_ = best_cost_ - 1;
    if (on_improve_) on_improve_(best_cost_, best_model_);
    if (bound_ < 0) return finish(OutcomeKind::Optimum, true);
    return std::nullopt;
  }
  if (r.core.empty()) return finish(OutcomeKind::HardUnsat, true);
  const bool independent = std::none_of(r.core.begin(), r.core.end(), [&](Lit l) {
    return std::find(path_.begin(), path_.end(), l) != path_.end();
  });
  return finish(best_cost_ >= 0 ? OutcomeKind::Optimum : OutcomeKind::NoImprovement, independent);
}

void LinearSearch::retarget(std::vector<Lit> path, int ub_init) {
  path_ = std::move(path);
  bound_ = std::min(ub_init, totalizer_ ? totalizer_->size() : 0);
  best_cost_ = -1;
  best_model_ = Assignment();
}

OptOutcome linear_su(const RelaxedFormula& rf, int ub_init, const std::vector<Lit>& path,
                     const ImproveCallback& on_improve, sat::EngineOptions options) {
  LinearSearch search(rf, ub_init, path, on_improve, options);
  while (true) {
    if (auto done = search.step()) return *done;
  }
}

Msu3Search::Msu3Search(const WcnfFormula& f, LowerBoundCallback on_lower_bound, sat::EngineOptions options)
    : f_(&f), on_lower_bound_(std::move(on_lower_bound)), engine_(f.hard, f.num_vars, options) {
  selector_.reserve(f.soft.size());
  relaxed_.assign(f.soft.size(), 0);
  for (const Clause& soft : f.soft) {
    const int s = engine_.new_var();
    selector_.push_back(s);
    Clause c = soft;
    c.emplace_back(s, true);
    engine_.add_clause(c);
  }
}

std::optional<OptOutcome> Msu3Search::step() {
  std::vector<Lit> assumptions;
  for (std::size_t j = 0; j < selector_.size(); ++j) {
    if (!relaxed_[j]) assumptions.emplace_back(selector_[j], false);
  }
  if (totalizer_) {
    for (Lit l : card::bound_assumptions(*totalizer_, std::min(lower_bound_, totalizer_->size()))) {
      assumptions.push_back(l);
    }
  }
  sat::SatResult r = engine_.solve(assumptions);
  OptOutcome out;
  if (r.status == sat::SatStatus::Unknown) return out;
  if (r.sat()) {
    out.kind = OutcomeKind::Optimum;
    out.model = r.model.project(f_->num_vars);
    out.cost = count_falsified_soft(*f_, out.model);
    out.proof_independent = true;
    return out;
  }
  if (r.core.empty()) {
    out.kind = OutcomeKind::HardUnsat;
    out.proof_independent = true;
    return out;
  }

  ++cores_;
  for (Lit l : r.core) {
    auto it = std::find(selector_.begin(), selector_.end(), l.var());
    if (it == selector_.end() || l.positive()) continue;
    const auto j = static_cast<std::size_t>(it - selector_.begin());
    if (!relaxed_[j]) {
      relaxed_[j] = 1;
      relaxed_inputs_.emplace_back(selector_[j], true);
    }
  }
  ++lower_bound_;
  if (on_lower_bound_) on_lower_bound_(lower_bound_);

  // Earlier totalizers stay in the database; they only define their own aux vars.
  totalizer_ = card::encode_totalizer(relaxed_inputs_, engine_.num_vars() + 1);
  engine_.ensure_vars(totalizer_->next_free - 1);
  for (const Clause& c : totalizer_->clauses) engine_.add_clause(c);
  return std::nullopt;
}

OptOutcome msu3(const WcnfFormula& f, const LowerBoundCallback& on_lower_bound, sat::EngineOptions options) {
  Msu3Search search(f, on_lower_bound, options);
  while (true) {
    if (auto done = search.step()) return *done;
  }
}

}  // namespace distms::maxsat
