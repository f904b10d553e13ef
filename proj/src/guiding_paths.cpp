#include "distms/guiding_paths.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace distms::gp {

PathGenerator::PathGenerator(const std::vector<Clause>& hard, const std::vector<Clause>& soft, int num_vars)
    : engine_(hard, num_vars), soft_(soft), hard_count_(static_cast<int>(hard.size())) {
  std::set<int> hard_vars;
  for (const Clause& c : hard) {
    max_len_ = std::max(max_len_, static_cast<int>(c.size()));
    for (Lit l : c) hard_vars.insert(l.var());
  }
  hard_vars_ = static_cast<int>(hard_vars.size());
  std::set<int> soft_vars;
  for (const Clause& c : soft) {
    for (Lit l : c) soft_vars.insert(l.var());
  }
  soft_vars_.assign(soft_vars.begin(), soft_vars.end());
}

double PathGenerator::length_weight(int length) const {
  return std::pow(kLengthWeightBase, max_len_ - length);
}

sat::PropagationOutcome PathGenerator::propagate(const std::vector<Lit>& decisions) {
  return engine_.propagate_under(decisions, true);
}

double PathGenerator::eval(Lit l, EvalMode mode) const {
  if (engine_.value(l) != Value::Unassigned) throw std::invalid_argument("eval of an assigned literal");
  const Lit shortened = ~l;
  auto score = [&](sat::ClauseRef ref) -> double {
    int unassigned = 0;
    bool contains = false;
    for (Lit q : engine_.clause(ref)) {
      const Value v = engine_.value(q);
      if (v == Value::True) return 0.0;
      if (v == Value::Unassigned) ++unassigned;
      contains = contains || q == shortened;
    }
    return contains ? length_weight(unassigned - 1) : 0.0;
  };
  double sum = 0.0;
  const std::vector<sat::ClauseRef> refs =
      mode == EvalMode::Full ? engine_.live_clauses() : engine_.watched_clauses(shortened);
  for (sat::ClauseRef ref : refs) sum += score(ref);
  return sum;
}

int PathGenerator::choose_variable() const {
  int best = 0;
  double best_product = -1.0;
  double best_sum = -1.0;
  for (int x : soft_vars_) {
    if (engine_.value(x) != Value::Unassigned) continue;
    const double pos = eval(Lit(x, true), EvalMode::WatchedOnly);
    const double neg = eval(Lit(x, false), EvalMode::WatchedOnly);
    const double product = pos * neg;
    const double sum = pos + neg;
    if (product > best_product || (product == best_product && sum > best_sum)) {
      best = x;
      best_product = product;
      best_sum = sum;
    }
  }
  return best;
}

Lit PathGenerator::choose_polarity(int var) const {
  auto counts = [&](Lit l) {
    int falsified = 0;
    int satisfied = 0;
    for (const Clause& c : soft_) {
      bool is_sat = false;
      bool has_l = false;
      bool has_neg = false;
      int open_others = 0;
      for (Lit q : c) {
        if (q == l) {
          has_l = true;
        } else if (q == ~l) {
          has_neg = true;
        } else {
          const Value v = engine_.value(q);
          if (v == Value::True) is_sat = true;
          if (v == Value::Unassigned) ++open_others;
        }
      }
      if (is_sat) continue;
      if (has_l) ++satisfied;
      if (has_neg && open_others == 0) ++falsified;
    }
    return std::pair{falsified, satisfied};
  };
  const Lit pos(var, true);
  const auto [pos_false, pos_sat] = counts(pos);
  const auto [neg_false, neg_sat] = counts(~pos);
  if (pos_false != neg_false) return pos_false < neg_false ? pos : ~pos;
  if (pos_sat != neg_sat) return pos_sat > neg_sat ? pos : ~pos;
  return pos;
}

void PathGenerator::expand(std::vector<Lit>& decisions, double& theta, GenerationResult& out) {
  CutoffEvent ev;
  ev.depth = static_cast<int>(decisions.size());
  ev.theta_in = theta;
  theta *= kCutoffIncrease;
  ev.theta_incremented = theta;

  const sat::PropagationOutcome outcome = engine_.propagate_under(decisions, true);
  const double log_size = std::log2(static_cast<double>(std::max(hard_count_, 1)));
  ev.depth_guard = static_cast<double>(decisions.size()) + log_size > kDepthLimit;
  if (outcome.conflict || ev.depth_guard) {
    theta *= kCutoffDecrease;
    ev.decremented = true;
  }
  ev.theta_out = theta;

  if (outcome.conflict) {
    engine_.analyze_and_learn(outcome);
    ev.action = NodeAction::Conflict;
    out.trace.push_back(ev);
    return;
  }

  const double assigned = static_cast<double>(engine_.trail().size());
  const bool cutoff = static_cast<double>(decisions.size()) * assigned > theta * static_cast<double>(hard_vars_);
  const int x = cutoff ? 0 : choose_variable();
  if (cutoff || x == 0) {
    engine_.backtrack_to_root();
    out.paths.push_back(GuidingPath{decisions, static_cast<int>(out.paths.size())});
    ev.action = NodeAction::Emit;
    out.trace.push_back(ev);
    return;
  }

  const Lit first = choose_polarity(x);
  engine_.backtrack_to_root();
  ev.action = NodeAction::Branch;
  out.trace.push_back(ev);

  decisions.push_back(first);
  expand(decisions, theta, out);
  decisions.back() = ~first;
  expand(decisions, theta, out);
  decisions.pop_back();
}

GenerationResult PathGenerator::generate(const std::vector<Lit>& root, double theta0) {
  GenerationResult out;
  double theta = theta0;
  std::vector<Lit> decisions = root;
  expand(decisions, theta, out);
  out.root_conflict = !out.trace.empty() && out.trace.front().action == NodeAction::Conflict;
  out.final_theta = theta;
  return out;
}

std::vector<GuidingPath> generate_guiding_paths(const std::vector<Clause>& hard, const std::vector<Clause>& soft,
                                                int num_vars, const std::vector<Lit>& root, double theta0) {
  PathGenerator generator(hard, soft, num_vars);
  return generator.generate(root, theta0).paths;
}

std::string format_paths(const std::vector<GuidingPath>& paths) {
  std::string out;
  for (const GuidingPath& p : paths) {
    out += 'a';
    for (Lit l : p.decisions) out += ' ' + std::to_string(l.to_dimacs());
    out += " 0\n";
  }
  return out;
}

}  // namespace distms::gp
