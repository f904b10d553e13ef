#pragma once

#include <string>
#include <vector>

#include "distms/formula.hpp"
#include "distms/sat_engine.hpp"

namespace distms::gp {

inline constexpr double kRootCutoff = 1000.0;
inline constexpr double kResplitCutoff = 5000.0;
inline constexpr double kCutoffIncrease = 1.05;
inline constexpr double kCutoffDecrease = 0.70;
inline constexpr double kDepthLimit = 25.0;
inline constexpr double kLengthWeightBase = 5.0;

struct GuidingPath {
  std::vector<Lit> decisions;
  int gen_index = 0;
  int depth() const { return static_cast<int>(decisions.size()); }
};

enum class NodeAction { Conflict, Emit, Branch };

// One invocation of the recursive generator, in call order.
struct CutoffEvent {
  int depth = 0;
  double theta_in = 0.0;
  double theta_incremented = 0.0;
  bool depth_guard = false;
  bool decremented = false;
  double theta_out = 0.0;
  NodeAction action = NodeAction::Branch;
};

struct GenerationResult {
  std::vector<GuidingPath> paths;
  bool root_conflict = false;  // the starting decisions already falsify the hard clauses
  std::vector<CutoffEvent> trace;
  double final_theta = 0.0;
};

enum class EvalMode { Full, WatchedOnly };

// Lookahead guiding-path generator over the hard clauses. The engine keeps
// clauses learned from pruned branches across calls, so re-splits benefit
// from earlier conflicts.
class PathGenerator {
 public:
  PathGenerator(const std::vector<Clause>& hard, const std::vector<Clause>& soft, int num_vars);

  GenerationResult generate(const std::vector<Lit>& root, double theta0);

  // Heuristics, evaluated against the trail left by propagate().
  sat::PropagationOutcome propagate(const std::vector<Lit>& decisions);
  void backtrack() { engine_.backtrack_to_root(); }
  double eval(Lit l, EvalMode mode) const;
  int choose_variable() const;  // 0 when every soft variable is assigned
  Lit choose_polarity(int var) const;

  double length_weight(int length) const;
  int max_clause_length() const { return max_len_; }
  int hard_count() const { return hard_count_; }
  int hard_var_count() const { return hard_vars_; }
  const std::vector<int>& soft_vars() const { return soft_vars_; }
  const sat::Engine& engine() const { return engine_; }

 private:
  void expand(std::vector<Lit>& decisions, double& theta, GenerationResult& out);

  sat::Engine engine_;
  std::vector<Clause> soft_;
  std::vector<int> soft_vars_;
  int max_len_ = 0;
  int hard_count_ = 0;
  int hard_vars_ = 0;
};

std::vector<GuidingPath> generate_guiding_paths(const std::vector<Clause>& hard, const std::vector<Clause>& soft,
                                                int num_vars, const std::vector<Lit>& root, double theta0);

// iCNF-style cube lines: "a <lits> 0".
std::string format_paths(const std::vector<GuidingPath>& paths);

}  // namespace distms::gp
