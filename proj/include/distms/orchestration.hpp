#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "distms/formula.hpp"
#include "distms/guiding_paths.hpp"
#include "distms/maxsat.hpp"
#include "distms/message.hpp"

namespace distms::orch {

using net::Message;
using net::Role;
using net::VerdictKind;

inline constexpr int kMasterId = 0;

struct UpperBound {
  int cost = 0;
  Assignment model;
};

// Solves the hard clauses alone; nullopt when they are unsatisfiable.
std::optional<UpperBound> initial_upper_bound(const WcnfFormula& f);

// Tentative bounds of the search-space-splitting master.
struct BoundSet {
  int lambda = 0;
  int mu = 0;
  std::vector<int> bounds;   // strictly increasing, within [lambda, mu - 1]
  std::map<int, int> owner;  // bound -> worker testing it

  bool closed() const { return lambda >= mu; }
  bool contains(int b) const;
  bool well_formed() const;
};

BoundSet initial_bounds(int mu, int k);
// The bounds b_1..b_k of initial_bounds, deduplicated, in increasing order.
std::vector<int> initial_assignments(int mu, int k);

// Both return the workers whose bound was removed. Stale results are ignored.
std::vector<int> apply_sat_result(BoundSet& bs, int cost);
std::vector<int> apply_unsat_result(BoundSet& bs, int b);

// Splits the widest gap (lowest on ties) and inserts the midpoint.
std::optional<int> next_tentative(BoundSet& bs);

struct Verdict {
  VerdictKind kind = VerdictKind::Unknown;
  int cost = -1;
  Assignment model;
};

struct Envelope {
  int to = 0;
  Message msg;
};

using ImproveSink = std::function<void(int cost, const Assignment& model)>;

class Master {
 public:
  Master(const WcnfFormula& f, int workers);
  virtual ~Master() = default;

  virtual std::vector<Envelope> start() = 0;
  virtual std::vector<Envelope> handle(const Message& m) = 0;
  virtual std::vector<Envelope> worker_lost(int id) = 0;

  bool done() const { return done_; }
  const Verdict& verdict() const { return verdict_; }
  std::optional<int> best_cost() const;
  const Assignment& best_model() const { return best_model_; }
  int workers() const { return workers_; }
  Role role_of(int worker) const { return roles_.at(static_cast<std::size_t>(worker - 1)); }

  void set_on_improve(ImproveSink sink) { on_improve_ = std::move(sink); }
  // Ends the run with the best known model, if any.
  std::vector<Envelope> stop();

 protected:
  // Validates a reported model; true when it is new and strictly better.
  bool accept_model(int cost, const std::vector<int>& lits);
  bool improve(int cost, const Assignment& model);
  std::vector<Envelope> finish(VerdictKind kind);
  std::vector<Envelope> hellos(const std::vector<Role>& roles);
  bool alive(int worker) const { return !lost_.count(worker); }

  const WcnfFormula* f_;
  int workers_;
  std::vector<Role> roles_;
  std::set<int> lost_;
  bool done_ = false;
  Verdict verdict_;
  int best_cost_ = -1;
  Assignment best_model_;
  ImproveSink on_improve_;
};

// Search space splitting: linear workers test tentative bounds while one
// core-guided worker raises the lower bound.
class SssMaster : public Master {
 public:
  SssMaster(const WcnfFormula& f, int workers);

  std::vector<Envelope> start() override;
  std::vector<Envelope> handle(const Message& m) override;
  std::vector<Envelope> worker_lost(int id) override;

  const BoundSet& bounds() const { return bs_; }
  // (lambda, mu) after every event, starting once the initial bound is known.
  const std::vector<std::pair<int, int>>& audit() const { return audit_; }

 private:
  struct Slot {
    int task = 0;
    std::optional<int> bound;
  };

  std::vector<Envelope> settle(std::vector<int> displaced);
  std::optional<Envelope> assign(int worker);
  void release(int worker);

  BoundSet bs_;
  std::map<int, Slot> linear_;
  int next_task_ = 0;
  std::vector<std::pair<int, int>> audit_;
};

// Guiding paths: solvers work on disjoint regions of the search space while
// an optional linear worker improves the upper bound on the whole formula.
class GpMaster : public Master {
 public:
  GpMaster(const WcnfFormula& f, int workers);

  std::vector<Envelope> start() override;
  std::vector<Envelope> handle(const Message& m) override;
  std::vector<Envelope> worker_lost(int id) override;

  const std::vector<gp::GuidingPath>& root_paths() const { return root_paths_; }
  std::size_t pending_count() const { return pending_.size(); }
  std::size_t resolved_count() const { return resolved_; }
  std::size_t task_count() const { return tasks_.size(); }
  int resplits() const { return resplits_; }
  int lower_bound() const { return lambda_; }
  const std::vector<gp::GenerationResult>& generations() const { return generations_; }

 private:
  enum class State { Pending, InFlight, Resolved };
  struct PathTask {
    std::vector<Lit> path;
    int seq = 0;
    int parent = -1;
    std::vector<int> children;
    State state = State::Pending;
    int worker = 0;
    int assigned_at = 0;
    bool resplit = false;
  };
  struct Solver {
    std::optional<int> task;
  };

  int add_task(std::vector<Lit> path, int parent);
  void resolve(int id, std::vector<Envelope>& out, int reporter);
  void dispatch(std::vector<Envelope>& out);
  bool resplit_one(std::vector<Envelope>& out);
  std::vector<Envelope> check_end(std::vector<Envelope> out);
  int dispatch_mu() const;

  gp::PathGenerator gen_;
  std::vector<gp::GuidingPath> root_paths_;
  std::vector<gp::GenerationResult> generations_;
  std::vector<PathTask> tasks_;
  std::set<std::tuple<int, int, int>> pending_;  // (depth, seq, task)
  std::map<int, Solver> solvers_;
  int lambda_ = 0;
  int next_seq_ = 0;
  int assign_clock_ = 0;
  int resplits_ = 0;
  std::size_t resolved_ = 0;
};

class Worker {
 public:
  Worker(int id, const WcnfFormula& f, sat::EngineOptions options = {});
  Worker(const Worker&) = delete;
  Worker& operator=(const Worker&) = delete;

  std::vector<Message> handle(const Message& m);
  // One SAT call of the current task.
  std::vector<Message> step();

  bool busy() const { return busy_; }
  bool terminated() const { return terminated_; }
  int id() const { return id_; }
  Role role() const { return role_; }
  void set_id(int id) { id_ = id; }
  void set_interrupt(const std::atomic<bool>* flag);

 private:
  Message report(net::MsgKind kind) const;
  maxsat::LinearSearch& linear();

  int id_;
  const WcnfFormula* f_;
  RelaxedFormula rf_;
  sat::EngineOptions options_;
  Role role_ = Role::None;
  bool busy_ = false;
  bool terminated_ = false;
  int task_ = 0;
  int task_bound_ = 0;
  const std::atomic<bool>* interrupt_ = nullptr;
  std::unique_ptr<maxsat::LinearSearch> linear_;
  std::unique_ptr<maxsat::Msu3Search> msu3_;
  std::vector<Message> outbox_;
};

enum class Strategy { Sss, Gp };

std::unique_ptr<Master> make_master(Strategy s, const WcnfFormula& f, int workers);

}  // namespace distms::orch
