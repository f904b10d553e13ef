#include "distms/orchestration.hpp"

#include <algorithm>
#include <stdexcept>

#include "distms/sat_engine.hpp"

namespace distms::orch {

using net::MsgKind;

std::optional<UpperBound> initial_upper_bound(const WcnfFormula& f) {
  sat::Engine engine(f.hard, f.num_vars);
  sat::SatResult r = engine.solve();
  if (!r.sat()) return std::nullopt;
  UpperBound ub;
  ub.model = r.model.project(f.num_vars);
  ub.cost = count_falsified_soft(f, ub.model);
  return ub;
}

// ---- bound set ----

bool BoundSet::contains(int b) const { return std::binary_search(bounds.begin(), bounds.end(), b); }

bool BoundSet::well_formed() const {
  if (lambda > mu) return false;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    if (i && bounds[i] <= bounds[i - 1]) return false;
    if (bounds[i] < lambda || bounds[i] > mu - 1) return false;
  }
  for (const auto& [b, w] : owner) {
    if (!contains(b)) return false;
  }
  return true;
}

BoundSet initial_bounds(int mu, int k) {
  if (k < 1 || mu < 1) throw std::invalid_argument("initial_bounds needs mu >= 1 and k >= 1");
  BoundSet bs;
  bs.mu = mu;
  for (int i = 0; i <= k; ++i) {
    const int b = static_cast<int>(static_cast<long long>(i) * (mu - 1) / k);
    if (bs.bounds.empty() || bs.bounds.back() != b) bs.bounds.push_back(b);
  }
  return bs;
}

std::vector<int> initial_assignments(int mu, int k) {
  std::vector<int> out;
  for (int i = 1; i <= k; ++i) {
    const int b = static_cast<int>(static_cast<long long>(i) * (mu - 1) / k);
    if (out.empty() || out.back() != b) out.push_back(b);
  }
  return out;
}

namespace {

std::vector<int> drop_if(BoundSet& bs, auto pred) {
  std::vector<int> displaced;
  for (auto it = bs.owner.begin(); it != bs.owner.end();) {
    if (pred(it->first)) {
      displaced.push_back(it->second);
      it = bs.owner.erase(it);
    } else {
      ++it;
    }
  }
  std::erase_if(bs.bounds, pred);
  return displaced;
}

void insert_bound(BoundSet& bs, int b) {
  auto it = std::lower_bound(bs.bounds.begin(), bs.bounds.end(), b);
  if (it == bs.bounds.end() || *it != b) bs.bounds.insert(it, b);
}

}  // namespace

std::vector<int> apply_sat_result(BoundSet& bs, int cost) {
  if (cost >= bs.mu) return {};
  if (cost < bs.lambda) throw std::logic_error("model cost below the proven lower bound");
  bs.mu = cost;
  auto displaced = drop_if(bs, [&](int b) { return b >= bs.mu; });
  if (bs.mu - 1 >= bs.lambda) insert_bound(bs, bs.mu - 1);
  return displaced;
}

std::vector<int> apply_unsat_result(BoundSet& bs, int b) {
  if (b < bs.lambda) return {};
  if (b >= bs.mu) throw std::logic_error("refuted bound at or above a known model cost");
  bs.lambda = b + 1;
  auto displaced = drop_if(bs, [&](int x) { return x <= b; });
  if (bs.lambda <= bs.mu - 1) insert_bound(bs, bs.lambda);
  return displaced;
}

std::optional<int> next_tentative(BoundSet& bs) {
  int best = 1;
  std::size_t at = 0;
  for (std::size_t i = 1; i < bs.bounds.size(); ++i) {
    const int gap = bs.bounds[i] - bs.bounds[i - 1];
    if (gap > best) {
      best = gap;
      at = i;
    }
  }
  if (at == 0) return std::nullopt;
  const int b = bs.bounds[at - 1] + (bs.bounds[at] - bs.bounds[at - 1]) / 2;
  bs.bounds.insert(bs.bounds.begin() + static_cast<std::ptrdiff_t>(at), b);
  return b;
}

// ---- master base ----

Master::Master(const WcnfFormula& f, int workers) : f_(&f), workers_(workers) {
  if (workers < 1) throw std::invalid_argument("at least one worker is required");
}

std::optional<int> Master::best_cost() const {
  if (best_cost_ < 0) return std::nullopt;
  return best_cost_;
}

bool Master::accept_model(int cost, const std::vector<int>& lits) {
  Assignment a(f_->num_vars);
  for (int lit : lits) {
    const int v = lit > 0 ? lit : -lit;
    if (v < 1 || v > f_->num_vars || a.get(v) != Value::Unassigned) return false;
    a.set(v, lit > 0);
  }
  if (!a.total_over(f_->num_vars) || !satisfies_hard(*f_, a)) return false;
  if (count_falsified_soft(*f_, a) != cost) return false;
  improve(cost, a);
  return true;
}

bool Master::improve(int cost, const Assignment& model) {
  if (best_cost_ >= 0 && cost >= best_cost_) return false;
  best_cost_ = cost;
  best_model_ = model;
  if (on_improve_) on_improve_(cost, model);
  return true;
}

std::vector<Envelope> Master::finish(VerdictKind kind) {
  done_ = true;
  verdict_.kind = kind;
  if (kind != VerdictKind::Unsat && best_cost_ >= 0) {
    verdict_.cost = best_cost_;
    verdict_.model = best_model_;
  }
  std::vector<Envelope> out;
  for (int w = 1; w <= workers_; ++w) {
    if (!alive(w)) continue;
    Message m;
    m.kind = MsgKind::Terminate;
    m.sender = kMasterId;
    m.verdict = kind;
    m.cost = verdict_.cost;
    m.model = verdict_.model.to_dimacs(f_->num_vars);
    out.push_back({w, std::move(m)});
  }
  return out;
}

std::vector<Envelope> Master::stop() {
  if (done_) return {};
  return finish(best_cost_ >= 0 ? VerdictKind::Satisfiable : VerdictKind::Unknown);
}

std::vector<Envelope> Master::hellos(const std::vector<Role>& roles) {
  roles_ = roles;
  std::vector<Envelope> out;
  for (int w = 1; w <= workers_; ++w) {
    Message m;
    m.kind = MsgKind::Hello;
    m.sender = kMasterId;
    m.worker = w;
    m.role = roles[static_cast<std::size_t>(w - 1)];
    out.push_back({w, std::move(m)});
  }
  return out;
}

namespace {

void append(std::vector<Envelope>& out, std::vector<Envelope> more) {
  for (auto& e : more) out.push_back(std::move(e));
}

Message abort_msg(int task) {
  Message m;
  m.kind = MsgKind::Abort;
  m.sender = kMasterId;
  m.task = task;
  return m;
}

}  // namespace

// ---- search space splitting ----

SssMaster::SssMaster(const WcnfFormula& f, int workers) : Master(f, workers) {}

std::vector<Envelope> SssMaster::start() {
  std::vector<Role> roles(static_cast<std::size_t>(workers_), Role::SssLinear);
  if (workers_ >= 2) roles[0] = Role::SssMsu3;
  auto out = hellos(roles);

  auto ub = initial_upper_bound(*f_);
  if (!ub) {
    append(out, finish(VerdictKind::Unsat));
    return out;
  }
  improve(ub->cost, ub->model);
  if (ub->cost == 0) {
    bs_.lambda = bs_.mu = 0;
    audit_.emplace_back(0, 0);
    append(out, finish(VerdictKind::Optimum));
    return out;
  }

  std::vector<int> linear_ids;
  for (int w = 1; w <= workers_; ++w) {
    if (roles[static_cast<std::size_t>(w - 1)] == Role::SssLinear) linear_ids.push_back(w);
  }
  const int k = static_cast<int>(linear_ids.size());
  bs_ = initial_bounds(ub->cost, k);
  audit_.emplace_back(bs_.lambda, bs_.mu);

  const auto initial = initial_assignments(ub->cost, k);
  for (std::size_t i = 0; i < linear_ids.size(); ++i) {
    const int w = linear_ids[i];
    Slot& slot = linear_[w];
    if (i >= initial.size()) {
      if (auto e = assign(w)) out.push_back(std::move(*e));
      continue;
    }
    slot.task = ++next_task_;
    slot.bound = initial[i];
    bs_.owner[initial[i]] = w;
    Message m;
    m.kind = MsgKind::AssignBound;
    m.sender = kMasterId;
    m.task = slot.task;
    m.bound = initial[i];
    out.push_back({w, std::move(m)});
  }
  return out;
}

std::optional<Envelope> SssMaster::assign(int worker) {
  std::optional<int> b = next_tentative(bs_);
  if (!b) {
    for (auto it = bs_.bounds.rbegin(); it != bs_.bounds.rend(); ++it) {
      if (!bs_.owner.count(*it)) {
        b = *it;
        break;
      }
    }
  }
  if (!b) return std::nullopt;
  Slot& slot = linear_[worker];
  slot.task = ++next_task_;
  slot.bound = *b;
  bs_.owner[*b] = worker;
  Message m;
  m.kind = MsgKind::AssignBound;
  m.sender = kMasterId;
  m.task = slot.task;
  m.bound = *b;
  return Envelope{worker, std::move(m)};
}

void SssMaster::release(int worker) {
  Slot& slot = linear_[worker];
  if (slot.bound) {
    auto it = bs_.owner.find(*slot.bound);
    if (it != bs_.owner.end() && it->second == worker) bs_.owner.erase(it);
    slot.bound.reset();
  }
}

std::vector<Envelope> SssMaster::handle(const Message& m) {
  if (done_) return {};
  const int w = m.sender;
  const bool current = linear_.count(w) && linear_[w].bound && linear_[w].task == m.task;
  std::vector<int> displaced;

  switch (m.kind) {
    case MsgKind::ReportSat:
      if (current) release(w);
      if (accept_model(m.cost, m.model)) displaced = apply_sat_result(bs_, m.cost);
      break;
    case MsgKind::ReportUnsat:
      if (current) release(w);
      if (m.hard) return finish(VerdictKind::Unsat);
      if (m.bound >= bs_.lambda) displaced = apply_unsat_result(bs_, m.bound);
      break;
    case MsgKind::ReportLowerBound:
      if (m.bound - 1 >= bs_.lambda) displaced = apply_unsat_result(bs_, m.bound - 1);
      break;
    case MsgKind::ReportOptimum:
      if (accept_model(m.cost, m.model)) {
        displaced = apply_sat_result(bs_, m.cost);
        if (m.proof_independent && m.cost == bs_.mu && m.cost - 1 >= bs_.lambda) {
          for (int d : apply_unsat_result(bs_, m.cost - 1)) displaced.push_back(d);
        }
      }
      break;
    default:
      break;
  }
  return settle(std::move(displaced));
}

std::vector<Envelope> SssMaster::settle(std::vector<int> displaced) {
  std::vector<Envelope> out;
  for (int w : displaced) {
    Slot& slot = linear_[w];
    if (!slot.bound) continue;
    slot.bound.reset();
    if (alive(w)) out.push_back({w, abort_msg(slot.task)});
  }
  audit_.emplace_back(bs_.lambda, bs_.mu);
  if (bs_.closed()) {
    append(out, finish(VerdictKind::Optimum));
    return out;
  }
  for (auto& [w, slot] : linear_) {
    if (slot.bound || !alive(w)) continue;
    if (auto e = assign(w)) out.push_back(std::move(*e));
  }
  return out;
}

std::vector<Envelope> SssMaster::worker_lost(int id) {
  if (done_ || lost_.count(id)) return {};
  lost_.insert(id);
  if (linear_.count(id)) release(id);
  if (static_cast<int>(lost_.size()) == workers_) return stop();
  if (bs_.mu == 0 && bs_.bounds.empty()) return {};
  return settle({});
}

// ---- guiding paths ----

GpMaster::GpMaster(const WcnfFormula& f, int workers) : Master(f, workers), gen_(f.hard, f.soft, f.num_vars) {}

int GpMaster::add_task(std::vector<Lit> path, int parent) {
  PathTask t;
  t.path = std::move(path);
  t.seq = next_seq_++;
  t.parent = parent;
  tasks_.push_back(std::move(t));
  const int id = static_cast<int>(tasks_.size());
  pending_.emplace(static_cast<int>(tasks_.back().path.size()), tasks_.back().seq, id);
  if (parent > 0) tasks_[static_cast<std::size_t>(parent - 1)].children.push_back(id);
  return id;
}

int GpMaster::dispatch_mu() const {
  return best_cost_ >= 0 ? best_cost_ : static_cast<int>(f_->soft.size()) + 1;
}

std::vector<Envelope> GpMaster::start() {
  std::vector<Role> roles(static_cast<std::size_t>(workers_), Role::GpSolver);
  if (workers_ >= 2) roles[0] = Role::GpLinear;
  auto out = hellos(roles);
  for (int w = 1; w <= workers_; ++w) {
    if (roles[static_cast<std::size_t>(w - 1)] == Role::GpSolver) solvers_[w] = {};
  }

  generations_.push_back(gen_.generate({}, gp::kRootCutoff));
  const auto& root = generations_.back();
  if (root.root_conflict) {
    append(out, finish(VerdictKind::Unsat));
    return out;
  }
  root_paths_ = root.paths;
  if (root_paths_.empty()) root_paths_.push_back(gp::GuidingPath{});
  for (const auto& p : root_paths_) add_task(p.decisions, -1);
  dispatch(out);
  return check_end(std::move(out));
}

void GpMaster::resolve(int id, std::vector<Envelope>& out, int reporter) {
  PathTask& t = tasks_[static_cast<std::size_t>(id - 1)];
  if (t.state == State::Resolved) return;
  if (t.state == State::Pending) pending_.erase({static_cast<int>(t.path.size()), t.seq, id});
  if (t.state == State::InFlight) {
    auto& slot = solvers_[t.worker];
    if (slot.task == id) {
      slot.task.reset();
      if (t.worker != reporter && alive(t.worker)) out.push_back({t.worker, abort_msg(id)});
    }
  }
  t.state = State::Resolved;
  ++resolved_;
  const auto children = t.children;
  const int parent = t.parent;
  for (int c : children) resolve(c, out, reporter);
  if (parent > 0) {
    const PathTask& p = tasks_[static_cast<std::size_t>(parent - 1)];
    const bool covered = std::all_of(p.children.begin(), p.children.end(), [&](int c) {
      return tasks_[static_cast<std::size_t>(c - 1)].state == State::Resolved;
    });
    if (covered) resolve(parent, out, reporter);
  }
}

bool GpMaster::resplit_one(std::vector<Envelope>& out) {
  int pick = 0;
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const PathTask& t = tasks_[i];
    if (t.state != State::InFlight || t.resplit) continue;
    if (pick == 0 || t.assigned_at < tasks_[static_cast<std::size_t>(pick - 1)].assigned_at) {
      pick = static_cast<int>(i) + 1;
    }
  }
  if (pick == 0) return false;
  tasks_[static_cast<std::size_t>(pick - 1)].resplit = true;
  ++resplits_;
  const std::vector<Lit> root = tasks_[static_cast<std::size_t>(pick - 1)].path;
  generations_.push_back(gen_.generate(root, gp::kResplitCutoff));
  const auto& g = generations_.back();
  if (g.root_conflict || g.paths.empty()) {
    resolve(pick, out, kMasterId);
    return true;
  }
  if (g.paths.size() == 1 && g.paths[0].decisions == root) return true;
  for (const auto& p : g.paths) add_task(p.decisions, pick);
  return true;
}

void GpMaster::dispatch(std::vector<Envelope>& out) {
  while (true) {
    bool idle = false;
    for (auto& [w, slot] : solvers_) {
      if (slot.task || !alive(w)) continue;
      if (pending_.empty()) {
        idle = true;
        break;
      }
      const int id = std::get<2>(*pending_.begin());
      pending_.erase(pending_.begin());
      PathTask& t = tasks_[static_cast<std::size_t>(id - 1)];
      t.state = State::InFlight;
      t.worker = w;
      t.assigned_at = ++assign_clock_;
      slot.task = id;
      Message m;
      m.kind = MsgKind::AssignPath;
      m.sender = kMasterId;
      m.task = id;
      m.bound = dispatch_mu();
      for (Lit l : t.path) m.path.push_back(l.to_dimacs());
      out.push_back({w, std::move(m)});
    }
    if (!idle || !resplit_one(out)) return;
  }
}

std::vector<Envelope> GpMaster::check_end(std::vector<Envelope> out) {
  if (done_) return out;
  if (best_cost_ >= 0 && lambda_ >= best_cost_) {
    append(out, finish(VerdictKind::Optimum));
  } else if (best_cost_ < 0 && lambda_ > static_cast<int>(f_->soft.size())) {
    append(out, finish(VerdictKind::Unsat));
  } else if (resolved_ == tasks_.size()) {
    append(out, finish(best_cost_ >= 0 ? VerdictKind::Optimum : VerdictKind::Unsat));
  }
  return out;
}

std::vector<Envelope> GpMaster::handle(const Message& m) {
  if (done_) return {};
  std::vector<Envelope> out;
  const int w = m.sender;
  const bool path_task = solvers_.count(w) && m.task >= 1 && m.task <= static_cast<int>(tasks_.size());

  switch (m.kind) {
    case MsgKind::ReportSat:
      accept_model(m.cost, m.model);
      break;
    case MsgKind::ReportOptimum:
      if (accept_model(m.cost, m.model) && m.proof_independent) lambda_ = std::max(lambda_, m.cost);
      if (path_task) resolve(m.task, out, w);
      break;
    case MsgKind::ReportUnsat:
      if (m.hard) return finish(VerdictKind::Unsat);
      if (m.proof_independent) lambda_ = std::max(lambda_, m.bound + 1);
      if (path_task) resolve(m.task, out, w);
      break;
    default:
      break;
  }
  out = check_end(std::move(out));
  if (done_) return out;
  dispatch(out);
  return check_end(std::move(out));
}

std::vector<Envelope> GpMaster::worker_lost(int id) {
  if (done_ || lost_.count(id)) return {};
  lost_.insert(id);
  if (solvers_.count(id) && solvers_[id].task) {
    const int t = *solvers_[id].task;
    solvers_[id].task.reset();
    PathTask& task = tasks_[static_cast<std::size_t>(t - 1)];
    task.state = State::Pending;
    pending_.emplace(static_cast<int>(task.path.size()), task.seq, t);
  }
  const bool any_solver = std::any_of(solvers_.begin(), solvers_.end(), [&](const auto& s) { return alive(s.first); });
  if (!any_solver) return stop();
  std::vector<Envelope> out;
  dispatch(out);
  return check_end(std::move(out));
}

// ---- worker ----

Worker::Worker(int id, const WcnfFormula& f, sat::EngineOptions options)
    : id_(id), f_(&f), rf_(relax(f)), options_(options) {}

void Worker::set_interrupt(const std::atomic<bool>* flag) {
  interrupt_ = flag;
  if (linear_) linear_->set_interrupt(flag);
  if (msu3_) msu3_->set_interrupt(flag);
}

maxsat::LinearSearch& Worker::linear() {
  if (!linear_) {
    const int n = static_cast<int>(rf_.base.soft.size());
    linear_ = std::make_unique<maxsat::LinearSearch>(
        rf_, n, std::vector<Lit>{},
        [this](int cost, const Assignment& model) {
          Message m = report(MsgKind::ReportSat);
          m.cost = cost;
          m.model = model.to_dimacs(f_->num_vars);
          outbox_.push_back(std::move(m));
        },
        options_);
    if (interrupt_) linear_->set_interrupt(interrupt_);
  }
  return *linear_;
}

Message Worker::report(MsgKind kind) const {
  Message m;
  m.kind = kind;
  m.sender = id_;
  m.task = task_;
  return m;
}

std::vector<Message> Worker::handle(const Message& m) {
  const int soft = static_cast<int>(rf_.base.soft.size());
  switch (m.kind) {
    case MsgKind::Hello:
      if (m.worker > 0) id_ = m.worker;
      role_ = m.role;
      task_ = 0;
      if (role_ == Role::GpLinear) {
        task_bound_ = soft;
        linear().retarget({}, soft);
        busy_ = true;
      } else if (role_ == Role::SssMsu3) {
        msu3_ = std::make_unique<maxsat::Msu3Search>(
            rf_.base,
            [this](int lb) {
              Message r = report(MsgKind::ReportLowerBound);
              r.bound = lb;
              outbox_.push_back(std::move(r));
            },
            options_);
        if (interrupt_) msu3_->set_interrupt(interrupt_);
        busy_ = true;
      }
      break;
    case MsgKind::AssignBound:
      if (role_ != Role::SssLinear) throw std::logic_error("bound assigned to a worker without the linear role");
      task_ = m.task;
      task_bound_ = m.bound;
      linear().retarget({}, m.bound);
      busy_ = true;
      break;
    case MsgKind::AssignPath: {
      if (role_ != Role::GpSolver) throw std::logic_error("path assigned to a worker without the solver role");
      std::vector<Lit> path;
      for (int d : m.path) {
        if (d == 0 || std::abs(d) > f_->num_vars) throw std::invalid_argument("path literal out of range");
        path.push_back(Lit::from_dimacs(d));
      }
      task_ = m.task;
      task_bound_ = m.bound - 1;
      linear().retarget(std::move(path), m.bound - 1);
      busy_ = true;
      break;
    }
    case MsgKind::Abort:
      if (m.task == task_) busy_ = false;
      break;
    case MsgKind::Terminate:
      terminated_ = true;
      busy_ = false;
      break;
    default:
      break;
  }
  return {};
}

std::vector<Message> Worker::step() {
  if (!busy_) return {};
  outbox_.clear();
  std::optional<maxsat::OptOutcome> out;

  if (role_ == Role::SssMsu3) {
    out = msu3_->step();
  } else {
    out = linear_->step();
    // One SAT call per tentative bound: a model ends the assignment.
    if (role_ == Role::SssLinear && !outbox_.empty()) {
      busy_ = false;
      return std::move(outbox_);
    }
  }
  if (!out) return std::move(outbox_);

  busy_ = false;
  switch (out->kind) {
    case maxsat::OutcomeKind::Aborted:
      break;
    case maxsat::OutcomeKind::Optimum: {
      Message m = report(MsgKind::ReportOptimum);
      m.cost = out->cost;
      m.model = out->model.to_dimacs(f_->num_vars);
      m.proof_independent = out->proof_independent;
      outbox_.push_back(std::move(m));
      break;
    }
    case maxsat::OutcomeKind::NoImprovement: {
      Message m = report(MsgKind::ReportUnsat);
      m.bound = task_bound_;
      m.proof_independent = out->proof_independent;
      outbox_.push_back(std::move(m));
      break;
    }
    case maxsat::OutcomeKind::HardUnsat: {
      Message m = report(MsgKind::ReportUnsat);
      m.bound = task_bound_;
      m.proof_independent = true;
      m.hard = true;
      outbox_.push_back(std::move(m));
      break;
    }
  }
  return std::move(outbox_);
}

std::unique_ptr<Master> make_master(Strategy s, const WcnfFormula& f, int workers) {
  if (s == Strategy::Sss) return std::make_unique<SssMaster>(f, workers);
  return std::make_unique<GpMaster>(f, workers);
}

}  // namespace distms::orch
