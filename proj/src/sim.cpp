#include "distms/sim.hpp"

#include <stdexcept>

namespace distms::sim {

SimBus::SimBus(std::uint64_t seed, int participants) : participants_(participants), rng_(seed) {}

void SimBus::send(int from, int to, const net::Message& m) {
  if (from < 0 || from >= participants_ || to < 0 || to >= participants_) {
    throw std::out_of_range("unknown participant " + std::to_string(from < 0 || from >= participants_ ? from : to));
  }
  links_[{from, to}].push_back(net::encode_message(m));
  ++queued_;
}

SimBus::Delivery SimBus::deliver() {
  if (queued_ == 0) throw std::logic_error("nothing to deliver");
  std::vector<std::map<std::pair<int, int>, std::deque<std::string>>::iterator> ready;
  for (auto it = links_.begin(); it != links_.end(); ++it) {
    if (!it->second.empty()) ready.push_back(it);
  }
  auto link = ready[std::uniform_int_distribution<std::size_t>(0, ready.size() - 1)(rng_)];
  std::string line = std::move(link->second.front());
  link->second.pop_front();
  --queued_;

  Delivery d;
  d.from = link->first.first;
  d.to = link->first.second;
  d.msg = net::decode_message(line);
  line.pop_back();
  trace_.push_back(std::to_string(d.from) + ">" + std::to_string(d.to) + " " + line);
  return d;
}

SimStats run(orch::Master& master, std::vector<std::unique_ptr<orch::Worker>>& workers, std::uint64_t seed,
             const std::atomic<bool>* interrupt) {
  const int n = static_cast<int>(workers.size());
  SimBus bus(seed, n + 1);
  std::mt19937_64 pick(seed ^ 0x9e3779b97f4a7c15ULL);
  SimStats stats;

  auto post = [&](std::vector<orch::Envelope> out) {
    for (auto& e : out) bus.send(orch::kMasterId, e.to, e.msg);
  };
  auto reply = [&](int from, std::vector<net::Message> out) {
    for (auto& m : out) bus.send(from, orch::kMasterId, m);
  };

  post(master.start());
  std::vector<int> busy;
  while (!master.done()) {
    if (interrupt && interrupt->load()) {
      stats.interrupted = true;
      post(master.stop());
      break;
    }
    busy.clear();
    for (int w = 1; w <= n; ++w) {
      if (workers[static_cast<std::size_t>(w - 1)]->busy()) busy.push_back(w);
    }
    const std::size_t options = busy.size() + (bus.empty() ? 0 : 1);
    if (options == 0) {
      // Nobody can make progress; the master has to settle for what it has.
      post(master.stop());
      break;
    }
    const std::size_t choice = std::uniform_int_distribution<std::size_t>(0, options - 1)(pick);
    if (choice < busy.size()) {
      const int w = busy[choice];
      ++stats.steps;
      reply(w, workers[static_cast<std::size_t>(w - 1)]->step());
      continue;
    }
    auto d = bus.deliver();
    ++stats.deliveries;
    if (d.to == orch::kMasterId) {
      post(master.handle(d.msg));
    } else {
      reply(d.to, workers[static_cast<std::size_t>(d.to - 1)]->handle(d.msg));
    }
  }
  stats.trace = bus.trace();
  return stats;
}

SimRun solve(const WcnfFormula& f, orch::Strategy strategy, int workers, std::uint64_t seed,
             const std::atomic<bool>* interrupt, const orch::ImproveSink& on_improve) {
  auto master = orch::make_master(strategy, f, workers);
  SimRun result;
  master->set_on_improve([&](int cost, const Assignment& model) {
    result.improvements.push_back(cost);
    if (on_improve) on_improve(cost, model);
  });
  std::vector<std::unique_ptr<orch::Worker>> pool;
  for (int w = 1; w <= workers; ++w) {
    pool.push_back(std::make_unique<orch::Worker>(w, f));
    if (interrupt) pool.back()->set_interrupt(interrupt);
  }
  result.stats = run(*master, pool, seed, interrupt);
  result.verdict = master->verdict();
  if (auto* sss = dynamic_cast<orch::SssMaster*>(master.get())) result.audit = sss->audit();
  if (auto* gpm = dynamic_cast<orch::GpMaster*>(master.get())) {
    result.root_paths = gpm->root_paths();
    result.pending_at_end = gpm->pending_count();
  }
  return result;
}

}  // namespace distms::sim
