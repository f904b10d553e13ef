#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "distms/message.hpp"
#include "distms/orchestration.hpp"

namespace distms::sim {

// In-process delivery with one FIFO queue per (sender, receiver) link.
// Messages travel encoded; the next link to deliver from is drawn from a
// seeded generator.
class SimBus {
 public:
  struct Delivery {
    int from = 0;
    int to = 0;
    net::Message msg;
  };

  SimBus(std::uint64_t seed, int participants);

  void send(int from, int to, const net::Message& m);
  bool empty() const { return queued_ == 0; }
  std::size_t queued() const { return queued_; }
  Delivery deliver();

  // "from>to kind=..." per delivery, in delivery order.
  const std::vector<std::string>& trace() const { return trace_; }

 private:
  int participants_;
  std::mt19937_64 rng_;
  std::map<std::pair<int, int>, std::deque<std::string>> links_;
  std::size_t queued_ = 0;
  std::vector<std::string> trace_;
};

struct SimStats {
  std::size_t deliveries = 0;
  std::size_t steps = 0;
  bool interrupted = false;
  std::vector<std::string> trace;
};

// Runs the master and its workers in one thread until the master decides.
// Each round either delivers one message or runs one SAT call of a busy
// worker, chosen with the seed.
SimStats run(orch::Master& master, std::vector<std::unique_ptr<orch::Worker>>& workers, std::uint64_t seed,
             const std::atomic<bool>* interrupt = nullptr);

struct SimRun {
  orch::Verdict verdict;
  SimStats stats;
  std::vector<int> improvements;                  // costs in the order the master saw them
  std::vector<std::pair<int, int>> audit;         // SSS only
  std::vector<gp::GuidingPath> root_paths;        // GP only
  std::size_t pending_at_end = 0;                 // GP only
};

SimRun solve(const WcnfFormula& f, orch::Strategy strategy, int workers, std::uint64_t seed,
             const std::atomic<bool>* interrupt = nullptr, const orch::ImproveSink& on_improve = {});

}  // namespace distms::sim
