#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "distms/formula.hpp"
#include "distms/guiding_paths.hpp"
#include "distms/maxsat.hpp"
#include "distms/orchestration.hpp"
#include "distms/sim.hpp"
#include "distms/tcp.hpp"

using namespace distms;

namespace {

constexpr int kExitOptimum = 30;
constexpr int kExitUnsat = 20;
constexpr int kExitSatisfiable = 10;
constexpr int kExitUnknown = 0;
constexpr int kExitError = 1;

// Raises `flag` once the timeout elapses, unless cancelled first.
class Alarm {
 public:
  Alarm(std::atomic<bool>& flag, double seconds) {
    if (seconds <= 0) return;
    thread_ = std::thread([this, &flag, seconds] {
      std::unique_lock lock(mutex_);
      if (!cv_.wait_for(lock, std::chrono::duration<double>(seconds), [&] { return cancelled_; })) flag = true;
    });
  }
  ~Alarm() {
    {
      std::lock_guard lock(mutex_);
      cancelled_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable()) thread_.join();
  }

 private:
  std::thread thread_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool cancelled_ = false;
};

class Reporter {
 public:
  explicit Reporter(const WcnfFormula& f) : f_(&f) {}

  void improve(int cost) {
    if (last_ >= 0 && cost >= last_) return;
    last_ = cost;
    std::cout << "o " << cost << std::endl;
  }

  int finish(net::VerdictKind kind, const std::optional<int>& cost, const Assignment& model) {
    if (kind == net::VerdictKind::Unsat) {
      std::cout << "s UNSATISFIABLE" << std::endl;
      return kExitUnsat;
    }
    if (!cost || (kind != net::VerdictKind::Optimum && kind != net::VerdictKind::Satisfiable)) {
      std::cout << "s UNKNOWN" << std::endl;
      return kExitUnknown;
    }
    int checked = -1;
    try {
      checked = distms::cost(*f_, model);
    } catch (const InvalidAssignment& e) {
      std::cerr << "c error: final model rejected: " << e.what() << "\n";
      std::cout << "s UNKNOWN" << std::endl;
      return kExitUnknown;
    }
    if (checked != *cost) {
      std::cerr << "c error: model cost " << checked << " differs from reported " << *cost << "\n";
      std::cout << "s UNKNOWN" << std::endl;
      return kExitUnknown;
    }
    improve(*cost);
    std::cout << (kind == net::VerdictKind::Optimum ? "s OPTIMUM FOUND" : "s SATISFIABLE") << "\n";
    std::cout << "v " << format_model(model, f_->num_vars) << std::endl;
    return kind == net::VerdictKind::Optimum ? kExitOptimum : kExitSatisfiable;
  }

 private:
  const WcnfFormula* f_;
  int last_ = -1;
};

int run_standalone(const WcnfFormula& f, const std::string& algo, std::uint64_t seed, std::atomic<bool>& stop) {
  Reporter out(f);
  sat::EngineOptions opts;
  opts.seed = seed;
  std::optional<int> best;
  Assignment best_model;
  std::optional<maxsat::OptOutcome> done;

  if (algo == "linear") {
    const RelaxedFormula rf = relax(f);
    maxsat::LinearSearch search(
        rf, static_cast<int>(f.soft.size()), {},
        [&](int c, const Assignment& m) {
          best = c;
          best_model = m;
          out.improve(c);
        },
        opts);
    search.set_interrupt(&stop);
    while (!(done = search.step())) {
    }
  } else {
    maxsat::Msu3Search search(f, [](int lb) { std::cout << "c lower bound " << lb << "\n"; }, opts);
    search.set_interrupt(&stop);
    while (!(done = search.step())) {
    }
  }

  switch (done->kind) {
    case maxsat::OutcomeKind::HardUnsat:
      return out.finish(net::VerdictKind::Unsat, std::nullopt, {});
    case maxsat::OutcomeKind::Optimum:
      return out.finish(net::VerdictKind::Optimum, done->cost, done->model);
    default:
      return out.finish(best ? net::VerdictKind::Satisfiable : net::VerdictKind::Unknown, best, best_model);
  }
}

void dump_paths(const std::string& file, const orch::Master& master) {
  if (file.empty()) return;
  const auto* gpm = dynamic_cast<const orch::GpMaster*>(&master);
  if (!gpm) return;
  std::ofstream os(file);
  if (!os) {
    std::cerr << "c error: cannot write " << file << "\n";
    return;
  }
  os << gp::format_paths(gpm->root_paths());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed partial MaxSAT solver"};
  std::string algo = "linear";
  std::string mode = "standalone";
  int workers = 4;
  std::string listen;
  std::string connect;
  std::uint64_t seed = 1;
  double timeout = 0;
  std::string dump;
  std::string trace;
  std::string instance;

  app.add_option("--algo", algo, "linear, msu3, sss or gp")
      ->check(CLI::IsMember({"linear", "msu3", "sss", "gp"}));
  app.add_option("--mode", mode, "standalone, master, worker or sim")
      ->check(CLI::IsMember({"standalone", "master", "worker", "sim"}));
  app.add_option("--workers", workers, "worker processes (sim, master)")->check(CLI::Range(1, 1024));
  app.add_option("--listen", listen, "master address, host:port");
  app.add_option("--connect", connect, "master address for a worker, host:port");
  app.add_option("--seed", seed, "simulation seed");
  app.add_option("--timeout", timeout, "wall-clock limit in seconds, 0 for none")->check(CLI::NonNegativeNumber);
  app.add_option("--dump-paths", dump, "write the root guiding paths here (gp)");
  app.add_option("--trace", trace, "write the simulated delivery log here (sim)");
  app.add_option("instance", instance, "WCNF file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return kExitError;
  }

  const bool distributed = algo == "sss" || algo == "gp";
  if (mode == "sim" && !distributed) {
    std::cerr << "sim mode needs --algo sss or gp\n";
    return kExitError;
  }
  if (mode == "master" && (!distributed || listen.empty())) {
    std::cerr << "master mode needs --algo sss or gp and --listen\n";
    return kExitError;
  }
  if (mode == "worker" && connect.empty()) {
    std::cerr << "worker mode needs --connect\n";
    return kExitError;
  }

  WcnfFormula f;
  try {
    f = read_wcnf_file(instance);
  } catch (const std::exception& e) {
    std::cerr << "c error: " << instance << ": " << e.what() << "\n";
    return kExitError;
  }
  std::cout << "c instance " << instance << ": " << f.num_vars << " vars, " << f.hard.size() << " hard, "
            << f.soft.size() << " soft\n";

  std::atomic<bool> stop{false};
  Alarm alarm(stop, timeout);

  try {
    if (mode == "worker") {
      auto [host, port] = net::parse_endpoint(connect);
      auto socket = net::connect_to(host, port, std::chrono::seconds(30));
      cluster::run_worker(f, socket);
      return 0;
    }
    if (mode == "standalone" && !distributed) return run_standalone(f, algo, seed, stop);

    const auto strategy = algo == "sss" ? orch::Strategy::Sss : orch::Strategy::Gp;
    Reporter out(f);
    std::cout << "c " << algo << " with " << workers << " workers\n";
    if (mode == "master") {
      auto master = orch::make_master(strategy, f, workers);
      master->set_on_improve([&](int c, const Assignment&) { out.improve(c); });
      auto [host, port] = net::parse_endpoint(listen);
      net::Listener listener(host, port);
      std::cout << "c listening on port " << listener.port() << std::endl;
      auto verdict = cluster::run_master(*master, listener, &stop);
      dump_paths(dump, *master);
      return out.finish(verdict.kind, master->best_cost(), verdict.model);
    }

    auto master = orch::make_master(strategy, f, workers);
    master->set_on_improve([&](int c, const Assignment&) { out.improve(c); });
    std::vector<std::unique_ptr<orch::Worker>> pool;
    for (int w = 1; w <= workers; ++w) {
      pool.push_back(std::make_unique<orch::Worker>(w, f));
      pool.back()->set_interrupt(&stop);
    }
    auto stats = sim::run(*master, pool, seed, &stop);
    std::cout << "c " << stats.deliveries << " deliveries, " << stats.steps << " solver calls\n";
    if (!trace.empty()) {
      std::ofstream os(trace);
      for (const auto& line : stats.trace) os << line << "\n";
    }
    dump_paths(dump, *master);
    const auto& v = master->verdict();
    return out.finish(v.kind, master->best_cost(), v.model);
  } catch (const std::exception& e) {
    std::cerr << "c error: " << e.what() << "\n";
    return kExitError;
  }
}
