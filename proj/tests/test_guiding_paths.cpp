#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "distms/guiding_paths.hpp"
#include "distms/oracle.hpp"
#include "test_support.hpp"

using namespace distms;
using distms::gp::EvalMode;
using distms::gp::PathGenerator;

namespace {

Lit L(int d) { return Lit::from_dimacs(d); }

Clause cl(std::initializer_list<int> lits) {
  Clause c;
  for (int d : lits) c.push_back(L(d));
  return c;
}

// Full rescan of the clause list under a partial assignment.
double naive_eval(const std::vector<Clause>& clauses, int max_len, const Assignment& a, Lit l) {
  double sum = 0.0;
  for (const Clause& c : clauses) {
    if (clause_satisfied(c, a)) continue;
    if (std::find(c.begin(), c.end(), ~l) == c.end()) continue;
    int open = 0;
    for (Lit q : c) open += a.value(q) == Value::Unassigned ? 1 : 0;
    sum += std::pow(5.0, max_len - (open - 1));
  }
  return sum;
}

bool paths_conflict(const gp::GuidingPath& a, const gp::GuidingPath& b) {
  for (Lit x : a.decisions) {
    if (std::find(b.decisions.begin(), b.decisions.end(), ~x) != b.decisions.end()) return true;
  }
  return false;
}

bool extends(const gp::GuidingPath& p, std::uint32_t bits) {
  for (Lit l : p.decisions) {
    if (!testing::lit_true(l, bits)) return false;
  }
  return true;
}

// eval restricted to the clauses the engine reports as watching ~l.
double naive_watched_eval(const PathGenerator& g, Lit l) {
  double sum = 0.0;
  for (auto ref : g.engine().watched_clauses(~l)) {
    auto lits = g.engine().clause(ref);
    bool sat = false;
    int open = 0;
    for (Lit q : lits) {
      sat = sat || g.engine().value(q) == Value::True;
      open += g.engine().value(q) == Value::Unassigned ? 1 : 0;
    }
    if (!sat) sum += std::pow(5.0, g.max_clause_length() - (open - 1));
  }
  return sum;
}

Assignment trail_assignment(const PathGenerator& g, int n) {
  Assignment a(n);
  for (Lit l : g.engine().trail()) a.set(l.var(), l.positive());
  return a;
}

void check_replay(const gp::GenerationResult& r, double theta0) {
  REQUIRE_FALSE(r.trace.empty());
  double theta = theta0;
  for (const auto& ev : r.trace) {
    CHECK(ev.theta_in == theta);
    theta *= gp::kCutoffIncrease;
    CHECK(ev.theta_incremented == theta);
    const bool should_decrement = ev.action == gp::NodeAction::Conflict || ev.depth_guard;
    CHECK(ev.decremented == should_decrement);
    if (ev.decremented) theta *= gp::kCutoffDecrease;
    CHECK(ev.theta_out == theta);
  }
  CHECK(r.final_theta == theta);
}

}  // namespace

TEST_CASE("eval on the worked three-clause formula") {
  std::vector<Clause> hard{cl({1, 2, 3}), cl({2, -3}), cl({-1, 2})};
  PathGenerator g(hard, {cl({3})}, 3);
  CHECK(g.max_clause_length() == 3);
  CHECK(g.length_weight(2) == 5.0);
  CHECK(g.length_weight(3) == 1.0);
  g.propagate({});
  // Only (x1 v x2 v x3) is shortened by x3 = 0: 3 -> 2 literals, weight 5.
  CHECK(g.eval(L(-3), EvalMode::Full) == 5.0);
  // x3 = 1 shortens (x2 v -x3) to a unit: weight 25.
  CHECK(g.eval(L(3), EvalMode::Full) == 25.0);
  // Falsifying x2 shortens all three clauses: 3 -> 2 (5) and twice 2 -> 1 (25).
  CHECK(g.eval(L(-2), EvalMode::Full) == 5.0 + 25.0 + 25.0);
  g.backtrack();
}

TEST_CASE("eval of a literal whose complement occurs nowhere is zero") {
  std::vector<Clause> hard{cl({1, 2})};
  PathGenerator g(hard, {cl({1})}, 3);
  g.propagate({});
  CHECK(g.eval(L(-3), EvalMode::Full) == 0.0);
  CHECK(g.eval(L(1), EvalMode::Full) == 0.0);
  g.backtrack();
}

TEST_CASE("eval rejects assigned literals") {
  std::vector<Clause> hard{cl({1, 2})};
  PathGenerator g(hard, {cl({1})}, 2);
  g.propagate({L(1)});
  CHECK_THROWS_AS(g.eval(L(1), EvalMode::Full), std::invalid_argument);
  g.backtrack();
}

TEST_CASE("full-mode eval equals a naive rescan") {
  std::mt19937_64 rng(8);
  for (int round = 0; round < 150; ++round) {
    const int n = 8;
    auto hard = testing::random_cnf(rng, n, 12, 2, 4);
    PathGenerator g(hard, {cl({1}), cl({2, -3})}, n);
    int max_len = 0;
    for (const Clause& c : hard) max_len = std::max(max_len, static_cast<int>(c.size()));
    std::vector<Lit> d{Lit(1 + static_cast<int>(rng() % n), (rng() & 1U) != 0)};
    auto out = g.propagate(d);
    if (out.conflict) {
      g.backtrack();
      continue;
    }
    const Assignment a = trail_assignment(g, n);
    for (int v = 1; v <= n; ++v) {
      if (a.get(v) != Value::Unassigned) continue;
      for (Lit l : {Lit(v, true), Lit(v, false)}) CHECK(g.eval(l, EvalMode::Full) == naive_eval(hard, max_len, a, l));
    }
    g.backtrack();
  }
}

TEST_CASE("watched-only eval never exceeds full eval") {
  std::mt19937_64 rng(18);
  for (int round = 0; round < 50; ++round) {
    auto hard = testing::random_cnf(rng, 7, 10, 2, 3);
    PathGenerator g(hard, {cl({1})}, 7);
    if (g.propagate({}).conflict) {
      g.backtrack();
      continue;
    }
    for (int v = 1; v <= 7; ++v) {
      if (g.engine().value(v) != Value::Unassigned) continue;
      for (Lit l : {Lit(v, true), Lit(v, false)}) CHECK(g.eval(l, EvalMode::WatchedOnly) <= g.eval(l, EvalMode::Full));
    }
    g.backtrack();
  }
}

TEST_CASE("choose_variable") {
  SUBCASE("single unassigned soft variable") {
    std::vector<Clause> hard{cl({1, 2}), cl({-2, 3})};
    PathGenerator g(hard, {cl({2})}, 3);
    g.propagate({});
    CHECK(g.choose_variable() == 2);
    g.backtrack();
    g.propagate({L(2)});
    CHECK(g.choose_variable() == 0);
    g.backtrack();
  }
  SUBCASE("matches an exhaustive scorer with the same tie rules") {
    std::mt19937_64 rng(21);
    for (int round = 0; round < 100; ++round) {
      const int n = 9;
      auto hard = testing::random_cnf(rng, n, 14, 2, 3);
      auto soft = testing::random_cnf(rng, n, 5, 1, 2);
      PathGenerator g(hard, soft, n);
      if (g.propagate({}).conflict) {
        g.backtrack();
        continue;
      }
      int best = 0;
      double bp = -1;
      double bs = -1;
      for (int x : g.soft_vars()) {
        if (g.engine().value(x) != Value::Unassigned) continue;
        const double p = naive_watched_eval(g, Lit(x, true));
        const double q = naive_watched_eval(g, Lit(x, false));
        if (p * q > bp || (p * q == bp && p + q > bs) || (p * q == bp && p + q == bs && x < best)) {
          best = x;
          bp = p * q;
          bs = p + q;
        }
      }
      CHECK(g.choose_variable() == best);
      g.backtrack();
    }
  }
}

TEST_CASE("choose_polarity") {
  SUBCASE("prefer the side that falsifies fewer soft clauses") {
    PathGenerator g({}, {cl({-1})}, 1);
    g.propagate({});
    CHECK(g.choose_polarity(1) == L(-1));
    g.backtrack();
  }
  SUBCASE("tie broken by satisfied soft clauses") {
    PathGenerator g({}, {cl({1, 2}), cl({1, 3})}, 3);
    g.propagate({});
    CHECK(g.choose_polarity(1) == L(1));
    g.backtrack();
  }
  SUBCASE("full tie picks the positive literal") {
    PathGenerator g({}, {cl({2})}, 2);
    g.propagate({});
    CHECK(g.choose_polarity(1) == L(1));
    g.backtrack();
  }
  SUBCASE("matches a naive recount") {
    std::mt19937_64 rng(31);
    for (int round = 0; round < 150; ++round) {
      const int n = 7;
      auto hard = testing::random_cnf(rng, n, 6, 2, 3);
      auto soft = testing::random_cnf(rng, n, 8, 1, 3);
      PathGenerator g(hard, soft, n);
      std::vector<Lit> d{Lit(1 + static_cast<int>(rng() % n), (rng() & 1U) != 0)};
      if (g.propagate(d).conflict) {
        g.backtrack();
        continue;
      }
      const Assignment a = trail_assignment(g, n);
      for (int x = 1; x <= n; ++x) {
        if (a.get(x) != Value::Unassigned) continue;
        auto tally = [&](bool value) {
          Assignment with = a;
          with.set(x, value);
          int falsified = 0;
          int satisfied = 0;
          for (const Clause& c : soft) {
            const bool before = clause_satisfied(c, a);
            bool all_false = true;
            for (Lit q : c) all_false = all_false && with.value(q) == Value::False;
            bool before_false = true;
            for (Lit q : c) before_false = before_false && a.value(q) == Value::False;
            if (all_false && !before_false) ++falsified;
            if (!before && clause_satisfied(c, with)) ++satisfied;
          }
          return std::pair{falsified, satisfied};
        };
        auto [pf, ps] = tally(true);
        auto [nf, ns] = tally(false);
        const Lit expected = pf != nf ? (pf < nf ? Lit(x, true) : Lit(x, false))
                                      : (ps != ns ? (ps > ns ? Lit(x, true) : Lit(x, false)) : Lit(x, true));
        CHECK(g.choose_polarity(x) == expected);
      }
      g.backtrack();
    }
  }
}

TEST_CASE("root conflict yields no paths") {
  std::vector<Clause> hard{cl({-1, 2}), cl({-1, -2})};
  PathGenerator g(hard, {cl({3})}, 3);
  auto r = g.generate({L(1)}, gp::kResplitCutoff);
  CHECK(r.root_conflict);
  CHECK(r.paths.empty());
  // The learned unit now refutes x1 outright.
  CHECK(g.engine().value(1) == Value::False);
}

TEST_CASE("a tiny cutoff emits the starting path") {
  std::vector<Clause> hard{cl({1, 2, 3}), cl({-2, 4})};
  PathGenerator g(hard, {cl({1}), cl({-4})}, 4);
  auto r = g.generate({L(2)}, 1e-6);
  REQUIRE(r.paths.size() == 1);
  CHECK(r.paths[0].decisions == std::vector<Lit>{L(2)});
  CHECK(r.trace.size() == 1);
}

TEST_CASE("an empty root branches once before a tiny cutoff fires") {
  std::vector<Clause> hard{cl({1, 2, 3}), cl({-2, 4})};
  PathGenerator g(hard, {cl({1}), cl({-4})}, 4);
  auto r = g.generate({}, 1e-6);
  CHECK(r.paths.size() == 2);
  for (const auto& p : r.paths) CHECK(p.depth() == 1);
}

TEST_CASE("no soft variables: the whole space is a single empty path") {
  std::vector<Clause> hard{cl({1, 2})};
  PathGenerator g(hard, {}, 2);
  auto r = g.generate({}, gp::kRootCutoff);
  REQUIRE(r.paths.size() == 1);
  CHECK(r.paths[0].decisions.empty());
}

TEST_CASE("paths partition the hard-satisfying assignments") {
  for (std::uint64_t seed = 1; seed <= 120; ++seed) {
    const auto f = oracle::gen_random({seed, 10, 4 + static_cast<int>(seed % 20), 6, 3});
    const double theta0 = seed % 2 == 0 ? 1.0 : 0.05;
    PathGenerator g(f.hard, f.soft, f.num_vars);
    auto r = g.generate({}, theta0);
    check_replay(r, theta0);
    for (std::size_t i = 0; i < r.paths.size(); ++i) {
      CHECK(r.paths[i].gen_index == static_cast<int>(i));
      for (std::size_t k = i + 1; k < r.paths.size(); ++k) CHECK(paths_conflict(r.paths[i], r.paths[k]));
    }
    const std::uint32_t count = std::uint32_t{1} << f.num_vars;
    for (std::uint32_t bits = 0; bits < count; ++bits) {
      if (!testing::clauses_hold(f.hard, bits)) continue;
      const bool covered =
          std::any_of(r.paths.begin(), r.paths.end(), [&](const gp::GuidingPath& p) { return extends(p, bits); });
      CHECK(covered);
    }
  }
}

TEST_CASE("theta dynamics replay exactly at the default cutoffs") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto f = oracle::gen_random({seed, 12, 30, 10, 3});
    PathGenerator g(f.hard, f.soft, f.num_vars);
    auto root = g.generate({}, gp::kRootCutoff);
    check_replay(root, gp::kRootCutoff);
    if (!root.paths.empty()) {
      auto again = g.generate(root.paths.front().decisions, gp::kResplitCutoff);
      check_replay(again, gp::kResplitCutoff);
    }
  }
}

TEST_CASE("depth guard decrements the cutoff") {
  // Each x_i = 1 fails by propagation, so the tree is a single spine of
  // depth 30 and the guard fires once |D| + log2(60) exceeds 25.
  std::vector<Clause> hard;
  std::vector<Clause> soft;
  for (int i = 1; i <= 30; ++i) {
    hard.push_back(cl({-i, 30 + i}));
    hard.push_back(cl({-i, -(30 + i)}));
    soft.push_back(cl({i}));
  }
  PathGenerator g(hard, soft, 60);
  auto r = g.generate({}, gp::kRootCutoff);
  check_replay(r, gp::kRootCutoff);
  const double log_size = std::log2(60.0);
  int fired = 0;
  for (const auto& ev : r.trace) {
    CHECK(ev.depth_guard == (ev.depth + log_size > gp::kDepthLimit));
    if (ev.depth_guard) {
      CHECK(ev.decremented);
      ++fired;
    }
  }
  CHECK(fired > 0);
  REQUIRE(r.paths.size() == 1);
  // Conflicts shrink theta along the spine, so the cutoff ends it after the guard.
  CHECK(r.paths[0].depth() >= 20);
}

TEST_CASE("generation is deterministic") {
  const auto f = oracle::gen_random({5, 12, 25, 9, 3});
  auto a = gp::generate_guiding_paths(f.hard, f.soft, f.num_vars, {}, 1.0);
  auto b = gp::generate_guiding_paths(f.hard, f.soft, f.num_vars, {}, 1.0);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].decisions == b[i].decisions);
}

TEST_CASE("path dump format") {
  std::vector<gp::GuidingPath> paths{{{L(1), L(-3)}, 0}, {{}, 1}};
  CHECK(gp::format_paths(paths) == "a 1 -3 0\na 0\n");
}
