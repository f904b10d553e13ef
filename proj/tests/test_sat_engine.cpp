#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "distms/sat_engine.hpp"
#include "test_support.hpp"

using namespace distms;
using distms::sat::Engine;
using distms::sat::SatStatus;

namespace {

Lit L(int d) { return Lit::from_dimacs(d); }

bool model_satisfies(const std::vector<Clause>& clauses, const Assignment& m) {
  for (const Clause& c : clauses) {
    if (!clause_satisfied(c, m)) return false;
  }
  return true;
}

std::vector<Lit> random_assumptions(std::mt19937_64& rng, int num_vars) {
  std::vector<Lit> out;
  const int k = static_cast<int>(rng() % 4);
  std::set<int> used;
  for (int i = 0; i < k; ++i) {
    const int v = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(num_vars));
    if (!used.insert(v).second) continue;
    out.emplace_back(v, (rng() & 1U) != 0);
  }
  return out;
}

}  // namespace

TEST_CASE("top-level contradiction") {
  std::vector<Clause> clauses{{L(1)}, {L(-1)}};
  Engine e(clauses, 1);
  CHECK_FALSE(e.okay());
  auto r = e.solve();
  CHECK(r.unsat());
  CHECK(r.core.empty());
}

TEST_CASE("empty database is satisfiable") {
  Engine e(std::vector<Clause>{}, 3);
  auto r = e.solve();
  REQUIRE(r.sat());
  CHECK(r.model.total_over(3));
}

TEST_CASE("variables out of range are rejected") {
  Engine e(2);
  CHECK_THROWS_AS(e.add_clause({L(1), L(3)}), std::invalid_argument);
  std::vector<Lit> assumptions{L(5)};
  CHECK_THROWS_AS(e.solve(assumptions), std::invalid_argument);
}

TEST_CASE("random 3-CNF over 10 variables agrees with enumeration") {
  std::mt19937_64 rng(2024);
  for (int round = 0; round < 40; ++round) {
    auto clauses = testing::random_cnf(rng, 10, 50, 3, 3);
    Engine e(clauses, 10);
    auto r = e.solve();
    const bool expected = testing::brute_sat(clauses, 10);
    CHECK(r.sat() == expected);
    if (r.sat()) CHECK(model_satisfies(clauses, r.model));
  }
}

TEST_CASE("add_clause") {
  Engine e(2);
  CHECK(e.add_clause({L(1)}));
  CHECK_FALSE(e.add_clause({L(-1)}));
  CHECK(e.solve().unsat());
  CHECK(e.solve().unsat());

  Engine b(2);
  b.add_clause({L(-1), L(-2)});
  std::vector<Lit> both{L(1), L(2)};
  CHECK(b.solve(both).unsat());
  std::vector<Lit> one{L(1)};
  auto r = b.solve(one);
  REQUIRE(r.sat());
  CHECK(r.model.value(L(2)) == Value::False);
}

TEST_CASE("add_clause needs decision level 0") {
  Engine e(3);
  e.add_clause({L(-1), L(2)});
  std::vector<Lit> d{L(1)};
  e.propagate_under(d, true);
  CHECK_THROWS_AS(e.add_clause({L(3)}), std::logic_error);
  e.backtrack_to_root();
  CHECK(e.add_clause({L(3)}));
}

TEST_CASE("blocking clauses enumerate exactly the models") {
  std::mt19937_64 rng(77);
  for (int round = 0; round < 30; ++round) {
    const int n = 7;
    auto clauses = testing::random_cnf(rng, n, 12, 2, 3);
    Engine e(clauses, n);
    std::set<std::vector<int>> seen;
    while (true) {
      auto r = e.solve();
      if (!r.sat()) break;
      REQUIRE(model_satisfies(clauses, r.model));
      auto key = r.model.to_dimacs(n);
      REQUIRE(seen.insert(key).second);
      Clause block;
      for (int d : key) block.push_back(L(-d));
      e.add_clause(block);
    }
    CHECK(seen.size() == testing::brute_count_models(clauses, n));
  }
}

TEST_CASE("solve under assumptions") {
  Engine e(2);
  e.add_clause({L(-1), L(-2)});
  std::vector<Lit> ab{L(1), L(2)};
  auto r = e.solve(ab);
  REQUIRE(r.unsat());
  CHECK_FALSE(r.core.empty());
  for (Lit l : r.core) CHECK((l == L(1) || l == L(2)));

  Engine f(1);
  std::vector<Lit> a{L(1)};
  auto s = f.solve(a);
  REQUIRE(s.sat());
  CHECK(s.model.value(L(1)) == Value::True);
}

TEST_CASE("verdicts and cores agree with enumeration under random assumptions") {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 200; ++round) {
    const int n = 4 + static_cast<int>(rng() % 9);
    auto clauses = testing::random_cnf(rng, n, 2 + static_cast<int>(rng() % (3 * n)), 1, 3);
    auto assumptions = random_assumptions(rng, n);
    Engine e(clauses, n);
    auto r = e.solve(assumptions);
    const bool expected = testing::brute_sat(clauses, n, assumptions);
    REQUIRE(r.sat() == expected);
    if (r.sat()) {
      CHECK(model_satisfies(clauses, r.model));
      for (Lit a : assumptions) CHECK(r.model.is_true(a));
    } else {
      for (Lit l : r.core) CHECK(std::find(assumptions.begin(), assumptions.end(), l) != assumptions.end());
      CHECK_FALSE(testing::brute_sat(clauses, n, r.core));
      Engine again(clauses, n);
      CHECK(again.solve(r.core).unsat());
    }
  }
}

TEST_CASE("incremental solving keeps verdicts consistent") {
  std::mt19937_64 rng(91);
  for (int round = 0; round < 30; ++round) {
    const int n = 10;
    std::vector<Clause> clauses;
    Engine e(n);
    for (int step = 0; step < 8; ++step) {
      auto extra = testing::random_cnf(rng, n, 5, 2, 3);
      for (const Clause& c : extra) {
        clauses.push_back(c);
        e.add_clause(c);
      }
      auto assumptions = random_assumptions(rng, n);
      auto r = e.solve(assumptions);
      REQUIRE(r.sat() == testing::brute_sat(clauses, n, assumptions));
    }
  }
}

TEST_CASE("propagate_under") {
  SUBCASE("chain") {
    Engine e(3);
    e.add_clause({L(-1), L(2)});
    e.add_clause({L(-2), L(3)});
    std::vector<Lit> d{L(1)};
    auto out = e.propagate_under(d);
    CHECK_FALSE(out.conflict);
    std::set<Lit> implied(out.implied.begin(), out.implied.end());
    CHECK(implied == std::set<Lit>{L(2), L(3)});
    CHECK(e.decision_level() == 0);
  }
  SUBCASE("conflict") {
    Engine e(2);
    e.add_clause({L(-1), L(2)});
    e.add_clause({L(-2)});
    std::vector<Lit> d{L(1)};
    CHECK(e.propagate_under(d).conflict);
  }
  SUBCASE("complementary decisions") {
    Engine e(2);
    std::vector<Lit> d{L(1), L(-1)};
    CHECK_THROWS_AS(e.propagate_under(d), std::invalid_argument);
  }
}

TEST_CASE("propagation closure equals naive fixpoint") {
  std::mt19937_64 rng(13);
  for (int round = 0; round < 300; ++round) {
    const int n = 6 + static_cast<int>(rng() % 7);
    auto clauses = testing::random_cnf(rng, n, n + static_cast<int>(rng() % (2 * n)), 1, 3);
    Engine e(clauses, n);
    std::vector<Lit> decisions;
    std::set<int> used;
    for (int k = 0; k < 3; ++k) {
      const int v = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n));
      if (used.insert(v).second) decisions.emplace_back(v, (rng() & 1U) != 0);
    }
    auto naive = testing::naive_propagate(clauses, n, decisions);
    if (!e.okay()) {
      CHECK(naive.conflict);
      continue;
    }
    auto out = e.propagate_under(decisions);
    REQUIRE(out.conflict == naive.conflict);
    if (out.conflict) continue;
    Assignment got(n);
    for (Lit d : decisions) got.set(d.var(), d.positive());
    for (Lit l : out.implied) got.set(l.var(), l.positive());
    CHECK(got == naive.values);
  }
}

TEST_CASE("analyze_and_learn") {
  SUBCASE("forced unit") {
    Engine e(2);
    e.add_clause({L(-1), L(2)});
    e.add_clause({L(-1), L(-2)});
    std::vector<Lit> d{L(1)};
    auto out = e.propagate_under(d, true);
    REQUIRE(out.conflict);
    auto learnt = e.analyze_and_learn(out);
    CHECK(learnt == Clause{L(-1)});
    CHECK(e.decision_level() == 0);
    CHECK(e.value(L(1)) == Value::False);
  }
  SUBCASE("requires a conflict") {
    Engine e(2);
    std::vector<Lit> d{L(1)};
    auto out = e.propagate_under(d, true);
    CHECK_THROWS_AS(e.analyze_and_learn(out), std::logic_error);
  }
  SUBCASE("conflict at level one asserts at level zero") {
    Engine e(4);
    e.add_clause({L(-1), L(2)});
    e.add_clause({L(-1), L(3)});
    e.add_clause({L(-2), L(-3), L(4)});
    e.add_clause({L(-2), L(-3), L(-4)});
    std::vector<Lit> d{L(1)};
    auto out = e.propagate_under(d, true);
    REQUIRE(out.conflict);
    auto learnt = e.analyze_and_learn(out);
    REQUIRE(learnt.size() == 1);
    CHECK(e.value(learnt[0]) == Value::True);
  }
}

TEST_CASE("learned clauses are implied by the original clauses") {
  std::mt19937_64 rng(29);
  int learned = 0;
  for (int round = 0; round < 400 && learned < 150; ++round) {
    const int n = 6 + static_cast<int>(rng() % 7);
    auto clauses = testing::random_cnf(rng, n, 2 * n, 2, 3);
    Engine e(clauses, n);
    if (!e.okay()) continue;
    std::vector<Lit> decisions;
    std::set<int> used;
    for (int k = 0; k < 4; ++k) {
      const int v = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n));
      if (used.insert(v).second) decisions.emplace_back(v, (rng() & 1U) != 0);
    }
    auto out = e.propagate_under(decisions, true);
    if (!out.conflict) continue;
    const Clause learnt = e.analyze_and_learn(out);
    ++learned;
    // original and not(learnt) must be unsatisfiable
    std::vector<Lit> negated;
    for (Lit l : learnt) negated.push_back(~l);
    CHECK_FALSE(testing::brute_sat(clauses, n, negated));
    CHECK(e.solve().sat() == testing::brute_sat(clauses, n));
  }
  CHECK(learned >= 50);
}

TEST_CASE("watched_clauses") {
  Engine e(4);
  e.add_clause({L(1), L(2), L(3)});
  int watching = 0;
  for (int d : {1, 2, 3}) watching += static_cast<int>(e.watched_clauses(L(d)).size());
  CHECK(watching == 2);
  CHECK(e.watched_clauses(L(4)).empty());
  CHECK(e.watched_clauses(L(-1)).empty());
}

TEST_CASE("two-watch invariant after propagation") {
  std::mt19937_64 rng(61);
  for (int round = 0; round < 200; ++round) {
    const int n = 8;
    auto clauses = testing::random_cnf(rng, n, 14, 2, 4);
    Engine e(clauses, n);
    if (!e.okay()) continue;
    e.solve();  // populate learned clauses and move watches around
    std::vector<Lit> decisions;
    std::set<int> used;
    for (int k = 0; k < 3; ++k) {
      const int v = 1 + static_cast<int>(rng() % n);
      if (used.insert(v).second) decisions.emplace_back(v, (rng() & 1U) != 0);
    }
    auto out = e.propagate_under(decisions, true);
    if (out.conflict) {
      e.backtrack_to_root();
      continue;
    }
    for (sat::ClauseRef ref : e.live_clauses()) {
      auto lits = e.clause(ref);
      int watch_count = 0;
      for (Lit l : lits) {
        auto w = e.watched_clauses(l);
        watch_count += static_cast<int>(std::count(w.begin(), w.end(), ref));
      }
      CHECK(watch_count == 2);
      int unfalsified = 0;
      for (Lit l : lits) unfalsified += e.value(l) != Value::False ? 1 : 0;
      if (unfalsified >= 2) {
        CHECK(e.value(lits[0]) != Value::False);
        CHECK(e.value(lits[1]) != Value::False);
      }
    }
    e.backtrack_to_root();
  }
}

TEST_CASE("seeded engines are deterministic") {
  std::mt19937_64 rng(3);
  auto clauses = testing::random_cnf(rng, 12, 45, 3, 3);
  for (std::uint64_t seed : {0ULL, 9ULL}) {
    Engine a(clauses, 12, {.seed = seed});
    Engine b(clauses, 12, {.seed = seed});
    auto ra = a.solve();
    auto rb = b.solve();
    CHECK(ra.status == rb.status);
    CHECK(ra.model == rb.model);
  }
}

TEST_CASE("interrupted solve returns unknown") {
  std::mt19937_64 rng(4);
  auto clauses = testing::random_cnf(rng, 12, 40, 3, 3);
  Engine e(clauses, 12);
  std::atomic<bool> stop{true};
  e.set_interrupt(&stop);
  CHECK(e.solve().status == SatStatus::Unknown);
  stop = false;
  CHECK(e.solve().status != SatStatus::Unknown);
}

TEST_CASE("luby sequence") {
  std::vector<double> got;
  for (int i = 0; i < 7; ++i) got.push_back(sat::luby(2.0, i));
  CHECK(got == std::vector<double>{1, 1, 2, 1, 1, 2, 4});
}
