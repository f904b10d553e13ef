#include "distms/formula.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace distms {

Assignment Assignment::from_dimacs(int num_vars, std::span<const int> lits) {
  Assignment a(num_vars);
  for (int d : lits) {
    if (d == 0) continue;
    a.set(std::abs(d), d > 0);
  }
  return a;
}

bool Assignment::total_over(int num_vars) const {
  for (int v = 1; v <= num_vars; ++v) {
    if (get(v) == Value::Unassigned) return false;
  }
  return true;
}

Assignment Assignment::project(int num_vars) const {
  Assignment out(num_vars);
  for (int v = 1; v <= num_vars; ++v) {
    Value x = get(v);
    if (x != Value::Unassigned) out.set(v, x == Value::True);
  }
  return out;
}

std::vector<int> Assignment::to_dimacs(int num_vars) const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(num_vars));
  for (int v = 1; v <= num_vars; ++v) {
    Value x = get(v);
    if (x != Value::Unassigned) out.push_back(x == Value::True ? v : -v);
  }
  return out;
}

bool clause_satisfied(std::span<const Lit> clause, const Assignment& a) {
  return std::any_of(clause.begin(), clause.end(), [&](Lit l) { return a.is_true(l); });
}

bool normalize_clause(Clause& clause) {
  std::sort(clause.begin(), clause.end());
  clause.erase(std::unique(clause.begin(), clause.end()), clause.end());
  for (std::size_t i = 1; i < clause.size(); ++i) {
    if (clause[i - 1].var() == clause[i].var()) return false;
  }
  return true;
}

namespace {

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  // Next whitespace-separated token outside comment lines; false at EOF.
  bool next(std::string& tok) {
    while (true) {
      while (pos_ < line_.size() && std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
      if (pos_ < line_.size()) break;
      if (!std::getline(in_, line_)) return false;
      ++line_no_;
      pos_ = 0;
      std::size_t first = line_.find_first_not_of(" \t\r");
      if (first != std::string::npos && line_[first] == 'c') line_.clear();
    }
    std::size_t end = pos_;
    while (end < line_.size() && !std::isspace(static_cast<unsigned char>(line_[end]))) ++end;
    tok.assign(line_, pos_, end - pos_);
    pos_ = end;
    return true;
  }

  long long next_int(const char* what) {
    std::string tok;
    if (!next(tok)) throw ParseError(line_no_, std::string("unexpected end of input, expected ") + what);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError(line_no_, std::string("expected ") + what + ", got '" + tok + "'");
    }
    return v;
  }

  std::size_t line() const { return line_no_; }

 private:
  std::istream& in_;
  std::string line_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

}  // namespace

WcnfFormula parse_wcnf(std::istream& in) {
  TokenReader reader(in);
  std::string tok;
  if (!reader.next(tok)) throw ParseError(reader.line(), "missing header");
  if (tok != "p") throw ParseError(reader.line(), "expected header 'p wcnf <vars> <clauses> <top>'");
  if (!reader.next(tok) || tok != "wcnf") throw ParseError(reader.line(), "expected 'wcnf' format in header");
  const std::size_t header_line = reader.line();
  long long num_vars = reader.next_int("variable count");
  long long num_clauses = reader.next_int("clause count");
  long long top = reader.next_int("top weight");
  if (reader.line() != header_line) throw ParseError(header_line, "incomplete header");
  if (num_vars < 0 || num_clauses < 0) throw ParseError(header_line, "negative count in header");
  if (top < 2) throw ParseError(header_line, "top weight must be at least 2");

  WcnfFormula f;
  f.num_vars = static_cast<int>(num_vars);
  long long seen = 0;
  while (reader.next(tok)) {
    const std::size_t clause_line = reader.line();
    long long weight = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), weight);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError(clause_line, "expected clause weight, got '" + tok + "'");
    }
    if (weight != 1 && weight != top) {
      throw ParseError(clause_line, "weight " + std::to_string(weight) + " not in {1, " + std::to_string(top) + "}");
    }
    Clause clause;
    while (true) {
      long long d = reader.next_int("literal");
      if (d == 0) break;
      if (d > num_vars || -d > num_vars) {
        throw ParseError(reader.line(), "variable " + std::to_string(d < 0 ? -d : d) + " out of range");
      }
      clause.push_back(Lit::from_dimacs(static_cast<int>(d)));
    }
    if (clause.empty()) throw ParseError(clause_line, "empty clause");
    if (!normalize_clause(clause)) throw ParseError(clause_line, "tautological clause");
    (weight == top ? f.hard : f.soft).push_back(std::move(clause));
    ++seen;
  }
  if (seen != num_clauses) {
    throw ParseError(reader.line(), "header declares " + std::to_string(num_clauses) + " clauses, found " +
                                        std::to_string(seen));
  }
  return f;
}

WcnfFormula parse_wcnf(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_wcnf(in);
}

WcnfFormula read_wcnf_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open instance '" + path + "'");
  return parse_wcnf(in);
}

std::string write_wcnf(const WcnfFormula& f) {
  const std::size_t top = std::max<std::size_t>(2, f.soft.size() + 1);
  std::ostringstream out;
  out << "p wcnf " << f.num_vars << ' ' << f.hard.size() + f.soft.size() << ' ' << top << '\n';
  auto emit = [&](std::size_t w, const Clause& c) {
    out << w;
    for (Lit l : c) out << ' ' << l.to_dimacs();
    out << " 0\n";
  };
  for (const Clause& c : f.hard) emit(top, c);
  for (const Clause& c : f.soft) emit(1, c);
  return out.str();
}

RelaxedFormula relax(const WcnfFormula& f) {
  RelaxedFormula rf;
  rf.base = f;
  rf.clauses = f.hard;
  rf.clauses.reserve(f.hard.size() + f.soft.size());
  for (std::size_t j = 0; j < f.soft.size(); ++j) {
    const int r = f.num_vars + 1 + static_cast<int>(j);
    Clause c = f.soft[j];
    c.push_back(Lit(r, true));
    rf.clauses.push_back(std::move(c));
    rf.relax_vars.push_back(r);
    rf.relax_map.push_back(static_cast<int>(j));
  }
  return rf;
}

bool satisfies_hard(const WcnfFormula& f, const Assignment& a) {
  return std::all_of(f.hard.begin(), f.hard.end(), [&](const Clause& c) { return clause_satisfied(c, a); });
}

int count_falsified_soft(const WcnfFormula& f, const Assignment& a) {
  return static_cast<int>(
      std::count_if(f.soft.begin(), f.soft.end(), [&](const Clause& c) { return !clause_satisfied(c, a); }));
}

int cost(const WcnfFormula& f, const Assignment& a) {
  if (!a.total_over(f.num_vars)) throw InvalidAssignment("assignment is not total over the formula's variables");
  if (!satisfies_hard(f, a)) throw InvalidAssignment("assignment violates a hard clause");
  return count_falsified_soft(f, a);
}

std::string format_model(const Assignment& a, int num_vars) {
  std::string out;
  for (int d : a.to_dimacs(num_vars)) {
    if (!out.empty()) out += ' ';
    out += std::to_string(d);
  }
  return out;
}

}  // namespace distms
