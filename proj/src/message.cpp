#include "distms/message.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <map>
#include <optional>

namespace distms::net {

namespace {

constexpr std::array<const char*, 9> kKindNames = {"Hello",       "AssignBound",      "AssignPath",
                                                   "ReportSat",   "ReportUnsat",      "ReportLowerBound",
                                                   "ReportOptimum", "Abort",          "Terminate"};
constexpr std::array<const char*, 5> kRoleNames = {"none", "sss-linear", "sss-msu3", "gp-solver", "gp-linear"};
constexpr std::array<const char*, 4> kVerdictNames = {"optimum", "unsat", "satisfiable", "unknown"};

// Field keys in encoding order for each kind.
std::vector<std::string_view> fields_of(MsgKind k) {
  switch (k) {
    case MsgKind::Hello: return {"role", "worker"};
    case MsgKind::AssignBound: return {"task", "bound"};
    case MsgKind::AssignPath: return {"task", "mu", "path"};
    case MsgKind::ReportSat: return {"task", "cost", "model"};
    case MsgKind::ReportUnsat: return {"task", "bound", "pi", "hard"};
    case MsgKind::ReportLowerBound: return {"task", "bound"};
    case MsgKind::ReportOptimum: return {"task", "cost", "model", "pi"};
    case MsgKind::Abort: return {"task"};
    case MsgKind::Terminate: return {"verdict", "cost", "model"};
  }
  return {};
}

std::string join(const std::vector<int>& lits) {
  std::string s;
  for (std::size_t i = 0; i < lits.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(lits[i]);
  }
  return s;
}

template <std::size_t N>
std::optional<std::size_t> lookup(const std::array<const char*, N>& names, std::string_view v) {
  for (std::size_t i = 0; i < N; ++i) {
    if (v == names[i]) return i;
  }
  return std::nullopt;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw DecodeError(DecodeErrorCode::BadValue, "bad value for " + std::string(key) + ": '" + std::string(value) + "'");
}

int parse_int(std::string_view key, std::string_view v) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

std::vector<int> parse_list(std::string_view key, std::string_view v) {
  std::vector<int> out;
  if (v.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = v.find(',', start);
    const int lit = parse_int(key, v.substr(start, comma - start));
    if (lit == 0) bad_value(key, v);
    out.push_back(lit);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_flag(std::string_view key, std::string_view v) {
  if (v == "1") return true;
  if (v == "0") return false;
  bad_value(key, v);
}

}  // namespace

const char* kind_name(MsgKind k) { return kKindNames[static_cast<std::size_t>(k)]; }
const char* role_name(Role r) { return kRoleNames[static_cast<std::size_t>(r)]; }
const char* verdict_name(VerdictKind v) { return kVerdictNames[static_cast<std::size_t>(v)]; }

std::string encode_message(const Message& m) {
  std::string out = "kind=";
  out += kind_name(m.kind);
  out += " sender=" + std::to_string(m.sender);
  for (std::string_view key : fields_of(m.kind)) {
    out += ' ';
    out += key;
    out += '=';
    if (key == "role") out += role_name(m.role);
    else if (key == "worker") out += std::to_string(m.worker);
    else if (key == "task") out += std::to_string(m.task);
    else if (key == "bound" || key == "mu") out += std::to_string(m.bound);
    else if (key == "cost") out += std::to_string(m.cost);
    else if (key == "path") out += join(m.path);
    else if (key == "model") out += join(m.model);
    else if (key == "pi") out += m.proof_independent ? '1' : '0';
    else if (key == "hard") out += m.hard ? '1' : '0';
    else if (key == "verdict") out += verdict_name(m.verdict);
  }
  out += '\n';
  return out;
}

Message decode_message(std::string_view line) {
  const std::size_t nl = line.find('\n');
  if (nl == std::string_view::npos) throw DecodeError(DecodeErrorCode::Framing, "record is not newline-terminated");
  if (nl + 1 != line.size()) throw DecodeError(DecodeErrorCode::TrailingGarbage, "data after end of record");
  line = line.substr(0, nl);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

  if (line.empty()) throw DecodeError(DecodeErrorCode::MissingField, "empty record");

  std::map<std::string_view, std::string_view> fields;
  std::vector<std::string_view> order;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t sp = line.find(' ', pos);
    if (sp == std::string_view::npos) sp = line.size();
    std::string_view tok = line.substr(pos, sp - pos);
    const std::size_t eq = tok.find('=');
    if (tok.empty() || eq == std::string_view::npos || eq == 0) {
      throw DecodeError(DecodeErrorCode::TrailingGarbage, "malformed token '" + std::string(tok) + "'");
    }
    const std::string_view key = tok.substr(0, eq);
    if (!fields.emplace(key, tok.substr(eq + 1)).second) {
      throw DecodeError(DecodeErrorCode::BadValue, "duplicate field " + std::string(key));
    }
    order.push_back(key);
    pos = sp + 1;
  }

  if (order.empty() || order.front() != "kind") throw DecodeError(DecodeErrorCode::MissingField, "missing field kind");
  const auto kind = lookup(kKindNames, fields["kind"]);
  if (!kind) throw DecodeError(DecodeErrorCode::UnknownKind, "unknown kind '" + std::string(fields["kind"]) + "'");

  Message m;
  m.kind = static_cast<MsgKind>(*kind);
  std::vector<std::string_view> expected{"kind", "sender"};
  for (std::string_view k : fields_of(m.kind)) expected.push_back(k);
  for (std::string_view key : expected) {
    if (!fields.count(key)) throw DecodeError(DecodeErrorCode::MissingField, "missing field " + std::string(key));
  }
  if (fields.size() != expected.size()) {
    for (std::string_view key : order) {
      if (std::find(expected.begin(), expected.end(), key) == expected.end()) {
        throw DecodeError(DecodeErrorCode::TrailingGarbage, "unexpected field " + std::string(key));
      }
    }
  }

  m.sender = parse_int("sender", fields["sender"]);
  for (std::string_view key : fields_of(m.kind)) {
    const std::string_view v = fields[key];
    if (key == "role") {
      auto r = lookup(kRoleNames, v);
      if (!r) bad_value(key, v);
      m.role = static_cast<Role>(*r);
    } else if (key == "worker") {
      m.worker = parse_int(key, v);
    } else if (key == "task") {
      m.task = parse_int(key, v);
    } else if (key == "bound" || key == "mu") {
      m.bound = parse_int(key, v);
    } else if (key == "cost") {
      m.cost = parse_int(key, v);
    } else if (key == "path") {
      m.path = parse_list(key, v);
    } else if (key == "model") {
      m.model = parse_list(key, v);
    } else if (key == "pi") {
      m.proof_independent = parse_flag(key, v);
    } else if (key == "hard") {
      m.hard = parse_flag(key, v);
    } else if (key == "verdict") {
      auto r = lookup(kVerdictNames, v);
      if (!r) bad_value(key, v);
      m.verdict = static_cast<VerdictKind>(*r);
    }
  }
  return m;
}

}  // namespace distms::net
