#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace distms::net {

enum class MsgKind {
  Hello,
  AssignBound,
  AssignPath,
  ReportSat,
  ReportUnsat,
  ReportLowerBound,
  ReportOptimum,
  Abort,
  Terminate,
};

enum class Role { None, SssLinear, SssMsu3, GpSolver, GpLinear };

enum class VerdictKind { Optimum, Unsat, Satisfiable, Unknown };

// One record of the master/worker protocol. Only the fields used by `kind`
// are encoded; the rest keep their defaults.
//
//   Hello            role worker
//   AssignBound      task bound
//   AssignPath       task bound(=mu) path
//   ReportSat        task cost model
//   ReportUnsat      task bound pi hard
//   ReportLowerBound task bound
//   ReportOptimum    task cost model pi
//   Abort            task
//   Terminate        verdict cost model
struct Message {
  MsgKind kind = MsgKind::Hello;
  int sender = 0;
  int worker = 0;  // id granted by the master in Hello
  int task = 0;
  int bound = 0;
  int cost = 0;
  Role role = Role::None;
  VerdictKind verdict = VerdictKind::Unknown;
  bool proof_independent = false;
  bool hard = false;
  std::vector<int> path;   // signed literals
  std::vector<int> model;  // signed literals

  bool operator==(const Message&) const = default;
};

enum class DecodeErrorCode { Framing, UnknownKind, MissingField, TrailingGarbage, BadValue };

class DecodeError : public std::runtime_error {
 public:
  DecodeError(DecodeErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  DecodeErrorCode code() const { return code_; }

 private:
  DecodeErrorCode code_;
};

const char* kind_name(MsgKind k);
const char* role_name(Role r);
const char* verdict_name(VerdictKind v);

// "kind=AssignBound sender=0 task=3 bound=6\n"
std::string encode_message(const Message& m);
// Expects exactly one newline-terminated record.
Message decode_message(std::string_view line);

}  // namespace distms::net
