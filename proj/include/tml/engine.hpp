#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tml/model.hpp"

namespace tml {

struct Injection {
  long tick = 0;
  std::string thing;
  StageRef at;  // must be a transfer stage
};

struct DelaySpec {
  int fixed = 1;
  std::optional<std::pair<int, int>> range;  // inclusive; overrides fixed
};

struct ArrivalSpec {
  int count = 0;
  std::pair<int, int> gap{1, 1};  // inclusive tick gap between arrivals
  std::string thing;
  StageRef at;
};

struct SimConfig {
  uint64_t seed = 0;
  long horizon = 100;
  std::vector<Injection> injections;
  std::optional<ArrivalSpec> arrivals;
  // Keyed by stage path ("Counter.process"); applies on entering that
  // process stage. Default holding time is 1 tick.
  std::map<std::string, DelaySpec> delays;
};

/// Parses the flat key=value config format: seed, horizon,
/// inject = TICK THING STAGE (repeatable), delay.<stage.path> = N | A..B,
/// arrivals.count / arrivals.gap / arrivals.thing / arrivals.at.
/// '#' starts a comment. Throws Error(InvalidConfig).
SimConfig parse_config(const std::string& text);

enum class RecordKind {
  StageFired,
  TriggerFired,
  TokenInjected,
  TokenExited,
  TokenRejected,
  VarChanged,
};

const char* to_string(RecordKind k);

struct TraceRecord {
  long tick = 0;
  RecordKind kind = RecordKind::StageFired;
  std::string element;  // stage path or arc id
  int token = -1;       // -1: no token involved
  std::string detail;   // var change "name old->new", exit reason, ...

  bool operator==(const TraceRecord&) const = default;
};

struct Trace {
  std::string model_name;
  uint64_t seed = 0;
  long horizon = 0;
  std::vector<TraceRecord> records;  // emission order
  std::vector<std::pair<std::string, int>> initial_vars;  // decl order
  std::vector<std::pair<std::string, int>> final_vars;

  bool operator==(const Trace&) const = default;
};

/// Deterministic tick simulation. Per tick: (0) stages scheduled by last
/// tick's triggers fire and run their actions, creates spawning tokens;
/// (1) due injections enter at their transfer stage, rejected when every
/// candidate arc out of it is blocked; (2) tokens advance at most one arc,
/// in (thimac declaration, token id) order, first declared traversable arc
/// wins, one traversal per arc per tick; (3) actions of stages fired by
/// token movement run in firing order; (4) triggers whose source fired this
/// tick and whose guard now holds schedule their target for the next tick
/// (AND-join groups all-or-nothing).
/// Throws Error(InvalidConfig) on config/model mismatch.
Trace simulate(const Model& m, const SimConfig& cfg);

/// Re-runs the simulation and compares against the given trace record by
/// record. Throws Error(ModelMismatch) when the trace names a different
/// model. Returns true on an exact match.
bool replay_check(const Model& m, const SimConfig& cfg, const Trace& t);

struct SimStats {
  long injected = 0, rejected = 0, exited = 0, in_flight = 0;
  std::map<std::string, long> stage_firings;
  std::map<std::string, long> trigger_firings;
  // Per variable: maximum value and time-weighted mean over ticks 0..horizon.
  std::map<std::string, int> var_max;
  std::map<std::string, double> var_mean;
};

SimStats stats(const Trace& t);

/// "tick\tkind\telement\ttoken\tdetail" lines, one per record, after a
/// small header block. Byte-stable across runs and platforms.
std::string trace_to_text(const Trace& t);
std::string trace_to_csv(const Trace& t);

}  // namespace tml
