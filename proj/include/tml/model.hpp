#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tml {

// ---------------------------------------------------------------------------
// Stages

enum class StageKind {
  Create,
  Process,
  Release,
  Transfer,
  Receive,
  Arrive,
  Accept,
};

inline constexpr StageKind kAllStages[] = {
    StageKind::Create,  StageKind::Process, StageKind::Release,
    StageKind::Transfer, StageKind::Receive, StageKind::Arrive,
    StageKind::Accept,
};

const char* to_string(StageKind k);
std::optional<StageKind> stage_from_string(std::string_view s);

/// The single authoritative legality table for stage-to-stage flow.
/// Intra-machine: transfer->receive, transfer->arrive, arrive->accept,
/// accept->process, accept->release, receive->process, receive->release,
/// create->process, create->release, process->release, release->transfer.
/// Inter-machine: transfer->transfer only.
bool stage_flow_legal(StageKind from, StageKind to, bool same_machine);

enum class Severity { Error, Warning };

// ---------------------------------------------------------------------------
// Errors

enum class ErrorCode {
  DuplicateId,
  DanglingReference,
  IllegalFlow,
  UnknownId,
  UnknownThingType,
  InvalidConfig,
  ModelMismatch,
  CyclicInput,
  NotReachable,
  InvalidModel,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// ---------------------------------------------------------------------------
// Core value types

struct StateVar {
  std::string name;
  int init = 0;
  std::optional<int> min;
  std::optional<int> max;

  bool operator==(const StateVar&) const = default;
};

struct StageRef {
  std::string thimac;  // full dotted path, e.g. "Lion.Body"
  StageKind stage = StageKind::Create;

  std::string str() const { return thimac + "." + to_string(stage); }
  bool operator==(const StageRef&) const = default;
};

struct ThingType {
  std::string name;
  std::string parent_thimac;  // optional; empty when unset

  bool operator==(const ThingType&) const = default;
};

// Guards: comparisons over state vars combined with and/or/not.
struct GuardExpr;
using GuardPtr = std::shared_ptr<const GuardExpr>;

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

struct GuardOperand {
  bool is_var = false;
  int value = 0;
  std::string var;

  bool operator==(const GuardOperand&) const = default;
};

struct GuardExpr {
  enum class Kind { Cmp, And, Or, Not } kind = Kind::Cmp;
  // Cmp
  CmpOp op = CmpOp::Eq;
  GuardOperand lhs, rhs;
  // And/Or/Not
  GuardPtr a, b;

  static GuardPtr cmp(GuardOperand l, CmpOp op, GuardOperand r);
  static GuardPtr band(GuardPtr a, GuardPtr b);
  static GuardPtr bor(GuardPtr a, GuardPtr b);
  static GuardPtr bnot(GuardPtr a);
};

bool guard_equal(const GuardPtr& a, const GuardPtr& b);
std::string guard_to_string(const GuardPtr& g);
/// Names of variables referenced by the guard.
std::vector<std::string> guard_vars(const GuardPtr& g);

// Actions attached to stages.
enum class ActionKind { Set, Inc, Dec, Block, Unblock };

struct ActionStmt {
  ActionKind kind = ActionKind::Set;
  std::string var;  // Set/Inc/Dec
  // Set expression: sum of signed atoms (int literals or var reads).
  struct Atom {
    int sign = 1;
    bool is_var = false;
    int value = 0;
    std::string var;
    bool operator==(const Atom&) const = default;
  };
  std::vector<Atom> expr;   // Set only
  std::optional<int> mod;   // Inc/Dec only
  std::string arc;          // Block/Unblock

  bool operator==(const ActionStmt&) const = default;
};

std::string action_to_string(const ActionStmt& a);

struct ActionDecl {
  StageKind stage = StageKind::Create;
  std::vector<ActionStmt> stmts;

  bool operator==(const ActionDecl&) const = default;
};

struct Thimac {
  std::string id;    // full dotted path
  std::string name;  // last path segment
  std::string parent;  // id of parent thimac; empty for roots
  std::vector<std::string> children;  // ordered child ids
  std::vector<StageKind> stages;      // declaration order
  std::vector<StateVar> state_vars;
  std::vector<ActionDecl> actions;
  std::optional<bool> is_elementary_hint;

  bool has_stage(StageKind k) const;
  bool operator==(const Thimac&) const = default;
};

struct FlowArc {
  std::string id;
  StageRef source;
  StageRef target;
  std::string thing;
  bool blockable = false;

  bool operator==(const FlowArc&) const = default;
};

struct TriggerArc {
  std::string id;  // synthesized "t<N>" in declaration order
  StageRef source;
  StageRef target;
  GuardPtr guard;           // may be null
  std::string join_group;   // empty when not part of an AND-join

  bool operator==(const TriggerArc& o) const {
    return id == o.id && source == o.source && target == o.target &&
           join_group == o.join_group && guard_equal(guard, o.guard);
  }
};

// Contracted arc produced by simplification. Endpoints are surviving stages
// (create/process) or a thimac boundary (stage unset).
struct LinkEnd {
  std::string thimac;
  std::optional<StageKind> stage;

  std::string str() const {
    return stage ? thimac + "." + to_string(*stage) : thimac;
  }
  bool operator==(const LinkEnd&) const = default;
};

struct Link {
  std::string id;
  LinkEnd source;
  LinkEnd target;
  std::string thing;
  std::vector<std::string> notes;  // actions migrated from removed stages

  bool operator==(const Link&) const = default;
};

// Events: named diagram regions. The anchor is the last stage reference in
// the declared region; its firing timestamps an occurrence.
struct RegionElem {
  bool is_arc = false;
  StageRef stage;   // when !is_arc
  std::string arc;  // when is_arc

  bool operator==(const RegionElem&) const = default;
};

struct EventDef {
  std::string id;
  std::string description;
  std::vector<RegionElem> region;
  std::string parent;  // declared "within"; empty when none
  StageRef anchor;

  bool operator==(const EventDef&) const = default;
};

struct ChronologyDecl {
  std::vector<std::string> events;  // declared precedence chain

  bool operator==(const ChronologyDecl&) const = default;
};

// ---------------------------------------------------------------------------
// Model

class Model {
 public:
  Model() = default;
  explicit Model(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }

  const std::vector<Thimac>& thimacs() const { return thimacs_; }
  const std::vector<ThingType>& thing_types() const { return things_; }
  const std::vector<FlowArc>& flow_arcs() const { return flows_; }
  const std::vector<TriggerArc>& trigger_arcs() const { return triggers_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<EventDef>& events() const { return events_; }
  const std::vector<ChronologyDecl>& chronologies() const { return chronos_; }

  // Declaration order of top-level items, as (kind, index) pairs. Thimac
  // entries refer to root thimacs only; nested thimacs print inside parents.
  enum class ItemKind { Thimac, Thing, Flow, Trigger, Event, Chronology, Link };
  const std::vector<std::pair<ItemKind, size_t>>& items() const {
    return items_;
  }

  // Builders. Each checks references and invariants and throws Error on
  // violation; the model is unchanged on failure.
  void add_thimac(const std::string& parent, const std::string& name);
  void add_stage(const std::string& thimac, StageKind k);
  void add_var(const std::string& thimac, StateVar v);
  void add_action(const std::string& thimac, ActionDecl d);
  void set_elementary_hint(const std::string& thimac, bool v);
  void add_thing(ThingType t);
  void add_flow(FlowArc a);
  void add_trigger(TriggerArc a);
  void add_link(Link l);
  void add_event(EventDef e);
  void add_chronology(ChronologyDecl c);

  // Lookups.
  const Thimac* find_thimac(const std::string& id) const;
  const Thimac& thimac(const std::string& id) const;  // throws UnknownId
  bool stage_exists(const StageRef& r) const;
  const FlowArc* find_flow(const std::string& id) const;
  const ThingType* find_thing(const std::string& name) const;
  const EventDef* find_event(const std::string& id) const;
  // Thimac id owning a state var, or nullptr.
  const Thimac* var_owner(const std::string& var) const;
  const StateVar* find_var(const std::string& var) const;
  std::vector<ActionStmt> actions_for(const StageRef& r) const;

  /// Preorder traversal of the child forest under `id`.
  std::vector<std::string> lookup_subthings(const std::string& id) const;

  /// Re-checks whole-model invariants (used by tests and after builders).
  void check_invariants() const;

  bool operator==(const Model& o) const;

 private:
  Thimac* mutable_thimac(const std::string& id);

  std::string name_;
  std::vector<Thimac> thimacs_;  // declaration order, parents before children
  std::vector<ThingType> things_;
  std::vector<FlowArc> flows_;
  std::vector<TriggerArc> triggers_;
  std::vector<Link> links_;
  std::vector<EventDef> events_;
  std::vector<ChronologyDecl> chronos_;
  std::vector<std::pair<ItemKind, size_t>> items_;
};

}  // namespace tml
