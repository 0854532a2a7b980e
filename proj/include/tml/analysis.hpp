#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tml/model.hpp"

namespace tml {

struct Finding {
  std::string rule;  // "V1".."V8"
  Severity severity = Severity::Error;
  std::string element;  // offending element id / stage path
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool has_errors() const;
  size_t error_count() const;
  /// "RULE\tSEVERITY\tELEMENT\tMESSAGE" lines.
  std::string to_text() const;
};

/// Static semantic validation. Total: never throws on a structurally
/// well-formed model; all findings are carried in the report.
ValidationReport validate(const Model& m);

struct ElementaryResult {
  std::vector<std::string> ids;       // sorted by declaration order
  std::vector<std::string> conflicts;  // hint says elementary, structure not
};

/// Thimacs whose machine receives no flow from outside their subtree and
/// whose own create stage is not triggered by another thimac or by a
/// process stage. Modeler hints are unioned in; contradictions reported.
ElementaryResult elementary_thimacs(const Model& m);

struct Subdiagram {
  std::string thing;
  std::vector<StageRef> stages;       // closed under arc endpoints
  std::vector<FlowArc> flow_arcs;
  std::vector<TriggerArc> trigger_arcs;  // both endpoints inside
};

/// S(t): the induced subgraph where thing t (and its subthings) flows.
/// Throws UnknownThingType.
Subdiagram subdiagram(const Model& m, const std::string& thing);

/// Shortest flow path (fewest arcs) from one stage to another along arcs
/// labeled with the thing; ties broken by arc declaration order. Pass-through
/// direction at transfer stages is respected (a thing arriving at a transfer
/// from a release may only continue to another machine). Returns nullopt when
/// not reachable.
std::optional<std::vector<StageRef>> flow_path(const Model& m,
                                               const StageRef& from,
                                               const StageRef& to,
                                               const std::string& thing);

/// Removes transfer/receive/release/arrive/accept stages, contracting each
/// maximal flow chain through removed stages into a contracted link between
/// the surviving endpoints (or a thimac boundary). Triggers re-anchor to the
/// nearest surviving stage; actions of removed stages migrate onto link
/// notes; events and chronologies are dropped. Idempotent.
Model simplify(const Model& m);

/// True when two arcs may be chained by a flowing thing: at a transfer
/// reached from inside the machine (release->transfer) only inter-machine
/// continuation is possible.
bool arcs_chainable(const FlowArc& in, const FlowArc& out);

}  // namespace tml
