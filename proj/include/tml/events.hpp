#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tml/engine.hpp"
#include "tml/model.hpp"

namespace tml {

struct EventHierarchy {
  // (outer, inner): outer's region strictly contains inner's.
  std::vector<std::pair<std::string, std::string>> pairs;
  // Declared "within" relations the regions do not support.
  std::vector<std::string> mismatches;
};

/// Containment ordering of event regions, compared as element sets, with
/// declared nestings cross-checked against it.
EventHierarchy infer_hierarchy(const Model& m);

struct Occurrence {
  std::string event;
  long tick = 0;  // anchor stage's firing tick
  int token = -1;

  bool operator==(const Occurrence&) const = default;
};

/// An event occurs for a token once every stage of its region has fired for
/// that token (arcs in the region require both endpoint stages; trigger
/// arcs require the trigger itself to have fired). Timestamp: the anchor
/// stage's first firing for the token. Throws Error(ModelMismatch) when the
/// trace does not belong to the model.
std::vector<Occurrence> detect_occurrences(const Model& m, const Trace& t);

/// "event_id,tick,token_id" lines with a header.
std::string occurrences_to_csv(const std::vector<Occurrence>& occ);

struct Chronology {
  std::vector<std::string> events;  // ordered by first occurrence
  // Strict precedence (every occurrence of a before every occurrence of b),
  // transitively reduced. Acyclic by construction.
  std::vector<std::pair<std::string, std::string>> edges;
};

Chronology chronology(const Model& m, const std::vector<Occurrence>& occ);

}  // namespace tml
