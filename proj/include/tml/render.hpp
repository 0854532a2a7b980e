#pragma once

#include <string>

#include "tml/events.hpp"
#include "tml/model.hpp"

namespace tml {

enum class RenderView { Full, Simplified };

struct RenderOptions {
  RenderView view = RenderView::Full;
  bool cluster_by_thimac = true;
  bool show_triggers = true;
};

/// Deterministic Graphviz DOT: thimacs as nested clusters, stages as nodes,
/// flows solid (blockable ones double-lined), triggers dashed. The
/// simplified view renders simplify(m), with thimac boundaries as point
/// nodes where contracted links end.
std::string model_to_graphtext(const Model& m, const RenderOptions& opts = {});

/// Event precedence as a DOT digraph, events as boxes labeled with id and
/// description (looked up in the model).
std::string chronology_to_graphtext(const Chronology& c, const Model& m);

/// Structural check of DOT text (graph header, balanced braces, node/edge
/// statement shape). Returns true and clears `reason` on success.
bool dot_validate(const std::string& text, std::string* reason = nullptr);

}  // namespace tml
