#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tml/model.hpp"

namespace tml {

struct SourceSpan {
  std::string file;
  int line = 1;       // 1-based
  int col_start = 1;  // 1-based, inclusive
  int col_end = 1;    // inclusive
};

struct ParseDiagnostic {
  Severity severity = Severity::Error;
  std::string message;
  SourceSpan span;
};

struct ParseResult {
  std::optional<Model> model;  // set iff no error diagnostics
  std::vector<ParseDiagnostic> diagnostics;

  bool ok() const { return model.has_value(); }
};

/// Parses the textual .tm syntax into a Model. Syntax and semantic errors
/// (dangling references, illegal flows) are reported as diagnostics with
/// source spans; any error means no model is returned.
ParseResult parse_model(const std::string& text,
                        const std::string& filename = "");

/// Canonical pretty-printer: declaration order, 2-space indent, LF endings.
/// parse(print(m)) is structurally equal to m, and print is a fixpoint on
/// its own output.
std::string print_model(const Model& m);

}  // namespace tml
