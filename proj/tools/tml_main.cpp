// Command-line front end: validate, simulate, render, simplify, paths,
// elementary, events.
//
// Exit codes: 0 success, 1 validation/simulation errors, 2 usage or parse
// errors, 3 I/O failures.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tml/analysis.hpp"
#include "tml/dsl.hpp"
#include "tml/engine.hpp"
#include "tml/events.hpp"
#include "tml/model.hpp"
#include "tml/render.hpp"

namespace {

constexpr int kOk = 0, kInvalid = 1, kUsage = 2, kIo = 3;
constexpr const char* kVersion = "1.0.0";

bool g_quiet = false;

void say(const std::string& s) {
  if (!g_quiet) std::cout << s;
}

struct CliExit {
  int code;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read " << path << "\n";
    throw CliExit{kIo};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes via a temp file and renames, so a failed run never leaves a
// truncated output behind.
void write_file(const std::string& path, const std::string& text) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) {
      std::cerr << "error: cannot write " << tmp << "\n";
      throw CliExit{kIo};
    }
    out << text;
    if (!out) {
      std::cerr << "error: cannot write " << tmp << "\n";
      throw CliExit{kIo};
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::cerr << "error: cannot replace " << path << "\n";
    throw CliExit{kIo};
  }
}

tml::Model load_model(const std::string& path) {
  auto result = tml::parse_model(read_file(path), path);
  for (const auto& d : result.diagnostics) {
    std::cerr << d.span.file << ":" << d.span.line << ":" << d.span.col_start
              << ": "
              << (d.severity == tml::Severity::Error ? "error" : "warning")
              << ": " << d.message << "\n";
  }
  if (!result.ok()) throw CliExit{kUsage};
  return std::move(*result.model);
}

tml::StageRef parse_stage_arg(const std::string& s) {
  auto pos = s.rfind('.');
  std::optional<tml::StageKind> k;
  if (pos != std::string::npos) k = tml::stage_from_string(s.substr(pos + 1));
  if (!k) {
    std::cerr << "error: expected THIMAC.stage, got '" << s << "'\n";
    throw CliExit{kUsage};
  }
  return {s.substr(0, pos), *k};
}

int cmd_validate(const std::string& file, const std::string& report_path) {
  tml::Model m = load_model(file);
  tml::ValidationReport r = tml::validate(m);
  say(r.to_text());
  if (!report_path.empty()) {
    nlohmann::json j;
    j["model"] = m.name();
    j["errors"] = r.error_count();
    j["findings"] = nlohmann::json::array();
    for (const auto& f : r.findings)
      j["findings"].push_back(
          {{"rule", f.rule},
           {"severity", f.severity == tml::Severity::Error ? "error" : "warning"},
           {"element", f.element},
           {"message", f.message}});
    write_file(report_path, j.dump(2) + "\n");
  }
  return r.has_errors() ? kInvalid : kOk;
}

void require_valid(const tml::Model& m) {
  tml::ValidationReport r = tml::validate(m);
  bool bad = r.has_errors();
  for (const auto& f : r.findings)
    if (f.severity == tml::Severity::Error)
      std::cerr << f.rule << ": " << f.element << ": " << f.message << "\n";
  if (bad) throw CliExit{kInvalid};
}

int cmd_simulate(const std::string& file, const std::string& config_path,
                 std::optional<uint64_t> seed, std::optional<long> horizon,
                 const std::string& trace_path, bool with_events,
                 bool with_stats) {
  tml::Model m = load_model(file);
  require_valid(m);
  tml::SimConfig cfg;
  if (!config_path.empty()) {
    try {
      cfg = tml::parse_config(read_file(config_path));
    } catch (const tml::Error& e) {
      std::cerr << "error: " << config_path << ": " << e.what() << "\n";
      return kUsage;
    }
  }
  if (seed) cfg.seed = *seed;
  if (horizon) cfg.horizon = *horizon;

  tml::Trace trace;
  try {
    trace = tml::simulate(m, cfg);
  } catch (const tml::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == tml::ErrorCode::InvalidConfig ? kUsage : kInvalid;
  }
  std::string text = tml::trace_to_text(trace);
  if (trace_path.empty()) say(text);
  else write_file(trace_path, text);

  std::string stem = trace_path.empty() ? file : trace_path;
  if (with_events) {
    auto occ = tml::detect_occurrences(m, trace);
    write_file(stem + ".events.csv", tml::occurrences_to_csv(occ));
    auto chron = tml::chronology(m, occ);
    write_file(stem + ".chronology.dot",
               tml::chronology_to_graphtext(chron, m));
  }
  if (with_stats) {
    tml::SimStats st = tml::stats(trace);
    std::ostringstream os;
    os << "injected " << st.injected << "\n"
       << "rejected " << st.rejected << "\n"
       << "exited " << st.exited << "\n"
       << "in_flight " << st.in_flight << "\n";
    for (const auto& [k, v] : st.stage_firings)
      os << "fired " << k << " " << v << "\n";
    for (const auto& [k, v] : st.trigger_firings)
      os << "triggered " << k << " " << v << "\n";
    for (const auto& [k, v] : st.var_max)
      os << "var " << k << " max " << v << " mean " << st.var_mean.at(k)
         << "\n";
    say(os.str());
  }
  return kOk;
}

int cmd_render(const std::string& file, const std::string& view,
               const std::string& out, bool no_triggers, bool flat) {
  tml::Model m = load_model(file);
  require_valid(m);
  tml::RenderOptions opts;
  if (view == "simplified") opts.view = tml::RenderView::Simplified;
  else if (view != "full") {
    std::cerr << "error: --view must be full or simplified\n";
    return kUsage;
  }
  opts.show_triggers = !no_triggers;
  opts.cluster_by_thimac = !flat;
  std::string dot = tml::model_to_graphtext(m, opts);
  std::string reason;
  if (!tml::dot_validate(dot, &reason)) {
    std::cerr << "internal error: generated graph text is malformed: "
              << reason << "\n";
    return kInvalid;
  }
  if (out.empty()) say(dot);
  else write_file(out, dot);
  return kOk;
}

int cmd_simplify(const std::string& file, const std::string& out) {
  tml::Model m = load_model(file);
  require_valid(m);
  tml::Model s = tml::simplify(m);
  std::string text = tml::print_model(s);
  if (out.empty()) say(text);
  else write_file(out, text);
  return kOk;
}

int cmd_paths(const std::string& file, const std::string& thing,
              const std::string& from, const std::string& to) {
  tml::Model m = load_model(file);
  require_valid(m);
  std::optional<std::vector<tml::StageRef>> p;
  try {
    p = tml::flow_path(m, parse_stage_arg(from), parse_stage_arg(to), thing);
  } catch (const tml::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  if (!p) {
    say("not reachable\n");
    return kInvalid;
  }
  std::ostringstream os;
  for (size_t i = 0; i < p->size(); ++i)
    os << (i ? " -> " : "") << (*p)[i].str();
  os << "\n";
  say(os.str());
  return kOk;
}

int cmd_elementary(const std::string& file) {
  tml::Model m = load_model(file);
  require_valid(m);
  auto r = tml::elementary_thimacs(m);
  std::ostringstream os;
  for (const auto& id : r.ids) os << id << "\n";
  for (const auto& c : r.conflicts) os << "conflict: " << c << "\n";
  say(os.str());
  return kOk;
}

int cmd_events(const std::string& file) {
  tml::Model m = load_model(file);
  require_valid(m);
  std::ostringstream os;
  for (const auto& e : m.events()) {
    os << e.id;
    if (!e.description.empty()) os << " \"" << e.description << "\"";
    os << " anchor " << e.anchor.str();
    if (!e.parent.empty()) os << " within " << e.parent;
    os << "\n";
  }
  auto h = tml::infer_hierarchy(m);
  for (const auto& [outer, inner] : h.pairs)
    os << "contains " << outer << " " << inner << "\n";
  for (const auto& msg : h.mismatches) os << "mismatch: " << msg << "\n";
  say(os.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thinging-machine model toolkit"};
  app.set_version_flag("--version", kVersion);
  app.add_flag("--quiet,-q", g_quiet, "suppress normal output");
  app.require_subcommand(1);

  std::string file, report, config, trace_path, out;
  std::string view = "full", thing, from, to;
  std::optional<uint64_t> seed;
  std::optional<long> horizon;
  bool with_events = false, with_stats = false;
  bool no_triggers = false, flat = false;

  auto* validate = app.add_subcommand("validate", "check a model");
  validate->add_option("file", file)->required();
  validate->add_option("--report", report, "write findings as JSON");

  auto* simulate = app.add_subcommand("simulate", "run a model");
  simulate->add_option("file", file)->required();
  simulate->add_option("--config", config, "key=value simulation config");
  simulate->add_option("--seed", seed);
  simulate->add_option("--horizon", horizon);
  simulate->add_option("--trace", trace_path, "write the trace here");
  simulate->add_flag("--events", with_events,
                     "also write occurrences CSV and chronology DOT");
  simulate->add_flag("--stats", with_stats);

  auto* render = app.add_subcommand("render", "emit graph text");
  render->add_option("file", file)->required();
  render->add_option("--view", view, "full|simplified");
  render->add_option("--out", out);
  render->add_flag("--no-triggers", no_triggers);
  render->add_flag("--flat", flat, "no thimac clusters");

  auto* simplify = app.add_subcommand("simplify", "contract to create/process");
  simplify->add_option("file", file)->required();
  simplify->add_option("--out", out);

  auto* paths = app.add_subcommand("paths", "shortest flow path");
  paths->add_option("file", file)->required();
  paths->add_option("--thing", thing)->required();
  paths->add_option("--from", from)->required();
  paths->add_option("--to", to)->required();

  auto* elementary = app.add_subcommand("elementary", "list elementary thimacs");
  elementary->add_option("file", file)->required();

  auto* events = app.add_subcommand("events", "event definitions and nesting");
  events->add_option("file", file)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(file, report);
    if (simulate->parsed())
      return cmd_simulate(file, config, seed, horizon, trace_path,
                          with_events, with_stats);
    if (render->parsed()) return cmd_render(file, view, out, no_triggers, flat);
    if (simplify->parsed()) return cmd_simplify(file, out);
    if (paths->parsed()) return cmd_paths(file, thing, from, to);
    if (elementary->parsed()) return cmd_elementary(file);
    if (events->parsed()) return cmd_events(file);
  } catch (const CliExit& e) {
    return e.code;
  } catch (const tml::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kUsage;
}
