#include "tml/render.hpp"

#include <cctype>
#include <map>
#include <set>
#include <sstream>

#include "tml/analysis.hpp"

namespace tml {

namespace {

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::string node_id(const StageRef& s) { return s.thimac + "/" + to_string(s.stage); }
std::string boundary_id(const std::string& thimac) { return thimac + "/boundary"; }
std::string link_node(const LinkEnd& e) {
  return e.stage ? node_id({e.thimac, *e.stage}) : boundary_id(e.thimac);
}

void emit_thimac(std::ostringstream& os, const Model& m, const Thimac& t,
                 const std::set<std::string>& boundaries, int depth) {
  std::string ind(size_t(depth) * 2, ' ');
  os << ind << "subgraph \"cluster_" << esc(t.id) << "\" {\n";
  os << ind << "  label=\"" << esc(t.name) << "\";\n";
  for (StageKind k : t.stages) {
    StageRef s{t.id, k};
    os << ind << "  \"" << esc(node_id(s)) << "\" [label=\"" << to_string(k)
       << "\"];\n";
  }
  if (boundaries.count(t.id))
    os << ind << "  \"" << esc(boundary_id(t.id))
       << "\" [shape=point, label=\"\"];\n";
  for (const auto& child : t.children)
    emit_thimac(os, m, m.thimac(child), boundaries, depth + 1);
  os << ind << "}\n";
}

}  // namespace

std::string model_to_graphtext(const Model& m, const RenderOptions& opts) {
  if (opts.view == RenderView::Simplified) {
    Model s = simplify(m);
    RenderOptions o = opts;
    o.view = RenderView::Full;
    return model_to_graphtext(s, o);
  }

  std::set<std::string> boundaries;
  for (const auto& l : m.links()) {
    if (!l.source.stage) boundaries.insert(l.source.thimac);
    if (!l.target.stage) boundaries.insert(l.target.thimac);
  }

  std::ostringstream os;
  os << "digraph \"" << esc(m.name()) << "\" {\n";
  os << "  rankdir=LR;\n";
  os << "  node [shape=box];\n";
  if (opts.cluster_by_thimac) {
    for (const auto& t : m.thimacs())
      if (t.parent.empty()) emit_thimac(os, m, t, boundaries, 1);
  } else {
    for (const auto& t : m.thimacs())
      for (StageKind k : t.stages) {
        StageRef s{t.id, k};
        os << "  \"" << esc(node_id(s)) << "\" [label=\""
           << esc(t.id + " " + to_string(k)) << "\"];\n";
      }
    for (const auto& b : boundaries)
      os << "  \"" << esc(boundary_id(b)) << "\" [shape=point, label=\"\"];\n";
  }
  for (const auto& a : m.flow_arcs()) {
    os << "  \"" << esc(node_id(a.source)) << "\" -> \""
       << esc(node_id(a.target)) << "\" [label=\"" << esc(a.thing) << "\"";
    if (a.blockable) os << ", color=\"black:invis:black\"";
    os << "];\n";
  }
  for (const auto& l : m.links()) {
    os << "  \"" << esc(link_node(l.source)) << "\" -> \""
       << esc(link_node(l.target)) << "\" [label=\"" << esc(l.thing)
       << "\", arrowhead=vee];\n";
  }
  if (opts.show_triggers) {
    for (const auto& a : m.trigger_arcs()) {
      std::string label;
      if (a.guard) label = guard_to_string(a.guard);
      if (!a.join_group.empty()) {
        if (!label.empty()) label += " ";
        label += "join " + a.join_group;
      }
      os << "  \"" << esc(node_id(a.source)) << "\" -> \""
         << esc(node_id(a.target)) << "\" [style=dashed";
      if (!label.empty()) os << ", label=\"" << esc(label) << "\"";
      os << "];\n";
    }
  }
  os << "}\n";
  return os.str();
}

std::string chronology_to_graphtext(const Chronology& c, const Model& m) {
  // Reject cyclic input up front; the renderer promises a precedence DAG.
  std::map<std::string, std::vector<std::string>> succ;
  for (const auto& [a, b] : c.edges) succ[a].push_back(b);
  std::map<std::string, int> state;  // 0 new, 1 open, 2 done
  for (const auto& start : c.events) {
    std::vector<std::pair<std::string, size_t>> stack{{start, 0}};
    while (!stack.empty()) {
      auto& [id, i] = stack.back();
      if (state[id] == 2) {
        stack.pop_back();
        continue;
      }
      state[id] = 1;
      if (i < succ[id].size()) {
        const std::string& nxt = succ[id][i++];
        if (state[nxt] == 1)
          throw Error(ErrorCode::CyclicInput,
                      "chronology has a cycle through '" + nxt + "'");
        if (state[nxt] == 0) stack.emplace_back(nxt, 0);
      } else {
        state[id] = 2;
        stack.pop_back();
      }
    }
  }

  std::ostringstream os;
  os << "digraph \"" << esc(m.name()) << " chronology\" {\n";
  os << "  rankdir=LR;\n";
  os << "  node [shape=box];\n";
  for (const auto& id : c.events) {
    std::string label = id;
    if (const EventDef* e = m.find_event(id))
      if (!e->description.empty()) label += ": " + e->description;
    os << "  \"" << esc(id) << "\" [label=\"" << esc(label) << "\"];\n";
  }
  for (const auto& [a, b] : c.edges)
    os << "  \"" << esc(a) << "\" -> \"" << esc(b) << "\";\n";
  os << "}\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Minimal DOT structural checker

namespace {

struct DotTok {
  enum Kind { Id, Str, Punct, End } kind = End;
  std::string text;
};

class DotLexer {
 public:
  explicit DotLexer(const std::string& s) : s_(s) {}
  DotTok next() {
    while (i_ < s_.size() && (isspace(uint8_t(s_[i_])))) ++i_;
    if (i_ >= s_.size()) return {DotTok::End, ""};
    char c = s_[i_];
    if (c == '"') {
      std::string out;
      ++i_;
      while (i_ < s_.size() && s_[i_] != '"') {
        if (s_[i_] == '\\' && i_ + 1 < s_.size()) ++i_;
        out += s_[i_++];
      }
      if (i_ >= s_.size()) return {DotTok::Punct, "!unterminated"};
      ++i_;
      return {DotTok::Str, out};
    }
    if (isalnum(uint8_t(c)) || c == '_' || c == '.') {
      std::string out;
      while (i_ < s_.size() &&
             (isalnum(uint8_t(s_[i_])) || s_[i_] == '_' || s_[i_] == '.'))
        out += s_[i_++];
      return {DotTok::Id, out};
    }
    if (c == '-' && i_ + 1 < s_.size() && (s_[i_ + 1] == '>' || s_[i_ + 1] == '-')) {
      i_ += 2;
      return {DotTok::Punct, s_[i_ - 1] == '>' ? "->" : "--"};
    }
    ++i_;
    return {DotTok::Punct, std::string(1, c)};
  }

 private:
  const std::string& s_;
  size_t i_ = 0;
};

class DotChecker {
 public:
  explicit DotChecker(const std::string& s) : lex_(s) { advance(); }

  bool run(std::string* reason) {
    bool ok = graph();
    if (!ok && reason) *reason = reason_;
    if (ok && reason) reason->clear();
    return ok;
  }

 private:
  void advance() { tok_ = lex_.next(); }
  bool fail(const std::string& why) {
    if (reason_.empty()) reason_ = why;
    return false;
  }
  bool is_punct(const char* p) const {
    return tok_.kind == DotTok::Punct && tok_.text == p;
  }
  bool name() {  // node name or value
    if (tok_.kind != DotTok::Id && tok_.kind != DotTok::Str) return false;
    advance();
    return true;
  }

  bool graph() {
    if (tok_.kind != DotTok::Id ||
        (tok_.text != "digraph" && tok_.text != "graph"))
      return fail("expected digraph/graph");
    advance();
    if (tok_.kind == DotTok::Id || tok_.kind == DotTok::Str) advance();
    if (!body()) return false;
    if (tok_.kind != DotTok::End) return fail("trailing text after graph");
    return true;
  }

  bool body() {
    if (!is_punct("{")) return fail("expected '{'");
    advance();
    while (!is_punct("}")) {
      if (tok_.kind == DotTok::End) return fail("unbalanced braces");
      if (!statement()) return false;
    }
    advance();
    return true;
  }

  bool statement() {
    if (tok_.kind == DotTok::Id && tok_.text == "subgraph") {
      advance();
      if (tok_.kind == DotTok::Id || tok_.kind == DotTok::Str) advance();
      return body();
    }
    if (!name()) return fail("expected node name or attribute");
    if (is_punct("=")) {  // graph attribute
      advance();
      if (!name()) return fail("expected attribute value");
    } else {
      while (is_punct("->") || is_punct("--")) {
        advance();
        if (!name()) return fail("expected edge target");
      }
      if (is_punct("[") && !attrs()) return false;
    }
    if (is_punct(";")) advance();
    return true;
  }

  bool attrs() {
    advance();  // '['
    while (!is_punct("]")) {
      if (tok_.kind != DotTok::Id) return fail("expected attribute name");
      advance();
      if (!is_punct("=")) return fail("expected '=' in attribute");
      advance();
      if (!name()) return fail("expected attribute value");
      if (is_punct(",")) advance();
    }
    advance();
    return true;
  }

  DotLexer lex_;
  DotTok tok_;
  std::string reason_;
};

}  // namespace

bool dot_validate(const std::string& text, std::string* reason) {
  return DotChecker(text).run(reason);
}

}  // namespace tml
