#include "tml/dsl.hpp"

#include <cctype>
#include <sstream>

namespace tml {
namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { Ident, Int, String, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  SourceSpan span;
};

class Lexer {
 public:
  Lexer(const std::string& src, const std::string& file,
        std::vector<ParseDiagnostic>& diags)
      : src_(src), file_(file), diags_(diags) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_ws();
      if (pos_ >= src_.size()) break;
      size_t start = pos_;
      int line = line_, col = col_;
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                src_[pos_] == '_'))
          advance();
        out.push_back(make(Tok::Ident, start, line, col));
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        while (pos_ < src_.size() &&
               std::isdigit(static_cast<unsigned char>(src_[pos_])))
          advance();
        out.push_back(make(Tok::Int, start, line, col));
      } else if (c == '"') {
        advance();
        while (pos_ < src_.size() && src_[pos_] != '"' && src_[pos_] != '\n')
          advance();
        if (pos_ >= src_.size() || src_[pos_] != '"') {
          error("unterminated string", line, col);
        } else {
          advance();
        }
        Token t = make(Tok::String, start, line, col);
        t.text = t.text.substr(1, t.text.size() >= 2 ? t.text.size() - 2
                                                     : std::string::npos);
        out.push_back(std::move(t));
      } else {
        static const char* kTwo[] = {"->", "..", "==", "!=", "<=", ">="};
        std::string two = src_.substr(pos_, 2);
        bool matched = false;
        for (const char* p : kTwo) {
          if (two == p) {
            advance();
            advance();
            out.push_back(make(Tok::Punct, start, line, col));
            matched = true;
            break;
          }
        }
        if (!matched) {
          if (std::string("{}();:,.=<>+-").find(c) != std::string::npos) {
            advance();
            out.push_back(make(Tok::Punct, start, line, col));
          } else {
            error(std::string("unexpected character '") + c + "'", line, col);
            advance();
          }
        }
      }
    }
    Token end;
    end.kind = Tok::End;
    end.span = {file_, line_, col_, col_};
    out.push_back(end);
    return out;
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_ws() {
    for (;;) {
      while (pos_ < src_.size() &&
             std::isspace(static_cast<unsigned char>(src_[pos_])))
        advance();
      if (pos_ + 1 < src_.size() && src_[pos_] == '/' && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        continue;
      }
      break;
    }
  }

  Token make(Tok kind, size_t start, int line, int col) {
    Token t;
    t.kind = kind;
    t.text = src_.substr(start, pos_ - start);
    t.span = {file_, line, col, col + static_cast<int>(pos_ - start) - 1};
    return t;
  }

  void error(const std::string& msg, int line, int col) {
    diags_.push_back({Severity::Error, msg, {file_, line, col, col}});
  }

  const std::string& src_;
  std::string file_;
  std::vector<ParseDiagnostic>& diags_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser

struct ParseAbort {};  // thrown to recover at the next item boundary

class Parser {
 public:
  Parser(std::vector<Token> toks, std::vector<ParseDiagnostic>& diags)
      : toks_(std::move(toks)), diags_(diags) {}

  std::optional<Model> run() {
    Model m;
    try {
      expect_kw("model");
      m.set_name(expect_ident());
      expect_punct("{");
      while (!at_punct("}") && !at_end()) parse_item(m);
      expect_punct("}");
      if (!at_end()) err_here("trailing input after model");
    } catch (ParseAbort&) {
      return std::nullopt;
    }
    if (has_error()) return std::nullopt;
    if (m.thimacs().empty()) {
      diags_.push_back({Severity::Error, "model has no thimac", cur().span});
      return std::nullopt;
    }
    return m;
  }

 private:
  bool has_error() const {
    for (auto& d : diags_)
      if (d.severity == Severity::Error) return true;
    return false;
  }

  const Token& cur() const { return toks_[i_]; }
  bool at_end() const { return cur().kind == Tok::End; }
  bool at_punct(const std::string& p) const {
    return cur().kind == Tok::Punct && cur().text == p;
  }
  bool at_kw(const std::string& k) const {
    return cur().kind == Tok::Ident && cur().text == k;
  }
  void next() {
    if (!at_end()) ++i_;
  }

  [[noreturn]] void fail(const std::string& msg, const SourceSpan& span) {
    diags_.push_back({Severity::Error, msg, span});
    throw ParseAbort{};
  }
  [[noreturn]] void err_here(const std::string& msg) { fail(msg, cur().span); }

  void expect_punct(const std::string& p) {
    if (!at_punct(p)) err_here("expected '" + p + "'");
    next();
  }
  void expect_kw(const std::string& k) {
    if (!at_kw(k)) err_here("expected '" + k + "'");
    next();
  }
  bool eat_kw(const std::string& k) {
    if (at_kw(k)) {
      next();
      return true;
    }
    return false;
  }
  std::string expect_ident() {
    if (cur().kind != Tok::Ident) err_here("expected identifier");
    std::string s = cur().text;
    next();
    return s;
  }
  int expect_int() {
    bool neg = false;
    if (at_punct("-")) {
      neg = true;
      next();
    }
    if (cur().kind != Tok::Int) err_here("expected integer");
    int v = std::stoi(cur().text);
    next();
    return neg ? -v : v;
  }
  std::string expect_string() {
    if (cur().kind != Tok::String) err_here("expected string literal");
    std::string s = cur().text;
    next();
    return s;
  }

  // Semantic checks happen in the Model builders; convert their exceptions
  // into diagnostics at the span of the offending item.
  template <typename F>
  void checked(const SourceSpan& span, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      diags_.push_back({Severity::Error, e.what(), span});
    }
  }

  void parse_item(Model& m) {
    if (at_kw("thimac")) return parse_thimac(m, "");
    if (at_kw("flow")) return parse_flow(m);
    if (at_kw("trigger")) return parse_trigger(m);
    if (at_kw("thing")) return parse_thing(m);
    if (at_kw("event")) return parse_event(m);
    if (at_kw("chronology")) return parse_chronology(m);
    if (at_kw("link")) return parse_link(m);
    err_here("expected item (thimac, flow, trigger, thing, event, chronology)");
  }

  void parse_thimac(Model& m, const std::string& parent) {
    SourceSpan span = cur().span;
    expect_kw("thimac");
    std::string name = expect_ident();
    std::optional<bool> hint;
    if (eat_kw("elementary")) hint = true;
    checked(span, [&] { m.add_thimac(parent, name); });
    std::string id = parent.empty() ? name : parent + "." + name;
    if (hint && m.find_thimac(id)) m.set_elementary_hint(id, *hint);
    expect_punct("{");
    while (!at_punct("}") && !at_end()) {
      if (at_kw("thimac")) {
        parse_thimac(m, id);
      } else if (at_kw("stages")) {
        parse_stages(m, id);
      } else if (at_kw("var")) {
        parse_var(m, id);
      } else if (at_kw("on")) {
        parse_action(m, id);
      } else {
        err_here("expected thimac member (thimac, stages, var, on)");
      }
    }
    expect_punct("}");
  }

  StageKind expect_stage() {
    SourceSpan span = cur().span;
    std::string s = expect_ident();
    auto k = stage_from_string(s);
    if (!k) fail("expected stage name, got '" + s + "'", span);
    return *k;
  }

  void parse_stages(Model& m, const std::string& id) {
    SourceSpan span = cur().span;
    expect_kw("stages");
    for (;;) {
      StageKind k = expect_stage();
      checked(span, [&] { m.add_stage(id, k); });
      if (at_punct(",")) {
        next();
        continue;
      }
      break;
    }
    expect_punct(";");
  }

  void parse_var(Model& m, const std::string& id) {
    SourceSpan span = cur().span;
    expect_kw("var");
    StateVar v;
    v.name = expect_ident();
    expect_punct("=");
    v.init = expect_int();
    if (eat_kw("in")) {
      v.min = expect_int();
      expect_punct("..");
      v.max = expect_int();
    }
    expect_punct(";");
    checked(span, [&] { m.add_var(id, std::move(v)); });
  }

  ActionStmt parse_stmt() {
    ActionStmt s;
    if (eat_kw("set")) {
      s.kind = ActionKind::Set;
      s.var = expect_ident();
      s.expr = parse_set_expr();
    } else if (eat_kw("inc") || (at_kw("dec") && (s.kind = ActionKind::Dec,
                                                  next(), true))) {
      if (s.kind != ActionKind::Dec) s.kind = ActionKind::Inc;
      s.var = expect_ident();
      if (eat_kw("mod")) s.mod = expect_int();
    } else if (eat_kw("block")) {
      s.kind = ActionKind::Block;
      s.arc = expect_ident();
    } else if (eat_kw("unblock")) {
      s.kind = ActionKind::Unblock;
      s.arc = expect_ident();
    } else {
      err_here("expected statement (set, inc, dec, block, unblock)");
    }
    return s;
  }

  std::vector<ActionStmt::Atom> parse_set_expr() {
    std::vector<ActionStmt::Atom> out;
    int sign = 1;
    if (at_punct("-")) {
      sign = -1;
      next();
    }
    for (;;) {
      ActionStmt::Atom a;
      a.sign = sign;
      if (cur().kind == Tok::Int) {
        a.value = expect_int();
      } else {
        a.is_var = true;
        a.var = expect_ident();
      }
      out.push_back(std::move(a));
      if (at_punct("+")) {
        sign = 1;
        next();
      } else if (at_punct("-")) {
        sign = -1;
        next();
      } else {
        break;
      }
    }
    return out;
  }

  void parse_action(Model& m, const std::string& id) {
    SourceSpan span = cur().span;
    expect_kw("on");
    ActionDecl d;
    d.stage = expect_stage();
    expect_punct(":");
    d.stmts.push_back(parse_stmt());
    while (at_punct(";")) {
      next();
      if (at_punct("}") || at_kw("thimac") || at_kw("stages") || at_kw("var") ||
          at_kw("on"))
        break;  // trailing ';' ended the declaration
      d.stmts.push_back(parse_stmt());
    }
    checked(span, [&] { m.add_action(id, std::move(d)); });
  }

  // PATH "." stage — dotted thimac path ending in a stage keyword.
  StageRef parse_stageref() {
    SourceSpan span = cur().span;
    std::vector<std::string> parts;
    parts.push_back(expect_ident());
    while (at_punct(".")) {
      next();
      parts.push_back(expect_ident());
    }
    if (parts.size() < 2)
      fail("expected dotted stage reference (Thimac.stage)", span);
    auto k = stage_from_string(parts.back());
    if (!k) fail("stage reference must end in a stage name", span);
    std::string path = parts[0];
    for (size_t i = 1; i + 1 < parts.size(); ++i) path += "." + parts[i];
    return {path, *k};
  }

  void parse_flow(Model& m) {
    SourceSpan span = cur().span;
    expect_kw("flow");
    FlowArc a;
    a.id = expect_ident();
    expect_punct(":");
    a.source = parse_stageref();
    expect_punct("->");
    a.target = parse_stageref();
    if (eat_kw("thing")) {
      a.thing = expect_ident();
    } else {
      // Implicit thing label: allowed only when the model declares exactly
      // one thing type.
      if (m.thing_types().size() == 1) {
        a.thing = m.thing_types()[0].name;
      } else {
        diags_.push_back({Severity::Error,
                          "flow " + a.id +
                              ": thing label required (model does not declare "
                              "exactly one thing type)",
                          span});
      }
    }
    if (eat_kw("blockable")) a.blockable = true;
    expect_punct(";");
    checked(span, [&] { m.add_flow(std::move(a)); });
  }

  GuardOperand parse_operand() {
    GuardOperand o;
    if (cur().kind == Tok::Int || at_punct("-")) {
      o.value = expect_int();
    } else {
      o.is_var = true;
      o.var = expect_ident();
    }
    return o;
  }

  GuardPtr parse_guard() { return parse_or(); }

  GuardPtr parse_or() {
    GuardPtr g = parse_and();
    while (at_kw("or")) {
      next();
      g = GuardExpr::bor(g, parse_and());
    }
    return g;
  }

  GuardPtr parse_and() {
    GuardPtr g = parse_not();
    while (at_kw("and")) {
      next();
      g = GuardExpr::band(g, parse_not());
    }
    return g;
  }

  GuardPtr parse_not() {
    if (eat_kw("not")) return GuardExpr::bnot(parse_not());
    if (at_punct("(")) {
      next();
      GuardPtr g = parse_guard();
      expect_punct(")");
      return g;
    }
    GuardOperand lhs = parse_operand();
    CmpOp op;
    if (at_punct("==")) op = CmpOp::Eq;
    else if (at_punct("!=")) op = CmpOp::Ne;
    else if (at_punct("<=")) op = CmpOp::Le;
    else if (at_punct(">=")) op = CmpOp::Ge;
    else if (at_punct("<")) op = CmpOp::Lt;
    else if (at_punct(">")) op = CmpOp::Gt;
    else { err_here("expected comparison operator"); }
    next();
    GuardOperand rhs = parse_operand();
    return GuardExpr::cmp(std::move(lhs), op, std::move(rhs));
  }

  void parse_trigger(Model& m) {
    SourceSpan span = cur().span;
    expect_kw("trigger");
    TriggerArc a;
    a.id = "t" + std::to_string(m.trigger_arcs().size() + 1);
    a.source = parse_stageref();
    expect_punct("->");
    a.target = parse_stageref();
    if (eat_kw("when")) a.guard = parse_guard();
    if (eat_kw("join")) a.join_group = expect_ident();
    expect_punct(";");
    checked(span, [&] { m.add_trigger(std::move(a)); });
  }

  void parse_thing(Model& m) {
    SourceSpan span = cur().span;
    expect_kw("thing");
    ThingType t;
    t.name = expect_ident();
    if (eat_kw("of")) {
      t.parent_thimac = expect_ident();
      while (at_punct(".")) {
        next();
        t.parent_thimac += "." + expect_ident();
      }
    }
    expect_punct(";");
    checked(span, [&] { m.add_thing(std::move(t)); });
  }

  void parse_event(Model& m) {
    SourceSpan span = cur().span;
    expect_kw("event");
    EventDef e;
    e.id = expect_ident();
    e.description = expect_string();
    expect_kw("region");
    expect_punct("{");
    while (!at_punct("}") && !at_end()) {
      RegionElem el;
      if (eat_kw("arc")) {
        el.is_arc = true;
        el.arc = expect_ident();
      } else {
        el.stage = parse_stageref();
      }
      e.region.push_back(std::move(el));
    }
    expect_punct("}");
    if (eat_kw("within")) e.parent = expect_ident();
    expect_punct(";");
    checked(span, [&] { m.add_event(std::move(e)); });
  }

  void parse_chronology(Model& m) {
    SourceSpan span = cur().span;
    expect_kw("chronology");
    ChronologyDecl c;
    c.events.push_back(expect_ident());
    if (!at_punct("->")) err_here("chronology needs '->'");
    while (at_punct("->")) {
      next();
      c.events.push_back(expect_ident());
    }
    expect_punct(";");
    checked(span, [&] { m.add_chronology(std::move(c)); });
  }

  LinkEnd parse_linkref() {
    std::vector<std::string> parts;
    parts.push_back(expect_ident());
    while (at_punct(".")) {
      next();
      parts.push_back(expect_ident());
    }
    LinkEnd e;
    auto k = stage_from_string(parts.back());
    size_t n = parts.size();
    if (k && n >= 2) {
      e.stage = *k;
      --n;
    }
    e.thimac = parts[0];
    for (size_t i = 1; i < n; ++i) e.thimac += "." + parts[i];
    return e;
  }

  void parse_link(Model& m) {
    SourceSpan span = cur().span;
    expect_kw("link");
    Link l;
    l.id = expect_ident();
    expect_punct(":");
    l.source = parse_linkref();
    expect_punct("->");
    l.target = parse_linkref();
    if (eat_kw("thing")) l.thing = expect_ident();
    while (eat_kw("note")) l.notes.push_back(expect_string());
    expect_punct(";");
    checked(span, [&] { m.add_link(std::move(l)); });
  }

  std::vector<Token> toks_;
  std::vector<ParseDiagnostic>& diags_;
  size_t i_ = 0;
};

// ---------------------------------------------------------------------------
// Printer

class Printer {
 public:
  explicit Printer(const Model& m) : m_(m) {}

  std::string run() {
    out_ << "model " << m_.name() << " {\n";
    for (auto [kind, idx] : m_.items()) {
      switch (kind) {
        case Model::ItemKind::Thimac: {
          // Root thimacs are recorded by index into the thimac vector.
          print_thimac(m_.thimacs()[idx], 1);
          break;
        }
        case Model::ItemKind::Thing: print_thing(m_.thing_types()[idx]); break;
        case Model::ItemKind::Flow: print_flow(m_.flow_arcs()[idx]); break;
        case Model::ItemKind::Trigger:
          print_trigger(m_.trigger_arcs()[idx]);
          break;
        case Model::ItemKind::Event: print_event(m_.events()[idx]); break;
        case Model::ItemKind::Chronology:
          print_chronology(m_.chronologies()[idx]);
          break;
        case Model::ItemKind::Link: print_link(m_.links()[idx]); break;
      }
    }
    out_ << "}\n";
    return out_.str();
  }

 private:
  void indent(int n) {
    for (int i = 0; i < n; ++i) out_ << "  ";
  }

  void print_thimac(const Thimac& t, int depth) {
    indent(depth);
    out_ << "thimac " << t.name;
    if (t.is_elementary_hint && *t.is_elementary_hint) out_ << " elementary";
    bool empty = t.stages.empty() && t.state_vars.empty() &&
                 t.actions.empty() && t.children.empty();
    if (empty) {
      out_ << " { }\n";
      return;
    }
    out_ << " {\n";
    if (!t.stages.empty()) {
      indent(depth + 1);
      out_ << "stages ";
      for (size_t i = 0; i < t.stages.size(); ++i) {
        if (i) out_ << ", ";
        out_ << to_string(t.stages[i]);
      }
      out_ << ";\n";
    }
    for (const auto& v : t.state_vars) {
      indent(depth + 1);
      out_ << "var " << v.name << " = " << v.init;
      if (v.min && v.max) out_ << " in " << *v.min << ".." << *v.max;
      out_ << ";\n";
    }
    for (const auto& d : t.actions) {
      indent(depth + 1);
      out_ << "on " << to_string(d.stage) << ": ";
      for (size_t i = 0; i < d.stmts.size(); ++i) {
        if (i) out_ << "; ";
        out_ << action_to_string(d.stmts[i]);
      }
      out_ << ";\n";
    }
    for (const auto& c : t.children) print_thimac(m_.thimac(c), depth + 1);
    indent(depth);
    out_ << "}\n";
  }

  void print_thing(const ThingType& t) {
    indent(1);
    out_ << "thing " << t.name;
    if (!t.parent_thimac.empty()) out_ << " of " << t.parent_thimac;
    out_ << ";\n";
  }

  void print_flow(const FlowArc& a) {
    indent(1);
    out_ << "flow " << a.id << ": " << a.source.str() << " -> "
         << a.target.str() << " thing " << a.thing;
    if (a.blockable) out_ << " blockable";
    out_ << ";\n";
  }

  void print_trigger(const TriggerArc& a) {
    indent(1);
    out_ << "trigger " << a.source.str() << " -> " << a.target.str();
    if (a.guard) out_ << " when " << guard_to_string(a.guard);
    if (!a.join_group.empty()) out_ << " join " << a.join_group;
    out_ << ";\n";
  }

  void print_event(const EventDef& e) {
    indent(1);
    out_ << "event " << e.id << " \"" << e.description << "\" region {";
    for (const auto& el : e.region) {
      out_ << " ";
      if (el.is_arc)
        out_ << "arc " << el.arc;
      else
        out_ << el.stage.str();
    }
    out_ << " }";
    if (!e.parent.empty()) out_ << " within " << e.parent;
    out_ << ";\n";
  }

  void print_chronology(const ChronologyDecl& c) {
    indent(1);
    out_ << "chronology";
    for (size_t i = 0; i < c.events.size(); ++i)
      out_ << (i ? " -> " : " ") << c.events[i];
    out_ << ";\n";
  }

  void print_link(const Link& l) {
    indent(1);
    out_ << "link " << l.id << ": " << l.source.str() << " -> "
         << l.target.str();
    if (!l.thing.empty()) out_ << " thing " << l.thing;
    for (const auto& n : l.notes) out_ << " note \"" << n << "\"";
    out_ << ";\n";
  }

  const Model& m_;
  std::ostringstream out_;
};

}  // namespace

ParseResult parse_model(const std::string& text, const std::string& filename) {
  ParseResult res;
  Lexer lex(text, filename, res.diagnostics);
  std::vector<Token> toks = lex.run();
  Parser p(std::move(toks), res.diagnostics);
  auto m = p.run();
  for (const auto& d : res.diagnostics) {
    if (d.severity == Severity::Error) {
      m.reset();
      break;
    }
  }
  if (m) {
    try {
      m->check_invariants();
    } catch (const Error& e) {
      res.diagnostics.push_back(
          {Severity::Error, e.what(), {filename, 1, 1, 1}});
      m.reset();
    }
  }
  res.model = std::move(m);
  return res;
}

std::string print_model(const Model& m) { return Printer(m).run(); }

}  // namespace tml
