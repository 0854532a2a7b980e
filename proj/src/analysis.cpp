#include "tml/analysis.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>

namespace tml {

namespace {

bool surviving(StageKind k) {
  return k == StageKind::Create || k == StageKind::Process;
}

bool same_machine(const FlowArc& a) { return a.source.thimac == a.target.thimac; }

std::set<std::string> subtree_of(const Model& m, const std::string& id) {
  std::set<std::string> s{id};
  for (const auto& d : m.lookup_subthings(id)) s.insert(d);
  return s;
}

// arcs_chainable plus the routing rule the simulator applies: a thing that
// arrives at a transfer from another machine takes that machine's own entry
// arcs when any exist, and only passes through otherwise.
bool chainable_in(const std::vector<const FlowArc*>& arcs, const FlowArc& in,
                  const FlowArc& out) {
  if (!arcs_chainable(in, out)) return false;
  if (in.target.stage == StageKind::Transfer && !same_machine(in) &&
      !same_machine(out)) {
    for (const FlowArc* c : arcs)
      if (c->source == in.target && same_machine(*c)) return false;
  }
  return true;
}

}  // namespace

bool ValidationReport::has_errors() const { return error_count() > 0; }

size_t ValidationReport::error_count() const {
  size_t n = 0;
  for (const auto& f : findings)
    if (f.severity == Severity::Error) ++n;
  return n;
}

std::string ValidationReport::to_text() const {
  std::ostringstream os;
  for (const auto& f : findings) {
    os << f.rule << '\t'
       << (f.severity == Severity::Error ? "error" : "warning") << '\t'
       << f.element << '\t' << f.message << '\n';
  }
  return os.str();
}

ValidationReport validate(const Model& m) {
  ValidationReport r;
  auto add = [&](const char* rule, Severity sev, const std::string& elem,
                 const std::string& msg) {
    r.findings.push_back({rule, sev, elem, msg});
  };

  // V1: every flow arc obeys the stage legality table; contracted links
  // connect surviving stages or boundaries only.
  for (const auto& a : m.flow_arcs()) {
    if (!m.stage_exists(a.source) || !m.stage_exists(a.target)) {
      add("V1", Severity::Error, a.id, "flow references a missing stage");
      continue;
    }
    if (!stage_flow_legal(a.source.stage, a.target.stage, same_machine(a)))
      add("V1", Severity::Error, a.id,
          std::string("illegal flow ") + to_string(a.source.stage) + " -> " +
              to_string(a.target.stage) +
              (same_machine(a) ? " within a machine" : " between machines"));
    if (m.find_thing(a.thing) == nullptr)
      add("V1", Severity::Error, a.id, "unknown thing '" + a.thing + "'");
  }
  for (const auto& l : m.links()) {
    for (const LinkEnd* e : {&l.source, &l.target}) {
      if (m.find_thimac(e->thimac) == nullptr)
        add("V1", Severity::Error, l.id,
            "link references unknown thimac '" + e->thimac + "'");
      else if (e->stage && !surviving(*e->stage))
        add("V1", Severity::Error, l.id,
            "link endpoint must be a create or process stage");
      else if (e->stage &&
               !m.stage_exists(StageRef{e->thimac, *e->stage}))
        add("V1", Severity::Error, l.id,
            "link references missing stage " + e->str());
    }
  }

  // V2: every release stage can reach a transfer along flow arcs.
  for (const auto& t : m.thimacs()) {
    for (StageKind k : t.stages) {
      if (k != StageKind::Release) continue;
      StageRef start{t.id, k};
      std::deque<StageRef> q{start};
      std::set<std::string> seen{start.str()};
      bool found = false;
      while (!q.empty() && !found) {
        StageRef cur = q.front();
        q.pop_front();
        if (cur.stage == StageKind::Transfer) found = true;
        for (const auto& a : m.flow_arcs())
          if (a.source == cur && seen.insert(a.target.str()).second)
            q.push_back(a.target);
      }
      if (!found)
        add("V2", Severity::Warning, start.str(),
            "release stage has no flow path to a transfer");
    }
  }

  // V3: stages incident to no arc at all.
  for (const auto& t : m.thimacs()) {
    for (StageKind k : t.stages) {
      StageRef s{t.id, k};
      bool touched = false;
      for (const auto& a : m.flow_arcs())
        if (a.source == s || a.target == s) touched = true;
      for (const auto& a : m.trigger_arcs())
        if (a.source == s || a.target == s) touched = true;
      for (const auto& l : m.links())
        for (const LinkEnd* e : {&l.source, &l.target})
          if (e->thimac == t.id && e->stage && *e->stage == k) touched = true;
      if (!touched)
        add("V3", Severity::Warning, s.str(), "stage is not on any arc");
    }
  }

  // V4: guards read declared state variables only.
  for (const auto& a : m.trigger_arcs())
    for (const auto& v : guard_vars(a.guard))
      if (m.find_var(v) == nullptr)
        add("V4", Severity::Error, a.id,
            "guard reads undeclared variable '" + v + "'");

  // V5: AND-join groups need at least two member arcs.
  {
    std::map<std::string, int> groups;
    std::map<std::string, std::string> first_arc;
    for (const auto& a : m.trigger_arcs()) {
      if (a.join_group.empty()) continue;
      if (++groups[a.join_group] == 1) first_arc[a.join_group] = a.id;
    }
    for (const auto& [g, n] : groups)
      if (n < 2)
        add("V5", Severity::Error, first_arc[g],
            "join group '" + g + "' has a single member");
  }

  // V6: blockable arcs that nothing ever blocks or unblocks.
  for (const auto& a : m.flow_arcs()) {
    if (!a.blockable) continue;
    bool used = false;
    for (const auto& t : m.thimacs())
      for (const auto& d : t.actions)
        for (const auto& s : d.stmts)
          if ((s.kind == ActionKind::Block || s.kind == ActionKind::Unblock) &&
              s.arc == a.id)
            used = true;
    if (!used)
      add("V6", Severity::Warning, a.id,
          "blockable arc is never blocked or unblocked");
  }

  // V7: event regions and chronology declarations reference real elements;
  // a declared parent region must strictly contain the child region.
  auto region_set = [&](const EventDef& e) {
    std::set<std::string> s;
    for (const auto& el : e.region)
      s.insert(el.is_arc ? "A:" + el.arc : "S:" + el.stage.str());
    return s;
  };
  for (const auto& e : m.events()) {
    for (const auto& el : e.region) {
      if (el.is_arc) {
        bool found = m.find_flow(el.arc) != nullptr;
        for (const auto& t : m.trigger_arcs())
          if (t.id == el.arc) found = true;
        if (!found)
          add("V7", Severity::Error, e.id,
              "region references unknown arc '" + el.arc + "'");
      } else if (!m.stage_exists(el.stage)) {
        add("V7", Severity::Error, e.id,
            "region references missing stage " + el.stage.str());
      }
    }
    if (!e.parent.empty()) {
      const EventDef* p = m.find_event(e.parent);
      if (p == nullptr) {
        add("V7", Severity::Error, e.id,
            "unknown enclosing event '" + e.parent + "'");
      } else {
        auto ps = region_set(*p), cs = region_set(e);
        if (!(cs.size() < ps.size() &&
              std::includes(ps.begin(), ps.end(), cs.begin(), cs.end())))
          add("V7", Severity::Warning, e.id,
              "declared enclosing event '" + e.parent +
                  "' does not strictly contain this region");
      }
    }
  }
  for (const auto& c : m.chronologies())
    for (const auto& id : c.events)
      if (m.find_event(id) == nullptr)
        add("V7", Severity::Error, id, "chronology names unknown event");

  // V8: a machine uses receive, or the arrive/accept pair, not both.
  for (const auto& t : m.thimacs()) {
    bool recv = t.has_stage(StageKind::Receive);
    bool arr = t.has_stage(StageKind::Arrive) || t.has_stage(StageKind::Accept);
    if (recv && arr)
      add("V8", Severity::Error, t.id,
          "machine mixes receive with arrive/accept");
  }

  return r;
}

// ---------------------------------------------------------------------------
// Elementary thimacs

ElementaryResult elementary_thimacs(const Model& m) {
  ElementaryResult res;
  for (const auto& t : m.thimacs()) {
    auto sub = subtree_of(m, t.id);
    bool structural = true;
    // Flow into the subtree from outside means this thimac depends on
    // another machine's output.
    for (const auto& a : m.flow_arcs())
      if (sub.count(a.target.thimac) && !sub.count(a.source.thimac))
        structural = false;
    // A create stage triggered by a foreign machine, or by any processing,
    // is not self-originating.
    for (const auto& a : m.trigger_arcs())
      if (a.target.thimac == t.id && a.target.stage == StageKind::Create &&
          (a.source.thimac != t.id || a.source.stage == StageKind::Process))
        structural = false;
    bool hinted = t.is_elementary_hint.value_or(false);
    if (structural || hinted) res.ids.push_back(t.id);
    if (hinted && !structural)
      res.conflicts.push_back(
          t.id + ": hinted elementary but fed by another machine");
    if (t.is_elementary_hint && !*t.is_elementary_hint && structural)
      res.conflicts.push_back(
          t.id + ": hinted non-elementary but structurally self-contained");
  }
  return res;
}

// ---------------------------------------------------------------------------
// Subdiagrams

Subdiagram subdiagram(const Model& m, const std::string& thing) {
  const ThingType* t = m.find_thing(thing);
  if (t == nullptr)
    throw Error(ErrorCode::UnknownThingType, "unknown thing '" + thing + "'");
  std::set<std::string> names{thing};
  if (!t->parent_thimac.empty()) {
    auto sub = subtree_of(m, t->parent_thimac);
    for (const auto& other : m.thing_types())
      if (!other.parent_thimac.empty() && sub.count(other.parent_thimac))
        names.insert(other.name);
  }

  Subdiagram d;
  d.thing = thing;
  std::set<std::string> seen;
  for (const auto& a : m.flow_arcs()) {
    if (!names.count(a.thing)) continue;
    d.flow_arcs.push_back(a);
    for (const StageRef* s : {&a.source, &a.target})
      if (seen.insert(s->str()).second) d.stages.push_back(*s);
  }
  for (const auto& a : m.trigger_arcs())
    if (seen.count(a.source.str()) && seen.count(a.target.str()))
      d.trigger_arcs.push_back(a);
  return d;
}

// ---------------------------------------------------------------------------
// Paths

bool arcs_chainable(const FlowArc& in, const FlowArc& out) {
  if (in.target != out.source) return false;
  if (in.target.stage == StageKind::Transfer && same_machine(in))
    return !same_machine(out);  // outbound side of a transfer
  return true;
}

std::optional<std::vector<StageRef>> flow_path(const Model& m,
                                               const StageRef& from,
                                               const StageRef& to,
                                               const std::string& thing) {
  if (m.find_thing(thing) == nullptr)
    throw Error(ErrorCode::UnknownThingType, "unknown thing '" + thing + "'");
  for (const StageRef* s : {&from, &to})
    if (!m.stage_exists(*s))
      throw Error(ErrorCode::UnknownId, "unknown stage " + s->str());
  if (from == to) return std::vector<StageRef>{from};

  std::vector<const FlowArc*> arcs;
  for (const auto& a : m.flow_arcs())
    if (a.thing == thing) arcs.push_back(&a);

  // BFS over arcs; each arc enters the frontier once, in declaration order,
  // so the first arc reaching the target yields the shortest path with
  // earliest-declared arcs winning ties.
  std::map<const FlowArc*, const FlowArc*> parent;
  std::deque<const FlowArc*> q;
  for (const FlowArc* a : arcs)
    if (a->source == from) {
      parent[a] = nullptr;
      q.push_back(a);
    }
  while (!q.empty()) {
    const FlowArc* a = q.front();
    q.pop_front();
    if (a->target == to) {
      std::vector<StageRef> path{to};
      for (const FlowArc* p = a; p != nullptr; p = parent[p])
        path.push_back(p->source);
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (const FlowArc* b : arcs)
      if (!parent.count(b) && chainable_in(arcs, *a, *b)) {
        parent[b] = a;
        q.push_back(b);
      }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Simplification

namespace {

struct LinkCollector {
  Model& out;
  int n = 0;
  std::set<std::string> seen;

  void emit(const LinkEnd& src, const LinkEnd& tgt, const std::string& thing,
            const std::vector<std::string>& notes) {
    std::string key = src.str() + "|" + tgt.str() + "|" + thing;
    if (!seen.insert(key).second) return;
    Link l;
    l.id = "l" + std::to_string(++n);
    l.source = src;
    l.target = tgt;
    l.thing = thing;
    l.notes = notes;
    out.add_link(l);
  }
};

std::vector<std::string> stage_notes(const Model& m, const StageRef& s) {
  std::vector<std::string> out;
  for (const auto& st : m.actions_for(s)) out.push_back(action_to_string(st));
  return out;
}

void walk(const Model& m, const std::vector<const FlowArc*>& arcs,
          const LinkEnd& src, const FlowArc* a, std::vector<std::string> notes,
          std::set<std::string>& visited, LinkCollector& links) {
  if (!visited.insert(a->id).second) return;
  if (surviving(a->target.stage)) {
    links.emit(src, LinkEnd{a->target.thimac, a->target.stage}, a->thing,
               notes);
    return;
  }
  for (const auto& s : stage_notes(m, a->target)) notes.push_back(s);
  std::vector<const FlowArc*> next;
  for (const FlowArc* b : arcs)
    if (chainable_in(arcs, *a, *b)) next.push_back(b);
  if (next.empty()) {
    // Flow leaves the modeled diagram at this machine's boundary.
    links.emit(src, LinkEnd{a->target.thimac, std::nullopt}, a->thing, notes);
    return;
  }
  for (const FlowArc* b : next) walk(m, arcs, src, b, notes, visited, links);
}

// Nearest surviving stage to `s` along flow arcs, exploring forward before
// backward at each BFS level. Returns nullopt when none is connected.
std::optional<StageRef> nearest_surviving(const Model& m, const StageRef& s) {
  if (surviving(s.stage)) return s;
  std::deque<StageRef> q{s};
  std::set<std::string> seen{s.str()};
  while (!q.empty()) {
    StageRef cur = q.front();
    q.pop_front();
    if (surviving(cur.stage)) return cur;
    for (const auto& a : m.flow_arcs())
      if (a.source == cur && seen.insert(a.target.str()).second)
        q.push_back(a.target);
    for (const auto& a : m.flow_arcs())
      if (a.target == cur && seen.insert(a.source.str()).second)
        q.push_back(a.source);
  }
  return std::nullopt;
}

}  // namespace

Model simplify(const Model& m) {
  Model out(m.name());

  // Thimacs survive whole (for boundaries and state), keeping only their
  // create/process stages; actions on removed stages migrate to link notes.
  for (const auto& t : m.thimacs()) {
    out.add_thimac(t.parent, t.name);
    for (StageKind k : t.stages)
      if (surviving(k)) out.add_stage(t.id, k);
    if (t.is_elementary_hint) out.set_elementary_hint(t.id, *t.is_elementary_hint);
    for (const auto& v : t.state_vars) out.add_var(t.id, v);
  }
  for (const auto& th : m.thing_types()) out.add_thing(th);

  for (const auto& a : m.flow_arcs())
    if (surviving(a.source.stage) && surviving(a.target.stage))
      out.add_flow(a);

  LinkCollector links{out, 0, {}};
  for (const auto& th : m.thing_types()) {
    std::vector<const FlowArc*> arcs;
    for (const auto& a : m.flow_arcs())
      if (a.thing == th.name) arcs.push_back(&a);

    // Chains starting at a surviving stage.
    for (const auto& t : m.thimacs())
      for (StageKind k : t.stages) {
        if (!surviving(k)) continue;
        StageRef s{t.id, k};
        std::set<std::string> visited;
        for (const FlowArc* a : arcs)
          if (a->source == s && !surviving(a->target.stage))
            walk(m, arcs, LinkEnd{t.id, k}, a, {}, visited, links);
      }
    // Chains entering at a machine boundary: a removed source stage that no
    // arc of this thing can feed (e.g. the transfer where things arrive
    // from outside the diagram).
    for (const FlowArc* a : arcs) {
      if (surviving(a->source.stage)) continue;
      bool fed = false;
      for (const FlowArc* b : arcs)
        if (chainable_in(arcs, *b, *a)) fed = true;
      if (fed) continue;
      std::set<std::string> visited;
      walk(m, arcs, LinkEnd{a->source.thimac, std::nullopt}, a,
           stage_notes(m, a->source), visited, links);
    }
  }
  for (const auto& l : m.links()) {
    Link copy = l;
    copy.id = "l" + std::to_string(++links.n);
    std::string key =
        copy.source.str() + "|" + copy.target.str() + "|" + copy.thing;
    if (links.seen.insert(key).second) out.add_link(copy);
    else --links.n;
  }

  // Surviving actions, minus block/unblock of arcs that were contracted.
  for (const auto& t : m.thimacs()) {
    for (const auto& d : t.actions) {
      if (!surviving(d.stage)) continue;
      ActionDecl kept;
      kept.stage = d.stage;
      for (const auto& s : d.stmts) {
        if ((s.kind == ActionKind::Block || s.kind == ActionKind::Unblock) &&
            out.find_flow(s.arc) == nullptr)
          continue;
        kept.stmts.push_back(s);
      }
      if (!kept.stmts.empty()) out.add_action(t.id, kept);
    }
  }

  // Triggers re-anchor to the nearest surviving stages. A join group that
  // loses any member to re-anchoring is dropped whole: a partial
  // conjunction would not mean the same thing.
  std::vector<TriggerArc> kept_triggers;
  std::map<std::string, int> group_before, group_after;
  for (const auto& a : m.trigger_arcs()) {
    if (!a.join_group.empty()) ++group_before[a.join_group];
    auto src = nearest_surviving(m, a.source);
    auto tgt = nearest_surviving(m, a.target);
    if (!src || !tgt || *src == *tgt) continue;
    TriggerArc t;
    t.source = *src;
    t.target = *tgt;
    t.guard = a.guard;
    t.join_group = a.join_group;
    kept_triggers.push_back(t);
    if (!t.join_group.empty()) ++group_after[t.join_group];
  }
  int tn = 0;
  for (auto& t : kept_triggers) {
    if (!t.join_group.empty() &&
        group_after[t.join_group] != group_before[t.join_group])
      continue;
    t.id = "t" + std::to_string(++tn);
    out.add_trigger(t);
  }

  out.check_invariants();
  return out;
}

}  // namespace tml
