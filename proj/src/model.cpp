#include "tml/model.hpp"

#include <algorithm>
#include <set>

namespace tml {

const char* to_string(StageKind k) {
  switch (k) {
    case StageKind::Create: return "create";
    case StageKind::Process: return "process";
    case StageKind::Release: return "release";
    case StageKind::Transfer: return "transfer";
    case StageKind::Receive: return "receive";
    case StageKind::Arrive: return "arrive";
    case StageKind::Accept: return "accept";
  }
  return "?";
}

std::optional<StageKind> stage_from_string(std::string_view s) {
  for (StageKind k : kAllStages)
    if (s == to_string(k)) return k;
  return std::nullopt;
}

bool stage_flow_legal(StageKind from, StageKind to, bool same_machine) {
  using S = StageKind;
  if (!same_machine) return from == S::Transfer && to == S::Transfer;
  static const std::pair<S, S> kLegal[] = {
      {S::Transfer, S::Receive}, {S::Transfer, S::Arrive},
      {S::Arrive, S::Accept},    {S::Accept, S::Process},
      {S::Accept, S::Release},   {S::Receive, S::Process},
      {S::Receive, S::Release},  {S::Create, S::Process},
      {S::Create, S::Release},   {S::Process, S::Release},
      {S::Release, S::Transfer},
  };
  for (auto [a, b] : kLegal)
    if (a == from && b == to) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Guards

GuardPtr GuardExpr::cmp(GuardOperand l, CmpOp op, GuardOperand r) {
  auto g = std::make_shared<GuardExpr>();
  g->kind = Kind::Cmp;
  g->op = op;
  g->lhs = std::move(l);
  g->rhs = std::move(r);
  return g;
}

GuardPtr GuardExpr::band(GuardPtr a, GuardPtr b) {
  auto g = std::make_shared<GuardExpr>();
  g->kind = Kind::And;
  g->a = std::move(a);
  g->b = std::move(b);
  return g;
}

GuardPtr GuardExpr::bor(GuardPtr a, GuardPtr b) {
  auto g = std::make_shared<GuardExpr>();
  g->kind = Kind::Or;
  g->a = std::move(a);
  g->b = std::move(b);
  return g;
}

GuardPtr GuardExpr::bnot(GuardPtr a) {
  auto g = std::make_shared<GuardExpr>();
  g->kind = Kind::Not;
  g->a = std::move(a);
  return g;
}

bool guard_equal(const GuardPtr& a, const GuardPtr& b) {
  if (!a && !b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case GuardExpr::Kind::Cmp:
      return a->op == b->op && a->lhs == b->lhs && a->rhs == b->rhs;
    case GuardExpr::Kind::Not:
      return guard_equal(a->a, b->a);
    default:
      return guard_equal(a->a, b->a) && guard_equal(a->b, b->b);
  }
}

static const char* cmp_to_string(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "==";
    case CmpOp::Ne: return "!=";
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
  }
  return "?";
}

static std::string operand_to_string(const GuardOperand& o) {
  return o.is_var ? o.var : std::to_string(o.value);
}

std::string guard_to_string(const GuardPtr& g) {
  if (!g) return "";
  switch (g->kind) {
    case GuardExpr::Kind::Cmp:
      return operand_to_string(g->lhs) + " " + cmp_to_string(g->op) + " " +
             operand_to_string(g->rhs);
    case GuardExpr::Kind::And:
      return "(" + guard_to_string(g->a) + " and " + guard_to_string(g->b) +
             ")";
    case GuardExpr::Kind::Or:
      return "(" + guard_to_string(g->a) + " or " + guard_to_string(g->b) +
             ")";
    case GuardExpr::Kind::Not:
      return "not (" + guard_to_string(g->a) + ")";
  }
  return "";
}

std::vector<std::string> guard_vars(const GuardPtr& g) {
  std::vector<std::string> out;
  if (!g) return out;
  if (g->kind == GuardExpr::Kind::Cmp) {
    if (g->lhs.is_var) out.push_back(g->lhs.var);
    if (g->rhs.is_var) out.push_back(g->rhs.var);
    return out;
  }
  for (const auto& side : {g->a, g->b}) {
    for (auto& v : guard_vars(side)) out.push_back(std::move(v));
  }
  return out;
}

std::string action_to_string(const ActionStmt& a) {
  switch (a.kind) {
    case ActionKind::Set: {
      std::string s = "set " + a.var;
      bool first = true;
      for (const auto& at : a.expr) {
        std::string atom = at.is_var ? at.var : std::to_string(at.value);
        if (first) {
          s += " " + std::string(at.sign < 0 ? "-" : "") + atom;
          first = false;
        } else {
          s += std::string(at.sign < 0 ? " - " : " + ") + atom;
        }
      }
      return s;
    }
    case ActionKind::Inc:
      return "inc " + a.var + (a.mod ? " mod " + std::to_string(*a.mod) : "");
    case ActionKind::Dec:
      return "dec " + a.var + (a.mod ? " mod " + std::to_string(*a.mod) : "");
    case ActionKind::Block:
      return "block " + a.arc;
    case ActionKind::Unblock:
      return "unblock " + a.arc;
  }
  return "";
}

bool Thimac::has_stage(StageKind k) const {
  return std::find(stages.begin(), stages.end(), k) != stages.end();
}

// ---------------------------------------------------------------------------
// Model builders

Thimac* Model::mutable_thimac(const std::string& id) {
  for (auto& t : thimacs_)
    if (t.id == id) return &t;
  return nullptr;
}

const Thimac* Model::find_thimac(const std::string& id) const {
  for (auto& t : thimacs_)
    if (t.id == id) return &t;
  return nullptr;
}

const Thimac& Model::thimac(const std::string& id) const {
  const Thimac* t = find_thimac(id);
  if (!t) throw Error(ErrorCode::UnknownId, "unknown thimac: " + id);
  return *t;
}

bool Model::stage_exists(const StageRef& r) const {
  const Thimac* t = find_thimac(r.thimac);
  return t && t->has_stage(r.stage);
}

const FlowArc* Model::find_flow(const std::string& id) const {
  for (auto& a : flows_)
    if (a.id == id) return &a;
  return nullptr;
}

const ThingType* Model::find_thing(const std::string& name) const {
  for (auto& t : things_)
    if (t.name == name) return &t;
  return nullptr;
}

const EventDef* Model::find_event(const std::string& id) const {
  for (auto& e : events_)
    if (e.id == id) return &e;
  return nullptr;
}

const Thimac* Model::var_owner(const std::string& var) const {
  for (auto& t : thimacs_)
    for (auto& v : t.state_vars)
      if (v.name == var) return &t;
  return nullptr;
}

const StateVar* Model::find_var(const std::string& var) const {
  for (auto& t : thimacs_)
    for (auto& v : t.state_vars)
      if (v.name == var) return &v;
  return nullptr;
}

std::vector<ActionStmt> Model::actions_for(const StageRef& r) const {
  std::vector<ActionStmt> out;
  const Thimac* t = find_thimac(r.thimac);
  if (!t) return out;
  for (auto& d : t->actions)
    if (d.stage == r.stage)
      out.insert(out.end(), d.stmts.begin(), d.stmts.end());
  return out;
}

void Model::add_thimac(const std::string& parent, const std::string& name) {
  std::string id = parent.empty() ? name : parent + "." + name;
  if (find_thimac(id))
    throw Error(ErrorCode::DuplicateId, "duplicate thimac id: " + id);
  if (!parent.empty() && !find_thimac(parent))
    throw Error(ErrorCode::DanglingReference, "unknown parent thimac: " + parent);
  Thimac t;
  t.id = id;
  t.name = name;
  t.parent = parent;
  thimacs_.push_back(std::move(t));
  if (parent.empty()) {
    items_.emplace_back(ItemKind::Thimac, thimacs_.size() - 1);
  } else {
    mutable_thimac(parent)->children.push_back(id);
  }
}

void Model::add_stage(const std::string& thimac_id, StageKind k) {
  Thimac* t = mutable_thimac(thimac_id);
  if (!t) throw Error(ErrorCode::UnknownId, "unknown thimac: " + thimac_id);
  if (t->has_stage(k))
    throw Error(ErrorCode::DuplicateId,
                "stage declared twice in " + thimac_id + ": " + to_string(k));
  // Mixing receive with arrive/accept is accepted here and reported by
  // validation, so a questionable model can still be loaded and inspected.
  t->stages.push_back(k);
}

void Model::add_var(const std::string& thimac_id, StateVar v) {
  Thimac* t = mutable_thimac(thimac_id);
  if (!t) throw Error(ErrorCode::UnknownId, "unknown thimac: " + thimac_id);
  if (find_var(v.name))
    throw Error(ErrorCode::DuplicateId, "duplicate state var: " + v.name);
  if (v.min && v.max && (*v.min > v.init || v.init > *v.max))
    throw Error(ErrorCode::InvalidModel,
                "var " + v.name + ": init outside bounds");
  t->state_vars.push_back(std::move(v));
}

void Model::add_action(const std::string& thimac_id, ActionDecl d) {
  Thimac* t = mutable_thimac(thimac_id);
  if (!t) throw Error(ErrorCode::UnknownId, "unknown thimac: " + thimac_id);
  if (!t->has_stage(d.stage))
    throw Error(ErrorCode::DanglingReference,
                thimac_id + " has no stage " + to_string(d.stage));
  for (const auto& s : d.stmts) {
    if (s.kind == ActionKind::Block || s.kind == ActionKind::Unblock) {
      // Arc may be declared later in the file; checked in check_invariants.
    } else {
      if (!find_var(s.var))
        throw Error(ErrorCode::DanglingReference, "unknown var: " + s.var);
      for (const auto& at : s.expr)
        if (at.is_var && !find_var(at.var))
          throw Error(ErrorCode::DanglingReference, "unknown var: " + at.var);
    }
  }
  t->actions.push_back(std::move(d));
}

void Model::set_elementary_hint(const std::string& thimac_id, bool v) {
  Thimac* t = mutable_thimac(thimac_id);
  if (!t) throw Error(ErrorCode::UnknownId, "unknown thimac: " + thimac_id);
  t->is_elementary_hint = v;
}

void Model::add_thing(ThingType t) {
  if (find_thing(t.name))
    throw Error(ErrorCode::DuplicateId, "duplicate thing type: " + t.name);
  if (!t.parent_thimac.empty() && !find_thimac(t.parent_thimac))
    throw Error(ErrorCode::DanglingReference,
                "unknown thimac: " + t.parent_thimac);
  things_.push_back(std::move(t));
  items_.emplace_back(ItemKind::Thing, things_.size() - 1);
}

void Model::add_flow(FlowArc a) {
  if (find_flow(a.id))
    throw Error(ErrorCode::DuplicateId, "duplicate flow id: " + a.id);
  for (const StageRef* r : {&a.source, &a.target})
    if (!stage_exists(*r))
      throw Error(ErrorCode::DanglingReference, "unknown stage: " + r->str());
  if (!find_thing(a.thing))
    throw Error(ErrorCode::DanglingReference, "unknown thing: " + a.thing);
  bool same = a.source.thimac == a.target.thimac;
  if (!stage_flow_legal(a.source.stage, a.target.stage, same))
    throw Error(ErrorCode::IllegalFlow,
                "illegal flow " + a.id + ": " + a.source.str() + " -> " +
                    a.target.str());
  flows_.push_back(std::move(a));
  items_.emplace_back(ItemKind::Flow, flows_.size() - 1);
}

void Model::add_trigger(TriggerArc a) {
  for (const StageRef* r : {&a.source, &a.target})
    if (!stage_exists(*r))
      throw Error(ErrorCode::DanglingReference, "unknown stage: " + r->str());
  if (a.source == a.target)
    throw Error(ErrorCode::InvalidModel, "trigger source equals target");
  for (const auto& v : guard_vars(a.guard))
    if (!find_var(v))
      throw Error(ErrorCode::DanglingReference, "unknown var in guard: " + v);
  triggers_.push_back(std::move(a));
  items_.emplace_back(ItemKind::Trigger, triggers_.size() - 1);
}

void Model::add_link(Link l) {
  for (const LinkEnd* e : {&l.source, &l.target}) {
    if (!find_thimac(e->thimac))
      throw Error(ErrorCode::DanglingReference, "unknown thimac: " + e->thimac);
    if (e->stage && !stage_exists({e->thimac, *e->stage}))
      throw Error(ErrorCode::DanglingReference, "unknown stage: " + e->str());
  }
  if (!l.thing.empty() && !find_thing(l.thing))
    throw Error(ErrorCode::DanglingReference, "unknown thing: " + l.thing);
  links_.push_back(std::move(l));
  items_.emplace_back(ItemKind::Link, links_.size() - 1);
}

void Model::add_event(EventDef e) {
  if (find_event(e.id))
    throw Error(ErrorCode::DuplicateId, "duplicate event id: " + e.id);
  if (e.region.empty())
    throw Error(ErrorCode::InvalidModel, "event region empty: " + e.id);
  bool has_stage = false;
  for (const auto& el : e.region) {
    if (el.is_arc) {
      if (!find_flow(el.arc) && !std::any_of(triggers_.begin(), triggers_.end(),
                                             [&](const TriggerArc& t) {
                                               return t.id == el.arc;
                                             }))
        throw Error(ErrorCode::DanglingReference, "unknown arc: " + el.arc);
    } else {
      if (!stage_exists(el.stage))
        throw Error(ErrorCode::DanglingReference,
                    "unknown stage: " + el.stage.str());
      has_stage = true;
      e.anchor = el.stage;  // anchor = last stage ref in region
    }
  }
  if (!has_stage)
    throw Error(ErrorCode::InvalidModel,
                "event region has no stage (anchor required): " + e.id);
  events_.push_back(std::move(e));
  items_.emplace_back(ItemKind::Event, events_.size() - 1);
}

void Model::add_chronology(ChronologyDecl c) {
  if (c.events.size() < 2)
    throw Error(ErrorCode::InvalidModel, "chronology needs at least two events");
  for (const auto& id : c.events)
    if (!find_event(id))
      throw Error(ErrorCode::DanglingReference, "unknown event: " + id);
  chronos_.push_back(std::move(c));
  items_.emplace_back(ItemKind::Chronology, chronos_.size() - 1);
}

std::vector<std::string> Model::lookup_subthings(const std::string& id) const {
  const Thimac& root = thimac(id);  // throws UnknownId
  std::vector<std::string> out;
  std::vector<const Thimac*> stack;
  auto push_children = [&](const Thimac& t) {
    for (auto it = t.children.rbegin(); it != t.children.rend(); ++it)
      stack.push_back(&thimac(*it));
  };
  push_children(root);
  while (!stack.empty()) {
    const Thimac* t = stack.back();
    stack.pop_back();
    out.push_back(t->id);
    push_children(*t);
  }
  return out;
}

void Model::check_invariants() const {
  if (thimacs_.empty())
    throw Error(ErrorCode::InvalidModel, "model has no thimac");
  std::set<std::string> ids;
  for (const auto& t : thimacs_) {
    if (!ids.insert(t.id).second)
      throw Error(ErrorCode::DuplicateId, "duplicate thimac id: " + t.id);
    // No thimac is its own ancestor.
    std::set<std::string> seen;
    for (const Thimac* p = &t; !p->parent.empty(); p = &thimac(p->parent)) {
      if (!seen.insert(p->parent).second)
        throw Error(ErrorCode::InvalidModel, "thimac ancestry cycle at " + t.id);
    }
    std::set<StageKind> sk(t.stages.begin(), t.stages.end());
    if (sk.size() != t.stages.size())
      throw Error(ErrorCode::DuplicateId, "repeated stage in " + t.id);
  }
  for (const auto& a : flows_) {
    bool same = a.source.thimac == a.target.thimac;
    if (!stage_exists(a.source) || !stage_exists(a.target))
      throw Error(ErrorCode::DanglingReference, "dangling flow: " + a.id);
    if (!stage_flow_legal(a.source.stage, a.target.stage, same))
      throw Error(ErrorCode::IllegalFlow, "illegal flow: " + a.id);
    if (!find_thing(a.thing))
      throw Error(ErrorCode::DanglingReference,
                  "flow thing undeclared: " + a.id);
  }
  for (const auto& a : triggers_) {
    if (!stage_exists(a.source) || !stage_exists(a.target))
      throw Error(ErrorCode::DanglingReference, "dangling trigger: " + a.id);
    for (const auto& v : guard_vars(a.guard))
      if (!find_var(v))
        throw Error(ErrorCode::DanglingReference, "guard var undeclared: " + v);
  }
  for (const auto& t : thimacs_) {
    for (const auto& d : t.actions) {
      for (const auto& s : d.stmts) {
        if (s.kind != ActionKind::Block && s.kind != ActionKind::Unblock)
          continue;
        const FlowArc* a = find_flow(s.arc);
        if (!a)
          throw Error(ErrorCode::DanglingReference,
                      t.id + ": unknown arc: " + s.arc);
        if (!a->blockable)
          throw Error(ErrorCode::InvalidModel,
                      t.id + ": block/unblock target not blockable: " + s.arc);
      }
    }
  }
}

bool Model::operator==(const Model& o) const {
  return name_ == o.name_ && thimacs_ == o.thimacs_ && things_ == o.things_ &&
         flows_ == o.flows_ && triggers_ == o.triggers_ && links_ == o.links_ &&
         events_ == o.events_ && chronos_ == o.chronos_ && items_ == o.items_;
}

}  // namespace tml
