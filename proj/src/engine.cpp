#include "tml/engine.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace tml {

namespace {

// Hand-rolled generator (splitmix64) so traces are byte-identical across
// platforms; std::uniform_int_distribution is implementation-defined.
struct Rng {
  uint64_t s;
  explicit Rng(uint64_t seed) : s(seed) {}
  uint64_t next() {
    uint64_t z = (s += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  int uniform(int lo, int hi) {
    if (hi <= lo) return lo;
    return lo + int(next() % (uint64_t(hi - lo) + 1));
  }
};

StageRef parse_stage_path(const std::string& s) {
  auto pos = s.rfind('.');
  if (pos == std::string::npos)
    throw Error(ErrorCode::InvalidConfig, "expected THIMAC.stage: " + s);
  auto kind = stage_from_string(s.substr(pos + 1));
  if (!kind)
    throw Error(ErrorCode::InvalidConfig,
                "unknown stage kind in '" + s + "'");
  return {s.substr(0, pos), *kind};
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

long to_long(const std::string& s, const char* what) {
  try {
    size_t used = 0;
    long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidConfig,
                std::string("bad ") + what + ": '" + s + "'");
  }
}

std::pair<int, int> parse_range(const std::string& s, const char* what) {
  auto dots = s.find("..");
  if (dots == std::string::npos) {
    int v = int(to_long(s, what));
    return {v, v};
  }
  int lo = int(to_long(s.substr(0, dots), what));
  int hi = int(to_long(s.substr(dots + 2), what));
  if (lo > hi)
    throw Error(ErrorCode::InvalidConfig,
                std::string("empty range for ") + what + ": " + s);
  return {lo, hi};
}

}  // namespace

const char* to_string(RecordKind k) {
  switch (k) {
    case RecordKind::StageFired: return "STAGE_FIRED";
    case RecordKind::TriggerFired: return "TRIGGER_FIRED";
    case RecordKind::TokenInjected: return "TOKEN_INJECTED";
    case RecordKind::TokenExited: return "TOKEN_EXITED";
    case RecordKind::TokenRejected: return "TOKEN_REJECTED";
    case RecordKind::VarChanged: return "VAR_CHANGED";
  }
  return "?";
}

SimConfig parse_config(const std::string& text) {
  SimConfig cfg;
  std::istringstream is(text);
  std::string line;
  int ln = 0;
  while (std::getline(is, line)) {
    ++ln;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::InvalidConfig,
                  "line " + std::to_string(ln) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key == "seed") {
      cfg.seed = uint64_t(to_long(val, "seed"));
    } else if (key == "horizon") {
      cfg.horizon = to_long(val, "horizon");
    } else if (key == "inject") {
      auto parts = split_ws(val);
      if (parts.size() != 3)
        throw Error(ErrorCode::InvalidConfig,
                    "inject wants TICK THING STAGE: " + val);
      Injection inj;
      inj.tick = to_long(parts[0], "inject tick");
      inj.thing = parts[1];
      inj.at = parse_stage_path(parts[2]);
      cfg.injections.push_back(inj);
    } else if (key.rfind("delay.", 0) == 0) {
      DelaySpec d;
      auto r = parse_range(val, "delay");
      if (r.first < 1)
        throw Error(ErrorCode::InvalidConfig,
                    "holding delays are at least 1 tick: " + val);
      if (r.first == r.second) d.fixed = r.first;
      else d.range = r;
      cfg.delays[key.substr(6)] = d;
    } else if (key == "arrivals.count") {
      if (!cfg.arrivals) cfg.arrivals.emplace();
      cfg.arrivals->count = int(to_long(val, "arrivals.count"));
    } else if (key == "arrivals.gap") {
      if (!cfg.arrivals) cfg.arrivals.emplace();
      cfg.arrivals->gap = parse_range(val, "arrivals.gap");
    } else if (key == "arrivals.thing") {
      if (!cfg.arrivals) cfg.arrivals.emplace();
      cfg.arrivals->thing = val;
    } else if (key == "arrivals.at") {
      if (!cfg.arrivals) cfg.arrivals.emplace();
      cfg.arrivals->at = parse_stage_path(val);
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

struct TokenState {
  int id = 0;
  std::string thing;
  StageRef loc;
  bool outbound = false;  // sitting at a transfer after arriving from inside
  long hold_until = -1;   // process holding time
  long move_tick = 0;     // earliest tick this token may take an arc
  bool active = true;
};

struct Firing {
  StageRef stage;
  int token = -1;
};

class Sim {
 public:
  Sim(const Model& m, const SimConfig& cfg) : m_(m), cfg_(cfg) {
    tr_.model_name = m.name();
    tr_.seed = cfg.seed;
    tr_.horizon = cfg.horizon;
    for (const auto& t : m.thimacs())
      for (const auto& v : t.state_vars) {
        vars_[v.name] = v.init;
        tr_.initial_vars.emplace_back(v.name, v.init);
      }
    size_t i = 0;
    for (const auto& t : m.thimacs()) thimac_order_[t.id] = i++;
  }

  Trace run() {
    prepare_injections();
    for (long t = 0; t <= cfg_.horizon; ++t) tick(t);
    for (const auto& [name, init] : tr_.initial_vars)
      tr_.final_vars.emplace_back(name, vars_.at(name));
    return std::move(tr_);
  }

 private:
  void prepare_injections() {
    injections_ = cfg_.injections;
    if (cfg_.arrivals) {
      const auto& a = *cfg_.arrivals;
      if (a.thing.empty() || a.at.thimac.empty())
        throw Error(ErrorCode::InvalidConfig,
                    "arrivals need arrivals.thing and arrivals.at");
      Rng rng(cfg_.seed);
      long t = 0;
      for (int i = 0; i < a.count; ++i) {
        t += rng.uniform(a.gap.first, a.gap.second);
        injections_.push_back({t, a.thing, a.at});
      }
    }
    std::stable_sort(injections_.begin(), injections_.end(),
                     [](const Injection& x, const Injection& y) {
                       return x.tick < y.tick;
                     });
    for (const auto& inj : injections_) {
      if (!m_.stage_exists(inj.at) || inj.at.stage != StageKind::Transfer)
        throw Error(ErrorCode::InvalidConfig,
                    "injection must target a transfer stage: " +
                        inj.at.str());
      if (m_.find_thing(inj.thing) == nullptr)
        throw Error(ErrorCode::InvalidConfig,
                    "injection of unknown thing '" + inj.thing + "'");
      bool routed = false;
      for (const auto& arc : m_.flow_arcs())
        if (arc.source == inj.at && arc.thing == inj.thing) routed = true;
      if (!routed)
        throw Error(ErrorCode::InvalidConfig,
                    "no flow of '" + inj.thing + "' out of " + inj.at.str());
      if (inj.tick < 0)
        throw Error(ErrorCode::InvalidConfig, "injection before tick 0");
    }
    for (const auto& [path, d] : cfg_.delays) {
      StageRef s = parse_stage_path(path);
      if (!m_.stage_exists(s) || s.stage != StageKind::Process)
        throw Error(ErrorCode::InvalidConfig,
                    "delay must name a process stage: " + path);
      int lo = d.range ? d.range->first : d.fixed;
      if (lo < 1)
        throw Error(ErrorCode::InvalidConfig, "delay below 1 for " + path);
    }
    delay_rng_.emplace(cfg_.seed ^ 0x6A09E667F3BCC909ull);
  }

  void emit(long t, RecordKind k, const std::string& elem, int token,
            const std::string& detail = "") {
    tr_.records.push_back({t, k, elem, token, detail});
  }

  bool is_intra(const FlowArc& a) const {
    return a.source.thimac == a.target.thimac;
  }

  // Arcs a token at a transfer (or elsewhere) may consider, in declaration
  // order. At a transfer a token heading out (arrived from its own release)
  // only takes inter-machine arcs; a token heading in takes the machine's
  // own entry arcs when any match, so pass-through routing never lets a
  // thing skip an entry queue just because the entry is blocked.
  std::vector<const FlowArc*> candidates(const TokenState& tk) const {
    std::vector<const FlowArc*> out;
    bool at_transfer = tk.loc.stage == StageKind::Transfer;
    if (at_transfer && !tk.outbound) {
      for (const auto& a : m_.flow_arcs())
        if (a.source == tk.loc && a.thing == tk.thing && is_intra(a))
          out.push_back(&a);
      if (!out.empty()) return out;
    }
    for (const auto& a : m_.flow_arcs())
      if (a.source == tk.loc && a.thing == tk.thing &&
          (!at_transfer || !is_intra(a)))
        out.push_back(&a);
    return out;
  }

  int clamp_var(const std::string& name, int v) const {
    const StateVar* sv = m_.find_var(name);
    if (sv->min && v < *sv->min) v = *sv->min;
    if (sv->max && v > *sv->max) v = *sv->max;
    return v;
  }

  void run_actions(long t, const StageRef& stage) {
    for (const auto& st : m_.actions_for(stage)) {
      switch (st.kind) {
        case ActionKind::Set: {
          int v = 0;
          for (const auto& a : st.expr)
            v += a.sign * (a.is_var ? vars_.at(a.var) : a.value);
          set_var(t, st.var, clamp_var(st.var, v));
          break;
        }
        case ActionKind::Inc:
        case ActionKind::Dec: {
          int d = st.kind == ActionKind::Inc ? 1 : -1;
          int v = vars_.at(st.var) + d;
          if (st.mod) v = ((v % *st.mod) + *st.mod) % *st.mod;
          else v = clamp_var(st.var, v);
          set_var(t, st.var, v);
          break;
        }
        case ActionKind::Block:
          blocked_.insert(st.arc);
          break;
        case ActionKind::Unblock:
          blocked_.erase(st.arc);
          break;
      }
    }
  }

  void set_var(long t, const std::string& name, int v) {
    int old = vars_.at(name);
    if (old == v) {
      vars_[name] = v;
      return;
    }
    vars_[name] = v;
    emit(t, RecordKind::VarChanged, name, -1,
         name + " " + std::to_string(old) + "->" + std::to_string(v));
  }

  bool eval_guard(const GuardPtr& g) const {
    if (!g) return true;
    auto operand = [&](const GuardOperand& o) {
      return o.is_var ? vars_.at(o.var) : o.value;
    };
    switch (g->kind) {
      case GuardExpr::Kind::Cmp: {
        int l = operand(g->lhs), r = operand(g->rhs);
        switch (g->op) {
          case CmpOp::Eq: return l == r;
          case CmpOp::Ne: return l != r;
          case CmpOp::Lt: return l < r;
          case CmpOp::Le: return l <= r;
          case CmpOp::Gt: return l > r;
          case CmpOp::Ge: return l >= r;
        }
        return false;
      }
      case GuardExpr::Kind::And: return eval_guard(g->a) && eval_guard(g->b);
      case GuardExpr::Kind::Or: return eval_guard(g->a) || eval_guard(g->b);
      case GuardExpr::Kind::Not: return !eval_guard(g->a);
    }
    return false;
  }

  int spawn_token(long t, const StageRef& at) {
    std::string thing;
    for (const auto& a : m_.flow_arcs())
      if (a.source == at) {
        thing = a.thing;
        break;
      }
    if (thing.empty())
      for (const auto& th : m_.thing_types())
        if (th.parent_thimac == at.thimac) {
          thing = th.name;
          break;
        }
    if (thing.empty())
      throw Error(ErrorCode::InvalidModel,
                  "cannot infer what " + at.str() + " creates");
    TokenState tk;
    tk.id = next_token_++;
    tk.thing = thing;
    tk.loc = at;
    tk.move_tick = t + 1;  // creation completes this tick, flow starts next
    tokens_.push_back(tk);
    return tk.id;
  }

  int delay_for(const StageRef& s) {
    auto it = cfg_.delays.find(s.str());
    if (it == cfg_.delays.end()) return 1;
    if (it->second.range)
      return delay_rng_->uniform(it->second.range->first,
                                 it->second.range->second);
    return it->second.fixed;
  }

  void tick(long t) {
    std::vector<Firing> fired;
    std::map<std::string, int> arc_used;

    // Phase 0: stages scheduled by last tick's triggers fire now, actions
    // included, so e.g. a queue can close its entrance before this tick's
    // arrivals are considered.
    for (const auto& [stage, prov] : scheduled_) {
      int token = prov;
      if (stage.stage == StageKind::Create) token = spawn_token(t, stage);
      emit(t, RecordKind::StageFired, stage.str(), token, "activated");
      fired.push_back({stage, token});
      run_actions(t, stage);
    }
    scheduled_.clear();

    // Phase 1: due injections.
    std::vector<Firing> moved;
    while (next_injection_ < injections_.size() &&
           injections_[next_injection_].tick == t) {
      const Injection& inj = injections_[next_injection_++];
      TokenState tk;
      tk.id = next_token_++;
      tk.thing = inj.thing;
      tk.loc = inj.at;
      tk.move_tick = t;
      emit(t, RecordKind::TokenInjected, inj.at.str(), tk.id, inj.thing);
      auto cand = candidates(tk);
      bool all_blocked = !cand.empty();
      for (const FlowArc* a : cand)
        if (!blocked_.count(a->id)) all_blocked = false;
      if (all_blocked) {
        emit(t, RecordKind::TokenRejected, inj.at.str(), tk.id, inj.thing);
        continue;
      }
      emit(t, RecordKind::StageFired, inj.at.str(), tk.id, "injected");
      moved.push_back({inj.at, tk.id});
      tokens_.push_back(tk);
    }

    // Phase 2: token movement, one arc per token, one traversal per arc.
    std::vector<TokenState*> order;
    for (auto& tk : tokens_)
      if (tk.active) order.push_back(&tk);
    std::stable_sort(order.begin(), order.end(),
                     [&](const TokenState* a, const TokenState* b) {
                       size_t ia = thimac_order_.at(a->loc.thimac);
                       size_t ib = thimac_order_.at(b->loc.thimac);
                       return ia != ib ? ia < ib : a->id < b->id;
                     });
    for (TokenState* tk : order) {
      if (tk->move_tick > t) continue;
      if (tk->loc.stage == StageKind::Process && t < tk->hold_until) continue;
      const FlowArc* taken = nullptr;
      for (const FlowArc* a : candidates(*tk)) {
        if (blocked_.count(a->id)) continue;
        if (arc_used[a->id] >= 1) continue;
        taken = a;
        break;
      }
      if (taken == nullptr) continue;
      ++arc_used[taken->id];
      bool outbound_arrival =
          taken->target.stage == StageKind::Transfer && is_intra(*taken);
      tk->loc = taken->target;
      tk->outbound = outbound_arrival;
      tk->move_tick = t + 1;
      emit(t, RecordKind::StageFired, tk->loc.str(), tk->id, taken->id);
      fired.push_back({tk->loc, tk->id});
      if (!outbound_arrival) moved.push_back({tk->loc, tk->id});
      if (tk->loc.stage == StageKind::Process)
        tk->hold_until = t + delay_for(tk->loc);
      if (outbound_arrival) {
        bool has_exit_arc = false;
        for (const auto& a : m_.flow_arcs())
          if (a.source == tk->loc && a.thing == tk->thing && !is_intra(a))
            has_exit_arc = true;
        if (!has_exit_arc) {
          emit(t, RecordKind::TokenExited, tk->loc.str(), tk->id, tk->thing);
          tk->active = false;
        }
      }
    }

    // Phase 3: actions of stages reached by tokens this tick, in firing
    // order. Pass-through firings at a transfer on the way out run nothing;
    // the machine already acted when the thing came in.
    for (const auto& f : moved) run_actions(t, f.stage);
    for (const auto& f : moved) fired.push_back(f);
    // `fired` may now hold duplicates; triggers only ask membership.
    // Phase 4: triggers off this tick's firings, guards read post-action
    // state; targets fire next tick.
    std::map<std::string, int> fired_tok;  // first firing wins
    for (const auto& f : fired)
      fired_tok.emplace(f.stage.str(), f.token);

    std::map<std::string, bool> group_ok;
    std::map<std::string, int> group_tok;
    for (const auto& a : m_.trigger_arcs()) {
      if (a.join_group.empty()) continue;
      auto it = fired_tok.find(a.source.str());
      bool ok = it != fired_tok.end() && eval_guard(a.guard);
      auto ins = group_ok.emplace(a.join_group, ok);
      if (!ins.second) ins.first->second = ins.first->second && ok;
      if (ok) group_tok.emplace(a.join_group, it->second);
    }
    std::set<std::string> sched_seen;
    for (const auto& [stage, tok] : scheduled_) sched_seen.insert(stage.str());
    for (const auto& a : m_.trigger_arcs()) {
      int tok;
      if (a.join_group.empty()) {
        auto it = fired_tok.find(a.source.str());
        if (it == fired_tok.end() || !eval_guard(a.guard)) continue;
        tok = it->second;
      } else {
        if (!group_ok[a.join_group]) continue;
        tok = group_tok[a.join_group];
      }
      emit(t, RecordKind::TriggerFired, a.id,
           fired_tok.count(a.source.str()) ? fired_tok[a.source.str()] : tok);
      if (sched_seen.insert(a.target.str()).second)
        scheduled_.emplace_back(a.target, tok);
    }
  }

  const Model& m_;
  const SimConfig& cfg_;
  Trace tr_;
  std::map<std::string, int> vars_;
  std::set<std::string> blocked_;
  std::map<std::string, size_t> thimac_order_;
  std::vector<TokenState> tokens_;
  int next_token_ = 1;
  std::vector<Injection> injections_;
  size_t next_injection_ = 0;
  std::vector<std::pair<StageRef, int>> scheduled_;
  std::optional<Rng> delay_rng_;
};

}  // namespace

Trace simulate(const Model& m, const SimConfig& cfg) {
  return Sim(m, cfg).run();
}

bool replay_check(const Model& m, const SimConfig& cfg, const Trace& t) {
  if (t.model_name != m.name())
    throw Error(ErrorCode::ModelMismatch,
                "trace is for model '" + t.model_name + "', not '" +
                    m.name() + "'");
  if (t.seed != cfg.seed)
    throw Error(ErrorCode::ModelMismatch, "trace seed differs from config");
  Trace again = simulate(m, cfg);
  return again == t;
}

SimStats stats(const Trace& t) {
  SimStats s;
  for (const auto& r : t.records) {
    switch (r.kind) {
      case RecordKind::TokenInjected: ++s.injected; break;
      case RecordKind::TokenRejected: ++s.rejected; break;
      case RecordKind::TokenExited: ++s.exited; break;
      case RecordKind::StageFired: ++s.stage_firings[r.element]; break;
      case RecordKind::TriggerFired: ++s.trigger_firings[r.element]; break;
      case RecordKind::VarChanged: break;
    }
  }
  s.in_flight = s.injected - s.rejected - s.exited;

  // Step-function mean over ticks 0..horizon.
  std::map<std::string, int> cur;
  std::map<std::string, long long> sum;
  for (const auto& [name, v] : t.initial_vars) {
    cur[name] = v;
    s.var_max[name] = v;
    sum[name] = 0;
  }
  size_t i = 0;
  for (long tick = 0; tick <= t.horizon; ++tick) {
    while (i < t.records.size() && t.records[i].tick <= tick) {
      const auto& r = t.records[i++];
      if (r.kind == RecordKind::VarChanged) {
        auto arrow = r.detail.rfind("->");
        cur[r.element] = std::stoi(r.detail.substr(arrow + 2));
        s.var_max[r.element] = std::max(s.var_max[r.element], cur[r.element]);
      }
    }
    for (const auto& [name, v] : cur) sum[name] += v;
  }
  for (const auto& [name, total] : sum)
    s.var_mean[name] = t.horizon >= 0 ? double(total) / double(t.horizon + 1) : 0.0;
  return s;
}

std::string trace_to_text(const Trace& t) {
  std::ostringstream os;
  os << "model " << t.model_name << "\n";
  os << "seed " << t.seed << "\n";
  os << "horizon " << t.horizon << "\n";
  for (const auto& [name, v] : t.initial_vars)
    os << "var " << name << " " << v << "\n";
  os << "trace:\n";
  for (const auto& r : t.records) {
    os << r.tick << '\t' << to_string(r.kind) << '\t' << r.element << '\t';
    if (r.token >= 0) os << r.token;
    else os << '-';
    os << '\t' << r.detail << "\n";
  }
  for (const auto& [name, v] : t.final_vars)
    os << "final " << name << " " << v << "\n";
  return os.str();
}

std::string trace_to_csv(const Trace& t) {
  std::ostringstream os;
  os << "tick,kind,element,token,detail\n";
  for (const auto& r : t.records) {
    os << r.tick << ',' << to_string(r.kind) << ',' << r.element << ',';
    if (r.token >= 0) os << r.token;
    os << ',' << r.detail << "\n";
  }
  return os.str();
}

}  // namespace tml
