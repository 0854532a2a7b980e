#include "tml/events.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace tml {

namespace {

std::set<std::string> region_keys(const EventDef& e) {
  std::set<std::string> s;
  for (const auto& el : e.region)
    s.insert(el.is_arc ? "A:" + el.arc : "S:" + el.stage.str());
  return s;
}

}  // namespace

EventHierarchy infer_hierarchy(const Model& m) {
  EventHierarchy h;
  std::vector<std::set<std::string>> sets;
  for (const auto& e : m.events()) sets.push_back(region_keys(e));
  const auto& evs = m.events();
  for (size_t i = 0; i < evs.size(); ++i)
    for (size_t j = 0; j < evs.size(); ++j) {
      if (i == j) continue;
      if (sets[j].size() < sets[i].size() &&
          std::includes(sets[i].begin(), sets[i].end(), sets[j].begin(),
                        sets[j].end()))
        h.pairs.emplace_back(evs[i].id, evs[j].id);
    }
  for (const auto& e : evs) {
    if (e.parent.empty()) continue;
    bool supported = false;
    for (const auto& [outer, inner] : h.pairs)
      if (outer == e.parent && inner == e.id) supported = true;
    if (!supported)
      h.mismatches.push_back(e.id + " declared within " + e.parent +
                             " but its region is not strictly contained");
  }
  return h;
}

std::vector<Occurrence> detect_occurrences(const Model& m, const Trace& t) {
  if (t.model_name != m.name())
    throw Error(ErrorCode::ModelMismatch,
                "trace is for model '" + t.model_name + "', not '" +
                    m.name() + "'");
  auto known_arc = [&](const std::string& id) {
    if (m.find_flow(id)) return true;
    for (const auto& a : m.trigger_arcs())
      if (a.id == id) return true;
    return false;
  };
  auto parse_stage = [&](const std::string& s) -> StageRef {
    auto pos = s.rfind('.');
    std::optional<StageKind> k;
    if (pos != std::string::npos) k = stage_from_string(s.substr(pos + 1));
    if (!k || !m.stage_exists({s.substr(0, pos), *k}))
      throw Error(ErrorCode::ModelMismatch,
                  "trace fires unknown stage '" + s + "'");
    return {s.substr(0, pos), *k};
  };

  // Per token: which stages / triggers have fired, and when each stage
  // first fired.
  std::map<int, std::set<std::string>> stages_fired;
  std::map<int, std::set<std::string>> trigs_fired;
  std::map<int, std::map<std::string, long>> first_fire;
  for (const auto& r : t.records) {
    switch (r.kind) {
      case RecordKind::StageFired: {
        parse_stage(r.element);
        if (r.token < 0) break;
        stages_fired[r.token].insert(r.element);
        first_fire[r.token].emplace(r.element, r.tick);
        break;
      }
      case RecordKind::TriggerFired:
        if (!known_arc(r.element))
          throw Error(ErrorCode::ModelMismatch,
                      "trace fires unknown arc '" + r.element + "'");
        if (r.token >= 0) trigs_fired[r.token].insert(r.element);
        break;
      case RecordKind::VarChanged:
        if (m.find_var(r.element) == nullptr)
          throw Error(ErrorCode::ModelMismatch,
                      "trace changes unknown variable '" + r.element + "'");
        break;
      default:
        break;
    }
  }

  std::vector<Occurrence> out;
  size_t decl = 0;
  std::vector<std::tuple<long, size_t, int>> order;
  for (const auto& e : m.events()) {
    std::set<std::string> need_stages;
    std::set<std::string> need_trigs;
    for (const auto& el : e.region) {
      if (!el.is_arc) {
        need_stages.insert(el.stage.str());
        continue;
      }
      if (const FlowArc* f = m.find_flow(el.arc)) {
        need_stages.insert(f->source.str());
        need_stages.insert(f->target.str());
      } else {
        need_trigs.insert(el.arc);
      }
    }
    for (const auto& [token, fired] : stages_fired) {
      if (!std::includes(fired.begin(), fired.end(), need_stages.begin(),
                         need_stages.end()))
        continue;
      const auto& trigs = trigs_fired[token];
      if (!std::includes(trigs.begin(), trigs.end(), need_trigs.begin(),
                         need_trigs.end()))
        continue;
      long tick = first_fire[token].at(e.anchor.str());
      out.push_back({e.id, tick, token});
      order.emplace_back(tick, decl, token);
    }
    ++decl;
  }
  std::vector<size_t> idx(out.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return order[a] < order[b]; });
  std::vector<Occurrence> sorted;
  for (size_t i : idx) sorted.push_back(out[i]);
  return sorted;
}

std::string occurrences_to_csv(const std::vector<Occurrence>& occ) {
  std::ostringstream os;
  os << "event_id,tick,token_id\n";
  for (const auto& o : occ)
    os << o.event << ',' << o.tick << ',' << o.token << "\n";
  return os.str();
}

Chronology chronology(const Model& m, const std::vector<Occurrence>& occ) {
  Chronology c;
  std::map<std::string, long> min_tick, max_tick;
  for (const auto& o : occ) {
    auto it = min_tick.find(o.event);
    if (it == min_tick.end()) {
      min_tick[o.event] = o.tick;
      max_tick[o.event] = o.tick;
    } else {
      it->second = std::min(it->second, o.tick);
      max_tick[o.event] = std::max(max_tick[o.event], o.tick);
    }
  }
  // Order events by first occurrence, model declaration order on ties.
  for (const auto& e : m.events())
    if (min_tick.count(e.id)) c.events.push_back(e.id);
  std::stable_sort(c.events.begin(), c.events.end(),
                   [&](const std::string& a, const std::string& b) {
                     return min_tick[a] < min_tick[b];
                   });

  // a precedes b when every occurrence of a is strictly before every
  // occurrence of b; keep the transitive reduction.
  auto precedes = [&](const std::string& a, const std::string& b) {
    return max_tick[a] < min_tick[b];
  };
  for (const auto& a : c.events)
    for (const auto& b : c.events) {
      if (a == b || !precedes(a, b)) continue;
      bool redundant = false;
      for (const auto& mid : c.events)
        if (mid != a && mid != b && precedes(a, mid) && precedes(mid, b))
          redundant = true;
      if (!redundant) c.edges.emplace_back(a, b);
    }
  return c;
}

}  // namespace tml
