#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <string>
#include <vector>

#include "tml/model.hpp"

using namespace tml;

namespace {

// Independent copy of the legality table, written out pair by pair rather
// than computed, so a regression in stage_flow_legal cannot hide.
struct LegalPair {
  StageKind from, to;
  bool same_machine;
};

const std::vector<LegalPair> kLegal = {
    {StageKind::Transfer, StageKind::Receive, true},
    {StageKind::Transfer, StageKind::Arrive, true},
    {StageKind::Arrive, StageKind::Accept, true},
    {StageKind::Accept, StageKind::Process, true},
    {StageKind::Accept, StageKind::Release, true},
    {StageKind::Receive, StageKind::Process, true},
    {StageKind::Receive, StageKind::Release, true},
    {StageKind::Create, StageKind::Process, true},
    {StageKind::Create, StageKind::Release, true},
    {StageKind::Process, StageKind::Release, true},
    {StageKind::Release, StageKind::Transfer, true},
    {StageKind::Transfer, StageKind::Transfer, false},
};

bool listed(StageKind a, StageKind b, bool same) {
  for (const auto& p : kLegal)
    if (p.from == a && p.to == b && p.same_machine == same) return true;
  return false;
}

Model tiny_model() {
  Model m("Tiny");
  m.add_thimac("", "A");
  m.add_stage("A", StageKind::Create);
  m.add_stage("A", StageKind::Process);
  m.add_thing({"x", ""});
  return m;
}

}  // namespace

TEST_CASE("stage flow legality matches the enumerated table") {
  for (StageKind a : kAllStages)
    for (StageKind b : kAllStages)
      for (bool same : {true, false}) {
        CAPTURE(to_string(a));
        CAPTURE(to_string(b));
        CAPTURE(same);
        CHECK(stage_flow_legal(a, b, same) == listed(a, b, same));
      }
}

TEST_CASE("legality is antisymmetric on distinct stage kinds") {
  for (StageKind a : kAllStages)
    for (StageKind b : kAllStages) {
      if (a == b) continue;
      for (bool same : {true, false}) {
        CHECK_FALSE((stage_flow_legal(a, b, same) &&
                     stage_flow_legal(b, a, same)));
      }
    }
}

TEST_CASE("stage names round-trip") {
  for (StageKind k : kAllStages) {
    auto back = stage_from_string(to_string(k));
    REQUIRE(back.has_value());
    CHECK(*back == k);
  }
  CHECK_FALSE(stage_from_string("creates").has_value());
  CHECK_FALSE(stage_from_string("").has_value());
}

TEST_CASE("builders reject duplicate and dangling declarations") {
  Model m = tiny_model();

  CHECK_THROWS_AS(m.add_thimac("", "A"), Error);           // duplicate id
  CHECK_THROWS_AS(m.add_thimac("Nope", "Child"), Error);   // missing parent
  CHECK_THROWS_AS(m.add_stage("A", StageKind::Create), Error);  // dup stage
  CHECK_THROWS_AS(m.add_stage("B", StageKind::Create), Error);
  CHECK_THROWS_AS(m.add_thing({"x", ""}), Error);          // duplicate thing
  CHECK_THROWS_AS(m.add_thing({"y", "Nope"}), Error);      // bad parent ref
  CHECK_THROWS_AS(m.add_var("B", {"v", 0, {}, {}}), Error);

  // Flows must reference existing stages, carry a known thing, and respect
  // the legality table.
  CHECK_THROWS_AS(
      m.add_flow({"f1", {"A", StageKind::Create}, {"A", StageKind::Release},
                  "x", false}),
      Error);  // A has no release stage
  CHECK_THROWS_AS(
      m.add_flow({"f1", {"A", StageKind::Create}, {"A", StageKind::Process},
                  "ghost", false}),
      Error);
  CHECK_THROWS_AS(
      m.add_flow({"f1", {"A", StageKind::Process}, {"A", StageKind::Create},
                  "x", false}),
      Error);  // illegal direction
  m.add_flow({"f1", {"A", StageKind::Create}, {"A", StageKind::Process}, "x",
              false});
  CHECK_THROWS_AS(
      m.add_flow({"f1", {"A", StageKind::Create}, {"A", StageKind::Process},
                  "x", false}),
      Error);  // duplicate arc id

  CHECK_THROWS_AS(
      m.add_trigger({"t1", {"A", StageKind::Create}, {"B", StageKind::Create},
                     nullptr, ""}),
      Error);
  m.check_invariants();
}

TEST_CASE("builder failure leaves the model unchanged") {
  Model m = tiny_model();
  Model before = m;
  try {
    m.add_flow({"f1", {"A", StageKind::Process}, {"A", StageKind::Create},
                "x", false});
  } catch (const Error&) {
  }
  CHECK(m == before);
}

TEST_CASE("intra-machine flow across two thimacs is rejected") {
  Model m("Two");
  m.add_thimac("", "A");
  m.add_thimac("", "B");
  m.add_stage("A", StageKind::Create);
  m.add_stage("B", StageKind::Process);
  m.add_thing({"x", ""});
  // create -> process is only legal inside one machine.
  CHECK_THROWS_AS(
      m.add_flow({"f1", {"A", StageKind::Create}, {"B", StageKind::Process},
                  "x", false}),
      Error);
  // transfer -> transfer is only legal across machines.
  m.add_stage("A", StageKind::Transfer);
  CHECK_THROWS_AS(
      m.add_flow({"f2", {"A", StageKind::Transfer},
                  {"A", StageKind::Transfer}, "x", false}),
      Error);
}

TEST_CASE("guard printing, equality and variable collection") {
  auto v = [](const char* n) {
    GuardOperand o;
    o.is_var = true;
    o.var = n;
    return o;
  };
  auto lit = [](int x) {
    GuardOperand o;
    o.value = x;
    return o;
  };
  auto g1 = GuardExpr::cmp(v("size"), CmpOp::Eq, lit(2));
  auto g2 = GuardExpr::cmp(v("size"), CmpOp::Eq, lit(2));
  auto g3 = GuardExpr::band(g1, GuardExpr::bnot(GuardExpr::cmp(
                                    v("busy"), CmpOp::Ge, v("cap"))));
  CHECK(guard_to_string(g1) == "size == 2");
  CHECK(guard_equal(g1, g2));
  CHECK_FALSE(guard_equal(g1, g3));
  CHECK(guard_equal(nullptr, nullptr));
  CHECK_FALSE(guard_equal(g1, nullptr));

  auto vars = guard_vars(g3);
  std::set<std::string> got(vars.begin(), vars.end());
  CHECK(got == std::set<std::string>{"size", "busy", "cap"});
  CHECK(guard_vars(nullptr).empty());
}

TEST_CASE("action statement printing") {
  ActionStmt inc;
  inc.kind = ActionKind::Inc;
  inc.var = "rear";
  inc.mod = 2;
  CHECK(action_to_string(inc) == "inc rear mod 2");

  ActionStmt blk;
  blk.kind = ActionKind::Block;
  blk.arc = "qEntry";
  CHECK(action_to_string(blk) == "block qEntry");

  ActionStmt set;
  set.kind = ActionKind::Set;
  set.var = "busy";
  set.expr = {{1, false, 1, ""}};
  CHECK(action_to_string(set) == "set busy 1");

  ActionStmt mix;
  mix.kind = ActionKind::Set;
  mix.var = "n";
  mix.expr = {{1, true, 0, "a"}, {-1, false, 3, ""}};
  CHECK(action_to_string(mix) == "set n a - 3");
}

TEST_CASE("subthing lookup is preorder over the child forest") {
  Model m("Nest");
  m.add_thimac("", "Furniture");
  m.add_thimac("Furniture", "Table");
  m.add_thimac("Furniture.Table", "WritingTable");
  m.add_thimac("Furniture.Table", "DiningTable");
  m.add_thimac("Furniture", "Chair");
  m.add_thimac("Furniture", "Price");

  CHECK(m.lookup_subthings("Furniture") ==
        std::vector<std::string>{"Furniture.Table",
                                 "Furniture.Table.WritingTable",
                                 "Furniture.Table.DiningTable",
                                 "Furniture.Chair", "Furniture.Price"});
  CHECK(m.lookup_subthings("Furniture.Chair").empty());
  CHECK_THROWS_AS(m.lookup_subthings("Sofa"), Error);
}

TEST_CASE("lookups and misc accessors") {
  Model m = tiny_model();
  m.add_var("A", {"v", 3, 0, 9});
  ActionDecl d;
  d.stage = StageKind::Create;
  ActionStmt s;
  s.kind = ActionKind::Inc;
  s.var = "v";
  d.stmts = {s};
  m.add_action("A", d);

  CHECK(m.find_thimac("A") != nullptr);
  CHECK(m.find_thimac("Z") == nullptr);
  CHECK_THROWS_AS(m.thimac("Z"), Error);
  CHECK(m.stage_exists({"A", StageKind::Create}));
  CHECK_FALSE(m.stage_exists({"A", StageKind::Release}));
  CHECK(m.find_thing("x") != nullptr);
  CHECK(m.find_thing("q") == nullptr);
  REQUIRE(m.find_var("v") != nullptr);
  CHECK(m.find_var("v")->init == 3);
  REQUIRE(m.var_owner("v") != nullptr);
  CHECK(m.var_owner("v")->id == "A");
  CHECK(m.actions_for({"A", StageKind::Create}).size() == 1);
  CHECK(m.actions_for({"A", StageKind::Process}).empty());
}

TEST_CASE("duplicate state vars and unknown action vars are rejected") {
  Model m = tiny_model();
  m.add_var("A", {"v", 0, {}, {}});
  CHECK_THROWS_AS(m.add_var("A", StateVar{"v", 1, {}, {}}), Error);

  ActionDecl d;
  d.stage = StageKind::Create;
  ActionStmt s;
  s.kind = ActionKind::Set;
  s.var = "ghost";
  s.expr = {{1, false, 0, ""}};
  d.stmts = {s};
  CHECK_THROWS_AS(m.add_action("A", d), Error);
}

TEST_CASE("whole-model invariant check catches unresolved arc blocks") {
  Model m = tiny_model();
  ActionDecl d;
  d.stage = StageKind::Create;
  ActionStmt s;
  s.kind = ActionKind::Block;
  s.arc = "later";
  d.stmts = {s};
  // Accepted at declaration time (the arc may appear further down the
  // file)...
  m.add_action("A", d);
  // ...but the whole-model check requires it to exist and be blockable.
  CHECK_THROWS_AS(m.check_invariants(), Error);
  m.add_flow({"later", {"A", StageKind::Create}, {"A", StageKind::Process},
              "x", true});
  m.check_invariants();
}
