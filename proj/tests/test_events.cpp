#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tml/dsl.hpp"
#include "tml/events.hpp"

using namespace tml;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE_MESSAGE(f.good(), "cannot open " << path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Model load(const std::string& name) {
  auto r = parse_model(read_file(std::string(TML_CORPUS_DIR) + "/" + name),
                       name);
  REQUIRE(r.ok());
  return *r.model;
}

Trace hunt_trace(const Model& lion) {
  return simulate(lion, parse_config(
                            "horizon = 10\n"
                            "inject = 0 gazelle Gazelle.transfer\n"));
}

}  // namespace

TEST_CASE("region containment gives the event hierarchy") {
  Model m = load("lion.tm");
  EventHierarchy h = infer_hierarchy(m);
  std::set<std::pair<std::string, std::string>> pairs(h.pairs.begin(),
                                                      h.pairs.end());
  for (const char* inner : {"E1", "E2", "E3", "E4"})
    CHECK(pairs.count({"E0", inner}));
  // The sibling sub-events do not contain each other.
  CHECK_FALSE(pairs.count({"E1", "E2"}));
  CHECK_FALSE(pairs.count({"E2", "E1"}));
  CHECK(h.mismatches.empty());
}

TEST_CASE("a declared nesting the regions cannot support is a mismatch") {
  auto r = parse_model(
      "model M {\n"
      "  thimac A { stages create, process; }\n"
      "  thing x;\n"
      "  flow f1: A.create -> A.process thing x;\n"
      "  event E1 \"small\" region { A.create };\n"
      "  event E2 \"unrelated\" region { A.process } within E1;\n"
      "}\n");
  REQUIRE(r.ok());
  EventHierarchy h = infer_hierarchy(*r.model);
  REQUIRE(h.mismatches.size() == 1);
  CHECK(h.mismatches[0].find("E2") != std::string::npos);
}

TEST_CASE("the hunt story plays out in order") {
  Model m = load("lion.tm");
  auto occ = detect_occurrences(m, hunt_trace(m));
  std::vector<Occurrence> expect = {
      {"E1", 1, 1},  // the gazelle reaches the lion
      {"E2", 2, 2},  // desire awakens
      {"E3", 3, 2},  // desire is processed
      {"E4", 4, 2},  // the lion acts
  };
  CHECK(occ == expect);

  CHECK(occurrences_to_csv(occ) ==
        "event_id,tick,token_id\n"
        "E1,1,1\n"
        "E2,2,2\n"
        "E3,3,2\n"
        "E4,4,2\n");
}

TEST_CASE("an occurrence needs the whole region, not just the anchor") {
  Model m = load("lion.tm");
  // Without the gazelle nothing fires, so no region can complete.
  Trace idle = simulate(m, parse_config("horizon = 10\n"));
  CHECK(detect_occurrences(m, idle).empty());
}

TEST_CASE("a trace from another model is refused") {
  Model lion = load("lion.tm");
  Model kojo = load("kojo.tm");
  Trace t = simulate(kojo, parse_config(
                               "horizon = 5\n"
                               "inject = 1 customer Queue.transfer\n"));
  CHECK_THROWS_AS(detect_occurrences(lion, t), Error);
  try {
    detect_occurrences(lion, t);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ModelMismatch);
  }
}

TEST_CASE("observed chronology is transitively reduced") {
  Model m = load("lion.tm");
  auto occ = detect_occurrences(m, hunt_trace(m));
  Chronology c = chronology(m, occ);
  CHECK(c.events == std::vector<std::string>{"E1", "E2", "E3", "E4"});
  CHECK(c.edges ==
        std::vector<std::pair<std::string, std::string>>{
            {"E1", "E2"}, {"E2", "E3"}, {"E3", "E4"}});
}

TEST_CASE("interleaving occurrences break strict precedence") {
  // Two occurrences of each event with overlapping spans: first-occurrence
  // order alone must not create an edge.
  std::vector<Occurrence> occ = {
      {"E1", 1, 1}, {"E2", 2, 1}, {"E1", 3, 2}, {"E2", 4, 2},
  };
  Model m = load("lion.tm");
  Chronology c = chronology(m, occ);
  // E1 does not strictly precede E2 (E1 at 3 follows E2 at 2), and E2
  // never precedes E1.
  CHECK(c.edges.empty());
  CHECK(c.events == std::vector<std::string>{"E1", "E2"});
}

TEST_CASE("the furniture join produces paired booking events") {
  Model m = load("furniture.tm");
  Trace two = simulate(m, parse_config(
                              "horizon = 12\n"
                              "inject = 0 price PriceSource.transfer\n"
                              "inject = 1 price PriceSource.transfer\n"
                              "inject = 2 data Input.transfer\n"
                              "inject = 3 data Input.transfer\n"));
  auto occ = detect_occurrences(m, two);
  std::vector<Occurrence> expect = {
      {"EB", 5, 3}, {"EC", 5, 1}, {"EB", 6, 4},
      {"EC", 6, 2}, {"EI", 6, 5}, {"EI", 7, 6},
  };
  CHECK(occ == expect);

  // A single order: both booking events strictly precede the creation.
  Trace one = simulate(m, parse_config(
                              "horizon = 12\n"
                              "inject = 0 price PriceSource.transfer\n"
                              "inject = 2 data Input.transfer\n"));
  Chronology c = chronology(m, detect_occurrences(m, one));
  std::set<std::pair<std::string, std::string>> edges(c.edges.begin(),
                                                      c.edges.end());
  CHECK(edges.count({"EB", "EI"}));
  CHECK(edges.count({"EC", "EI"}));
}
