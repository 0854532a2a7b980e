#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>

#include "tml/dsl.hpp"
#include "tml/render.hpp"

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

size_t count_of(const std::string& hay, const std::string& needle) {
  size_t n = 0;
  for (size_t p = hay.find(needle); p != std::string::npos;
       p = hay.find(needle, p + needle.size()))
    ++n;
  return n;
}

}  // namespace

TEST_CASE("full view nests clusters and styles arc families") {
  std::string dot = model_to_graphtext(load("lion.tm"));
  std::string reason;
  CHECK(dot_validate(dot, &reason));
  CHECK(reason.empty());

  CHECK(dot.rfind("digraph \"Lion\"", 0) == 0);
  CHECK(count_of(dot, "subgraph \"cluster_") == 4);
  // Nested machines sit inside their parent cluster.
  CHECK(dot.find("cluster_Lion.Body") > dot.find("cluster_Lion"));
  CHECK(count_of(dot, "style=dashed") == 2);  // the two triggers
  CHECK(dot.find("\"Gazelle/transfer\" -> \"Lion.Body/transfer\" "
                 "[label=\"gazelle\"]") != std::string::npos);
}

TEST_CASE("blockable flows are drawn double-lined") {
  std::string dot = model_to_graphtext(load("kojo.tm"));
  CHECK(dot_validate(dot));
  // qEntry, toA and toB.
  CHECK(count_of(dot, "black:invis:black") == 3);
  // The guard labels its trigger edge.
  CHECK(dot.find("size == 2") != std::string::npos);
}

TEST_CASE("the simplified view contracts to operating stages") {
  std::string dot = model_to_graphtext(load("kojo.tm"),
                                       {RenderView::Simplified, true, true});
  CHECK(dot_validate(dot));
  CHECK(count_of(dot, "subgraph \"cluster_") == 4);
  CHECK(dot.find("label=\"transfer\"") == std::string::npos);
  CHECK(dot.find("label=\"receive\"") == std::string::npos);
  CHECK(dot.find("label=\"release\"") == std::string::npos);
  // Boundary points stand in for the contracted queue machine.
  CHECK(dot.find("\"Queue/boundary\" [shape=point") != std::string::npos);
  CHECK(count_of(dot, "arrowhead=vee") == 4);
  // The overflow trigger re-anchors onto a surviving stage.
  CHECK(dot.find("\"CounterA/process\" -> \"Entrance/process\" "
                 "[style=dashed, label=\"size == 2\"]") != std::string::npos);
}

TEST_CASE("render options prune triggers and clusters") {
  Model m = load("lion.tm");
  std::string no_trig =
      model_to_graphtext(m, {RenderView::Full, true, false});
  CHECK(dot_validate(no_trig));
  CHECK(no_trig.find("style=dashed") == std::string::npos);

  std::string flat = model_to_graphtext(m, {RenderView::Full, false, true});
  CHECK(dot_validate(flat));
  CHECK(flat.find("subgraph") == std::string::npos);
  CHECK(flat.find("\"Lion.Body/receive\"") != std::string::npos);
}

TEST_CASE("rendering is deterministic") {
  Model m = load("furniture.tm");
  CHECK(model_to_graphtext(m) == model_to_graphtext(m));
}

TEST_CASE("every corpus model renders to valid graph text in both views") {
  for (const char* name : {"oak.tm", "bed.tm", "lion.tm", "water.tm",
                           "furniture.tm", "string.tm", "protocol.tm",
                           "kojo.tm"}) {
    CAPTURE(name);
    Model m = load(name);
    std::string reason;
    CHECK(dot_validate(model_to_graphtext(m), &reason));
    CHECK(reason.empty());
    CHECK(dot_validate(
        model_to_graphtext(m, {RenderView::Simplified, true, true}),
        &reason));
    CHECK(reason.empty());
  }
}

TEST_CASE("chronology renders as labelled boxes") {
  Model m = load("lion.tm");
  Trace t = simulate(m, parse_config(
                            "horizon = 10\n"
                            "inject = 0 gazelle Gazelle.transfer\n"));
  Chronology c = chronology(m, detect_occurrences(m, t));
  std::string dot = chronology_to_graphtext(c, m);
  CHECK(dot_validate(dot));
  // Boxes carry the event id and its description from the model.
  CHECK(dot.find("E1:") != std::string::npos);
  CHECK(count_of(dot, " -> ") == 3);
}

TEST_CASE("a cyclic chronology is refused") {
  Model m = load("lion.tm");
  Chronology c;
  c.events = {"E1", "E2"};
  c.edges = {{"E1", "E2"}, {"E2", "E1"}};
  CHECK_THROWS_AS(chronology_to_graphtext(c, m), Error);
  try {
    chronology_to_graphtext(c, m);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CyclicInput);
  }
}

TEST_CASE("graph text validation rejects malformed input") {
  std::string reason;
  CHECK(dot_validate("digraph g { \"a\" -> \"b\"; }"));
  CHECK_FALSE(dot_validate("digraph g { \"a\" -> ; }", &reason));
  CHECK_FALSE(reason.empty());
  CHECK_FALSE(dot_validate("digraph g {", &reason));
  CHECK_FALSE(dot_validate("graph without braces", &reason));
  CHECK_FALSE(dot_validate("", &reason));
}
