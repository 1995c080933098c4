#include "cmpsced/network.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace cmpsced;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cmpsced_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kTwoBus = R"([meta]
2,1,16,1
[buses]
1,,
2,-1.2,1.2
[lines]
L1,1,2,0.1,50,70,90
[generators]
G1,1,0,100,10,-inf,inf
[renewables]
[loads]
D1,2,1000,d1.series
)";

}  // namespace

TEST_CASE("two-bus file parses field by field") {
  const fs::path dir = scratch("two_bus");
  std::ofstream(dir / "d1.series") << "80\n75.5\n";
  const Case c = parse_case(kTwoBus, dir);
  REQUIRE(c.buses.size() == 2);
  REQUIRE(c.lines.size() == 1);
  CHECK(c.buses[0].theta_min == doctest::Approx(-kDefaultAngleBound));
  CHECK(c.buses[1].theta_max == 1.2);
  CHECK(c.lines[0].reactance == 0.1);
  CHECK(c.lines[0].zeta_n == 50);
  CHECK(c.lines[0].zeta_l == 70);
  CHECK(c.lines[0].zeta_s == 90);
  CHECK(c.generators[0].cost == 10);
  CHECK(c.generators[0].p_max == 100);
  CHECK(c.generators[0].ramp_max == kInf);
  CHECK(c.loads[0].demand == std::vector<double>{80.0, 75.5});
  CHECK(c.horizon == 2);
  CHECK(c.lte_limit == 16);
  CHECK(c.ste_limit == 1);
}

TEST_CASE("threshold ordering is rejected") {
  const fs::path dir = scratch("bad_order");
  std::ofstream(dir / "d1.series") << "80\n80\n";
  std::string text = kTwoBus;
  text.replace(text.find("50,70,90"), 8, "70,50,90");
  CHECK_THROWS_WITH_AS(parse_case(text, dir), doctest::Contains("threshold ordering"), CaseError);
}

TEST_CASE("dangling bus id is rejected") {
  const fs::path dir = scratch("dangling");
  std::ofstream(dir / "d1.series") << "80\n80\n";
  std::string text = kTwoBus;
  text.replace(text.find("G1,1,"), 5, "G1,7,");
  CHECK_THROWS_WITH_AS(parse_case(text, dir), doctest::Contains("dangling bus id"), CaseError);
}

TEST_CASE("malformed input names the problem") {
  const fs::path dir = scratch("malformed");
  std::ofstream(dir / "d1.series") << "80\n";
  CHECK_THROWS_AS(parse_case("[meta]\n1,1,1,1\n[buses]\nx,,\n", dir), CaseError);
  CHECK_THROWS_AS(parse_case("[nonsense]\n", dir), CaseError);
  CHECK_THROWS_AS(parse_case("[buses]\n1,,\n", dir), CaseError);
  std::string text = kTwoBus;
  CHECK_THROWS_WITH_AS(parse_case(text, dir), doctest::Contains("shorter than horizon"), CaseError);
}

TEST_CASE("invalid mutations of a valid case are rejected") {
  const Case base = testing::two_bus({80, 80});
  auto expect_bad = [&](auto mutate) {
    Case c = base;
    mutate(c);
    CHECK_THROWS_AS(validate(c), CaseError);
  };
  expect_bad([](Case& c) { c.lines[0].reactance = 0.0; });
  expect_bad([](Case& c) { c.lines[0].to_bus = 1; });
  expect_bad([](Case& c) { c.lines[0].zeta_s = 60.0; });
  expect_bad([](Case& c) { c.generators[0].p_min = 120.0; });
  expect_bad([](Case& c) { c.generators[0].ramp_min = 5.0; });
  expect_bad([](Case& c) { c.loads[0].demand[1] = -1.0; });
  expect_bad([](Case& c) { c.loads[0].demand.pop_back(); });
  expect_bad([](Case& c) { c.buses[1].id = 1; });
  expect_bad([](Case& c) { c.ste_limit = 20; });
  expect_bad([](Case& c) { c.buses[0].theta_min = 2.0; });
  expect_bad([](Case& c) { c.loads[0].shed_penalty = -1.0; });
}

TEST_CASE("write then load reproduces the case") {
  const fs::path dir = scratch("round_trip");
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SynthSpec spec;
    spec.buses = 9;
    spec.lines = 13;
    spec.generators = 7;
    spec.renewables = 2;
    spec.loads = 4;
    spec.horizon = 6;
    spec.seed = seed;
    const Case c = synthesize_case(spec);
    write_case(c, dir / "net.case");
    CHECK(load_case(dir / "net.case") == c);
  }
  const Case two = testing::two_bus({80, 60, 40});
  write_case(two, dir / "two.case");
  CHECK(load_case(dir / "two.case") == two);
}

TEST_CASE("missing case file is a CaseError naming the path") {
  CHECK_THROWS_WITH_AS(load_case("/nonexistent/dir/x.case"), doctest::Contains("/nonexistent/dir/x.case"),
                       CaseError);
}

TEST_CASE("scale_loads") {
  const Case c = testing::two_bus({80, 100});
  CHECK(scale_loads(c, 1.0) == c);
  const Case s = scale_loads(c, 1.5);
  CHECK(s.loads[0].demand == std::vector<double>{120.0, 150.0});
  CHECK(s.lines == c.lines);
  CHECK(s.generators == c.generators);
  CHECK_THROWS_AS(scale_loads(c, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(scale_loads(c, -2.0), std::invalid_argument);
}

TEST_CASE("synthetic network has the requested cardinalities") {
  const Case c = synthesize_case(SynthSpec{});
  CHECK(c.buses.size() == 73);
  CHECK(c.lines.size() == 108);
  CHECK(c.generators.size() == 158);
  CHECK(c.renewables.size() == 20);
  CHECK(c.loads.size() == 51);
  CHECK(c.horizon == 96);
  CHECK(c.dt == 0.25);
  CHECK(c.lte_limit == 16);
  CHECK(c.ste_limit == 1);
  CHECK(synthesize_case(SynthSpec{}) == c);
}

TEST_CASE("reference bus is the lowest id") {
  Case c = testing::two_bus({10});
  c.buses = {{5}, {2}};
  c.lines[0].from_bus = 5;
  c.generators[0].bus = 5;
  c.loads[0].bus = 2;
  validate(c);
  CHECK(c.reference_bus() == 1);
  CHECK(c.bus_index(5) == 0);
  CHECK_THROWS_AS(c.bus_index(9), CaseError);
}

TEST_CASE("synthetic must-run output stays below the lightest demand") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    SynthSpec spec;
    spec.seed = seed;
    spec.buses = 6;
    spec.lines = 8;
    spec.generators = 5;
    spec.loads = 1;
    spec.horizon = 4;
    const Case c = synthesize_case(spec);
    double pmin = 0.0;
    for (const auto& g : c.generators) pmin += g.p_min;
    for (int t = 0; t < c.horizon; ++t) {
      double demand = 0.0;
      for (const auto& d : c.loads) demand += d.demand[t];
      CHECK(pmin <= 0.5 * demand + 1e-9);
    }
  }
}
