#include <catch2/catch_amalgamated.hpp>
#include <qsd/chain_format.hpp>
#include <qsd/report.hpp>

#include "helpers.hpp"

using namespace qsd;
using namespace qsd::testing;

TEST_CASE("fnv hash matches the reference values") {
  CHECK(fnv1a64_hex("") == "cbf29ce484222325");
  CHECK(fnv1a64_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("report numbers carry 17 significant digits") {
  Json j;
  j["third"] = 1.0 / 3.0;
  j["half"] = 0.5;
  j["nan"] = std::numeric_limits<double>::quiet_NaN();
  std::string out = dump_report(j);
  CHECK(out.find("0.33333333333333331") != std::string::npos);
  CHECK(out.find("\"nan\": null") != std::string::npos);
}

TEST_CASE("report serialization is deterministic") {
  Json j;
  j["b"] = Json::array({1, 2, 3});
  j["a"] = "text with \"quotes\" and \n newline";
  j["c"] = Json{{"nested", 0.1}};
  std::string once = dump_report(j);
  std::string twice = dump_report(j);
  CHECK(once == twice);
  // insertion order is preserved, not alphabetical
  CHECK(once.find("\"b\"") < once.find("\"a\""));
  // output parses back
  auto parsed = Json::parse(once);
  CHECK(parsed["c"]["nested"] == 0.1);
}

TEST_CASE("schema validator enforces types, requireds and enums") {
  Json schema = Json::parse(R"({
    "type": "object",
    "required": ["name", "status"],
    "properties": {
      "name": {"type": "string"},
      "status": {"type": "string", "enum": ["pass", "fail", "skipped"]},
      "values": {"type": "array", "items": {"type": "number"}}
    }
  })");
  std::string err;
  Json good = Json{{"name", "x"}, {"status", "pass"}, {"values", {1.0, 2.0}}};
  CHECK(validate_schema(good, schema, &err));

  Json missing = Json{{"name", "x"}};
  CHECK_FALSE(validate_schema(missing, schema, &err));
  CHECK(err.find("status") != std::string::npos);

  Json bad_enum = Json{{"name", "x"}, {"status", "maybe"}};
  CHECK_FALSE(validate_schema(bad_enum, schema, &err));

  Json bad_item = Json{{"name", "x"}, {"status", "fail"}, {"values", {1.0, "two"}}};
  CHECK_FALSE(validate_schema(bad_item, schema, &err));
}

TEST_CASE("chain files round-trip") {
  auto chain = chain_d();
  auto text = write_chain_text(chain);
  auto parsed = parse_chain_text(text);
  REQUIRE(parsed.chain.size() == 3);
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 3; ++y)
      CHECK(parsed.chain.at(x, y) == chain.at(x, y));
}

TEST_CASE("chain file errors carry the line") {
  REQUIRE_THROWS_WITH(parse_chain_text("nonsense\n", "f"),
                      Catch::Matchers::ContainsSubstring("f:1"));
  REQUIRE_THROWS_WITH(
      parse_chain_text("qsd-chain v1 d=2\n0 5 0.5\n", "f"),
      Catch::Matchers::ContainsSubstring("f:2"));
  REQUIRE_THROWS_WITH(parse_chain_text("qsd-chain v1 d=2\n0 0\n", "f"),
                      Catch::Matchers::ContainsSubstring("f:2"));
  REQUIRE_THROWS_WITH(parse_chain_text("", "f"),
                      Catch::Matchers::ContainsSubstring("header"));
}

TEST_CASE("weight lines and duplicate entries") {
  auto cf = parse_chain_text(
      "qsd-chain v1 d=2\n"
      "0 0 0.25\n"
      "0 0 0.25   # duplicate, summed\n"
      "1 1 0.5\n"
      "weight 1 3.5\n");
  REQUIRE(cf.weight.has_value());
  CHECK((*cf.weight)[0] == 1.0);
  CHECK((*cf.weight)[1] == 3.5);
  CHECK(cf.chain.at(0, 0) == Catch::Approx(0.5));
  REQUIRE_FALSE(cf.warnings.empty());
}
