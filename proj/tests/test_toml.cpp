#include "doctest.h"
#include "xbar/error.hpp"
#include "xbar/toml_lite.hpp"

using namespace xbar;

TEST_CASE("sections, scalars, and comments parse") {
  const char* text =
      "# top comment\n"
      "title = \"hello # not a comment\"\n"
      "\n"
      "[crossbar]\n"
      "rows = 128        # trailing comment\n"
      "noise_fraction = 0.05\n"
      "exact = true\n"
      "[cache]\n"
      "c_k = 64\n";
  TomlDoc d = TomlDoc::parse(text, "test.toml");
  CHECK(d.text("", "title", "") == "hello # not a comment");
  CHECK(d.integer("crossbar", "rows", 0) == 128);
  CHECK(d.number("crossbar", "noise_fraction", 0.0) == doctest::Approx(0.05));
  CHECK(d.boolean("crossbar", "exact", false));
  CHECK(d.integer("cache", "c_k", 0) == 64);
  CHECK(d.has("crossbar", "rows"));
  CHECK(!d.has("crossbar", "cols"));
}

TEST_CASE("integers promote to double but not the reverse") {
  TomlDoc d = TomlDoc::parse("a = 3\nb = 2.5\n");
  CHECK(d.number("", "a", 0.0) == 3.0);
  CHECK(d.number("", "b", 0.0) == 2.5);
  CHECK_THROWS_AS(d.integer("", "b", 0), Error);
}

TEST_CASE("fallbacks apply only when the key is absent") {
  TomlDoc d = TomlDoc::parse("x = 1\n");
  CHECK(d.integer("", "x", 9) == 1);
  CHECK(d.integer("", "y", 9) == 9);
  CHECK(d.text("sec", "z", "dflt") == "dflt");
}

TEST_CASE("malformed lines carry the line number") {
  try {
    TomlDoc::parse("good = 1\nbad line\n", "conf.toml");
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.kind() == errc::config);
    CHECK(std::string(e.what()).find("conf.toml:2") != std::string::npos);
  }
}

TEST_CASE("duplicates are rejected") {
  CHECK_THROWS_AS(TomlDoc::parse("a = 1\na = 2\n"), Error);
  CHECK_THROWS_AS(TomlDoc::parse("[s]\n[s]\n"), Error);
}

TEST_CASE("string escapes") {
  TomlDoc d = TomlDoc::parse("s = \"a\\\"b\\\\c\\n\"\n");
  CHECK(d.text("", "s", "") == "a\"b\\c\n");
}

TEST_CASE("unparseable values fail loudly") {
  CHECK_THROWS_AS(TomlDoc::parse("v = [1,2]\n"), Error);
  CHECK_THROWS_AS(TomlDoc::parse("v = \n"), Error);
  CHECK_THROWS_AS(TomlDoc::parse("v = \"open\n"), Error);
}

TEST_CASE("missing required keys name themselves") {
  TomlDoc d = TomlDoc::parse("[a]\nx = 1\n", "c.toml");
  CHECK(d.require_number("a", "x") == 1.0);
  try {
    d.require_number("a", "missing");
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("a.missing") != std::string::npos);
  }
}
