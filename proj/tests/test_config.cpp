#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "rfm/config.hpp"

using namespace rfm;

TEST_CASE("key-value parsing with comments and typed getters") {
  const Config c = Config::parse(
      "# header comment\n"
      "\n"
      "problem = oscillator   # trailing comment\n"
      "  omega0=60\n"
      "sigma = 1e-8\n"
      "sigmas = 1e-10, 1e-8 ,1e-6\n"
      "K_values = 2,4,8\n"
      "flag = yes\n");
  CHECK(c.get_string("problem", "") == "oscillator");
  CHECK(c.get_double("omega0", 0.0) == 60.0);
  CHECK(c.get_size("omega0", 0) == 60);
  CHECK(c.get_double("sigma", 0.0) == 1e-8);
  CHECK(c.get_double_list("sigmas", {}) == std::vector<double>{1e-10, 1e-8, 1e-6});
  CHECK(c.get_size_list("K_values", {}) == std::vector<std::size_t>{2, 4, 8});
  CHECK(c.get_bool("flag", false));
  CHECK(c.get_double("missing", 2.5) == 2.5);
  CHECK(c.get_list("missing").empty());
}

TEST_CASE("later assignments and includes override earlier ones") {
  const auto dir = std::filesystem::temp_directory_path() / "rfm_config_test";
  std::filesystem::create_directories(dir / "sub");
  {
    std::ofstream(dir / "sub" / "base.cfg") << "S = 20\nK = 8\nseeds = 0-4\n";
    std::ofstream(dir / "top.cfg") << "S = 10\ninclude = sub/base.cfg\nK = 16\n";
    std::ofstream(dir / "loop.cfg") << "include = loop.cfg\n";
  }
  const Config c = Config::load(dir / "top.cfg");
  CHECK(c.get_size("S", 0) == 20);  // include comes after S = 10
  CHECK(c.get_size("K", 0) == 16);  // and before K = 16
  CHECK(c.get_seed_list("seeds", {}) == std::vector<std::uint64_t>{0, 1, 2, 3, 4});

  CHECK(oracle::error_code_of([&] { Config::load(dir / "loop.cfg"); }) == ErrorCode::configuration);
  CHECK(oracle::error_code_of([&] { Config::load(dir / "absent.cfg"); }) == ErrorCode::io);
  CHECK(oracle::error_code_of([&] { Config::parse("include = nope.cfg", dir); }) == ErrorCode::io);
  std::filesystem::remove_all(dir);
}

TEST_CASE("seed lists accept ranges and reject nonsense") {
  CHECK(parse_seed_list("3") == std::vector<std::uint64_t>{3});
  CHECK(parse_seed_list("0, 2-4, 9") == std::vector<std::uint64_t>{0, 2, 3, 4, 9});
  CHECK(oracle::error_code_of([] { parse_seed_list(""); }) == ErrorCode::configuration);
  CHECK(oracle::error_code_of([] { parse_seed_list("4-2"); }) == ErrorCode::configuration);
  CHECK(oracle::error_code_of([] { parse_seed_list("a"); }) == ErrorCode::configuration);
  CHECK(oracle::error_code_of([] { parse_seed_list("-1"); }) == ErrorCode::configuration);
  CHECK(split_list(" a, ,b ,") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("unused keys are reported") {
  const Config c = Config::parse("S = 3\nKK = 4\n");
  c.get_size("S", 0);
  c.get_size("K", 0);
  CHECK(c.unused_keys() == std::vector<std::string>{"KK"});
}

TEST_CASE("malformed input names the line") {
  try {
    Config::parse("S = 3\nthis line has no equals\n", ".", "demo.cfg");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::configuration);
    CHECK(std::string(e.what()).find("demo.cfg:2") != std::string::npos);
  }
  CHECK(oracle::error_code_of([] { Config::parse("bad key = 1"); }) == ErrorCode::configuration);
  const Config c = Config::parse("S = twenty\nx = 1.5e\nb = maybe\n");
  CHECK(oracle::error_code_of([&] { c.get_size("S", 0); }) == ErrorCode::configuration);
  CHECK(oracle::error_code_of([&] { c.get_double("x", 0); }) == ErrorCode::configuration);
  CHECK(oracle::error_code_of([&] { c.get_bool("b", false); }) == ErrorCode::configuration);
}

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}
