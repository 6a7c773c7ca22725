#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <string>

#include "cdstar/io.hpp"
#include "doctest.h"

#ifndef CDSTAR_BIN
#error "CDSTAR_BIN must point at the cdstar executable"
#endif
#ifndef CDSTAR_FIXTURES
#error "CDSTAR_FIXTURES must point at tests/fixtures"
#endif

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(CDSTAR_BIN) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string fx(const std::string& name) { return std::string(CDSTAR_FIXTURES) + "/" + name; }

const std::string kSmallGrid = " --t-grid 0,0.25,0.5,0.75,1 --nprime-grid -1,-0.5,-0.2";

}  // namespace

TEST_CASE("cli: sigma and models") {
  Run r = run("sigma --K 1 --N -2 --t 0.3 --theta 0");
  CHECK(r.code == 0);
  CHECK(r.out == "0.3\n");
  r = run("sigma --K -1 --N -1 --t 0.5 --theta 4");
  CHECK(r.code == 0);
  CHECK(r.out == "inf\n");
  CHECK(run("sigma --K 1 --N 1 --t 0.5 --theta 1").code == 2);

  r = run("models list");
  CHECK(r.code == 0);
  CHECK(r.out.find("cos_model") != std::string::npos);
  r = run("models describe cos_model --K -1 --N -2");
  CHECK(r.code == 0);
  CHECK(cdstar::io::space_from_json(cdstar::io::parse_json(r.out)) == cdstar::model_space("cos_model", -1, -2));
}

TEST_CASE("cli: cd-check on the cos fixture passes") {
  const Run r = run("cd-check --space " + fx("cos_space.json") + " --mu0 " + fx("cos_mu0.json") + " --mu1 " +
                    fx("cos_mu1.json") + " --K -1 --N -1" + kSmallGrid);
  CHECK(r.code == 0);
  const auto j = cdstar::io::parse_json(r.out);
  CHECK(j["command"] == "cd-check");
  CHECK(j["report"]["verdict"] == "PASS");
}

TEST_CASE("cli: cd-check with inflated K exits 1 and csv has the margin columns") {
  const Run r = run("cd-check --space " + fx("flat_space.json") + " --mu0 " + fx("flat_left.json") + " --mu1 " +
                    fx("flat_right.json") + " --K 10 --N -1 --format csv --t-grid 0,0.5,1 --nprime-grid -1");
  CHECK(r.code == 1);
  CHECK(r.out.rfind("t,Nprime,S,R,margin\n", 0) == 0);
}

TEST_CASE("cli: input errors exit 2 with a located diagnostic") {
  CHECK(run("cd-check --space " + fx("cos_space.json") + " --mu0 " + fx("malformed.json") + " --mu1 " +
            fx("cos_mu1.json") + " --K -1 --N -1")
            .code == 2);
  const std::string cmd = std::string(CDSTAR_BIN) + " entropy --measure " + fx("malformed.json") + " --Nprime -1 2>&1";
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::string err;
  std::array<char, 1024> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) err.append(buf.data(), n);
  CHECK(WEXITSTATUS(::pclose(p)) == 2);
  CHECK(err.find("malformed.json:4:") != std::string::npos);

  CHECK(run("cd-check --space " + fx("cos_space.json")).code == 2);
  CHECK(run("no-such-command").code == 2);
  // mu1 claims a different space than --space.
  CHECK(run("cd-check --space " + fx("flat_space.json") + " --mu0 " + fx("flat_left.json") + " --mu1 " +
            fx("cos_mu1.json") + " --K 0 --N -1")
            .code == 2);
}

TEST_CASE("cli: entropy and transport") {
  Run r = run("entropy --measure " + fx("flat_left.json") + " --space " + fx("flat_space.json") + " --Nprime -1");
  CHECK(r.code == 0);
  CHECK(cdstar::io::parse_json(r.out)["report"]["entropy"].get<double>() == doctest::Approx(20.0));

  r = run("transport --mu0 " + fx("flat_left.json") + " --mu1 " + fx("flat_right.json") + " --space " +
          fx("flat_space.json"));
  CHECK(r.code == 0);
  CHECK(cdstar::io::parse_json(r.out)["report"]["cost"].get<double>() == doctest::Approx(0.9025));

  r = run("transport --oracle --mu0 " + fx("line_mu0.json") + " --mu1 " + fx("line_mu1.json") + " --space " +
          fx("line_space.json"));
  CHECK(r.code == 0);
  CHECK(r.out.find("0.5") != std::string::npos);
}

TEST_CASE("cli: selftest is deterministic") {
  const Run a = run("selftest --seed 42");
  const Run b = run("selftest --seed 42");
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(!a.out.empty());
}
