#include "cli.hpp"
#include "driftlab/error.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

using driftlab::cli::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(const json& config) {
  std::ostringstream out, err;
  const int code = driftlab::cli::run(config, out, err);
  return {code, out.str(), err.str()};
}

json zero_field(std::vector<int> dims) { return {{"dims", dims}, {"generator", {{"kind", "zero"}}}}; }

}  // namespace

TEST(Cli, QComputeZeroDrift) {
  const Result r = run({{"command", "q-compute"}, {"field", zero_field({4, 4})}});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  for (const char* key : {"q_direct", "q_boundary", "q_chain", "q_slab4"}) EXPECT_NEAR(j[key].get<double>(), 0.25, 1e-12);
  EXPECT_TRUE(j["q_closed_1d"].is_null());
  EXPECT_TRUE(j["q_slab2"].is_null());
  EXPECT_EQ(j["shape"], json({4, 4}));
}

TEST(Cli, GreenTable) {
  const Result r = run({{"command", "green-table"}, {"n_max", 2}});
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "y,G");
  const double expect[] = {0.7071, 0.1213, 0.0208};
  for (double e : expect) {
    std::getline(in, line);
    EXPECT_NEAR(std::stod(line.substr(line.find(',') + 1)), e, 5e-5);
  }
}

TEST(Cli, CounterexampleSearch) {
  const Result r = run({{"command", "counterexample-search"}, {"dims", {6, 2}}});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_GT(j["q"].get<double>(), 0.25);
  EXPECT_EQ(j["field"]["half_values"].size(), 6u);
  // The realizing field feeds back into q-compute.
  const Result back = run({{"command", "q-compute"}, {"field", j["field"]}});
  ASSERT_EQ(back.code, 0);
  EXPECT_EQ(json::parse(back.out)["q_direct"].get<double>(), j["q"].get<double>());
}

TEST(Cli, ExitCodes) {
  Result r = run({{"command", "q-compute"}, {"field", zero_field({4})}, {"extra", 1}});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error ValidationError:", 0), 0u);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);

  r = run({{"command", "q-compute"},
           {"field", {{"dims", {4}}, {"generator", {{"kind", "uniform"}, {"amplitude", 0.6}}}}}});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("AmplitudeError"), std::string::npos);

  r = run({{"command", "counterexample-search"}, {"dims", {8}}});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("NoModeError"), std::string::npos);

  r = run({{"command", "mc-estimate"}, {"field", zero_field({4})}, {"steps", 10}});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("BudgetError"), std::string::npos);

  EXPECT_EQ(run({{"command", "nope"}}).code, 1);
  EXPECT_EQ(run(json::array()).code, 1);
  EXPECT_EQ(run({{"command", "q-compute"}}).code, 1);
  EXPECT_EQ(run({{"command", "green-table"}, {"n_max", "3"}}).code, 1);
  EXPECT_EQ(run({{"command", "q-compute"}, {"field", {{"dims", {4}}, {"half_values", {0.1, 0.2, 0.3}}}}}).code, 1);
}

TEST(Cli, FieldDescriptors) {
  using driftlab::cli::parse_field;
  const auto b = parse_field({{"dims", {4, 2}}, {"half_values", {0.1, -0.1, 0.0, 0.2}}});
  EXPECT_DOUBLE_EQ(b.at(3, 1), 0.1);
  const auto m = parse_field(
      {{"dims", {6, 2}}, {"generator", {{"kind", "mode"}, {"k", 1}, {"transverse_wave", {1}}, {"amplitude", 0.1}}}});
  EXPECT_NEAR(m.at(1, 0), 0.1, 1e-15);
  const auto u = parse_field({{"dims", {4}}, {"generator", {{"kind", "uniform"}, {"amplitude", 0.3}, {"seed", 9}}}});
  EXPECT_EQ(u.digest(), parse_field(driftlab::cli::describe_field(u)).digest());
  EXPECT_THROW(parse_field({{"dims", {4}}}), driftlab::ValidationError);
  EXPECT_THROW(parse_field({{"dims", {4}}, {"generator", {{"kind", "zero"}, {"seed", 1}}}}), driftlab::ValidationError);
  EXPECT_THROW(parse_field({{"dims", {4}}, {"generator", {{"kind", "gauss"}}}}), driftlab::ValidationError);
}

TEST(Cli, PerturbScanCsv) {
  const Result r = run({{"command", "perturb-scan"}, {"dims", {6, 2}}});
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "k,m2,xi1,eigenvalue");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("1,1,", 0), 0u);
}

TEST(Cli, SeventeenDigits) {
  const Result r = run({{"command", "q-compute"},
                        {"field", {{"dims", {2}}, {"half_values", {0.1}}}}});
  ASSERT_EQ(r.code, 0);
  // 1/2 - 2 (0.1)^2 = 0.48 is not exact in binary.
  EXPECT_NE(r.out.find("0.47999999999999998"), std::string::npos);
}

TEST(Cli, IdempotentOutputFile) {
  const std::string path = ::testing::TempDir() + "driftlab_cli_test.json";
  const json config{{"command", "mc-estimate"},
                    {"field", {{"dims", {4}}, {"generator", {{"kind", "uniform"}, {"amplitude", 0.3}, {"seed", 2}}}}},
                    {"steps", 1000},
                    {"paths", 100},
                    {"seed", 5},
                    {"output", path}};
  auto read = [&] {
    std::ifstream in(path);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  ASSERT_EQ(run(config).code, 0);
  const std::string first = read();
  ASSERT_EQ(run(config).code, 0);
  EXPECT_EQ(read(), first);
  EXPECT_NE(first.find("\"q_hat\""), std::string::npos);
  std::remove(path.c_str());
}

TEST(Cli, CacheConfig) {
  const Result r = run({{"command", "q-compute"}, {"field", zero_field({4})}, {"lattice", {{"cache_max", 3}}}});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(run({{"command", "q-compute"}, {"field", zero_field({4})}, {"lattice", {{"size", 3}}}}).code, 1);
}
