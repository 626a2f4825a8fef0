#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <unistd.h>

#include "condstable/errors.hpp"
#include "condstable/harness.hpp"

using namespace condstable;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() /
         ("condstable_test_" + std::to_string(::getpid()) + "_" + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "condstable");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  return main_entry(static_cast<int>(argv.size()), argv.data());
}

const ResultRecord* find(const std::vector<ResultRecord>& rs, const std::string& q) {
  for (const ResultRecord& r : rs)
    if (r.quantity == q) return &r;
  return nullptr;
}

}  // namespace

TEST(Subcommands, NamesRoundTrip) {
  const std::vector<std::string> names = subcommand_names();
  EXPECT_EQ(names.size(), 12u);
  for (const std::string& n : names) EXPECT_EQ(to_string(parse_subcommand(n)), n);
  EXPECT_THROW(parse_subcommand("nope"), ConfigError);
}

TEST(ReduceGeneralInterval, Examples) {
  const IntervalReduction id = reduce_general_interval(-1.0, 1.0, 2.0);
  EXPECT_EQ(id.x_std, 2.0);
  EXPECT_EQ(id.scale, 1.0);
  EXPECT_EQ(id.shift, 0.0);
  EXPECT_DOUBLE_EQ(reduce_general_interval(0.0, 2.0, 3.0).x_std, 2.0);
  for (double x : {-7.3, 0.1, 8.5, 1e3}) {
    const IntervalReduction r = reduce_general_interval(2.5, 7.0, x);
    EXPECT_NEAR(r.inverse(r.x_std), x, 1e-12 * std::max(1.0, std::abs(x)));
  }
  EXPECT_THROW(reduce_general_interval(1.0, 1.0, 3.0), DomainError);
}

TEST(Run, VerifyH) {
  ExperimentConfig c;
  c.subcommand = Subcommand::VerifyH;
  c.alpha = 0.5;
  c.x0 = -3.0;
  c.n = 20000;
  const auto rs = run(c);
  const ResultRecord* h = find(rs, "h");
  const ResultRecord* mc = find(rs, "h_mc");
  ASSERT_TRUE(h && mc);
  EXPECT_NEAR(h->value, 0.5, 1e-12);
  EXPECT_NEAR(mc->value, 0.5, 3.0 * mc->stderr + 3e-3);
  ASSERT_TRUE(mc->diagnostics.has_value());
}

TEST(Run, MartingaleByteIdentical) {
  const auto out1 = temp_file("m1.csv"), out2 = temp_file("m2.csv");
  EXPECT_EQ(invoke({"martingale", "--alpha", "1.5", "--x0", "2", "--t", "0.5", "--n", "100000", "--seed", "7",
                    "--out", out1.string()}),
            kExitOk);
  EXPECT_EQ(invoke({"martingale", "--alpha", "1.5", "--x0", "2", "--t", "0.5", "--n", "100000", "--seed", "7",
                    "--out", out2.string(), "--workers", "3"}),
            kExitOk);
  const std::string a = slurp(out1), b = slurp(out2);
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  std::filesystem::remove(out1);
  std::filesystem::remove(out2);
}

TEST(Run, ProfilePredictedColumn) {
  const auto out = temp_file("profile.csv");
  ASSERT_EQ(invoke({"profile", "--alpha", "1.5", "--xs", "-2,-3", "--q", "1e-3", "--n", "2000", "--out",
                    out.string()}),
            kExitOk);
  const std::string csv = slurp(out);
  EXPECT_NE(csv.find("profile_predicted,1.41421"), std::string::npos);
  std::filesystem::remove(out);
}

TEST(Csv, HeaderAndConfigEcho) {
  ExperimentConfig c;
  c.subcommand = Subcommand::VerifyH;
  c.alpha = 1.5;
  c.x0 = 2.0;
  c.seed = 99;
  std::vector<ResultRecord> rs(1);
  rs[0].quantity = "h";
  rs[0].value = 1.0;
  rs[0].notes = "a, \"quoted\" note";
  std::ostringstream os;
  write_csv(c, rs, os);
  const std::string s = os.str();
  EXPECT_NE(s.find("\nquantity,value,stderr,n,alpha,x0,t,s,q,dt,eps,seed,notes\n"), std::string::npos);
  EXPECT_EQ(s.rfind("# ", 0), 0u);
  EXPECT_NE(s.find("h,1,0,0,1.5,2,"), std::string::npos);
  EXPECT_NE(s.find(",99,\"a, \"\"quoted\"\" note\"\n"), std::string::npos);
}

TEST(Json, SchemaAndRecords) {
  ExperimentConfig c;
  c.subcommand = Subcommand::VerifyH;
  c.alpha = 0.5;
  c.x0 = -3.0;
  c.n = 500;
  c.seed = 3;
  std::ostringstream os;
  write_json(c, run(c), os);
  const nlohmann::json j = nlohmann::json::parse(os.str());
  EXPECT_EQ(j["schema"], "condstable.result/1");
  EXPECT_EQ(j["config"]["seed"], 3);
  ASSERT_TRUE(j["records"].is_array());
  ASSERT_GE(j["records"].size(), 2u);
  for (const auto& r : j["records"])
    for (const char* key : {"quantity", "value", "stderr", "n", "alpha", "x0", "t", "s", "q", "dt", "eps", "seed"})
      EXPECT_TRUE(r.contains(key)) << key;
}

TEST(PlotData, FiniteAbscissaOnly) {
  std::vector<ResultRecord> rs(2);
  rs[0].quantity = "a";
  rs[0].abscissa = 2.0;
  rs[0].value = 0.5;
  rs[1].quantity = "b";
  std::ostringstream os;
  write_plot_data(rs, os);
  std::istringstream in(os.str());
  std::string line;
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++rows;
  EXPECT_EQ(rows, 1);
}

TEST(CommandLine, ConfigFileAndOverrides) {
  const auto cfg = temp_file("run.ini");
  {
    std::ofstream f(cfg);
    f << "alpha=0.5\nx0=-3\nn=200\nseed=11\n";
  }
  const char* argv[] = {"condstable", "overshoot", "--config", cfg.c_str(), "--n", "300"};
  const Invocation inv = parse_command_line(6, argv);
  EXPECT_EQ(inv.config.subcommand, Subcommand::Overshoot);
  EXPECT_EQ(inv.config.alpha, 0.5);
  EXPECT_EQ(inv.config.x0, -3.0);
  EXPECT_EQ(inv.config.n, 300u);
  EXPECT_EQ(inv.config.seed, 11u);
  std::filesystem::remove(cfg);
}

TEST(CommandLine, Grids) {
  const char* argv[] = {"condstable", "tail-exponent", "--ss", "1,2,5,10", "--qs", "0.1,0.01"};
  const Invocation inv = parse_command_line(6, argv);
  EXPECT_EQ(inv.config.s_grid, (std::vector<double>{1, 2, 5, 10}));
  EXPECT_EQ(inv.config.q_grid, (std::vector<double>{0.1, 0.01}));
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(invoke({"bogus-subcommand"}), kExitConfig);
  EXPECT_EQ(invoke({"martingale", "--no-such-flag", "1"}), kExitConfig);
  EXPECT_EQ(invoke({"martingale", "--n", "0"}), kExitConfig);
  EXPECT_EQ(invoke({"martingale", "--alpha", "1.0", "--n", "10"}), kExitDomain);
  EXPECT_EQ(invoke({"overshoot", "--alpha", "0.5", "--x0", "3", "--n", "10"}), kExitDomain);
  EXPECT_EQ(invoke({"--help"}), kExitOk);
}

TEST(ExitCodes, ExceptionClasses) {
  auto code = [](auto thrower) {
    try {
      thrower();
    } catch (...) {
      return exit_code_for_current_exception();
    }
    return -1;
  };
  EXPECT_EQ(code([] { throw ConfigError("x"); }), kExitConfig);
  EXPECT_EQ(code([] { throw DomainError("x"); }), kExitDomain);
  EXPECT_EQ(code([] { throw DegenerateConditioning("x", 0.0); }), kExitDegenerate);
  EXPECT_EQ(code([] { throw FitDegenerate("x"); }), kExitDegenerate);
  EXPECT_EQ(code([] { throw ToleranceNotMet("x"); }), kExitTolerance);
  EXPECT_EQ(code([] { throw std::runtime_error("x"); }), kExitOther);
}
