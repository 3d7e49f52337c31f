#include "lacal/config.hpp"
#include "lacal/error.hpp"
#include "lacal/pipeline.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lacal;
using namespace lacal::pipeline;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no lacal::Error thrown";
  return ErrorKind::stage_failure;
}

const char* kSmall = R"(# small run
mesh.refinement = 1
model.n_steps = 8
design.wave1_size = 30
gsa.n_base = 128
gsa.bootstrap = 5
emulator.restarts = 1
emulator.max_iterations = 60
emulator.cv_restarts = 1
hm.wave_size = 20
hm.n_test = 1000
hm.max_waves = 2
mcmc.steps = 200
mcmc.burn_in = 50
mcmc.thin = 2
)";

PipelineConfig small(const fs::path& out) {
  auto c = PipelineConfig{};
  c.apply(KeyValueFile::parse(kSmall));
  c.out_dir = out;
  c.validate();
  return c;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("lacal_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, ParseOverridesAndErrors) {
  const auto kv = KeyValueFile::parse("# comment\n  mesh.refinement = 3  # trailing\n\nhm.n_test=500\n");
  EXPECT_EQ(kv.values().at("mesh.refinement"), "3");
  PipelineConfig c;
  c.apply(kv);
  EXPECT_EQ(c.refinement, 3);
  EXPECT_EQ(c.hm_n_test, 500u);

  EXPECT_EQ(kind_of([] { KeyValueFile::parse("no equals sign\n"); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { KeyValueFile::parse("a = 1\na = 2\n"); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { PipelineConfig{}.apply(KeyValueFile::parse("mesh.bogus = 1\n")); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { PipelineConfig{}.apply(KeyValueFile::parse("mesh.refinement = two\n")); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { PipelineConfig::from_file("/nonexistent/lacal.cfg"); }), ErrorKind::config);
}

TEST(Config, ValidationNamesTheEntry) {
  PipelineConfig ok;
  EXPECT_NO_THROW(ok.validate());
  auto expect_key = [](PipelineConfig c, const std::string& key) {
    try {
      c.validate();
      FAIL() << key;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::config);
      EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
    }
  };
  auto c = ok;
  c.refinement = 0;
  expect_key(c, "mesh.refinement");
  c = ok;
  c.mcmc_walkers = 17;
  expect_key(c, "mcmc.walkers");
  c = ok;
  c.hm_final_threshold = 4.0;
  expect_key(c, "hm.final_threshold");
  c = ok;
  c.observation_source = "file";
  expect_key(c, "observation.features_file");
  c = ok;
  c.mcmc_burn_in = c.mcmc_steps;
  expect_key(c, "mcmc.steps");
}

TEST(Config, HashTracksResultAffectingSettingsOnly) {
  PipelineConfig a;
  PipelineConfig b;
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash_hex().size(), 16u);
  b.threads = 8;
  b.out_dir = "elsewhere";
  EXPECT_EQ(a.hash(), b.hash());
  b.hm_n_test = 123;
  EXPECT_NE(a.hash(), b.hash());
  // effective() round-trips through the parser
  PipelineConfig c;
  c.apply(KeyValueFile::parse(b.effective()));
  EXPECT_EQ(c.hash(), b.hash());
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Config, SeedsAndPaperScale) {
  PipelineConfig c;
  c.set_all_seeds(42);
  std::set<std::uint64_t> seeds{c.seed_design, c.seed_train, c.seed_gsa, c.seed_hm, c.seed_mcmc};
  EXPECT_EQ(seeds.size(), 5u);
  c.use_paper_scale();
  EXPECT_EQ(c.hm_n_test, 100000u);
  EXPECT_EQ(c.mcmc_burn_in, 10000);
  EXPECT_NO_THROW(c.validate());
}

TEST(Stages, NamesAndExitCodes) {
  EXPECT_EQ(parse_stages("all").size(), all_stages().size());
  const auto s = parse_stages("mcmc,mesh");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], Stage::mesh);
  EXPECT_EQ(s[1], Stage::mcmc);
  EXPECT_EQ(stage_from_name("fix-C"), Stage::fix_c);
  EXPECT_EQ(kind_of([] { parse_stages("mesh,nope"); }), ErrorKind::config);
  EXPECT_EQ(exit_code(Error(ErrorKind::config, "x")), 2);
  EXPECT_EQ(exit_code(Error(ErrorKind::non_convergence, "x")), 4);
  EXPECT_EQ(exit_code(Error(ErrorKind::unloading_failure, "x")), 4);
  EXPECT_EQ(exit_code(Error(ErrorKind::divergence, "x")), 4);
  EXPECT_EQ(exit_code(Error(ErrorKind::dependency, "x")), 3);
}

TEST(Pipeline, MissingDependencyNamesStage) {
  const auto out = scratch("dep");
  Pipeline p(small(out));
  try {
    p.run({Stage::hm});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dependency);
    EXPECT_NE(std::string(e.what()).find("fix"), std::string::npos) << e.what();
  }
  const auto status = nlohmann::json::parse(slurp(out / "status.json"));
  EXPECT_EQ(status["status"], "failed");
  EXPECT_EQ(status["failed_stage"], "hm");
  EXPECT_EQ(status["exit_code"], 3);
  fs::remove_all(out);
}

class EndToEnd : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    out_a = scratch("e2e_a");
    out_b = scratch("e2e_b");
    Pipeline(small(out_a)).run(all_stages());
    Pipeline(small(out_b)).run(all_stages());
  }
  static void TearDownTestSuite() {
    fs::remove_all(out_a);
    fs::remove_all(out_b);
  }
  static fs::path out_a;
  static fs::path out_b;
};

fs::path EndToEnd::out_a;
fs::path EndToEnd::out_b;

TEST_F(EndToEnd, ArtifactsPresentAndStatusOk) {
  for (const char* f : {"mesh.txt", "design.csv", "features.csv", "train_metrics.csv", "gsa.csv", "hm_space.csv",
                        "wave1_nroy.csv", "wave1_design.csv", "wave1_metrics.csv", "nroy_box.csv", "chain.csv",
                        "map.csv", "report.md", "status.json"}) {
    EXPECT_TRUE(fs::exists(out_a / f)) << f;
  }
  const auto status = nlohmann::json::parse(slurp(out_a / "status.json"));
  EXPECT_EQ(status["status"], "ok");
  EXPECT_EQ(status["stages"].size(), all_stages().size());
  const auto h = read_header(out_a / "map.csv");
  ASSERT_TRUE(h.has_value());
  EXPECT_EQ(h->config_hash, small(out_a).hash_hex());
}

TEST_F(EndToEnd, DeterministicAcrossRuns) {
  for (const char* f : {"design.csv", "features.csv", "gsa.csv", "wave1_metrics.csv", "chain.csv", "map.csv"}) {
    EXPECT_EQ(slurp(out_a / f), slurp(out_b / f)) << f;
  }
}

TEST_F(EndToEnd, RerunIsIdempotent) {
  const auto before = fs::last_write_time(out_a / "map.csv");
  const auto content = slurp(out_a / "chain.csv");
  Pipeline(small(out_a)).run(all_stages());
  EXPECT_EQ(fs::last_write_time(out_a / "map.csv"), before);
  EXPECT_EQ(slurp(out_a / "chain.csv"), content);
}

TEST_F(EndToEnd, ForeignConfigRefusedUnlessForced) {
  auto changed = small(out_b);
  changed.mcmc_steps = 240;
  EXPECT_EQ(kind_of([&] { Pipeline(changed).run({Stage::mcmc}); }), ErrorKind::config);
  Pipeline(changed, true).run({Stage::mcmc});
  EXPECT_EQ(read_header(out_b / "map.csv")->config_hash, changed.hash_hex());
}

#ifdef LACAL_CLI
namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(LACAL_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Cli, ExitCodes) {
  const auto out = scratch("cli");
  EXPECT_EQ(cli("--help"), 0);
  EXPECT_EQ(cli("--no-such-flag"), 2);
  EXPECT_EQ(cli("stats"), 2);
  EXPECT_EQ(cli("--out " + out.string() + " mcmc"), 3);
  {
    std::ofstream(out / "bad.cfg") << "mesh.refinement = 0\n";
  }
  EXPECT_EQ(cli("--config " + (out / "bad.cfg").string() + " --out " + out.string() + " mesh"), 2);
  EXPECT_EQ(cli("--print-effective-config"), 0);
  EXPECT_EQ(cli(""), 2);
  fs::remove_all(out);
}
#endif
