// lacal: staged calibration pipeline driver.
#include "lacal/config.hpp"
#include "lacal/error.hpp"
#include "lacal/pipeline.hpp"
#include "lacal/verification.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

struct Options {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string stages = "all";
  std::string cohort;
  int threads = 0;
  bool paper_scale = false;
  bool force = false;
  bool allow_out_of_range = false;
  bool print_config = false;
};

lacal::PipelineConfig load(const Options& opt) {
  lacal::PipelineConfig c;
  if (!opt.config_path.empty()) c = lacal::PipelineConfig::from_file(opt.config_path);
  if (!opt.out_dir.empty()) c.out_dir = opt.out_dir;
  if (opt.seed) c.set_all_seeds(*opt.seed);
  if (opt.paper_scale) c.use_paper_scale();
  if (opt.allow_out_of_range) c.allow_out_of_range = true;
  if (opt.threads > 0) c.threads = opt.threads;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  using lacal::pipeline::Stage;
  CLI::App app{"Regional stiffness calibration: forward model, emulators, history matching, MCMC"};
  app.require_subcommand(0, 1);
  Options opt;
  app.add_option("--config", opt.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", opt.out_dir, "output directory (overrides run.out_dir)");
  app.add_option("--seed", opt.seed, "derive every stage seed from this value");
  app.add_option("--threads", opt.threads, "worker threads for simulation batches");
  app.add_flag("--paper-scale", opt.paper_scale, "n_test = 100000, MCMC steps = 100000, burn-in = 10000");
  app.add_flag("--force", opt.force, "overwrite artifacts written under a different config");
  app.add_flag("--allow-out-of-range", opt.allow_out_of_range, "accept values outside the default input ranges");
  app.add_flag("--print-effective-config", opt.print_config, "echo the resolved configuration and its hash");

  std::vector<std::pair<CLI::App*, Stage>> stage_commands;
  auto stage_cmd = [&](const std::string& name, Stage s, const std::string& help) {
    stage_commands.emplace_back(app.add_subcommand(name, help), s);
  };
  stage_cmd("mesh", Stage::mesh, "build and store the hemisphere mesh");
  stage_cmd("design", Stage::design, "Sobol design over the 14 inputs");
  stage_cmd("simulate", Stage::simulate, "run the forward model on the design (resumable)");
  stage_cmd("train", Stage::train, "fit one emulator per feature and cross-validate");
  stage_cmd("gsa", Stage::gsa, "Sobol indices on the emulators");
  stage_cmd("fix-C", Stage::fix_c, "pin C and write the 9-input calibration space");
  stage_cmd("hm", Stage::hm, "history matching against the targets");
  stage_cmd("mcmc", Stage::mcmc, "ensemble MCMC on the final emulators");
  stage_cmd("report", Stage::report, "write report.md and report.csv");
  auto* run = app.add_subcommand("run", "run several stages in order");
  run->add_option("--stages", opt.stages, "comma-separated stages or 'all'");
  auto* stats = app.add_subcommand("stats", "cohort mixed-model and paired t-test statistics");
  stats->add_option("--cohort", opt.cohort, "cohort CSV")->required()->check(CLI::ExistingFile);
  auto* verify = app.add_subcommand("verify", "synthetic-truth verification at baseline and high noise");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // usage errors are configuration errors
  }

  if (app.get_subcommands().empty() && !opt.print_config) {
    std::cerr << "a subcommand is required\n" << app.help();
    return 2;
  }

  try {
    const auto config = load(opt);
    if (opt.print_config) {
      std::cout << config.effective() << "# config_hash " << config.hash_hex() << '\n';
      if (app.get_subcommands().empty()) return 0;
    }
    if (verify->parsed()) {
      lacal::verification::verify_synthetic(config, &std::cerr);
      std::cout << (config.out_dir / "verify" / "verification.md").string() << '\n';
      return 0;
    }
    lacal::pipeline::Pipeline pipe(config, opt.force, &std::cerr);
    if (stats->parsed()) {
      pipe.run_stats(opt.cohort);
      return 0;
    }
    std::vector<Stage> stages;
    if (run->parsed()) {
      stages = lacal::pipeline::parse_stages(opt.stages);
    } else {
      for (const auto& [cmd, s] : stage_commands) {
        if (cmd->parsed()) stages.push_back(s);
      }
    }
    pipe.run(stages);
    return 0;
  } catch (const lacal::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return lacal::pipeline::exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
