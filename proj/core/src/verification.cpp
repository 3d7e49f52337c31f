#include "lacal/verification.hpp"

#include "lacal/error.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace lacal::verification {

namespace fs = std::filesystem;

bool NoiseRun::all_truth_in_ci() const {
  for (bool b : truth_in_ci) {
    if (!b) return false;
  }
  return !truth_in_ci.empty();
}

bool on_boundary(const ParameterSpace& space, const Eigen::Ref<const Vector>& x) {
  for (std::size_t j = 0; j < space.dim(); ++j) {
    const double v = x[static_cast<Eigen::Index>(j)];
    const double tol = 1e-12 * (space[j].upper - space[j].lower);
    if (std::abs(v - space[j].lower) <= tol || std::abs(v - space[j].upper) <= tol) return true;
  }
  return false;
}

namespace {

void log_line(std::ostream* log, const std::string& message) {
  if (log != nullptr) *log << message << std::endl;
}

NoiseRun calibrate(const PipelineConfig& config, const ParameterSpace& space, const Simulator& simulator,
                   pipeline::SimulationCache& cache, const FeatureVector& target, const Vector& truth,
                   const std::string& label, const NoiseLevel& noise, const fs::path& dir, std::ostream* log) {
  NoiseRun run;
  run.label = label;
  run.noise = noise;
  run.obs = calibration::Observation::from_features(target, noise.displacement_mm, noise.esv_relative, "synthetic");
  log_line(log, "verify [" + label + "]: history matching");
  const auto hm = pipeline::history_match(config, space, simulator, cache, run.obs, dir, log);
  run.waves = static_cast<int>(hm.waves.size());
  run.nroy_fraction = hm.waves.back().cloud.fraction();
  run.truth_implausibility = calibration::implausibility(truth, *hm.final_emulators, run.obs);
  run.truth_in_nroy = hm.final_region.contains(truth) && run.truth_implausibility <= config.hm_final_threshold;

  const auto& box = hm.final_region.box();
  log_line(log, "verify [" + label + "]: MCMC");
  run.posterior = pipeline::sample_posterior(config, box, *hm.final_emulators, run.obs, hm.waves.back().cloud.points,
                                             pipeline::final_simulations(hm), dir, log);
  for (std::size_t j = 0; j < space.dim(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const auto& ci = run.posterior.intervals[j];
    run.truth_in_ci.push_back(truth[jj] >= ci.lower && truth[jj] <= ci.upper);
    run.map_distance.push_back(std::abs(run.posterior.map[jj] - truth[jj]));
    run.ci_width.push_back(ci.upper - ci.lower);
  }
  return run;
}

double mean_relative_width(const ParameterSpace& space, const std::vector<double>& width) {
  double s = 0.0;
  for (std::size_t j = 0; j < space.dim(); ++j) s += width[j] / (space[j].upper - space[j].lower);
  return s / static_cast<double>(space.dim());
}

}  // namespace

Report verify_synthetic(const PipelineConfig& config, std::ostream* log) {
  config.validate();
  const fs::path dir = config.out_dir / "verify";
  fs::create_directories(dir);
  const std::string hash = config.hash_hex();

  Report rep;
  rep.space = alpha_input_space();
  rep.truth = config.truth.in(rep.space);
  if (on_boundary(rep.space, rep.truth)) {
    rep.non_central = true;
    rep.warnings.push_back("truth point lies on the boundary of the input space; credible intervals will be one-sided");
    log_line(log, "warning: " + rep.warnings.back());
  }

  const Simulator simulator(config.model_setup());
  pipeline::SimulationCache cache(rep.space, dir / "simulations.csv", {"verify_simulations", hash, config.seed_hm});
  rep.truth_features = pipeline::target_features(config, simulator, &cache);
  {
    csv::Table t;
    for (const auto& n : kFeatureNames) t.header.emplace_back(n);
    std::vector<std::string> row;
    for (double v : rep.truth_features) row.push_back(csv::format(v));
    t.rows.push_back(std::move(row));
    pipeline::write_table(dir / "truth_features.csv", {"truth_features", hash, config.seed_hm}, t);
  }

  rep.baseline = calibrate(config, rep.space, simulator, cache, rep.truth_features, rep.truth, "baseline",
                           config.baseline_noise, dir / "baseline", log);
  rep.high = calibrate(config, rep.space, simulator, cache, rep.truth_features, rep.truth, "high", config.high_noise,
                       dir / "high", log);
  for (std::size_t j = 0; j < rep.space.dim(); ++j) {
    rep.width_ratio.push_back(rep.high.ci_width[j] / rep.baseline.ci_width[j]);
  }
  rep.mean_relative_width_baseline = mean_relative_width(rep.space, rep.baseline.ci_width);
  rep.mean_relative_width_high = mean_relative_width(rep.space, rep.high.ci_width);

  pipeline::write_table(dir / "verification.csv", {"verification", hash, config.seed_mcmc}, report_table(rep));
  std::ofstream md(dir / "verification.md");
  if (!md) throw Error(ErrorKind::io, "cannot write " + (dir / "verification.md").string());
  md << report_markdown(rep);
  return rep;
}

csv::Table report_table(const Report& report) {
  csv::Table t;
  t.header = {"noise", "parameter", "truth", "ci95_lower", "ci95_upper", "truth_in_ci", "map", "map_distance",
              "ci_width", "width_ratio_high_over_baseline"};
  for (const auto* run : {&report.baseline, &report.high}) {
    for (std::size_t j = 0; j < report.space.dim(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      t.rows.push_back({run->label, report.space[j].name, csv::format(report.truth[jj]),
                        csv::format(run->posterior.intervals[j].lower), csv::format(run->posterior.intervals[j].upper),
                        run->truth_in_ci[j] ? "yes" : "no", csv::format(run->posterior.map[jj]),
                        csv::format(run->map_distance[j]), csv::format(run->ci_width[j]),
                        csv::format(report.width_ratio[j])});
    }
  }
  t.comments.push_back("# mean_relative_ci_width baseline " + csv::format(report.mean_relative_width_baseline) +
                       " high " + csv::format(report.mean_relative_width_high));
  if (report.non_central) t.comments.push_back("# warning: truth is non-central");
  return t;
}

std::string report_markdown(const Report& report) {
  std::ostringstream md;
  md << "# Synthetic verification\n\n";
  for (const auto& w : report.warnings) md << "**Warning:** " << w << "\n\n";
  for (const auto* run : {&report.baseline, &report.high}) {
    md << "## " << run->label << " noise (displacement sd " << run->noise.displacement_mm << " mm, ESV sd "
       << 100.0 * run->noise.esv_relative << "%)\n\n";
    md << run->waves << " waves, NROY fraction " << run->nroy_fraction << ", truth implausibility "
       << run->truth_implausibility << (run->truth_in_nroy ? " (in NROY)" : " (ruled out)") << "\n\n";
    md << "| parameter | truth | 95% CI | truth in CI | MAP | MAP distance |\n|---|---|---|---|---|---|\n";
    for (std::size_t j = 0; j < report.space.dim(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      md << "| " << report.space[j].name << " | " << report.truth[jj] << " | [" << run->posterior.intervals[j].lower
         << ", " << run->posterior.intervals[j].upper << "] | " << (run->truth_in_ci[j] ? "yes" : "no") << " | "
         << run->posterior.map[jj] << " | " << run->map_distance[j] << " |\n";
    }
    md << "\n";
  }
  md << "## Width ratio (high / baseline)\n\n| parameter | ratio |\n|---|---|\n";
  for (std::size_t j = 0; j < report.space.dim(); ++j) {
    md << "| " << report.space[j].name << " | " << report.width_ratio[j] << " |\n";
  }
  md << "\nMean relative CI width: baseline " << report.mean_relative_width_baseline << ", high "
     << report.mean_relative_width_high << "\n";
  return md.str();
}

}  // namespace lacal::verification
