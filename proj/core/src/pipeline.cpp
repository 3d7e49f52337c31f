#include "lacal/pipeline.hpp"

#include "lacal/cohortstats.hpp"
#include "lacal/error.hpp"
#include "lacal/mesh_io.hpp"
#include "lacal/random.hpp"
#include "lacal/sensitivity.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace lacal::pipeline {

namespace fs = std::filesystem;
using calibration::EmulatorSet;
using calibration::Observation;

namespace {

std::string lower_case(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::vector<std::string> feature_names() { return {kFeatureNames.begin(), kFeatureNames.end()}; }

void log_line(std::ostream* log, const std::string& message) {
  if (log != nullptr) *log << message << std::endl;
}

}  // namespace

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::mesh: return "mesh";
    case Stage::design: return "design";
    case Stage::simulate: return "simulate";
    case Stage::train: return "train";
    case Stage::gsa: return "gsa";
    case Stage::fix_c: return "fix-C";
    case Stage::hm: return "hm";
    case Stage::mcmc: return "mcmc";
    case Stage::report: return "report";
  }
  return "?";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages{Stage::mesh, Stage::design, Stage::simulate, Stage::train, Stage::gsa,
                                         Stage::fix_c, Stage::hm, Stage::mcmc, Stage::report};
  return stages;
}

Stage stage_from_name(std::string_view name) {
  const std::string want = lower_case(name);
  for (Stage s : all_stages()) {
    if (lower_case(stage_name(s)) == want) return s;
  }
  throw Error(ErrorKind::config, "unknown stage '" + std::string(name) + "'");
}

std::vector<Stage> parse_stages(const std::string& list) {
  if (list.empty() || list == "all") return all_stages();
  std::vector<bool> on(all_stages().size(), false);
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    on[static_cast<std::size_t>(stage_from_name(item))] = true;
  }
  std::vector<Stage> out;
  for (Stage s : all_stages()) {
    if (on[static_cast<std::size_t>(s)]) out.push_back(s);
  }
  if (out.empty()) throw Error(ErrorKind::config, "no stages selected");
  return out;
}

int exit_code(const Error& error) {
  switch (error.kind()) {
    case ErrorKind::config: return 2;
    case ErrorKind::non_convergence:
    case ErrorKind::unloading_failure:
    case ErrorKind::divergence: return 4;
    default: return 3;
  }
}

// ---------------------------------------------------------------------------

std::vector<std::string> header_lines(const ArtifactHeader& header) {
  return {"# lacal " + header.kind, "# config_hash " + header.config_hash, "# seed " + std::to_string(header.seed)};
}

std::optional<ArtifactHeader> read_header(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  ArtifactHeader h;
  bool any = false;
  std::string line;
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {
    std::istringstream fields(line.substr(1));
    std::string key;
    fields >> key;
    if (key == "lacal") {
      fields >> h.kind;
      any = true;
    } else if (key == "config_hash") {
      fields >> h.config_hash;
    } else if (key == "seed") {
      fields >> h.seed;
    }
  }
  if (!any) return std::nullopt;
  return h;
}

void write_table(const fs::path& path, const ArtifactHeader& header, csv::Table table) {
  auto lines = header_lines(header);
  lines.insert(lines.end(), table.comments.begin(), table.comments.end());
  table.comments = std::move(lines);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  csv::write(tmp, table);
  fs::rename(tmp, path);
}

csv::Table points_table(const ParameterSpace& space, const PointMatrix& points, std::size_t first_id) {
  csv::Table t;
  t.header.push_back("sim_id");
  for (const auto& n : space.names()) t.header.push_back(n);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    std::vector<std::string> row{std::to_string(first_id + static_cast<std::size_t>(i))};
    for (Eigen::Index j = 0; j < points.cols(); ++j) row.push_back(csv::format(points(i, j)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

PointMatrix read_points(const csv::Table& table, const ParameterSpace& space) {
  PointMatrix x(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(space.dim()));
  for (std::size_t j = 0; j < space.dim(); ++j) {
    const auto c = table.column(space[j].name);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table.number(i, c);
    }
  }
  return x;
}

csv::Table observation_table(const Observation& obs) {
  csv::Table t;
  t.comments.push_back("# provenance " + obs.provenance);
  t.header = {"feature", "target", "sd"};
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    const auto i = static_cast<Eigen::Index>(f);
    t.rows.push_back({std::string(kFeatureNames[f]), csv::format(obs.mean[i]), csv::format(obs.sd[i])});
  }
  return t;
}

Observation read_observation(const csv::Table& table) {
  Observation obs;
  obs.mean = Vector::Zero(kFeatureCount);
  obs.sd = Vector::Zero(kFeatureCount);
  const auto cf = table.column("feature");
  const auto ct = table.column("target");
  const auto cs = table.column("sd");
  std::vector<bool> seen(kFeatureCount, false);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& name = table.rows[i][cf];
    const auto it = std::find(kFeatureNames.begin(), kFeatureNames.end(), name);
    if (it == kFeatureNames.end()) throw Error(ErrorKind::io, "unknown feature '" + name + "' in target table");
    const auto f = static_cast<std::size_t>(it - kFeatureNames.begin());
    obs.mean[static_cast<Eigen::Index>(f)] = table.number(i, ct);
    obs.sd[static_cast<Eigen::Index>(f)] = table.number(i, cs);
    seen[f] = true;
  }
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    if (!seen[f]) throw Error(ErrorKind::io, "target table lacks " + std::string(kFeatureNames[f]));
  }
  for (const auto& c : table.comments) {
    if (c.rfind("# provenance ", 0) == 0) obs.provenance = c.substr(13);
  }
  obs.validate();
  return obs;
}

csv::Table space_table(const ParameterSpace& space) {
  csv::Table t;
  t.header = {"name", "unit", "lower", "upper"};
  for (const auto& p : space.parameters()) {
    t.rows.push_back({p.name, p.unit.empty() ? "-" : p.unit, csv::format(p.lower), csv::format(p.upper)});
  }
  return t;
}

ParameterSpace read_space(const csv::Table& table) {
  std::vector<ParameterDescriptor> params;
  const auto cn = table.column("name");
  const auto cu = table.column("unit");
  const auto cl = table.column("lower");
  const auto ch = table.column("upper");
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::string unit = table.rows[i][cu] == "-" ? std::string() : table.rows[i][cu];
    params.push_back({table.rows[i][cn], unit, table.number(i, cl), table.number(i, ch)});
  }
  return ParameterSpace(std::move(params));
}

void write_emulators(const fs::path& dir, const ArtifactHeader& header, const EmulatorSet& emulators) {
  fs::create_directories(dir);
  for (const auto& em : emulators) {
    const fs::path path = dir / (em.output_name() + ".gpe");
    const fs::path tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp);
      if (!out) throw Error(ErrorKind::io, "cannot write " + tmp.string());
      for (const auto& line : header_lines(header)) out << line << '\n';
      em.write(out);
      if (!out) throw Error(ErrorKind::io, "write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
  }
}

EmulatorSet read_emulators(const fs::path& dir) {
  EmulatorSet set;
  for (const auto& name : kFeatureNames) {
    set.push_back(emulator::Emulator::load((dir / (std::string(name) + ".gpe")).string()));
  }
  return set;
}

csv::Table chain_table(const ParameterSpace& space, const mcmc::Chain& chain) {
  csv::Table t;
  t.comments.push_back("# walkers " + std::to_string(chain.walkers) + " steps " + std::to_string(chain.steps) +
                       " burn_in " + std::to_string(chain.burn_in) + " thin " + std::to_string(chain.thin) +
                       " acceptance " + csv::format(chain.acceptance_fraction));
  t.header = {"walker", "step"};
  for (const auto& n : space.names()) t.header.push_back(n);
  t.header.push_back("log_posterior");
  for (Eigen::Index i = 0; i < chain.samples.rows(); ++i) {
    std::vector<std::string> row{std::to_string(chain.walker[static_cast<std::size_t>(i)]),
                                 std::to_string(chain.step[static_cast<std::size_t>(i)])};
    for (Eigen::Index j = 0; j < chain.samples.cols(); ++j) row.push_back(csv::format(chain.samples(i, j)));
    row.push_back(csv::format(chain.log_posterior[i]));
    t.rows.push_back(std::move(row));
  }
  return t;
}

mcmc::Chain read_chain(const csv::Table& table, const ParameterSpace& space) {
  mcmc::Chain chain;
  chain.samples = read_points(table, space);
  const auto cw = table.column("walker");
  const auto cs = table.column("step");
  const auto cl = table.column("log_posterior");
  chain.log_posterior.resize(static_cast<Eigen::Index>(table.rows.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    chain.walker.push_back(static_cast<int>(table.number(i, cw)));
    chain.step.push_back(static_cast<int>(table.number(i, cs)));
    chain.log_posterior[static_cast<Eigen::Index>(i)] = table.number(i, cl);
  }
  for (const auto& c : table.comments) {
    std::istringstream in(c.substr(1));
    std::string key;
    while (in >> key) {
      if (key == "walkers") in >> chain.walkers;
      else if (key == "steps") in >> chain.steps;
      else if (key == "burn_in") in >> chain.burn_in;
      else if (key == "thin") in >> chain.thin;
      else if (key == "acceptance") in >> chain.acceptance_fraction;
    }
  }
  return chain;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> key_of(const Eigen::Ref<const Vector>& x) { return {x.data(), x.data() + x.size()}; }

}  // namespace

SimulationCache::SimulationCache(ParameterSpace space, std::optional<fs::path> file, ArtifactHeader header)
    : space_(std::move(space)), file_(std::move(file)), header_(std::move(header)) {
  if (!file_ || !fs::exists(*file_)) return;
  const auto table = csv::read(*file_);
  const PointMatrix x = read_points(table, space_);
  const auto ce = table.column("error");
  std::vector<std::size_t> cf;
  for (const auto& n : kFeatureNames) cf.push_back(table.column(std::string(n)));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    SimulationOutcome o;
    o.error = table.rows[i][ce];
    if (o.error.empty()) {
      FeatureVector f{};
      for (std::size_t k = 0; k < kFeatureCount; ++k) f[k] = table.number(i, cf[k]);
      o.features = f;
    }
    insert(x.row(static_cast<Eigen::Index>(i)).transpose(), o);
  }
}

const SimulationOutcome* SimulationCache::find(const Eigen::Ref<const Vector>& x) const {
  const auto it = index_.find(key_of(x));
  return it == index_.end() ? nullptr : &entries_[it->second].second;
}

void SimulationCache::insert(const Eigen::Ref<const Vector>& x, const SimulationOutcome& outcome) {
  const auto key = key_of(x);
  const auto it = index_.find(key);
  if (it != index_.end()) {
    entries_[it->second].second = outcome;
    return;
  }
  index_.emplace(key, entries_.size());
  entries_.emplace_back(x, outcome);
}

void SimulationCache::flush() const {
  if (!file_) return;
  csv::Table t;
  t.header.push_back("sim_id");
  for (const auto& n : space_.names()) t.header.push_back(n);
  for (const auto& n : kFeatureNames) t.header.emplace_back(n);
  t.header.push_back("error");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& [x, o] = entries_[i];
    std::vector<std::string> row{std::to_string(i)};
    for (Eigen::Index j = 0; j < x.size(); ++j) row.push_back(csv::format(x[j]));
    for (std::size_t k = 0; k < kFeatureCount; ++k) row.push_back(o.features ? csv::format((*o.features)[k]) : "");
    row.push_back(sanitize(o.error));
    t.rows.push_back(std::move(row));
  }
  write_table(*file_, header_, std::move(t));
}

std::vector<SimulationOutcome> SimulationCache::run(const Simulator& simulator, const PointMatrix& x, int threads) {
  std::vector<Eigen::Index> missing;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (find(x.row(i).transpose()) == nullptr) missing.push_back(i);
  }
  if (!missing.empty()) {
    const PointMatrix todo = x(missing, Eigen::all);
    const auto fresh = simulator.run_batch(space_, todo, threads);
    for (std::size_t k = 0; k < missing.size(); ++k) insert(todo.row(static_cast<Eigen::Index>(k)).transpose(), fresh[k]);
    flush();
  }
  std::vector<SimulationOutcome> out;
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.push_back(*find(x.row(i).transpose()));
  return out;
}

calibration::BatchSimulator cached_simulator(const Simulator& simulator, const ParameterSpace& space,
                                             SimulationCache& cache, int threads) {
  (void)space;
  return [&simulator, &cache, threads](const PointMatrix& x) {
    const auto outcomes = cache.run(simulator, x, threads);
    std::vector<std::optional<FeatureVector>> out;
    for (const auto& o : outcomes) out.push_back(o.features);
    return out;
  };
}

// ---------------------------------------------------------------------------

namespace {

std::string wave_file(int wave, const std::string& what) {
  return "wave" + std::to_string(wave) + "_" + what + ".csv";
}

csv::Table wave_metrics_table(const calibration::WaveRecord& rec, std::size_t n_test) {
  csv::Table t;
  t.header = {"wave", "threshold", "n_simulated", "n_failed", "training_size", "n_tested", "n_retained",
              "retained_fraction", "reduction_vs_initial"};
  for (const auto& n : kFeatureNames) {
    t.header.push_back("cv_r2_" + std::string(n));
    t.header.push_back("cv_ise_" + std::string(n));
  }
  std::size_t failed = 0;
  for (const auto& o : rec.outputs) failed += o ? 0 : 1;
  std::vector<std::string> row{std::to_string(rec.wave),
                               csv::format(rec.threshold),
                               std::to_string(rec.design.rows()),
                               std::to_string(failed),
                               std::to_string(rec.training_size),
                               std::to_string(n_test),
                               std::to_string(rec.cloud.points.rows()),
                               csv::format(rec.cloud.fraction()),
                               csv::format(1.0 - rec.cloud.fraction())};
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    row.push_back(f < rec.cv.size() ? csv::format(rec.cv[f].mean_r2) : "");
    row.push_back(f < rec.cv.size() ? csv::format(rec.cv[f].mean_ise) : "");
  }
  t.rows.push_back(std::move(row));
  return t;
}

}  // namespace

calibration::HmResult history_match(const PipelineConfig& config, const ParameterSpace& space,
                                   const Simulator& simulator, SimulationCache& cache, const Observation& obs,
                                   const fs::path& dir, std::ostream* log) {
  fs::create_directories(dir);
  const ArtifactHeader hdr{"hm", config.hash_hex(), config.seed_hm};
  const auto schedule = config.hm_schedule();
  std::size_t first_id = 0;
  auto on_wave = [&](const calibration::WaveRecord& rec) {
    auto design = points_table(space, rec.design, first_id);
    write_table(dir / wave_file(rec.wave, "design"), {"wave_design", hdr.config_hash, hdr.seed}, design);

    csv::Table feats;
    feats.header.push_back("sim_id");
    for (const auto& n : kFeatureNames) feats.header.emplace_back(n);
    for (std::size_t i = 0; i < rec.outputs.size(); ++i) {
      if (!rec.outputs[i]) continue;
      std::vector<std::string> row{std::to_string(first_id + i)};
      for (double v : *rec.outputs[i]) row.push_back(csv::format(v));
      feats.rows.push_back(std::move(row));
    }
    write_table(dir / wave_file(rec.wave, "features"), {"wave_features", hdr.config_hash, hdr.seed}, feats);

    csv::Table nroy;
    for (const auto& n : space.names()) nroy.header.push_back(n);
    nroy.header.push_back("implausibility");
    nroy.comments.push_back("# threshold " + csv::format(rec.threshold));
    for (Eigen::Index i = 0; i < rec.cloud.points.rows(); ++i) {
      std::vector<std::string> row;
      for (Eigen::Index j = 0; j < rec.cloud.points.cols(); ++j) row.push_back(csv::format(rec.cloud.points(i, j)));
      row.push_back(csv::format(rec.cloud.implausibility[i]));
      nroy.rows.push_back(std::move(row));
    }
    write_table(dir / wave_file(rec.wave, "nroy"), {"wave_nroy", hdr.config_hash, hdr.seed}, nroy);
    write_table(dir / wave_file(rec.wave, "metrics"), {"wave_metrics", hdr.config_hash, hdr.seed},
                wave_metrics_table(rec, schedule.n_test));
    first_id += static_cast<std::size_t>(rec.design.rows());

    std::ostringstream msg;
    msg << "wave " << rec.wave << ": threshold " << rec.threshold << ", " << rec.cloud.points.rows() << "/"
        << schedule.n_test << " retained, NROY fraction " << rec.cloud.fraction() << ", training size "
        << rec.training_size;
    log_line(log, msg.str());
  };
  auto hm = calibration::run_history_matching(space, cached_simulator(simulator, space, cache, config.threads), obs,
                                              schedule, on_wave);
  write_table(dir / "nroy_box.csv", {"nroy_box", hdr.config_hash, hdr.seed}, space_table(hm.final_region.box()));
  const auto& last = hm.waves.back();
  {
    csv::Table t;
    for (const auto& n : space.names()) t.header.push_back(n);
    for (Eigen::Index i = 0; i < last.cloud.points.rows(); ++i) {
      std::vector<std::string> row;
      for (Eigen::Index j = 0; j < last.cloud.points.cols(); ++j) row.push_back(csv::format(last.cloud.points(i, j)));
      t.rows.push_back(std::move(row));
    }
    t.comments.push_back("# wave " + std::to_string(last.wave));
    write_table(dir / "nroy_final.csv", {"nroy_final", hdr.config_hash, hdr.seed}, t);
  }
  write_table(dir / "final_simulations.csv", {"final_simulations", hdr.config_hash, hdr.seed},
              points_table(space, final_simulations(hm)));
  write_emulators(dir / "hm_emulators", {"hm_emulator", hdr.config_hash, hdr.seed}, *hm.final_emulators);
  return hm;
}

PointMatrix final_simulations(const calibration::HmResult& hm) {
  if (hm.waves.empty()) throw Error(ErrorKind::invalid_argument, "history matching produced no waves");
  const auto& last = hm.waves.back();
  std::vector<Eigen::Index> ok;
  for (std::size_t i = 0; i < last.outputs.size(); ++i) {
    if (last.outputs[i]) ok.push_back(static_cast<Eigen::Index>(i));
  }
  return last.design(ok, Eigen::all);
}

PosteriorRun sample_posterior(const PipelineConfig& config, const ParameterSpace& box, const EmulatorSet& emulators,
                              const Observation& obs, const PointMatrix& start_pool, const PointMatrix& final_simulated,
                              const fs::path& dir, std::ostream* log) {
  fs::create_directories(dir);
  const ArtifactHeader hdr{"mcmc", config.hash_hex(), config.seed_mcmc};
  PosteriorRun run;
  run.chain = calibration::ensemble_mcmc(box, emulators, obs, start_pool, config.posterior_settings());
  const auto best = calibration::map_index(run.chain);
  run.map = run.chain.samples.row(static_cast<Eigen::Index>(best)).transpose();
  run.map_log_posterior = run.chain.log_posterior[static_cast<Eigen::Index>(best)];
  run.intervals = calibration::credible_intervals(run.chain, 0.95);
  run.nearest_row = calibration::nearest_plausible(box, run.map, final_simulated);
  run.nearest_distance =
      (box.to_unit(run.map) - box.to_unit(final_simulated.row(static_cast<Eigen::Index>(run.nearest_row)).transpose()))
          .norm();

  write_table(dir / "chain.csv", {"chain", hdr.config_hash, hdr.seed}, chain_table(box, run.chain));
  csv::Table map;
  map.comments.push_back("# map_log_posterior " + csv::format(run.map_log_posterior));
  map.comments.push_back("# nearest_simulation_row " + std::to_string(run.nearest_row));
  map.comments.push_back("# nearest_distance_unit " + csv::format(run.nearest_distance));
  map.header = {"parameter", "map", "ci95_lower", "ci95_upper", "nearest_plausible"};
  for (std::size_t j = 0; j < box.dim(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    map.rows.push_back({box[j].name, csv::format(run.map[jj]), csv::format(run.intervals[j].lower),
                        csv::format(run.intervals[j].upper),
                        csv::format(final_simulated(static_cast<Eigen::Index>(run.nearest_row), jj))});
  }
  write_table(dir / "map.csv", {"map", hdr.config_hash, hdr.seed}, map);
  std::ostringstream msg;
  msg << "mcmc: " << run.chain.samples.rows() << " samples, acceptance " << run.chain.acceptance_fraction
      << ", MAP log posterior " << run.map_log_posterior;
  log_line(log, msg.str());
  return run;
}

FeatureVector target_features(const PipelineConfig& config, const Simulator& simulator, SimulationCache* cache) {
  if (config.observation_source == "file") {
    const auto table = csv::read(config.features_file);
    if (table.rows.size() != 1) throw Error(ErrorKind::config, "features file must hold exactly one data row");
    FeatureVector f{};
    for (std::size_t k = 0; k < kFeatureCount; ++k) f[k] = table.number(0, table.column(std::string(kFeatureNames[k])));
    return f;
  }
  const auto space = alpha_input_space();
  const Vector x = config.truth.in(space);
  if (cache != nullptr) {
    if (const auto* hit = cache->find(x); hit != nullptr && hit->features) return *hit->features;
  }
  FeatureVector f;
  try {
    f = simulator.run(space, x);
  } catch (const Error& e) {
    throw Error(e.kind(), "synthetic truth simulation: " + e.message());
  }
  if (cache != nullptr) {
    SimulationOutcome o;
    o.features = f;
    cache->insert(x, o);
    cache->flush();
  }
  return f;
}

// ---------------------------------------------------------------------------

Pipeline::Pipeline(PipelineConfig config, bool force, std::ostream* log)
    : config_(std::move(config)), force_(force), log_(log) {
  config_.validate();
  hash_ = config_.hash_hex();
}

void Pipeline::note(const std::string& message) const { log_line(log_, message); }

ArtifactHeader Pipeline::header(const std::string& kind, std::uint64_t seed) const { return {kind, hash_, seed}; }

void Pipeline::require(const std::string& file, Stage stage) const {
  const fs::path p = path(file);
  if (!fs::exists(p)) {
    throw Error(ErrorKind::dependency, "missing " + file + "; run the '" + std::string(stage_name(stage)) +
                                           "' stage first");
  }
  if (fs::is_directory(p)) return;
  const auto h = read_header(p);
  if (h && h->config_hash != hash_ && !force_) {
    throw Error(ErrorKind::config, file + " was produced under config " + h->config_hash + " (current " + hash_ +
                                       "); re-run the '" + std::string(stage_name(stage)) +
                                       "' stage or pass --force");
  }
}

bool Pipeline::needs_write(const std::string& file) const {
  const fs::path p = path(file);
  if (!fs::exists(p)) return true;
  const auto h = read_header(p);
  if (h && h->config_hash == hash_) return force_;
  if (!force_) {
    throw Error(ErrorKind::config, "refusing to overwrite " + p.string() + " (config hash " +
                                       (h ? h->config_hash : std::string("unknown")) + ", current " + hash_ +
                                       "); pass --force");
  }
  return true;
}

const Simulator& Pipeline::simulator() {
  if (!simulator_) {
    require("mesh.txt", Stage::mesh);
    simulator_.emplace(config_.model_setup(), geometry::read_mesh(path("mesh.txt")));
  }
  return *simulator_;
}

void Pipeline::run(const std::vector<Stage>& stages) {
  fs::create_directories(config_.out_dir);
  nlohmann::json status;
  status["config_hash"] = hash_;
  status["stages"] = nlohmann::json::array();
  Stage current = stages.empty() ? Stage::mesh : stages.front();
  try {
    for (Stage s : stages) {
      current = s;
      run_stage(s);
      status["stages"].push_back(std::string(stage_name(s)));
    }
    status["status"] = "ok";
    status["exit_code"] = 0;
  } catch (const Error& e) {
    status["status"] = "failed";
    status["failed_stage"] = std::string(stage_name(current));
    status["error_kind"] = std::string(to_string(e.kind()));
    status["message"] = e.message();
    status["exit_code"] = exit_code(e);
    std::ofstream(path("status.json")) << status.dump(2) << '\n';
    throw;
  }
  std::ofstream(path("status.json")) << status.dump(2) << '\n';
}

void Pipeline::run_stage(Stage stage) {
  note("== stage " + std::string(stage_name(stage)));
  fs::create_directories(config_.out_dir);
  switch (stage) {
    case Stage::mesh: stage_mesh(); break;
    case Stage::design: stage_design(); break;
    case Stage::simulate: stage_simulate(); break;
    case Stage::train: stage_train(); break;
    case Stage::gsa: stage_gsa(); break;
    case Stage::fix_c: stage_fix_c(); break;
    case Stage::hm: stage_hm(); break;
    case Stage::mcmc: stage_mcmc(); break;
    case Stage::report: stage_report(); break;
  }
}

void Pipeline::stage_mesh() {
  if (!needs_write("mesh.txt")) return note("mesh.txt up to date");
  const auto setup = config_.model_setup();
  const auto mesh = geometry::build_hemisphere_mesh(setup.radius_mm, setup.refinement, setup.thickness, setup.mesh);
  std::ostringstream body;
  for (const auto& line : header_lines(header("mesh", 0))) body << line << '\n';
  geometry::write_mesh(body, mesh);
  const fs::path tmp = path("mesh.txt.tmp");
  std::ofstream(tmp) << body.str();
  fs::rename(tmp, path("mesh.txt"));
  simulator_.reset();
  note("mesh: " + std::to_string(mesh.vertex_count()) + " vertices, " + std::to_string(mesh.triangle_count()) +
       " triangles");
}

void Pipeline::stage_design() {
  require("mesh.txt", Stage::mesh);
  if (!needs_write("design.csv")) return note("design.csv up to date");
  const auto space = full_input_space();
  const auto x = sobol_design(space, config_.wave1_size, config_.seed_design);
  write_table(path("design.csv"), header("design", config_.seed_design), points_table(space, x));
  note("design: " + std::to_string(x.rows()) + " points over " + std::to_string(space.dim()) + " inputs");
}

void Pipeline::stage_simulate() {
  require("design.csv", Stage::design);
  const auto space = full_input_space();
  const auto design = csv::read(path("design.csv"));
  const PointMatrix x = read_points(design, space);
  const auto id_col = design.column("sim_id");

  std::map<std::size_t, FeatureVector> done;
  std::map<std::size_t, std::string> failed;
  const bool fresh = needs_write("features.csv");
  if (!fresh || (fs::exists(path("features.csv")) && !force_)) {
    const auto t = csv::read(path("features.csv"));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      FeatureVector f{};
      for (std::size_t k = 0; k < kFeatureCount; ++k) f[k] = t.number(i, t.column(std::string(kFeatureNames[k])));
      done[static_cast<std::size_t>(t.number(i, t.column("sim_id")))] = f;
    }
    if (fs::exists(path("failures.csv"))) {
      const auto ft = csv::read(path("failures.csv"));
      for (std::size_t i = 0; i < ft.rows.size(); ++i) {
        failed[static_cast<std::size_t>(ft.number(i, ft.column("sim_id")))] = ft.rows[i][ft.column("error")];
      }
    }
  }
  std::vector<Eigen::Index> todo;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto id = static_cast<std::size_t>(design.number(static_cast<std::size_t>(i), id_col));
    if (!done.count(id) && !failed.count(id)) todo.push_back(i);
  }
  if (todo.empty()) return note("simulate: all " + std::to_string(x.rows()) + " simulations present");

  const auto& sim = simulator();
  auto persist = [&]() {
    csv::Table ft;
    ft.header.push_back("sim_id");
    for (const auto& n : kFeatureNames) ft.header.emplace_back(n);
    for (const auto& [id, f] : done) {
      std::vector<std::string> row{std::to_string(id)};
      for (double v : f) row.push_back(csv::format(v));
      ft.rows.push_back(std::move(row));
    }
    write_table(path("features.csv"), header("features", config_.seed_design), ft);
    csv::Table fl;
    fl.header = {"sim_id", "error"};
    for (const auto& [id, err] : failed) fl.rows.push_back({std::to_string(id), sanitize(err)});
    write_table(path("failures.csv"), header("failures", config_.seed_design), fl);
  };
  const std::size_t chunk = static_cast<std::size_t>(std::max(16, 4 * config_.threads));
  for (std::size_t start = 0; start < todo.size(); start += chunk) {
    const std::size_t end = std::min(todo.size(), start + chunk);
    std::vector<Eigen::Index> rows(todo.begin() + static_cast<std::ptrdiff_t>(start),
                                   todo.begin() + static_cast<std::ptrdiff_t>(end));
    const auto outcomes = sim.run_batch(space, x(rows, Eigen::all), config_.threads);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto id = static_cast<std::size_t>(design.number(static_cast<std::size_t>(rows[k]), id_col));
      if (outcomes[k].features) {
        done[id] = *outcomes[k].features;
      } else {
        failed[id] = outcomes[k].error;
      }
    }
    persist();
    note("simulate: " + std::to_string(end) + "/" + std::to_string(todo.size()) + " new runs");
  }
  if (done.empty()) throw Error(ErrorKind::stage_failure, "every simulation failed");
  if (!failed.empty()) note("simulate: " + std::to_string(failed.size()) + " failures recorded in failures.csv");
}

void Pipeline::stage_train() {
  require("design.csv", Stage::design);
  require("features.csv", Stage::simulate);
  if (!needs_write("train_metrics.csv")) return note("train_metrics.csv up to date");
  const auto space = full_input_space();
  const auto design = csv::read(path("design.csv"));
  const auto feats = csv::read(path("features.csv"));
  std::map<std::size_t, Eigen::Index> row_of;
  for (std::size_t i = 0; i < design.rows.size(); ++i) {
    row_of[static_cast<std::size_t>(design.number(i, design.column("sim_id")))] = static_cast<Eigen::Index>(i);
  }
  const PointMatrix all = read_points(design, space);
  PointMatrix x(static_cast<Eigen::Index>(feats.rows.size()), all.cols());
  Matrix y(static_cast<Eigen::Index>(feats.rows.size()), static_cast<Eigen::Index>(kFeatureCount));
  for (std::size_t i = 0; i < feats.rows.size(); ++i) {
    const auto id = static_cast<std::size_t>(feats.number(i, feats.column("sim_id")));
    if (!row_of.count(id)) throw Error(ErrorKind::io, "features.csv has sim_id " + std::to_string(id) + " absent from design.csv");
    x.row(static_cast<Eigen::Index>(i)) = all.row(row_of[id]);
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = feats.number(i, feats.column(std::string(kFeatureNames[k])));
    }
  }
  const auto ems = calibration::train_emulators(space, x, y, config_.emulator_config(config_.seed_train));
  write_emulators(path("emulators"), header("emulator", config_.seed_train), ems);

  csv::Table metrics;
  metrics.header = {"feature", "n_train", "cv_folds", "mean_r2", "mean_ise", "min_r2", "min_ise"};
  auto cv_cfg = config_.emulator_config(config_.seed_train);
  cv_cfg.restarts = config_.cv_restarts;
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    const auto cv = emulator::cross_validate(x, y.col(static_cast<Eigen::Index>(k)), space.lower(), space.upper(),
                                             config_.cv_folds, cv_cfg, derive_seed(config_.seed_train, 500 + k));
    metrics.rows.push_back({std::string(kFeatureNames[k]), std::to_string(x.rows()), std::to_string(config_.cv_folds),
                            csv::format(cv.mean_r2), csv::format(cv.mean_ise),
                            csv::format(*std::min_element(cv.r2.begin(), cv.r2.end())),
                            csv::format(*std::min_element(cv.ise.begin(), cv.ise.end()))});
    std::ostringstream msg;
    msg << "train: " << kFeatureNames[k] << " CV R2 " << cv.mean_r2 << ", ISE " << cv.mean_ise;
    note(msg.str());
  }
  write_table(path("train_metrics.csv"), header("train_metrics", config_.seed_train), metrics);
}

void Pipeline::stage_gsa() {
  require("train_metrics.csv", Stage::train);
  require("emulators", Stage::train);
  if (!needs_write("gsa.csv")) return note("gsa.csv up to date");
  const auto space = full_input_space();
  const auto ems = read_emulators(path("emulators"));
  const auto design = sensitivity::saltelli_design(space, config_.gsa_n_base, config_.seed_gsa);
  for (const auto& w : design.warnings) note("gsa: " + w);
  std::vector<sensitivity::SobolResult> results;
  for (std::size_t k = 0; k < ems.size(); ++k) {
    Vector y(design.points.rows());
    for (Eigen::Index i = 0; i < design.points.rows(); ++i) y[i] = ems[k].predict_mean(design.points.row(i).transpose());
    results.push_back(sensitivity::sobol_indices(design, y, space.names(), config_.gsa_bootstrap,
                                                 derive_seed(config_.seed_gsa, k)));
  }
  std::string comment;
  for (const auto& line : header_lines(header("gsa", config_.seed_gsa))) comment += line + "\n";
  comment += "# emulator means; emulator variance not propagated\n";
  const fs::path tmp = path("gsa.csv.tmp");
  sensitivity::write_gsa_csv(tmp.string(), results, feature_names(), comment);
  fs::rename(tmp, path("gsa.csv"));
  const auto ranking = sensitivity::rank_parameters(results);
  std::ostringstream msg;
  msg << "gsa: top inputs";
  for (std::size_t i = 0; i < std::min<std::size_t>(5, ranking.size()); ++i) {
    msg << ' ' << ranking[i].name << " (" << std::setprecision(3) << ranking[i].score << ")";
  }
  note(msg.str());
}

void Pipeline::stage_fix_c() {
  require("gsa.csv", Stage::gsa);
  if (!needs_write("hm_space.csv")) return note("hm_space.csv up to date");
  const auto gsa = csv::read(path("gsa.csv"));
  std::map<std::string, double> score;
  for (std::size_t i = 0; i < gsa.rows.size(); ++i) score[gsa.rows[i][gsa.column("input")]] = gsa.number(i, gsa.column("rank_score"));
  csv::Table check;
  check.comments.push_back("# expected outcome: alpha outranks C within each region (reported, not enforced)");
  check.header = {"region", "score_C", "score_alpha", "alpha_outranks_C"};
  for (auto r : geometry::kWallRegions) {
    const std::string name(geometry::region_name(r));
    const double c = score["C_" + name + "_kPa"];
    const double a = score["alpha_" + name];
    check.rows.push_back({name, csv::format(c), csv::format(a), a > c ? "yes" : "no"});
  }
  write_table(path("fix_c.csv"), header("fix_c", config_.seed_gsa), check);
  auto table = space_table(alpha_input_space());
  table.comments.push_back("# fixed C_<region>_kPa " + csv::format(config_.fixed_C_kPa));
  write_table(path("hm_space.csv"), header("hm_space", config_.seed_hm), table);
  note("fix-C: C fixed at " + csv::format(config_.fixed_C_kPa) + " kPa; calibrating " +
       std::to_string(alpha_input_space().dim()) + " inputs");
}

void Pipeline::stage_hm() {
  require("hm_space.csv", Stage::fix_c);
  if (!needs_write("nroy_box.csv")) return note("history matching up to date");
  const auto space = read_space(csv::read(path("hm_space.csv")));
  const auto& sim = simulator();
  SimulationCache cache(space, path("hm_simulations.csv"), header("hm_simulations", config_.seed_hm));
  const auto target = target_features(config_, sim, &cache);
  auto obs = Observation::from_features(target, config_.baseline_noise.displacement_mm,
                                        config_.baseline_noise.esv_relative, config_.observation_source);
  write_table(path("target.csv"), header("target", config_.seed_hm), observation_table(obs));
  history_match(config_, space, sim, cache, obs, config_.out_dir, log_);
}

void Pipeline::stage_mcmc() {
  require("nroy_box.csv", Stage::hm);
  require("nroy_final.csv", Stage::hm);
  require("final_simulations.csv", Stage::hm);
  require("target.csv", Stage::hm);
  require("hm_emulators", Stage::hm);
  if (!needs_write("map.csv")) return note("map.csv up to date");
  const auto box = read_space(csv::read(path("nroy_box.csv")));
  const auto ems = read_emulators(path("hm_emulators"));
  const auto obs = read_observation(csv::read(path("target.csv")));
  const auto pool = read_points(csv::read(path("nroy_final.csv")), box);
  const auto finals = read_points(csv::read(path("final_simulations.csv")), box);
  sample_posterior(config_, box, ems, obs, pool, finals, config_.out_dir, log_);
}

void Pipeline::stage_report() {
  require("chain.csv", Stage::mcmc);
  require("map.csv", Stage::mcmc);
  require("target.csv", Stage::hm);
  require("nroy_box.csv", Stage::hm);
  const auto box = read_space(csv::read(path("nroy_box.csv")));
  const auto space = alpha_input_space();
  const auto map = csv::read(path("map.csv"));
  const auto obs = read_observation(csv::read(path("target.csv")));
  const bool synthetic = config_.observation_source == "synthetic";
  const Vector truth = config_.truth.in(space);

  csv::Table rt;
  rt.header = {"parameter", "map", "ci95_lower", "ci95_upper", "nearest_plausible"};
  if (synthetic) rt.header.insert(rt.header.end(), {"truth", "truth_in_ci", "map_distance"});
  std::ostringstream md;
  md << "# Calibration report\n\n";
  md << "config hash `" << hash_ << "`; seeds: design " << config_.seed_design << ", train " << config_.seed_train
     << ", gsa " << config_.seed_gsa << ", hm " << config_.seed_hm << ", mcmc " << config_.seed_mcmc << "\n\n";
  md << "## Targets (" << obs.provenance << ")\n\n| feature | target | sd |\n|---|---|---|\n";
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    md << "| " << kFeatureNames[f] << " | " << obs.mean[static_cast<Eigen::Index>(f)] << " | "
       << obs.sd[static_cast<Eigen::Index>(f)] << " |\n";
  }
  md << "\n## History matching\n\n| wave | threshold | NROY fraction | training size |\n|---|---|---|---|\n";
  for (int w = 1;; ++w) {
    const fs::path p = path(wave_file(w, "metrics"));
    if (!fs::exists(p)) break;
    const auto t = csv::read(p);
    md << "| " << w << " | " << t.rows[0][t.column("threshold")] << " | " << t.rows[0][t.column("retained_fraction")]
       << " | " << t.rows[0][t.column("training_size")] << " |\n";
  }
  md << "\n## Posterior (95% credible intervals)\n\n| parameter | MAP | CI | nearest simulation |";
  if (synthetic) md << " truth | truth in CI | MAP distance |";
  md << "\n|---|---|---|---|" << (synthetic ? "---|---|---|" : "") << "\n";
  for (std::size_t i = 0; i < map.rows.size(); ++i) {
    const std::string name = map.rows[i][map.column("parameter")];
    const double m = map.number(i, map.column("map"));
    const double lo = map.number(i, map.column("ci95_lower"));
    const double hi = map.number(i, map.column("ci95_upper"));
    std::vector<std::string> row{name, csv::format(m), csv::format(lo), csv::format(hi),
                                 map.rows[i][map.column("nearest_plausible")]};
    md << "| " << name << " | " << m << " | [" << lo << ", " << hi << "] | " << row[4] << " |";
    if (synthetic) {
      const double t = truth[static_cast<Eigen::Index>(space.index_of(name))];
      const bool inside = t >= lo && t <= hi;
      row.insert(row.end(), {csv::format(t), inside ? "yes" : "no", csv::format(std::abs(m - t))});
      md << ' ' << t << " | " << (inside ? "yes" : "no") << " | " << std::abs(m - t) << " |";
    }
    md << "\n";
    rt.rows.push_back(std::move(row));
  }
  md << "\n## Prior\n\nThe sampler uses a uniform prior on the final NROY bounding box, restricted to points with "
        "implausibility <= "
     << config_.hm_final_threshold
     << " under the final emulators. Reading the prior as the bounding box alone would drop that restriction; "
        "the box is:\n\n| parameter | lower | upper |\n|---|---|---|\n";
  for (const auto& p : box.parameters()) md << "| " << p.name << " | " << p.lower << " | " << p.upper << " |\n";
  if (fs::exists(path("gsa.csv"))) {
    const auto gsa = csv::read(path("gsa.csv"));
    md << "\n## Sensitivity (rank score, emulator means)\n\n";
    std::vector<std::pair<double, std::string>> ranked;
    for (std::size_t i = 0; i < gsa.rows.size(); ++i) {
      ranked.emplace_back(gsa.number(i, gsa.column("rank_score")), gsa.rows[i][gsa.column("input")]);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [s, n] : ranked) md << "- " << n << ": " << s << "\n";
  }
  write_table(path("report.csv"), header("report", config_.seed_mcmc), rt);
  std::ofstream(path("report.md")) << md.str();
  note("report: report.md and report.csv written");
}

void Pipeline::run_stats(const fs::path& cohort_csv) {
  fs::create_directories(config_.out_dir);
  const auto table = cohort::CohortTable::read_csv(cohort_csv);
  std::ofstream out(path("stats_report.json"));
  if (!out) throw Error(ErrorKind::io, "cannot write stats_report.json");
  out << cohort::stats_report_json(table) << '\n';
  note("stats: stats_report.json written for " + std::to_string(table.case_count()) + " cases");
}

}  // namespace lacal::pipeline
