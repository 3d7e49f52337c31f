#include "lacal/config.hpp"

#include "lacal/csv.hpp"
#include "lacal/error.hpp"
#include "lacal/random.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace lacal {

KeyValueFile KeyValueFile::parse(const std::string& text) {
  KeyValueFile kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::config, "line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorKind::config, "line " + std::to_string(lineno) + ": empty key");
    if (kv.has(key)) throw Error(ErrorKind::config, "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv.values_[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValueFile KeyValueFile::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

Vector TruthPoint::in(const ParameterSpace& space) const {
  Vector x(static_cast<Eigen::Index>(space.dim()));
  for (std::size_t i = 0; i < space.dim(); ++i) {
    const std::string& name = space[i].name;
    double v = 0.0;
    bool found = false;
    for (std::size_t r = 0; r < geometry::kWallRegionCount; ++r) {
      const std::string region(geometry::region_name(geometry::kWallRegions[r]));
      if (name == "alpha_" + region) {
        v = alpha[r];
        found = true;
      } else if (name == "C_" + region + "_kPa") {
        v = kFixedC_kPa;
        found = true;
      }
    }
    if (name == "EDP_mmHg") v = edp_mmHg, found = true;
    if (name == "ESP_mmHg") v = esp_mmHg, found = true;
    if (name == "k_peri_kPa_per_um") v = k_peri_kPa_per_um, found = true;
    if (name == "PTH") v = pth, found = true;
    if (!found) throw Error(ErrorKind::config, "truth point has no value for input '" + name + "'");
    x[static_cast<Eigen::Index>(i)] = v;
  }
  return x;
}

namespace {

template <typename T>
T parse_value(const std::string& key, const std::string& s) {
  if constexpr (std::is_same_v<T, std::string>) {
    return s;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw Error(ErrorKind::config, "'" + key + "': expected true or false, got '" + s + "'");
  } else {
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw Error(ErrorKind::config, "'" + key + "': cannot parse '" + s + "'");
    }
    return v;
  }
}

template <typename T>
std::string show(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return csv::format(v);
  } else {
    return std::to_string(v);
  }
}

struct Entry {
  std::string key;
  bool hashed;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

template <typename T>
Entry bind_member(std::string key, T PipelineConfig::*member, bool hashed = true) {
  return {key, hashed, [member](const PipelineConfig& c) { return show(c.*member); },
          [member, key](PipelineConfig& c, const std::string& s) { c.*member = parse_value<T>(key, s); }};
}

template <typename Get>
Entry bind_ref(std::string key, Get get) {
  using T = std::remove_reference_t<decltype(get(std::declval<PipelineConfig&>()))>;
  return {key, true, [get](const PipelineConfig& c) { return show(get(const_cast<PipelineConfig&>(c))); },
          [get, key](PipelineConfig& c, const std::string& s) { get(c) = parse_value<T>(key, s); }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> e;
    e.push_back(bind_member("mesh.radius_mm", &PipelineConfig::radius_mm));
    e.push_back(bind_member("mesh.refinement", &PipelineConfig::refinement));
    e.push_back(bind_member("mesh.thickness_mm", &PipelineConfig::thickness_mm));
    e.push_back(bind_member("mesh.roof_cap_deg", &PipelineConfig::roof_cap_deg));
    e.push_back(bind_member("mesh.rim_band_deg", &PipelineConfig::rim_band_deg));
    e.push_back(bind_member("model.rim_amplitude_mm", &PipelineConfig::rim_amplitude_mm));
    e.push_back(bind_member("model.t_es", &PipelineConfig::t_es));
    e.push_back(bind_member("model.conduit_duration", &PipelineConfig::conduit_duration));
    e.push_back(bind_member("model.k_vein_kPa_per_um", &PipelineConfig::k_vein_kPa_per_um));
    e.push_back(bind_member("model.n_steps", &PipelineConfig::n_steps));
    e.push_back(bind_member("model.unload_tolerance", &PipelineConfig::unload_tolerance));
    e.push_back(bind_member("model.fixed_C_kPa", &PipelineConfig::fixed_C_kPa));
    e.push_back(bind_member("design.wave1_size", &PipelineConfig::wave1_size));
    e.push_back(bind_member("gsa.n_base", &PipelineConfig::gsa_n_base));
    e.push_back(bind_member("gsa.bootstrap", &PipelineConfig::gsa_bootstrap));
    e.push_back(bind_member("emulator.restarts", &PipelineConfig::gp_restarts));
    e.push_back(bind_member("emulator.max_iterations", &PipelineConfig::gp_max_iterations));
    e.push_back(bind_member("emulator.cv_folds", &PipelineConfig::cv_folds));
    e.push_back(bind_member("emulator.cv_restarts", &PipelineConfig::cv_restarts));
    e.push_back(bind_member("observation.source", &PipelineConfig::observation_source));
    e.push_back(bind_member("observation.features_file", &PipelineConfig::features_file));
    for (std::size_t r = 0; r < geometry::kWallRegionCount; ++r) {
      e.push_back(bind_ref("truth.alpha_" + std::string(geometry::region_name(geometry::kWallRegions[r])),
                           [r](PipelineConfig& c) -> double& { return c.truth.alpha[r]; }));
    }
    e.push_back(bind_ref("truth.EDP_mmHg", [](PipelineConfig& c) -> double& { return c.truth.edp_mmHg; }));
    e.push_back(bind_ref("truth.ESP_mmHg", [](PipelineConfig& c) -> double& { return c.truth.esp_mmHg; }));
    e.push_back(bind_ref("truth.k_peri_kPa_per_um", [](PipelineConfig& c) -> double& { return c.truth.k_peri_kPa_per_um; }));
    e.push_back(bind_ref("truth.PTH", [](PipelineConfig& c) -> double& { return c.truth.pth; }));
    e.push_back(bind_ref("noise.baseline_displacement_mm", [](PipelineConfig& c) -> double& { return c.baseline_noise.displacement_mm; }));
    e.push_back(bind_ref("noise.baseline_esv_relative", [](PipelineConfig& c) -> double& { return c.baseline_noise.esv_relative; }));
    e.push_back(bind_ref("noise.high_displacement_mm", [](PipelineConfig& c) -> double& { return c.high_noise.displacement_mm; }));
    e.push_back(bind_ref("noise.high_esv_relative", [](PipelineConfig& c) -> double& { return c.high_noise.esv_relative; }));
    e.push_back(bind_member("hm.initial_threshold", &PipelineConfig::hm_initial_threshold));
    e.push_back(bind_member("hm.threshold_step", &PipelineConfig::hm_threshold_step));
    e.push_back(bind_member("hm.final_threshold", &PipelineConfig::hm_final_threshold));
    e.push_back(bind_member("hm.max_waves", &PipelineConfig::hm_max_waves));
    e.push_back(bind_member("hm.wave_size", &PipelineConfig::hm_wave_size));
    e.push_back(bind_member("hm.n_test", &PipelineConfig::hm_n_test));
    e.push_back(bind_member("hm.min_reduction", &PipelineConfig::hm_min_reduction));
    e.push_back(bind_member("mcmc.walkers", &PipelineConfig::mcmc_walkers));
    e.push_back(bind_member("mcmc.steps", &PipelineConfig::mcmc_steps));
    e.push_back(bind_member("mcmc.burn_in", &PipelineConfig::mcmc_burn_in));
    e.push_back(bind_member("mcmc.thin", &PipelineConfig::mcmc_thin));
    e.push_back(bind_member("seed.design", &PipelineConfig::seed_design));
    e.push_back(bind_member("seed.train", &PipelineConfig::seed_train));
    e.push_back(bind_member("seed.gsa", &PipelineConfig::seed_gsa));
    e.push_back(bind_member("seed.hm", &PipelineConfig::seed_hm));
    e.push_back(bind_member("seed.mcmc", &PipelineConfig::seed_mcmc));
    e.push_back(bind_member("run.threads", &PipelineConfig::threads, false));
    e.push_back(bind_member("run.allow_out_of_range", &PipelineConfig::allow_out_of_range, false));
    e.push_back({"run.out_dir", false, [](const PipelineConfig& c) { return c.out_dir.string(); },
                 [](PipelineConfig& c, const std::string& s) { c.out_dir = s; }});
    return e;
  }();
  return table;
}

}  // namespace

void PipelineConfig::apply(const KeyValueFile& file) {
  for (const auto& [key, value] : file.values()) {
    bool known = false;
    for (const auto& e : entries()) {
      if (e.key == key) {
        e.set(*this, value);
        known = true;
        break;
      }
    }
    if (!known) throw Error(ErrorKind::config, "unknown key '" + key + "'");
  }
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
  PipelineConfig c;
  c.apply(KeyValueFile::read(path));
  return c;
}

void PipelineConfig::set_all_seeds(std::uint64_t base) {
  seed_design = derive_seed(base, 1);
  seed_train = derive_seed(base, 2);
  seed_gsa = derive_seed(base, 3);
  seed_hm = derive_seed(base, 4);
  seed_mcmc = derive_seed(base, 5);
}

void PipelineConfig::use_paper_scale() {
  hm_n_test = 100000;
  mcmc_steps = 100000;
  mcmc_burn_in = 10000;
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) { throw Error(ErrorKind::config, "'" + key + "': " + why); };
  auto in_range = [&](const std::string& key, double v, double lo, double hi) {
    if (!(v >= lo && v <= hi)) {
      if (!allow_out_of_range || !std::isfinite(v)) {
        fail(key, csv::format(v) + " outside [" + csv::format(lo) + ", " + csv::format(hi) +
                      "] (pass --allow-out-of-range to accept)");
      }
    }
  };
  if (!(radius_mm > 0.0)) fail("mesh.radius_mm", "must be positive");
  if (refinement < 1 || refinement > 6) fail("mesh.refinement", "must lie in [1, 6]; refinement 0 leaves wall regions empty");
  if (!(thickness_mm > 0.0)) fail("mesh.thickness_mm", "must be positive");
  if (!(roof_cap_deg > 0.0 && roof_cap_deg < 90.0 - rim_band_deg)) fail("mesh.roof_cap_deg", "must lie below the rim band");
  if (!(rim_band_deg > 0.0 && rim_band_deg < 45.0)) fail("mesh.rim_band_deg", "must lie in (0, 45)");
  if (!(rim_amplitude_mm >= 0.0)) fail("model.rim_amplitude_mm", "must be non-negative");
  if (!(t_es > 0.0 && t_es < 1.0)) fail("model.t_es", "must lie in (0, 1)");
  if (!(conduit_duration > 0.0 && t_es + conduit_duration <= 1.0)) fail("model.conduit_duration", "conduit must end by t = 1");
  if (!(k_vein_kPa_per_um >= 0.0)) fail("model.k_vein_kPa_per_um", "must be non-negative");
  if (n_steps < 1) fail("model.n_steps", "must be at least 1");
  if (!(unload_tolerance > 0.0 && unload_tolerance <= 0.05)) fail("model.unload_tolerance", "must lie in (0, 0.05]");
  in_range("model.fixed_C_kPa", fixed_C_kPa, 0.2, 6.8);
  if (wave1_size < 2) fail("design.wave1_size", "must be at least 2");
  if (gsa_n_base < 2) fail("gsa.n_base", "must be at least 2");
  if (gp_restarts < 1) fail("emulator.restarts", "must be at least 1");
  if (cv_folds < 2) fail("emulator.cv_folds", "must be at least 2");
  if (observation_source != "synthetic" && observation_source != "file") fail("observation.source", "synthetic or file");
  if (observation_source == "file" && features_file.empty()) fail("observation.features_file", "required when source = file");
  for (std::size_t r = 0; r < geometry::kWallRegionCount; ++r) {
    in_range("truth.alpha_" + std::string(geometry::region_name(geometry::kWallRegions[r])), truth.alpha[r], 0.125, 4.0);
  }
  in_range("truth.EDP_mmHg", truth.edp_mmHg, 1.0, 12.0);
  in_range("truth.ESP_mmHg", truth.esp_mmHg, 13.0, 37.0);
  in_range("truth.k_peri_kPa_per_um", truth.k_peri_kPa_per_um, 0.0001, 0.005);
  in_range("truth.PTH", truth.pth, 0.5, 0.95);
  if (!(truth.edp_mmHg < truth.esp_mmHg)) fail("truth.EDP_mmHg", "must be below ESP");
  for (const auto* n : {&baseline_noise, &high_noise}) {
    if (!(n->displacement_mm > 0.0 && n->esv_relative > 0.0)) fail("noise", "standard deviations must be positive");
  }
  if (!(hm_final_threshold > 0.0 && hm_final_threshold <= hm_initial_threshold)) {
    fail("hm.final_threshold", "must be positive and at most the initial threshold");
  }
  if (!(hm_threshold_step >= 0.0)) fail("hm.threshold_step", "must be non-negative");
  if (hm_max_waves < 1) fail("hm.max_waves", "must be at least 1");
  if (hm_wave_size < 1 || hm_n_test < hm_wave_size) fail("hm.n_test", "must be at least hm.wave_size");
  const int d = static_cast<int>(alpha_input_space().dim());
  if (mcmc_walkers % 2 != 0 || mcmc_walkers < 2 * d) fail("mcmc.walkers", "must be even and at least 2 x inputs");
  if (mcmc_thin < 1 || mcmc_burn_in < 0 || mcmc_steps <= mcmc_burn_in) fail("mcmc.steps", "need steps > burn_in >= 0, thin >= 1");
  if (threads < 1) fail("run.threads", "must be at least 1");
}

std::string PipelineConfig::effective() const {
  std::string out;
  for (const auto& e : entries()) {
    if (e.hashed) out += e.key + " = " + e.get(*this) + "\n";
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t PipelineConfig::hash() const { return fnv1a64(effective()); }

std::string PipelineConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

ModelSetup PipelineConfig::model_setup() const {
  ModelSetup s;
  s.radius_mm = radius_mm;
  s.refinement = refinement;
  s.thickness = geometry::ThicknessProfile::constant(thickness_mm);
  s.mesh.regions.roof_cap_deg = roof_cap_deg;
  s.mesh.regions.rim_band_deg = rim_band_deg;
  s.base_load.k_vein_kPa_per_um = k_vein_kPa_per_um;
  s.base_load.rim.amplitude_mm = rim_amplitude_mm;
  s.base_load.rim.t_peak = t_es;
  s.base_load.t_es = t_es;
  s.base_load.conduit_duration = conduit_duration;
  s.default_C_kPa = fixed_C_kPa;
  s.transient.n_steps = n_steps;
  s.transient.unload.volume_tolerance = unload_tolerance;
  s.transient.model.rim_band_deg = rim_band_deg;
  return s;
}

emulator::EmulatorConfig PipelineConfig::emulator_config(std::uint64_t seed) const {
  emulator::EmulatorConfig c;
  c.restarts = gp_restarts;
  c.max_iterations = gp_max_iterations;
  c.seed = seed;
  return c;
}

calibration::HmSchedule PipelineConfig::hm_schedule() const {
  calibration::HmSchedule s;
  s.initial_threshold = hm_initial_threshold;
  s.step = hm_threshold_step;
  s.final_threshold = hm_final_threshold;
  s.max_waves = hm_max_waves;
  s.first_wave_size = wave1_size;
  s.wave_size = hm_wave_size;
  s.n_test = hm_n_test;
  s.min_reduction = hm_min_reduction;
  s.cv_folds = cv_folds;
  s.emulator = emulator_config(seed_train);
  s.cv_emulator = emulator_config(seed_train);
  s.cv_emulator.restarts = cv_restarts;
  s.seed = seed_hm;
  return s;
}

calibration::PosteriorSettings PipelineConfig::posterior_settings() const {
  calibration::PosteriorSettings p;
  p.sampler.walkers = mcmc_walkers;
  p.sampler.steps = mcmc_steps;
  p.sampler.burn_in = mcmc_burn_in;
  p.sampler.thin = mcmc_thin;
  p.sampler.seed = seed_mcmc;
  p.support_threshold = hm_final_threshold;
  return p;
}

}  // namespace lacal
