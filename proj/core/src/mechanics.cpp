#include "lacal/mechanics.hpp"

#include "lacal/error.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace lacal::mechanics {

using geometry::Region;
using geometry::ShellMesh;

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

double inf_norm_free(const Positions& g, const std::vector<int>& free) {
  double r = 0.0;
  for (int v : free) r = std::max(r, g[static_cast<std::size_t>(v)].cwiseAbs().maxCoeff());
  return r;
}

}  // namespace

Vec3 RimTrajectory::offset(double t) const {
  constexpr double half_pi = 0.5 * std::numbers::pi;
  double shape = 0.0;
  if (t <= 0.0 || t >= 1.0) {
    shape = 0.0;
  } else if (t <= t_peak) {
    const double s = std::sin(half_pi * t / t_peak);
    shape = s * s;
  } else {
    const double c = std::cos(half_pi * (t - t_peak) / (1.0 - t_peak));
    shape = c * c;
  }
  return amplitude_mm * shape * direction;
}

void LoadingParameters::validate(bool table_ranges) const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::invalid_argument, msg); };
  if (!(edp_mmHg > 0.0 && edp_mmHg < esp_mmHg)) fail("require 0 < EDP < ESP");
  if (!(k_peri_kPa_per_um > 0.0)) fail("k_peri must be positive");
  if (!(pth >= 0.0 && pth <= 1.0)) fail("PTH must lie in [0, 1]");
  if (!(k_vein_kPa_per_um >= 0.0)) fail("k_vein must be non-negative");
  if (!(t_es > 0.0 && t_es < 1.0)) fail("t_es must lie in (0, 1)");
  if (!(conduit_duration > 0.0 && t_es + conduit_duration <= 1.0)) fail("conduit phase must end by t = 1");
  if (table_ranges) {
    if (edp_mmHg < 1.0 || edp_mmHg > 12.0) fail("EDP outside [1, 12] mmHg");
    if (esp_mmHg < 13.0 || esp_mmHg > 37.0) fail("ESP outside [13, 37] mmHg");
    if (k_peri_kPa_per_um < 0.0001 || k_peri_kPa_per_um > 0.005) fail("k_peri outside [0.0001, 0.005] kPa/um");
    if (pth < 0.5 || pth > 0.95) fail("PTH outside [0.50, 0.95]");
  }
}

double pressure_transient(double t, const LoadingParameters& load) {
  constexpr double half_pi = 0.5 * std::numbers::pi;
  const double edp = load.edp_mmHg;
  const double esp = load.esp_mmHg;
  double p = edp;
  if (t <= 0.0) {
    p = edp;
  } else if (t <= load.t_es) {
    const double s = std::sin(half_pi * t / load.t_es);
    p = edp + (esp - edp) * s * s;
  } else if (t < load.t_es + load.conduit_duration) {
    const double c = std::cos(half_pi * (t - load.t_es) / load.conduit_duration);
    p = edp + (esp - edp) * c * c;
  }
  return p * kMmHgToKPa;
}

RegionalMaterialMap RegionalMaterialMap::uniform(const material::GuccioneParams& p) {
  RegionalMaterialMap m;
  m.wall.fill(p);
  return m;
}

void RegionalMaterialMap::validate() const {
  for (const auto& p : wall) p.validate();
  rim.validate();
}

double pericardial_penalty(double a, double pth, double taper_end) {
  if (pth >= taper_end) return a < taper_end ? 1.0 : 0.0;
  if (a <= pth) return 1.0;
  if (a >= taper_end) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (a - pth) / (taper_end - pth)));
}

MembraneModel::MembraneModel(const ShellMesh& mesh, const Positions& reference,
                             const RegionalMaterialMap& materials, const LoadingParameters& load,
                             const ModelOptions& options)
    : mesh_(&mesh),
      reference_(reference),
      surface_(mesh),
      rim_material_(materials.rim),
      options_(options) {
  if (reference.size() != mesh.vertices.size()) {
    throw Error(ErrorKind::shape, "reference configuration does not match mesh vertex count");
  }
  elements_.reserve(mesh.triangles.size());
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    Element e;
    e.v = t;
    const Vec3& x0 = reference[static_cast<std::size_t>(t[0])];
    const Vec3 e1 = reference[static_cast<std::size_t>(t[1])] - x0;
    const Vec3 e2 = reference[static_cast<std::size_t>(t[2])] - x0;
    const Vec3 n = e1.cross(e2).normalized();
    Vec3 f = mesh.fiber_dir[i] - mesh.fiber_dir[i].dot(n) * n;
    if (f.norm() < 1e-8) f = e1;
    f.normalize();
    const Vec3 s = n.cross(f);
    Mat2 d;
    d << e1.dot(f), e2.dot(f), e1.dot(s), e2.dot(s);
    const double det = d.determinant();
    if (!(det > 0.0)) {
      throw Error(ErrorKind::inverted_element, "reference element " + std::to_string(i) + " is degenerate or inverted");
    }
    e.d_inv = d.inverse();
    e.volume = 0.5 * det * mesh.thickness[i];
    e.neo_hookean = mesh.regions[i] == Region::rim;
    if (!e.neo_hookean) e.guccione = materials[mesh.regions[i]];
    elements_.push_back(e);
  }

  rim_ = mesh.rim_mask();
  free_index_.assign(mesh.vertices.size(), -1);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (!rim_[v]) {
      free_index_[v] = static_cast<int>(free_.size());
      free_.push_back(static_cast<int>(v));
    }
  }

  anchor_normal_ = surface_.vertex_normals(reference);
  anchor_area_ = geometry::vertex_areas(mesh, reference);
  const double taper_end = 1.0 - std::cos((90.0 - options.rim_band_deg) * std::numbers::pi / 180.0);
  peri_scale_.assign(mesh.vertices.size(), 0.0);
  vein_stiffness_.assign(mesh.vertices.size(), 0.0);
  const double k_peri = load.k_peri_kPa_per_um * kPerMicronToPerMm;
  if (k_peri > 0.0 && mesh.has_rim()) {
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
      if (rim_[v]) continue;
      const double colat = geometry::colatitude_deg(mesh.vertices[v]) * std::numbers::pi / 180.0;
      peri_scale_[v] = k_peri * pericardial_penalty(1.0 - std::cos(colat), load.pth, taper_end);
    }
  }
  const double k_vein = load.k_vein_kPa_per_um * kPerMicronToPerMm;
  for (int v : mesh.vein_patch_vertex_ids) {
    if (!rim_[static_cast<std::size_t>(v)]) vein_stiffness_[static_cast<std::size_t>(v)] = k_vein;
  }
  rim_anchor_ = mesh.vertices;
}

void MembraneModel::apply_rim(Positions& x, const Vec3& rim_offset) const {
  for (int v : mesh_->rim_vertex_ids) {
    x[static_cast<std::size_t>(v)] = rim_anchor_[static_cast<std::size_t>(v)] + rim_offset;
  }
}

double MembraneModel::element_energy(const Element& e, const Positions& x, Eigen::Matrix<double, 3, 3>* grad) const {
  const Vec3& x0 = x[static_cast<std::size_t>(e.v[0])];
  Eigen::Matrix<double, 3, 2> d;
  d.col(0) = x[static_cast<std::size_t>(e.v[1])] - x0;
  d.col(1) = x[static_cast<std::size_t>(e.v[2])] - x0;
  const Eigen::Matrix<double, 3, 2> F = d * e.d_inv;
  const Mat2 C = F.transpose() * F;
  const material::MembraneResponse r = e.neo_hookean
                                           ? material::neohookean_membrane(C, rim_material_)
                                           : material::guccione_membrane(C, e.guccione, options_.exponent_cap);
  if (grad != nullptr) {
    const Eigen::Matrix<double, 3, 2> G = e.volume * (F * r.stress) * e.d_inv.transpose();
    grad->col(1) = G.col(0);
    grad->col(2) = G.col(1);
    grad->col(0) = -(G.col(0) + G.col(1));
  }
  return r.energy * e.volume;
}

double MembraneModel::springs(const Positions& x, Positions* gradient) const {
  double energy = 0.0;
  for (int vi : free_) {
    const auto v = static_cast<std::size_t>(vi);
    const Vec3 u = x[v] - reference_[v];
    if (peri_scale_[v] > 0.0) {
      const double un = u.dot(anchor_normal_[v]);
      if (un > 0.0) {
        const double k = peri_scale_[v] * anchor_area_[v];
        energy += 0.5 * k * un * un;
        if (gradient != nullptr) (*gradient)[v] += k * un * anchor_normal_[v];
      }
    }
    if (vein_stiffness_[v] > 0.0) {
      const double k = vein_stiffness_[v] * anchor_area_[v];
      energy += 0.5 * k * u.squaredNorm();
      if (gradient != nullptr) (*gradient)[v] += k * u;
    }
  }
  return energy;
}

double MembraneModel::energy(const Positions& x, double pressure_kPa) const {
  double total = 0.0;
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    try {
      total += element_energy(elements_[i], x, nullptr);
    } catch (const Error& err) {
      throw Error(err.kind(), "element " + std::to_string(i) + ": " + err.message());
    }
  }
  total += springs(x, nullptr);
  total -= pressure_kPa * surface_.volume(x);
  return total;
}

double MembraneModel::energy_and_gradient(const Positions& x, double pressure_kPa, Positions& gradient) const {
  Positions dv;
  const double volume = surface_.volume_and_gradient(x, dv);
  gradient.assign(x.size(), Vec3::Zero());
  double total = 0.0;
  Eigen::Matrix<double, 3, 3> g;
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    const Element& e = elements_[i];
    try {
      total += element_energy(e, x, &g);
    } catch (const Error& err) {
      throw Error(err.kind(), "element " + std::to_string(i) + ": " + err.message());
    }
    for (int k = 0; k < 3; ++k) gradient[static_cast<std::size_t>(e.v[static_cast<std::size_t>(k)])] += g.col(k);
  }
  total += springs(x, &gradient);
  total -= pressure_kPa * volume;
  for (std::size_t v = 0; v < x.size(); ++v) gradient[v] -= pressure_kPa * dv[v];
  return total;
}

double MembraneModel::try_energy(const Positions& x, double pressure_kPa) const {
  double total = 0.0;
  try {
    for (const auto& e : elements_) total += element_energy(e, x, nullptr);
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
  total += springs(x, nullptr);
  total -= pressure_kPa * surface_.volume(x);
  return std::isfinite(total) ? total : std::numeric_limits<double>::infinity();
}

Eigen::SparseMatrix<double> MembraneModel::free_hessian(const Positions& x, double pressure_kPa) const {
  const auto n = static_cast<Eigen::Index>(3 * free_.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(elements_.size() * 81 * 2);
  auto add_block = [&](int va, int vb, const Mat3& block) {
    const int fa = free_index_[static_cast<std::size_t>(va)];
    const int fb = free_index_[static_cast<std::size_t>(vb)];
    if (fa < 0 || fb < 0) return;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (block(r, c) != 0.0) trip.emplace_back(3 * fa + r, 3 * fb + c, block(r, c));
      }
    }
  };

  // element tangents by central differences of the analytic element gradient
  Positions xl = x;
  Eigen::Matrix<double, 3, 3> gp;
  Eigen::Matrix<double, 3, 3> gm;
  Eigen::Matrix<double, 9, 9> k;
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    const Element& e = elements_[i];
    const double h = 1e-6 * std::sqrt(2.0 * e.volume / std::max(mesh_->thickness[i], 1e-12));
    for (int a = 0; a < 3; ++a) {
      const auto va = static_cast<std::size_t>(e.v[static_cast<std::size_t>(a)]);
      for (int dim = 0; dim < 3; ++dim) {
        const double saved = xl[va][dim];
        xl[va][dim] = saved + h;
        element_energy(e, xl, &gp);
        xl[va][dim] = saved - h;
        element_energy(e, xl, &gm);
        xl[va][dim] = saved;
        const Eigen::Matrix<double, 3, 3> dg = (gp - gm) / (2.0 * h);
        for (int b = 0; b < 3; ++b) k.block<3, 1>(3 * b, 3 * a + dim) = dg.col(b);
      }
    }
    const Eigen::Matrix<double, 9, 9> ks = 0.5 * (k + k.transpose());
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        add_block(e.v[static_cast<std::size_t>(a)], e.v[static_cast<std::size_t>(b)], ks.block<3, 3>(3 * a, 3 * b));
      }
    }
  }

  // -p d2V/dx2 over shell triangles; the rim cap only involves prescribed vertices
  if (pressure_kPa != 0.0) {
    const double s = -pressure_kPa / 6.0;
    for (const auto& t : mesh_->triangles) {
      const Vec3& a = x[static_cast<std::size_t>(t[0])];
      const Vec3& b = x[static_cast<std::size_t>(t[1])];
      const Vec3& c = x[static_cast<std::size_t>(t[2])];
      add_block(t[0], t[1], -s * skew(c));
      add_block(t[0], t[2], s * skew(b));
      add_block(t[1], t[2], -s * skew(a));
      add_block(t[1], t[0], s * skew(c));
      add_block(t[2], t[0], -s * skew(b));
      add_block(t[2], t[1], s * skew(a));
    }
  }

  for (int vi : free_) {
    const auto v = static_cast<std::size_t>(vi);
    Mat3 block = Mat3::Zero();
    if (peri_scale_[v] > 0.0 && (x[v] - reference_[v]).dot(anchor_normal_[v]) > 0.0) {
      block += peri_scale_[v] * anchor_area_[v] * anchor_normal_[v] * anchor_normal_[v].transpose();
    }
    if (vein_stiffness_[v] > 0.0) block += vein_stiffness_[v] * anchor_area_[v] * Mat3::Identity();
    add_block(vi, vi, block);
  }

  Eigen::SparseMatrix<double> H(n, n);
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

double residual_tolerance(const SolverSettings& s, double pressure_kPa, double radius_mm) {
  const double scale = std::max(std::abs(pressure_kPa), s.pressure_floor_kPa) * radius_mm * radius_mm;
  return s.tol_abs + s.tol_rel * scale;
}

namespace {

// Damped Newton with a Levenberg shift whenever the tangent is not positive
// definite, and Armijo backtracking on the total energy.
int newton_solve(const MembraneModel& model, Positions& x, double pressure, const SolverSettings& settings,
                 double& residual, std::vector<double>* energy_trace) {
  const auto& free = model.free_vertices();
  const double tol = residual_tolerance(settings, pressure, model.mesh().radius);
  Positions g;
  double energy = model.energy_and_gradient(x, pressure, g);
  residual = inf_norm_free(g, free);
  if (energy_trace != nullptr) {
    energy_trace->clear();
    energy_trace->push_back(energy);
  }
  const auto n = static_cast<Eigen::Index>(3 * free.size());
  double shift = 0.0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool analysed = false;

  for (int it = 0; it < settings.max_iterations; ++it) {
    if (residual < tol) return it;
    Vector gf(n);
    for (std::size_t k = 0; k < free.size(); ++k) gf.segment<3>(static_cast<Eigen::Index>(3 * k)) = g[static_cast<std::size_t>(free[k])];

    Eigen::SparseMatrix<double> H = model.free_hessian(x, pressure);
    double diag_scale = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) diag_scale = std::max(diag_scale, std::abs(H.coeff(k, k)));
    if (diag_scale == 0.0) diag_scale = 1.0;
    Eigen::SparseMatrix<double> I(n, n);
    I.setIdentity();

    Vector dx;
    shift = shift > 0.0 ? shift * 0.1 : 0.0;
    if (shift < 1e-12 * diag_scale) shift = 0.0;
    bool ok = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      const Eigen::SparseMatrix<double> A = shift > 0.0 ? Eigen::SparseMatrix<double>(H + shift * I) : H;
      if (!analysed) {
        ldlt.analyzePattern(A);
        analysed = true;
      }
      ldlt.factorize(A);
      if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) {
        dx = ldlt.solve(-gf);
        if (dx.allFinite() && gf.dot(dx) < 0.0) {
          ok = true;
          break;
        }
      }
      shift = shift > 0.0 ? shift * 4.0 : 1e-8 * diag_scale;
    }
    if (!ok) throw NonConvergence("no descent direction", residual);

    const double slope = gf.dot(dx);
    double step = 1.0;
    bool accepted = false;
    Positions trial = x;
    for (int ls = 0; ls < 50; ++ls) {
      for (std::size_t k = 0; k < free.size(); ++k) {
        const auto v = static_cast<std::size_t>(free[k]);
        trial[v] = x[v] + step * dx.segment<3>(static_cast<Eigen::Index>(3 * k));
      }
      const double e_trial = model.try_energy(trial, pressure);
      if (e_trial <= energy + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      // At round-off level the Armijo test is meaningless; accept a full step
      // that does not raise the energy beyond round-off and reduces the residual.
      if (step == 1.0 && std::isfinite(e_trial) &&
          e_trial - energy <= 1e-11 * std::max(1.0, std::abs(energy))) {
        Positions g_trial;
        model.energy_and_gradient(trial, pressure, g_trial);
        if (inf_norm_free(g_trial, free) < residual) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) throw NonConvergence("line search failed", residual);
    x = trial;
    energy = model.energy_and_gradient(x, pressure, g);
    residual = inf_norm_free(g, free);
    if (energy_trace != nullptr) energy_trace->push_back(energy);
  }
  if (residual < tol) return settings.max_iterations;
  throw NonConvergence("iteration cap reached with residual " + std::to_string(residual), residual);
}

}  // namespace

Positions solve_equilibrium(const MembraneModel& model, const Positions& initial, const LoadState& from,
                            const LoadState& to, int increments, const SolverSettings& settings, SolveStats* stats) {
  if (initial.size() != model.mesh().vertices.size()) {
    throw Error(ErrorKind::shape, "initial guess does not match mesh vertex count");
  }
  Positions x = initial;
  double done = 0.0;
  double ds = 1.0 / std::max(1, increments);
  int halvings = 0;
  double residual = 0.0;
  int total_iterations = 0;
  int accepted = 0;
  std::vector<double> trace;
  while (done < 1.0) {
    const double next = std::min(1.0, done + ds);
    const double pressure = from.pressure_kPa + next * (to.pressure_kPa - from.pressure_kPa);
    const Vec3 offset = from.rim_offset + next * (to.rim_offset - from.rim_offset);
    Positions trial = x;
    // move free vertices with the rim so the first iterate stays admissible
    const Vec3 prev_offset = from.rim_offset + done * (to.rim_offset - from.rim_offset);
    const Vec3 shift = offset - prev_offset;
    if (shift.squaredNorm() > 0.0) {
      for (int v : model.free_vertices()) trial[static_cast<std::size_t>(v)] += shift;
    }
    model.apply_rim(trial, offset);
    try {
      total_iterations += newton_solve(model, trial, pressure, settings, residual, &trace);
      x = std::move(trial);
      done = next;
      ++accepted;
    } catch (const NonConvergence& e) {
      residual = e.last_residual();
      if (++halvings > settings.max_halvings) {
        throw NonConvergence("load increment halved " + std::to_string(settings.max_halvings) +
                                 " times at fraction " + std::to_string(done) + ": " + e.message(),
                             residual);
      }
      ds *= 0.5;
    }
  }
  if (stats != nullptr) {
    stats->increments = accepted;
    stats->iterations = total_iterations;
    stats->residual = residual;
    stats->energy_trace = std::move(trace);
  }
  return x;
}

Positions solve_equilibrium(const MembraneModel& model, double pressure_kPa, const Positions& initial_guess,
                            const SolverSettings& settings, SolveStats* stats) {
  return solve_equilibrium(model, initial_guess, LoadState{}, LoadState{pressure_kPa, Vec3::Zero()},
                           settings.min_increments, settings, stats);
}

UnloadResult unload(const ShellMesh& mesh, const RegionalMaterialMap& materials, const LoadingParameters& load,
                    const UnloadSettings& unload_settings, const SolverSettings& settings,
                    const ModelOptions& options) {
  const Positions& target = mesh.vertices;
  const double target_volume = geometry::enclosed_volume(mesh, target);
  const double edp = load.edp_mmHg * kMmHgToKPa;
  UnloadResult out;
  Positions reference = target;
  Positions previous_loaded;
  const auto& rim_ids = mesh.rim_vertex_ids;
  for (int k = 0; k < unload_settings.max_iterations; ++k) {
    Positions loaded;
    try {
      const MembraneModel model(mesh, reference, materials, load, options);
      if (k > 0) {
        // warm start: reuse the previous inflation displacement
        Positions guess = reference;
        for (std::size_t v = 0; v < guess.size(); ++v) guess[v] += previous_loaded[v] - out.reference[v];
        model.apply_rim(guess, Vec3::Zero());
        try {
          loaded = solve_equilibrium(model, guess, LoadState{edp, Vec3::Zero()}, LoadState{edp, Vec3::Zero()}, 1,
                                     settings);
        } catch (const NonConvergence&) {
          loaded.clear();
        }
      }
      if (loaded.empty()) loaded = solve_equilibrium(model, edp, reference, settings);
    } catch (const Error& e) {
      throw Error(ErrorKind::unloading_failure, "iteration " + std::to_string(k) + ": " + e.message());
    }
    const double v = geometry::ClosedSurface(mesh).volume(loaded);
    const double err = std::abs(v - target_volume) / target_volume;
    double rms = 0.0;
    for (std::size_t i = 0; i < loaded.size(); ++i) rms += (loaded[i] - target[i]).squaredNorm();
    rms = std::sqrt(rms / static_cast<double>(loaded.size()));
    out.volume_error_history.push_back(err);
    out.rms_history.push_back(rms);
    out.iterations = k + 1;
    out.reference = reference;
    out.loaded = loaded;
    out.volume_error = err;
    if (err <= unload_settings.volume_tolerance) return out;
    previous_loaded = loaded;
    for (std::size_t i = 0; i < reference.size(); ++i) reference[i] -= loaded[i] - target[i];
    for (int r : rim_ids) reference[static_cast<std::size_t>(r)] = target[static_cast<std::size_t>(r)];
  }
  throw Error(ErrorKind::unloading_failure,
              "volume error " + std::to_string(out.volume_error) + " after " +
                  std::to_string(unload_settings.max_iterations) + " iterations");
}

SimulationResult run_transient(const ShellMesh& mesh, const RegionalMaterialMap& materials,
                               const LoadingParameters& load, const TransientSettings& settings) {
  if (settings.n_steps < 1) throw Error(ErrorKind::invalid_argument, "n_steps must be at least 1");
  materials.validate();
  SimulationResult result;
  result.unloading = unload(mesh, materials, load, settings.unload, settings.solver, settings.model);
  const MembraneModel model(mesh, result.unloading.reference, materials, load, settings.model);
  const geometry::ClosedSurface surface(mesh);
  const Positions ed_state = result.unloading.loaded;

  Positions x = ed_state;
  LoadState state{pressure_transient(0.0, load), load.rim.offset(0.0)};
  for (int k = 0; k <= settings.n_steps; ++k) {
    const double t = static_cast<double>(k) / settings.n_steps;
    const LoadState next{pressure_transient(t, load), load.rim.offset(t)};
    if (k > 0) {
      try {
        x = solve_equilibrium(model, x, state, next, 1, settings.solver);
      } catch (const NonConvergence& e) {
        throw NonConvergence("time step " + std::to_string(k) + " (t=" + std::to_string(t) + "): " + e.message(),
                             e.last_residual());
      } catch (const Error& e) {
        throw Error(e.kind(), "time step " + std::to_string(k) + " (t=" + std::to_string(t) + "): " + e.message());
      }
    }
    state = next;
    geometry::DisplacementField u;
    u.t = t;
    u.u.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) u.u[i] = x[i] - ed_state[i];
    const double volume = surface.volume(x);
    if (!(volume > 0.0)) {
      throw Error(ErrorKind::topology, "non-positive cavity volume at step " + std::to_string(k));
    }
    result.times.push_back(t);
    result.pressure_kPa.push_back(next.pressure_kPa);
    result.volume_ml.push_back(volume / 1000.0);
    result.displacements.push_back(std::move(u));
  }
  result.es_index = static_cast<std::size_t>(
      std::max_element(result.volume_ml.begin(), result.volume_ml.end()) - result.volume_ml.begin());
  result.features = extract_features(mesh, result);
  return result;
}

FeatureVector extract_features(const ShellMesh& mesh, const SimulationResult& result) {
  FeatureVector f{};
  const auto es = result.es_index;
  at(f, Feature::esv_ml) = result.volume_ml.at(es);
  const auto d = geometry::regional_displacement(mesh, result.displacements.at(es));
  at(f, Feature::d_global_mm) = d.global;
  at(f, Feature::d_anterior_mm) = d[Region::anterior];
  at(f, Feature::d_posterior_mm) = d[Region::posterior];
  at(f, Feature::d_septum_mm) = d[Region::septum];
  at(f, Feature::d_lateral_mm) = d[Region::lateral];
  at(f, Feature::d_roof_mm) = d[Region::roof];
  return f;
}

}  // namespace lacal::mechanics
