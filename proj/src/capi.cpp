#include "eit/eit.h"

#include <cstdlib>
#include <optional>
#include <random>

#include "io.hpp"

struct eit_artifacts {
  std::map<std::string, std::string> files;
};

namespace {

using nlohmann::json;
using namespace eit;

constexpr const char* kVersion = "0.1.0";

thread_local std::string g_error;
thread_local int32_t g_code = EIT_OK;
thread_local std::string g_error_json;

void apply_thread_env() {
  static const bool done = [] {
    if (const char* t = std::getenv("EIT_THREADS")) {
      const int k = std::atoi(t);
      if (k > 0) Eigen::setNbThreads(k);
    }
    return true;
  }();
  (void)done;
}

template <class F>
int32_t guarded(F&& f) {
  apply_thread_env();
  g_error.clear();
  g_code = EIT_OK;
  try {
    f();
    return EIT_OK;
  } catch (const std::invalid_argument& e) {
    g_code = EIT_ERROR_INVALID_ARGUMENT;
    g_error = e.what();
  } catch (const std::domain_error& e) {
    g_code = EIT_ERROR_INVALID_ARGUMENT;
    g_error = e.what();
  } catch (const std::ios_base::failure& e) {
    g_code = EIT_ERROR_IO;
    g_error = e.what();
  } catch (const std::filesystem::filesystem_error& e) {
    g_code = EIT_ERROR_IO;
    g_error = e.what();
  } catch (const std::exception& e) {
    g_code = EIT_ERROR_RUNTIME;
    g_error = e.what();
  }
  return g_code;
}

json parse_config(const char* config_json) {
  if (!config_json) throw std::invalid_argument("config must not be null");
  json cfg = json::parse(config_json, nullptr, false);
  if (cfg.is_discarded()) throw std::invalid_argument("config is not valid JSON");
  if (!cfg.is_object()) throw std::invalid_argument("config must be a JSON object");
  return cfg;
}

ElectrodeShape shape_from(const json& cfg) {
  const std::string s = cfg.value("electrodes", "box");
  if (s == "box") return ElectrodeShape::Box;
  if (s == "bandlimited") return ElectrodeShape::Bandlimited;
  throw std::invalid_argument("unknown electrode shape: " + s);
}

ConductivityField phantom_field(const std::string& name) {
  if (name == "none") {
    ConductivityField f = ConductivityField::from_layered(LayeredConductivity::constant(1.0));
    f.sigma_min = f.sigma_max = 1.0;
    return f;
  }
  return phantom(name);
}

// n/2 electrodes per arc around theta = 0 and theta = pi; one monotone
// counterclockwise circuit, matching the two-sided graph's boundary order
// (the "reversed" bottom row of the grid picture)
ElectrodeSet two_arc_electrodes(int n, double beta, ElectrodeShape shape) {
  if (n < 4 || n % 2) throw std::invalid_argument("two-sided setups use even n >= 4");
  if (!(beta > 0.0) || beta >= kPi / 2.0)
    throw std::invalid_argument("two-sided arc half-width must be in (0, pi/2)");
  const int m = n / 2;
  ElectrodeSet e;
  e.n = n;
  e.shape = shape;
  e.width = 2.0 * beta / m;
  for (int q = 0; q < m; ++q) e.centers.push_back(-beta + (q + 0.5) * e.width);
  for (int q = 0; q < m; ++q) e.centers.push_back(kPi - beta + (q + 0.5) * e.width);
  return e;
}

struct ForwardResult {
  MeasuredDtn md;
  std::optional<MobiusMap> map;  // one-sided setups only
  json boundary;
};

ForwardResult synthesize(const json& cfg) {
  const int n = cfg.at("n").get<int>();
  const std::string name = cfg.value("phantom", "none");
  const ElectrodeShape shape = shape_from(cfg);
  const int nr = cfg.value("nr", 256), ntheta = cfg.value("ntheta", 512);
  const json boundary = cfg.value("boundary", json{{"type", "full"}});
  const std::string btype = boundary.value("type", "full");

  ForwardResult out;
  out.boundary = boundary;
  ConductivityField sigma = phantom_field(name);
  if (btype == "full") {
    out.md = measure_dtn(sigma, n, make_electrodes(n, shape), nr, ntheta);
  } else if (btype == "one-sided") {
    const double beta = boundary.at("beta").get<double>();
    if (n % 2) {
      // conformal route (circular topology): equivalent full-boundary
      // measurement of the pushed-forward field; the map and correspondence
      // table record the change of variables
      out.map = fit_mobius_one_sided(beta, n);
      out.md = measure_dtn(push_forward_conductivity(sigma, *out.map), n,
                           make_electrodes(n, shape), nr, ntheta);
    } else {
      // pyramidal route: electrodes directly on the accessible arc
      out.md = measure_dtn(sigma, n, make_arc_electrodes(n, beta, shape), nr, ntheta);
    }
  } else if (btype == "two-sided") {
    const double beta = boundary.at("beta").get<double>();
    out.md = measure_dtn(sigma, n, two_arc_electrodes(n, beta, shape), nr, ntheta);
  } else {
    throw std::invalid_argument("unknown boundary type: " + btype);
  }
  return out;
}

json provenance_json(const json& cfg, const ForwardResult& fr) {
  return {{"library_version", kVersion},
          {"phantom", cfg.value("phantom", "none")},
          {"registry", json::parse(phantom_registry_json())["version"]},
          {"n", fr.md.n},
          {"nr", fr.md.nr},
          {"ntheta", fr.md.ntheta},
          {"electrodes", cfg.value("electrodes", "box")},
          {"boundary", fr.boundary},
          {"seed", cfg.value("seed", 0)},
          {"asymmetry", fr.md.asymmetry}};
}

void do_grid(const json& cfg, eit_artifacts& a) {
  const int n = cfg.at("n").get<int>();
  const int hbar = cfg.value("hbar", 1);
  const std::string mode = cfg.value("mode", "interpolation");
  GridSteps steps;
  if (mode == "interpolation")
    steps = optimal_grid_interpolation(n, hbar);
  else if (mode == "truncated")
    steps = truncated_measure_grid(layer_count(n, hbar));
  else
    throw std::invalid_argument("unknown grid mode: " + mode);
  StaggeredGrid grid = radii_from_steps(steps, n);
  a.files["grid.json"] = grid_json(grid).dump(2) + "\n";
  a.files["grid.csv"] = grid_csv(grid);
}

void do_forward(const json& cfg, eit_artifacts& a, const std::string& prefix = "") {
  ForwardResult fr = synthesize(cfg);
  a.files[prefix + "dtn.csv"] = matrix_csv(fr.md.m);
  a.files[prefix + "provenance.json"] = provenance_json(cfg, fr).dump(2) + "\n";
  if (fr.map) {
    const double beta = fr.boundary.at("beta").get<double>();
    a.files["map.json"] = map_json(*fr.map).dump(2) + "\n";
    a.files["correspondence.csv"] =
        correspondence_csv(boundary_correspondence(*fr.map, beta, fr.md.n));
  }
}

void do_invert(const json& cfg, const Eigen::MatrixXd& m_data, const Eigen::MatrixXd& m_ref,
               eit_artifacts& a, const MobiusMap* map = nullptr) {
  if (m_data.rows() != m_data.cols()) throw std::invalid_argument("data matrix must be square");
  const int n = static_cast<int>(m_data.rows());
  const Topology topology = topology_from_name(cfg.value("topology", "circular"));
  const std::string grid_mode = cfg.value("grid", "optimal");
  if (grid_mode != "optimal" && grid_mode != "sensitivity")
    throw std::invalid_argument("unknown reconstruction grid mode: " + grid_mode);
  const int gn_steps = cfg.value("gn_steps", 0);

  std::vector<std::pair<double, double>> points;
  json warnings = json::array();
  if (grid_mode == "sensitivity" || topology != Topology::Circular) {
    const int snr = cfg.value("sens_nr", 48), snt = cfg.value("sens_ntheta", 96);
    SensitivityGrid sg = sensitivity_grid(sensitivity_matrix(
        phantom_field("none"), n, topology, make_electrodes(n, shape_from(cfg)), snr, snt));
    if (sg.flat_warning) warnings.push_back(sg.warning);
    points = std::move(sg.points);
  }
  ReconstructionResult rec =
      reconstruction_mapping(m_data, m_ref, topology, points.empty() ? nullptr : &points);
  if (map) {  // report point locations in the original (partial-data) disk
    for (auto& p : rec.points) {
      const std::complex<double> z = map->inverse(std::polar(std::min(p.r, 1.0), p.theta));
      p.r = std::abs(z);
      p.theta = std::arg(z);
    }
  }
  a.files["network.json"] = network_json(rec.recovered.network).dump(2) + "\n";
  json rj = reconstruction_json(rec);
  rj["warnings"] = warnings;
  a.files["reconstruction.json"] = rj.dump(2) + "\n";
  a.files["reconstruction.csv"] = reconstruction_csv(rec);

  if (gn_steps > 0) {
    if (topology != Topology::Circular)
      throw std::invalid_argument("Gauss-Newton refinement applies to the circular topology only");
    const int nr = cfg.value("nr", 256), ntheta = cfg.value("ntheta", 512);
    GaussNewtonContext ctx =
        make_gn_context(m_data, n, make_electrodes(n, shape_from(cfg)), nr, ntheta);
    Eigen::VectorXd kappa = gn_initial_guess(ctx);
    std::vector<GaussNewtonStep> steps = gauss_newton(ctx, kappa, gn_steps);
    std::string trace = "step,objective_before,objective_after,halvings,accepted\n";
    for (size_t s = 0; s < steps.size(); ++s) {
      if (steps[s].accepted) kappa = steps[s].kappa;
      trace += std::to_string(s + 1) + "," + format_double(steps[s].objective_before) + "," +
               format_double(steps[s].objective_after) + "," + std::to_string(steps[s].halvings) +
               "," + (steps[s].accepted ? "1" : "0") + "\n";
    }
    a.files["gn_trace.csv"] = trace;
    std::string field = "r,theta,value\n";
    for (int i = 0; i < ctx.nr; ++i) {
      const double r = 1.0 + (ctx.rmin - 1.0) * (i + 0.5) / ctx.nr;
      for (int j = 0; j < ctx.ntheta; ++j) {
        const double th = (j + 0.5) * 2.0 * kPi / ctx.ntheta;
        field += format_double(r) + "," + format_double(th) + "," +
                 format_double(std::exp(kappa[static_cast<Eigen::Index>(i) * ctx.ntheta + j])) +
                 "\n";
      }
    }
    a.files["gn_field.csv"] = field;
  }
}

void do_run(const json& cfg, eit_artifacts& a) {
  const int n = cfg.at("n").get<int>();
  const Topology topology = topology_from_name(cfg.value("topology", "circular"));

  ForwardResult data = synthesize(cfg);
  json ref_cfg = cfg;
  ref_cfg["phantom"] = "none";
  ForwardResult ref = synthesize(ref_cfg);
  a.files["dtn_data.csv"] = matrix_csv(data.md.m);
  a.files["dtn_reference.csv"] = matrix_csv(ref.md.m);
  a.files["provenance.json"] = provenance_json(cfg, data).dump(2) + "\n";
  a.files["phantoms.json"] = phantom_registry_json();
  if (data.map) {
    const double beta = data.boundary.at("beta").get<double>();
    a.files["map.json"] = map_json(*data.map).dump(2) + "\n";
    a.files["correspondence.csv"] =
        correspondence_csv(boundary_correspondence(*data.map, beta, n));
  }
  if (topology == Topology::Circular) {
    StaggeredGrid grid = radii_from_steps(optimal_grid_interpolation(n, circular_hbar(n)), n);
    a.files["grid.json"] = grid_json(grid).dump(2) + "\n";
    a.files["grid.csv"] = grid_csv(grid);
  }
  do_invert(cfg, data.md.m, ref.md.m, a, data.map ? &*data.map : nullptr);
}

struct Check {
  std::string name;
  std::function<std::string()> run;  // empty string = pass
};

std::string expect(bool ok, const std::string& detail) { return ok ? "" : detail; }

std::vector<Check> selfcheck_suite() {
  std::vector<Check> checks;
  checks.push_back({"reference DtN eigenvalues f(k^2) = |k|", [] {
    FineSolver solver(phantom_field("none"), 64, 128, 1e-4);
    double worst = 0.0;
    for (int k = 1; k <= 3; ++k) worst = std::max(worst, std::abs(solver.eigenvalue_sample(k) - k));
    return expect(worst < 5e-2, "worst deviation " + std::to_string(worst));
  }});
  checks.push_back({"optimal grid positivity and radii ordering", [] {
    StaggeredGrid g = radii_from_steps(optimal_grid_interpolation(13, 1), 13);
    for (size_t i = 1; i < g.primary_radii.size(); ++i)
      if (!(g.primary_radii[i] < g.primary_radii[i - 1])) return std::string("radii not decreasing");
    for (size_t i = 1; i < g.dual_radii.size(); ++i)
      if (!(g.dual_radii[i] < g.dual_radii[i - 1])) return std::string("dual radii not decreasing");
    return std::string();
  }});
  checks.push_back({"grid steps to radii round trip", [] {
    GridSteps s = optimal_grid_interpolation(13, 1);
    GridSteps back = steps_from_radii(radii_from_steps(s, 13), LayeredConductivity::constant(1.0));
    double worst = 0.0;
    for (int j = 0; j < s.ell(); ++j) worst = std::max(worst, std::abs(back.alpha[j] - s.alpha[j]));
    return expect(worst < 1e-8, "step mismatch " + std::to_string(worst));
  }});
  checks.push_back({"Lanczos inverse eigenvalue round trip", [] {
    GridSteps g = truncated_measure_grid(8);
    GridSteps h = lanczos_from_spectral(reference_spectral_data(8));
    double worst = 0.0;
    for (int j = 0; j < 8; ++j) {
      worst = std::max(worst, std::abs(g.alpha[j] - h.alpha[j]));
      worst = std::max(worst, std::abs(g.alpha_hat[j] - h.alpha_hat[j]));
    }
    return expect(worst == 0.0, "grids differ by " + std::to_string(worst));
  }});
  checks.push_back({"dual point values are geometric means", [] {
    LayeredReconstruction rec =
        reconstruct_layered(shifted_reference_spectral_data(6, 1.0), ReconstructOptions{false});
    double worst = 0.0;
    for (int j = 0; j + 1 < 6; ++j)
      worst = std::max(worst,
                       std::abs(rec.sigma_hat[j] - std::sqrt(rec.sigma[j] * rec.sigma[j + 1])));
    return expect(worst <= 1e-9, "identity violated by " + std::to_string(worst));
  }});
  checks.push_back({"network DtN consistency (circular minors)", [] {
    ResistorNetwork net = circular_network_from_steps(optimal_grid_interpolation(9, 1), 9);
    ConsistencyReport rep = check_dtn_consistency(dtn_map(net), 9);
    return expect(rep.pass(), rep.first_violation);
  }});
  checks.push_back({"corrupted DtN rejected by the consistency screen", [] {
    ResistorNetwork net = circular_network_from_steps(optimal_grid_interpolation(9, 1), 9);
    Eigen::MatrixXd m = dtn_map(net);
    m(0, 0) += 0.1;  // break the zero row sums
    try {
      recover_circular(m);
    } catch (const std::invalid_argument& e) {
      return expect(std::string(e.what()).find("row sums") != std::string::npos, e.what());
    }
    return std::string("corrupted input was accepted");
  }});
  checks.push_back({"circular recovery round trip", [] {
    ResistorNetwork net = circular_network_from_steps(optimal_grid_interpolation(9, 1), 9);
    RecoveredNetwork rec = recover_circular(dtn_map(net));
    double worst = 0.0;
    for (size_t e = 0; e < net.gamma.size(); ++e)
      worst = std::max(worst, std::abs(rec.network.gamma[e] / net.gamma[e] - 1.0));
    return expect(worst < 1e-8, "conductance error " + std::to_string(worst));
  }});
  checks.push_back({"pyramidal peeling round trip", [] {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> ug(0.1, 10.0);
    ResistorNetwork net{build_pyramidal(6), {}};
    for (size_t e = 0; e < net.graph.edges.size(); ++e) net.gamma.push_back(ug(rng));
    PeelRoundTrip rt = peel_round_trip(net);
    return expect(rt.gamma_error <= 1e-9, "conductance error " + std::to_string(rt.gamma_error));
  }});
  checks.push_back({"two-sided peeling round trip", [] {
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> ug(0.1, 10.0);
    ResistorNetwork net{build_two_sided(8), {}};
    for (size_t e = 0; e < net.graph.edges.size(); ++e) net.gamma.push_back(ug(rng));
    PeelRoundTrip rt = peel_round_trip(net);
    return expect(rt.gamma_error <= 1e-9, "conductance error " + std::to_string(rt.gamma_error));
  }});
  checks.push_back({"reconstruction of the reference is identically 1", [] {
    Eigen::MatrixXd m = dtn_map(circular_network_from_steps(optimal_grid_interpolation(9, 1), 9));
    ReconstructionResult rec = reconstruction_mapping(m, m, Topology::Circular);
    for (const auto& p : rec.points)
      if (p.value != 1.0) return std::string("ratio deviates: " + format_double(p.value));
    return std::string();
  }});
  checks.push_back({"disk automorphism endpoint condition", [] {
    double worst = 0.0;
    for (double beta : {kPi / 4.0, kPi / 2.0, 3.0 * kPi / 4.0}) {
      MobiusMap map = fit_mobius_one_sided(beta, 9);
      worst = std::max(worst, std::abs(map.boundary_forward(kPi - kPi / 9.0) - beta));
    }
    return expect(worst <= 1e-12, "endpoint residual " + std::to_string(worst));
  }});
  checks.push_back({"serialization round trips", [] {
    if (sha256_hex("abc") !=
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
      return std::string("sha256 test vector mismatch");
    Eigen::MatrixXd m(2, 2);
    m << 0.1, -2.0 / 3.0, 1e-17, 3.0;
    if ((matrix_from_csv(matrix_csv(m)) - m).cwiseAbs().maxCoeff() != 0.0)
      return std::string("matrix CSV round trip is lossy");
    return std::string();
  }});
  return checks;
}

}  // namespace

extern "C" {

const char* eit_version(void) { return kVersion; }

const char* eit_last_error(void) { return g_error.c_str(); }

const char* eit_last_error_json(void) {
  g_error_json = json{{"error", {{"code", g_code}, {"message", g_error}}}}.dump();
  return g_error_json.c_str();
}

int32_t eit_artifacts_count(const eit_artifacts* a) {
  return a ? static_cast<int32_t>(a->files.size()) : 0;
}

const char* eit_artifacts_name(const eit_artifacts* a, int32_t index) {
  if (!a || index < 0 || index >= static_cast<int32_t>(a->files.size())) return nullptr;
  return std::next(a->files.begin(), index)->first.c_str();
}

const char* eit_artifacts_content(const eit_artifacts* a, const char* name) {
  if (!a || !name) return nullptr;
  auto it = a->files.find(name);
  return it == a->files.end() ? nullptr : it->second.c_str();
}

int32_t eit_artifacts_write(const eit_artifacts* a, const char* out_dir) {
  return guarded([&] {
    if (!a || !out_dir) throw std::invalid_argument("artifacts and out_dir must not be null");
    OutputBundle bundle{std::filesystem::path(out_dir)};
    for (const auto& [name, content] : a->files) bundle.write(name, content);
    bundle.finalize();
  });
}

void eit_artifacts_free(eit_artifacts* a) { delete a; }

int32_t eit_grid(const char* config_json, eit_artifacts** out) {
  return guarded([&] {
    if (!out) throw std::invalid_argument("out must not be null");
    auto a = std::make_unique<eit_artifacts>();
    do_grid(parse_config(config_json), *a);
    *out = a.release();
  });
}

int32_t eit_forward(const char* config_json, eit_artifacts** out) {
  return guarded([&] {
    if (!out) throw std::invalid_argument("out must not be null");
    auto a = std::make_unique<eit_artifacts>();
    do_forward(parse_config(config_json), *a);
    *out = a.release();
  });
}

int32_t eit_invert(const char* config_json, const char* data_csv, const char* reference_csv,
                   eit_artifacts** out) {
  return guarded([&] {
    if (!out || !data_csv || !reference_csv)
      throw std::invalid_argument("out, data_csv and reference_csv must not be null");
    auto a = std::make_unique<eit_artifacts>();
    do_invert(parse_config(config_json), matrix_from_csv(data_csv), matrix_from_csv(reference_csv),
              *a);
    *out = a.release();
  });
}

int32_t eit_run(const char* config_json, eit_artifacts** out) {
  return guarded([&] {
    if (!out) throw std::invalid_argument("out must not be null");
    auto a = std::make_unique<eit_artifacts>();
    do_run(parse_config(config_json), *a);
    *out = a.release();
  });
}

int32_t eit_selfcheck(int32_t* failures, eit_artifacts** out) {
  return guarded([&] {
    if (!failures || !out) throw std::invalid_argument("failures and out must not be null");
    auto a = std::make_unique<eit_artifacts>();
    int32_t failed = 0;
    std::string report;
    for (const Check& c : selfcheck_suite()) {
      std::string detail;
      try {
        detail = c.run();
      } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
      }
      if (detail.empty()) {
        report += "PASS  " + c.name + "\n";
      } else {
        report += "FAIL  " + c.name + ": " + detail + "\n";
        ++failed;
      }
    }
    a->files["selfcheck.txt"] = report;
    *failures = failed;
    *out = a.release();
  });
}

}  // extern "C"
