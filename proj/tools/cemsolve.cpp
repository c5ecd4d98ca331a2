// Experiment driver: single runs and parameter sweeps of the contact solvers,
// emitting per-iteration records, summary JSON and field dumps.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cem/contact.hpp"
#include "cem/io.hpp"
#include "cem/metrics.hpp"
#include "cem/sources.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace cem;

namespace {

json default_config() {
  return json{
      {"geometry", "MixedDNC"},
      {"nx_fine", 160},
      {"Nx_coarse", 20},
      {"medium", {{"kind", "Inclusions"}, {"seed", 1}, {"kappa_R", 1e3}}},
      {"source", "f1"},
      {"p", "zero"},
      {"eps", 1e-4},
      {"tol", 1e-8},
      {"max_iter", 25},
      {"m", 3},
      {"l_m", 3},
      {"initial", "u00"},
      {"solve", "both"},
      {"solver", {{"method", "Direct"}, {"tol", 1e-12}}},
      {"outputs", {{"dir", "out"}, {"dump_fields", true}, {"timings", false}}},
  };
}

void merge(json& base, const json& overlay) {
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object())
      merge(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

void set_dot_path(json& j, const std::string& path, const json& value) {
  json* cur = &j;
  size_t start = 0;
  while (true) {
    const size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw std::invalid_argument("bad override path: " + path);
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      return;
    }
    cur = &((*cur)[key]);
    start = dot + 1;
  }
}

json apply_overrides(json config, const std::vector<std::string>& overrides) {
  for (const std::string& ov : overrides) {
    const size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("override must look like key.path=value: " + ov);
    const std::string path = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;  // plain string
    }
    set_dot_path(config, path, value);
  }
  return config;
}

struct Instance {
  StructuredMesh mesh;
  BoundarySpec spec;
  PermField field;
  SpectralWeight weight;
  SparseMat mass;
  FineForms forms;
  ScalarField2D p;
  Eigen::VectorXd u0;
  MsConfig ms;
  IterationControl ctl;
  SolveOptions linear;
  std::string solve_mode;
};

ScalarField2D make_nodal_interpolant(const StructuredMesh& mesh, Eigen::MatrixXd grid) {
  if (grid.rows() != mesh.ny_fine + 1 || grid.cols() != mesh.nx_fine + 1)
    throw std::invalid_argument("nodal table dimensions do not match the fine grid");
  return [grid = std::move(grid), h = mesh.h, nx = mesh.nx_fine,
          ny = mesh.ny_fine](double x, double y) {
    const double xi = std::clamp(x / h, 0.0, static_cast<double>(nx));
    const double yj = std::clamp(y / h, 0.0, static_cast<double>(ny));
    const int i = std::min(static_cast<int>(xi), nx - 1);
    const int j = std::min(static_cast<int>(yj), ny - 1);
    const double sx = xi - i, sy = yj - j;
    return (1 - sx) * (1 - sy) * grid(j, i) + sx * (1 - sy) * grid(j, i + 1) +
           sx * sy * grid(j + 1, i + 1) + (1 - sx) * sy * grid(j + 1, i);
  };
}

Instance build_instance(const json& cfg) {
  Instance inst;
  const std::string geom = cfg.at("geometry");
  Geometry geometry;
  if (geom == "AllContact")
    geometry = Geometry::AllContact;
  else if (geom == "MixedDNC")
    geometry = Geometry::MixedDNC;
  else
    throw std::invalid_argument("geometry must be AllContact or MixedDNC");

  std::tie(inst.mesh, inst.spec) =
      build_mesh(cfg.at("nx_fine"), cfg.at("Nx_coarse"), geometry);

  if (cfg.contains("field_file")) {
    inst.field = load_field(read_grid_any(cfg.at("field_file").get<std::string>()),
                            inst.mesh);
  } else {
    const json& med = cfg.at("medium");
    const std::string kind = med.at("kind");
    MediumKind mk;
    if (kind == "Inclusions")
      mk = MediumKind::Inclusions;
    else if (kind == "Channels")
      mk = MediumKind::Channels;
    else if (kind == "MixedC")
      mk = MediumKind::MixedC;
    else
      throw std::invalid_argument("medium.kind must be Inclusions, Channels or MixedC");
    inst.field =
        synth_medium(mk, med.at("seed").get<std::uint64_t>(), med.at("kappa_R"), inst.mesh);
  }
  inst.weight = spectral_weight(inst.field, inst.mesh);
  inst.mass = assemble_mass(inst.mesh);

  Eigen::VectorXd volume_load;
  const std::string source = cfg.at("source");
  if (source == "f1" || source == "f2" || source == "f3") {
    volume_load = assemble_source_load(inst.mesh, source[1] - '0');
  } else if (source == "file") {
    const Eigen::MatrixXd t = read_grid_any(cfg.at("source_file").get<std::string>());
    if (t.rows() != inst.mesh.ny_fine || t.cols() != inst.mesh.nx_fine)
      throw std::invalid_argument("source table dimensions do not match fine cells");
    Eigen::VectorXd cells(inst.mesh.n_cells());
    for (int j = 0; j < inst.mesh.ny_fine; ++j)
      for (int i = 0; i < inst.mesh.nx_fine; ++i)
        cells[inst.mesh.cell_id(i, j)] = t(j, i);
    volume_load = assemble_load_cellwise(inst.mesh, cells);
  } else if (source == "zero") {
    volume_load = Eigen::VectorXd::Zero(inst.mesh.n_nodes());
  } else {
    throw std::invalid_argument("source must be f1, f2, f3, zero or file");
  }

  const std::string pmode = cfg.at("p");
  if (pmode == "zero")
    inst.p = nullptr;
  else if (pmode == "file")
    inst.p = make_nodal_interpolant(
        inst.mesh, read_grid_any(cfg.at("p_file").get<std::string>()));
  else
    throw std::invalid_argument("p must be zero or file");

  inst.forms = assemble_fine_forms(inst.mesh, inst.spec, inst.field, volume_load, inst.p);

  const std::string initial = cfg.at("initial");
  if (initial == "u00")
    inst.u0 = initial_guess(0, inst.mesh, inst.spec);
  else if (initial == "u01")
    inst.u0 = initial_guess(1, inst.mesh, inst.spec);
  else if (initial == "u02")
    inst.u0 = initial_guess(2, inst.mesh, inst.spec);
  else
    throw std::invalid_argument("initial must be u00, u01 or u02");

  inst.ms.oversample_layers = cfg.at("m");
  inst.ms.eigenvectors_per_element = cfg.at("l_m");
  inst.ctl.eps = cfg.at("eps");
  inst.ctl.tol = cfg.at("tol");
  inst.ctl.max_iter = cfg.at("max_iter");
  inst.ctl.keep_iterates = true;

  const json& solver = cfg.at("solver");
  const std::string method = solver.at("method");
  if (method == "Direct")
    inst.linear.method = SolveMethod::Direct;
  else if (method == "CG")
    inst.linear.method = SolveMethod::CG;
  else
    throw std::invalid_argument("solver.method must be Direct or CG");
  inst.linear.tol = solver.at("tol");

  inst.solve_mode = cfg.at("solve");
  if (inst.solve_mode != "fine" && inst.solve_mode != "cem" && inst.solve_mode != "both")
    throw std::invalid_argument("solve must be fine, cem or both");
  return inst;
}

RunRecord pair_records(const Instance& inst, const SolverRun* fine, const SolverRun* ms) {
  RunRecord rec;
  const SolverRun* primary = ms ? ms : fine;
  const size_t k_max =
      std::max(fine ? fine->rows.size() : 0, ms ? ms->rows.size() : 0);
  auto iterate_at = [](const SolverRun& run, size_t k) -> const Eigen::VectorXd& {
    return run.iterates[std::min(k, run.iterates.size() - 1)];
  };
  for (size_t k = 0; k < k_max; ++k) {
    RunRecordRow row;
    row.k = static_cast<int>(k) + 1;
    const IterationRow& src =
        primary->rows[std::min(k, primary->rows.size() - 1)];
    row.active = src.active_count;
    row.residual = src.residual;
    row.phase_ms = src.phase_ms;
    if (fine && ms) {
      const ErrorPair e = relative_errors(iterate_at(*fine, k), iterate_at(*ms, k),
                                          inst.forms.stiffness, inst.mass);
      row.E_L = e.l2;
      row.E_a = e.energy;
    }
    if (k >= 1) {
      const ErrorPair t = iteration_rates(iterate_at(*primary, k - 1),
                                          iterate_at(*primary, k),
                                          inst.forms.stiffness, inst.mass);
      row.T_L = t.l2;
      row.T_a = t.energy;
    }
    rec.rows.push_back(row);
  }
  return rec;
}

Eigen::MatrixXd node_grid(const StructuredMesh& mesh, const Eigen::VectorXd& u) {
  Eigen::MatrixXd g(mesh.ny_fine + 1, mesh.nx_fine + 1);
  for (int j = 0; j <= mesh.ny_fine; ++j)
    for (int i = 0; i <= mesh.nx_fine; ++i) g(j, i) = u[mesh.node_id(i, j)];
  return g;
}

void flush_record(const fs::path& dir, const RunRecord& rec, bool timings) {
  std::ofstream os(dir / "records.csv");
  rec.write_csv(os, timings);
}

int run_single(const json& cfg, bool quiet) {
  const Instance inst = build_instance(cfg);
  const fs::path dir = cfg.at("outputs").at("dir").get<std::string>();
  fs::create_directories(dir);
  const bool timings = cfg.at("outputs").value("timings", false);

  std::optional<SolverRun> fine, ms;
  json summary;
  summary["config"] = cfg;
  int exit_code = 0;
  try {
    if (inst.solve_mode != "cem")
      fine = fine_newton_solve(inst.mesh, inst.spec, inst.field, inst.forms, inst.u0,
                               inst.ctl, inst.linear);
    if (inst.solve_mode != "fine") {
      MultiscaleSolver solver(inst.mesh, inst.spec, inst.field, inst.weight, inst.ms,
                              inst.p);
      ms = iterative_cem_solve(inst.mesh, inst.spec, solver, inst.forms, inst.u0,
                               inst.ctl);
      if (cfg.at("outputs").value("dump_basis", false)) solver.dump_basis(dir / "basis");
    }
  } catch (const NonConvergenceError& e) {
    summary["error"] = e.what();
    SolverRun partial = e.partial;
    const RunRecord rec = pair_records(inst, nullptr, &partial);
    flush_record(dir, rec, timings);
    std::ofstream(dir / "summary.json") << summary.dump(2) << "\n";
    if (!quiet) std::cerr << "solver failure: " << e.what() << "\n";
    return 1;
  }

  const RunRecord rec =
      pair_records(inst, fine ? &*fine : nullptr, ms ? &*ms : nullptr);
  flush_record(dir, rec, timings);

  const SolverRun& primary = ms ? *ms : *fine;
  double violation = 0.0;
  for (int g : inst.spec.contact_nodes)
    violation = std::max(violation, primary.u[g]);

  summary["iterations"] = primary.rows.size();
  if (fine) summary["iterations_fine"] = fine->rows.size();
  if (ms) summary["iterations_cem"] = ms->rows.size();
  summary["active_final"] = indicator(primary.u, inst.spec).count;
  summary["max_contact_violation"] = violation;
  summary["terminated_by_active_set"] = primary.active_set_repeated;
  summary["cycle_detected"] = primary.cycle_detected;
  if (!rec.rows.empty()) {
    const RunRecordRow& last = rec.rows.back();
    // An exactly matching pair has zero error even where the relative form is
    // undefined (zero data).
    auto final_err = [&](const std::optional<double>& v) -> json {
      if (v) return *v;
      if (fine && ms && (fine->u - ms->u).isZero(0.0)) return 0.0;
      return {};
    };
    summary["final_E_L"] = final_err(last.E_L);
    summary["final_E_a"] = final_err(last.E_a);
    summary["final_residual"] = last.residual;
  }
  double total_ms = 0.0;
  for (const auto& r : primary.rows) total_ms += r.phase_ms;
  summary["wall_ms"] = total_ms;

  if (cfg.at("outputs").value("dump_fields", true)) {
    const Eigen::MatrixXd grid = node_grid(inst.mesh, primary.u);
    write_grid_csv(dir / "u_final.csv", grid);
    write_grid_bin(dir / "u_final.bin", grid);
  }
  std::ofstream(dir / "summary.json") << summary.dump(2) << "\n";

  if (!quiet) {
    std::cout << "iterations=" << primary.rows.size()
              << " active=" << indicator(primary.u, inst.spec).count
              << " max_violation=" << violation;
    if (!rec.rows.empty() && rec.rows.back().E_a)
      std::cout << " E_a=" << *rec.rows.back().E_a;
    std::cout << " -> " << dir.string() << "\n";
    const RunRecordRow& last = rec.rows.back();
    if (last.E_L && last.E_a && *last.E_L > *last.E_a)
      std::cerr << "warning: E_L exceeds E_a at the final iterate\n";
  }
  return exit_code;
}

std::string point_name(const std::vector<std::pair<std::string, json>>& assignment) {
  std::string name;
  for (const auto& [k, v] : assignment) {
    if (!name.empty()) name += "_";
    std::string key = k.substr(k.rfind('.') + 1);
    name += key + "=" + v.dump();
  }
  for (char& c : name)
    if (c == '"' || c == '/' || c == ' ') c = '-';
  return name;
}

int run_sweep(const json& cfg, bool quiet) {
  if (!cfg.contains("grid") || !cfg.at("grid").is_object() || cfg.at("grid").empty())
    throw std::invalid_argument("sweep config needs a non-empty \"grid\" object");
  std::vector<std::pair<std::string, json>> axes;
  for (auto it = cfg.at("grid").begin(); it != cfg.at("grid").end(); ++it) {
    if (!it.value().is_array() || it.value().empty())
      throw std::invalid_argument("grid axis " + it.key() + " must be a non-empty array");
    axes.emplace_back(it.key(), it.value());
  }
  const fs::path base = cfg.at("outputs").at("dir").get<std::string>();
  fs::create_directories(base);

  std::vector<size_t> index(axes.size(), 0);
  json sweep_summary = json::array();
  int worst = 0;
  while (true) {
    std::vector<std::pair<std::string, json>> assignment;
    for (size_t a = 0; a < axes.size(); ++a)
      assignment.emplace_back(axes[a].first, axes[a].second[index[a]]);

    json point = cfg;
    point.erase("grid");
    for (const auto& [path, value] : assignment) set_dot_path(point, path, value);
    const std::string name = point_name(assignment);
    point["outputs"]["dir"] = (base / name).string();

    const int code = run_single(point, quiet);
    worst = std::max(worst, code);
    json entry;
    entry["point"] = name;
    entry["exit"] = code;
    for (const auto& [path, value] : assignment) entry["values"][path] = value;
    sweep_summary.push_back(entry);

    size_t a = 0;
    for (; a < axes.size(); ++a) {
      if (++index[a] < axes[a].second.size()) break;
      index[a] = 0;
    }
    if (a == axes.size()) break;
  }
  std::ofstream(base / "sweep_summary.json") << sweep_summary.dump(2) << "\n";
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale solvers for unilateral contact on high-contrast media"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  bool quiet = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "JSON config file")->required();
    cmd->add_option("--override", overrides,
                    "dot-path config override, e.g. --override m=4");
    cmd->add_flag("--quiet", quiet, "suppress progress output");
  };
  CLI::App* cmd_run = app.add_subcommand("run", "single experiment");
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "cartesian parameter sweep");
  add_common(cmd_run);
  add_common(cmd_sweep);

  CLI11_PARSE(app, argc, argv);

  json cfg = default_config();
  try {
    std::ifstream is(config_path);
    if (!is) throw std::invalid_argument("cannot open config: " + config_path);
    json user = json::parse(is);
    merge(cfg, user);
    cfg = apply_overrides(cfg, overrides);
  } catch (const std::exception& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  }

  try {
    return cmd_run->parsed() ? run_single(cfg, quiet) : run_sweep(cfg, quiet);
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
