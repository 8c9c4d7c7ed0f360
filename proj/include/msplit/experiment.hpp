#pragma once

/// @file experiment.hpp
/// End-to-end runs: problem setup, offline stage, split and reference runs,
/// error reports, sweeps and output files.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "msplit/coarse_system.hpp"
#include "msplit/config.hpp"
#include "msplit/error.hpp"
#include "msplit/fine_assembly.hpp"
#include "msplit/gmsfem.hpp"
#include "msplit/grid.hpp"
#include "msplit/linalg.hpp"
#include "msplit/splitting.hpp"

namespace msplit {

// ---------------------------------------------------------------------------
// Problem data
// ---------------------------------------------------------------------------

inline double example1_kappa(double x, double y) {
  using std::numbers::pi;
  return (2.0 + std::sin(11.0 * pi * x) * std::sin(13.0 * pi * y)) /
         (1.4 + std::cos(12.0 * pi * x) * std::cos(7.0 * pi * y));
}

inline Permeability make_permeability(const ExperimentConfig& c) {
  if (c.permeability == "example1") return Permeability::analytic(example1_kappa);
  if (c.permeability == "constant") return Permeability::constant(c.permeability_value);
  if (c.permeability == "channels")
    return Permeability::raster(channel_field(c.coarse_nx * c.refinement, c.coarse_ny * c.refinement, c.channels));
  if (c.permeability == "raster") return Permeability::raster(read_raster(c.permeability_file));
  throw ConfigError("unknown permeability kind '" + c.permeability + "'");
}

inline SourceTerm make_source(const ExperimentConfig& c) {
  using std::numbers::pi;
  SourceTerm s;
  if (c.source == "example1") {
    s.spatial = [](double x, double y) { return std::exp((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)); };
  } else if (c.source == "example3") {
    s.spatial = [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); };
    s.time_factor = [](double t) { return std::sin(pi * t) + 1.0; };
  } else if (c.source == "sine") {
    s.spatial = [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); };
  } else if (c.source == "constant") {
    s.spatial = [v = c.source_value](double, double) { return v; };
  } else if (c.source != "zero") {
    throw ConfigError("unknown source kind '" + c.source + "'");
  }
  return s;
}

inline SpaceFunction make_initial(const ExperimentConfig& c) {
  using std::numbers::pi;
  if (c.initial == "sine") return [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); };
  if (c.initial == "zero") return {};
  throw ConfigError("unknown initial condition '" + c.initial + "'");
}

struct Problem {
  GridPair grid;
  FineSystem fine;
  SourceTerm source;
  SpaceFunction initial;
};

inline Problem make_problem(const ExperimentConfig& c) {
  GridPair g = build_grids(c.coarse_nx, c.coarse_ny, c.refinement);
  FineSystem fs = assemble(g, make_permeability(c));
  return Problem{g, std::move(fs), make_source(c), make_initial(c)};
}

inline OfflineBasis offline_stage(const Problem& pb, const ExperimentConfig& c) {
  if (!c.basis_file.empty()) {
    std::ifstream in(c.basis_file);
    if (!in) throw ConfigError("cannot open basis file '" + c.basis_file + "'");
    OfflineBasis b = read_basis(in, pb.grid);
    if (b.ell != c.ell)
      throw ConfigError("basis file holds ell = " + std::to_string(b.ell) + ", configuration asks for " +
                        std::to_string(c.ell));
    return b;
  }
  OfflineOptions opt;
  opt.ell = c.ell;
  opt.orthonormalize = c.orthonormalize;
  opt.threads = c.threads;
  return build_offline(pb.fine, opt);
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

inline Vector reconstruct_fine(const Prolongation& p, std::span<const double> z) { return p.apply(z); }

struct ErrorReport {
  double e_l2 = 0.0;
  double e_a = 0.0;
  std::vector<std::pair<double, double>> history;  ///< (t_n, e_a(t_n)), n = 1 ... N
  std::size_t coarse_dofs = 0;
  std::vector<std::size_t> block_dofs;
  double split_seconds = 0.0;
  double reference_seconds = 0.0;
};

namespace detail {

inline double relative(double num, double den) { return den > 0.0 ? num / den : num; }

}  // namespace detail

/// Relative L2 and energy errors of R (z_ref - z_split) at one time level,
/// measured on the fine grid.
inline std::pair<double, double> fine_errors(const Prolongation& p, const FineSystem& fs,
                                             std::span<const double> z_ref, std::span<const double> z_split) {
  const Vector diff = p.apply(subtract(z_ref, z_split));
  const Vector ref = p.apply(z_ref);
  const FineNorms nd = norms(fs, diff), nr = norms(fs, ref);
  return {detail::relative(nd.l2, nr.l2), detail::relative(nd.energy, nr.energy)};
}

/// Final-time errors on the fine grid plus the energy-error history, which
/// uses |R e|_A^2 = e^T B e on the coarse side.
inline ErrorReport compare(const Trajectory& reference, const Trajectory& split, const Prolongation& p,
                           const FineSystem& fs, const CoarseSystem& cs) {
  if (reference.states.size() != split.states.size() || reference.tau != split.tau)
    throw ConfigError("compare: reference and split runs use different time grids");
  if (split.states.empty() || split.states.front().size() != p.size())
    throw ConfigError("compare: coefficient dimension does not match the prolongation");
  ErrorReport rep;
  std::tie(rep.e_l2, rep.e_a) = fine_errors(p, fs, reference.final_state(), split.final_state());
  rep.coarse_dofs = p.size();
  for (std::size_t q = 0; q < p.block_count(); ++q) rep.block_dofs.push_back(p.offsets()[q + 1] - p.offsets()[q]);

  const std::size_t n = cs.size();
  Vector e(n), be(n), by(n);
  for (std::size_t k = 1; k < split.states.size(); ++k) {
    const auto& y = reference.states[k];
    for (std::size_t i = 0; i < n; ++i) e[i] = y[i] - split.states[k][i];
    cs.stiffness_csr().multiply(e, be);
    cs.stiffness_csr().multiply(y, by);
    const double num = std::sqrt(std::max(0.0, dot(e, be)));
    const double den = std::sqrt(std::max(0.0, dot(y, by)));
    rep.history.emplace_back(split.time(k), detail::relative(num, den));
  }
  for (double s : split.step_seconds) rep.split_seconds += s;
  rep.split_seconds += split.setup_seconds;
  for (double s : reference.step_seconds) rep.reference_seconds += s;
  rep.reference_seconds += reference.setup_seconds;
  return rep;
}

// ---------------------------------------------------------------------------
// Single setting
// ---------------------------------------------------------------------------

struct SettingRun {
  Prolongation prolongation;
  std::optional<CoarseSystem> system;
  StabilityCertificate certificate;
  Trajectory reference;
  Trajectory split;
  ErrorReport report;
  double projection_seconds = 0.0;
};

/// Projects onto the block structure, runs the unsplit backward-Euler
/// reference (at reference_tau when positive) and the split scheme.
inline SettingRun run_setting(const Problem& pb, const OfflineBasis& basis, const std::vector<int>& blocks,
                              const SplitConfig& cfg, double reference_tau = 0.0) {
  SettingRun run;
  auto t0 = std::chrono::steady_clock::now();
  run.prolongation = assemble_prolongation(pb.grid, basis, blocks);
  run.system.emplace(project_coarse(pb.fine, run.prolongation, pb.source, pb.initial));
  run.projection_seconds = detail::seconds_since(t0);

  const CoarseSystem& cs = *run.system;
  const SplitParts sp(cs, cfg.variant);
  run.certificate = check_stability(sp, cfg.mu, cfg.sigma);
  run.split = march(sp, cfg);
  const double rt = reference_tau > 0.0 ? reference_tau : cfg.tau;
  run.reference = backward_euler(cs, rt, cfg.T);

  if (rt == cfg.tau) {
    run.report = compare(run.reference, run.split, run.prolongation, pb.fine, cs);
  } else {
    ErrorReport rep;
    std::tie(rep.e_l2, rep.e_a) =
        fine_errors(run.prolongation, pb.fine, run.reference.final_state(), run.split.final_state());
    rep.coarse_dofs = run.prolongation.size();
    for (std::size_t q = 0; q < run.prolongation.block_count(); ++q)
      rep.block_dofs.push_back(run.prolongation.offsets()[q + 1] - run.prolongation.offsets()[q]);
    for (double s : run.split.step_seconds) rep.split_seconds += s;
    for (double s : run.reference.step_seconds) rep.reference_seconds += s;
    run.report = std::move(rep);
  }
  return run;
}

// ---------------------------------------------------------------------------
// Outputs
// ---------------------------------------------------------------------------

/// Fine nodal field as a raster: (fine_ny + 1) rows, top row at y = 1.
inline RasterField field_raster(const GridPair& g, std::span<const double> interior) {
  const Vector full = expand_to_nodes(g, interior);
  RasterField f;
  f.rows = static_cast<std::size_t>(g.fine_ny() + 1);
  f.cols = static_cast<std::size_t>(g.fine_nx() + 1);
  f.values.resize(f.rows * f.cols);
  for (std::size_t r = 0; r < f.rows; ++r) {
    const int iy = g.fine_ny() - static_cast<int>(r);
    for (std::size_t c = 0; c < f.cols; ++c)
      f.values[r * f.cols + c] = full[static_cast<std::size_t>(g.fine_node(static_cast<int>(c), iy))];
  }
  return f;
}

/// Inverse of field_raster, returning interior values.
inline Vector raster_to_interior(const GridPair& g, const RasterField& f) {
  if (f.rows != static_cast<std::size_t>(g.fine_ny() + 1) || f.cols != static_cast<std::size_t>(g.fine_nx() + 1))
    throw ConfigError("field raster does not match the fine grid");
  Vector v;
  v.reserve(g.interior_nodes().size());
  for (int node : g.interior_nodes()) {
    const auto r = static_cast<std::size_t>(g.fine_ny() - g.fine_iy(node));
    v.push_back(f.at(r, static_cast<std::size_t>(g.fine_ix(node))));
  }
  return v;
}

inline void write_field(const std::string& path, const GridPair& g, std::span<const double> interior) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write field dump '" + path + "'");
  write_raster(out, field_raster(g, interior));
}

struct TableRow {
  std::string setting;
  double e_l2 = 0.0;
  double e_a = 0.0;
  double seconds = 0.0;
  std::string error;  ///< non-empty when the setting failed
};

inline void write_table(std::ostream& out, const std::vector<TableRow>& rows) {
  out << "setting,e_l2,e_a\n";
  out << std::scientific << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.setting << ',';
    if (r.error.empty())
      out << r.e_l2 << ',' << r.e_a << '\n';
    else
      out << "nan,nan\n";
  }
  out << std::defaultfloat;
}

inline void write_history(std::ostream& out, const ErrorReport& rep) {
  out << "t,e_a\n";
  out << std::scientific << std::setprecision(10);
  for (auto [t, e] : rep.history) out << t << ',' << e << '\n';
  out << std::defaultfloat;
}

inline void write_table_to(const std::string& path, const std::vector<TableRow>& rows, std::ostream& fallback) {
  if (path.empty()) {
    write_table(fallback, rows);
    return;
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write CSV '" + path + "'");
  write_table(out, rows);
}

// ---------------------------------------------------------------------------
// Fine-grid reference (sanity check)
// ---------------------------------------------------------------------------

/// Backward Euler on the fine system: (M + tau A) u^{n+1} = M u^n + tau F(t_{n+1}).
inline Vector fine_backward_euler(const Problem& pb, double tau, double T, double tol = 1e-10) {
  SplitConfig s;
  s.tau = tau;
  s.T = T;
  const std::size_t N = s.steps();
  const FineSystem& fs = pb.fine;
  std::vector<Triplet> t;
  for (const auto* m : {&fs.mass, &fs.stiffness}) {
    const double w = m == &fs.mass ? 1.0 : tau;
    const auto rp = m->csr().row_ptr();
    const auto ci = m->csr().col_index();
    const auto va = m->csr().values();
    for (std::size_t i = 0; i < m->size(); ++i)
      for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) t.push_back({i, ci[k], w * va[k]});
  }
  const SparseSym lhs = SparseSym::from_triplets(fs.size(), std::move(t));
  Vector u = pb.initial ? interpolate(pb.grid, pb.initial) : Vector(fs.size(), 0.0);
  Vector fixed;
  if (pb.source.spatial) fixed = load(pb.grid, [&](double, double x, double y) { return pb.source.spatial(x, y); }, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    Vector rhs = fs.mass * u;
    if (!fixed.empty()) {
      const double tn = static_cast<double>(n + 1) * tau;
      const double sf = pb.source.time_factor ? pb.source.time_factor(tn) : 1.0;
      for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += tau * sf * fixed[i];
    }
    u = solve_spd(lhs, rhs, tol);
    detail::check_finite(u, n + 1);
  }
  return u;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct RunSummary {
  ErrorReport report;
  StabilityCertificate certificate;
  std::string label;
  std::optional<std::pair<double, double>> fine_reference;  ///< (e_l2, e_a) of u_ms vs fine solve
};

inline void print_certificate(std::ostream& log, const StabilityCertificate& c) {
  log << "stability: mu C1 - C/2 " << (c.mass_ok ? "positive definite" : "NOT positive definite")
      << " (pivot " << c.mass_margin << "), sigma B1 - B/4 "
      << (c.stiffness_ok ? "positive definite" : "NOT positive definite") << " (pivot " << c.stiffness_margin
      << "); p-rule mu >= p/2, sigma >= p/4 with p = " << c.blocks << ": " << (c.p_rule ? "satisfied" : "not satisfied")
      << '\n';
  if (!c.passed()) log << "warning: sufficient stability condition fails; running anyway\n";
}

/// Offline stage, one split run and its reference; writes the configured
/// CSV, history and field files.
inline RunSummary run_example(const ExperimentConfig& c, std::ostream& log, std::ostream& csv_fallback) {
  auto t0 = std::chrono::steady_clock::now();
  const Problem pb = make_problem(c);
  const OfflineBasis basis = offline_stage(pb, c);
  log << "offline: " << basis.locals.size() << " neighborhoods, ell = " << basis.ell << ", "
      << detail::seconds_since(t0) << " s\n";

  SettingRun run = run_setting(pb, basis, c.blocks, c.split(), c.reference_tau);
  RunSummary s;
  s.report = run.report;
  s.certificate = run.certificate;
  s.label = blocks_label(c.blocks);

  log << "dofs: " << run.report.coarse_dofs << " (blocks";
  for (auto d : run.report.block_dofs) log << ' ' << d;
  log << ")\n";
  print_certificate(log, run.certificate);
  if (!run.split.monitor_note.empty()) log << "note: " << run.split.monitor_note << '\n';
  log << "timing: projection " << run.projection_seconds << " s, split " << run.report.split_seconds
      << " s, reference " << run.report.reference_seconds << " s\n";
  log << "errors at T = " << c.T << ": e_l2 = " << run.report.e_l2 << ", e_a = " << run.report.e_a << '\n';

  write_table_to(c.csv, {TableRow{s.label, run.report.e_l2, run.report.e_a, run.report.split_seconds, {}}},
                 csv_fallback);
  if (!c.history.empty()) {
    std::ofstream h(c.history);
    if (!h) throw ConfigError("cannot write history '" + c.history + "'");
    write_history(h, run.report);
  }
  if (!c.field_dump.empty())
    write_field(c.field_dump, pb.grid, reconstruct_fine(run.prolongation, run.split.final_state()));
  if (!c.reference_dump.empty())
    write_field(c.reference_dump, pb.grid, reconstruct_fine(run.prolongation, run.reference.final_state()));

  if (c.fine_reference) {
    const Vector uf = fine_backward_euler(pb, c.tau, c.T);
    const Vector ums = reconstruct_fine(run.prolongation, run.reference.final_state());
    const FineNorms nd = norms(pb.fine, subtract(uf, ums)), nr = norms(pb.fine, uf);
    s.fine_reference = {detail::relative(nd.l2, nr.l2), detail::relative(nd.energy, nr.energy)};
    log << "fine reference: multiscale vs fine backward Euler e_l2 = " << s.fine_reference->first
        << ", e_a = " << s.fine_reference->second << '\n';
  }
  return s;
}

enum class SweepAxis { Tau, Params, Blocks };

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "tau") return SweepAxis::Tau;
  if (s == "params") return SweepAxis::Params;
  if (s == "blocks") return SweepAxis::Blocks;
  throw ConfigError("unknown sweep axis '" + s + "' (expected tau, params or blocks)");
}

namespace detail {

inline std::string format_real(double v) {
  std::ostringstream o;
  o << std::setprecision(6) << v;
  return o.str();
}

}  // namespace detail

/// One row per setting; the offline stage is shared. Failing settings are
/// recorded in their row and the sweep continues.
inline std::vector<TableRow> sweep(const ExperimentConfig& c, SweepAxis axis, std::ostream& log,
                                   std::ostream& csv_fallback) {
  auto t0 = std::chrono::steady_clock::now();
  const Problem pb = make_problem(c);
  const OfflineBasis basis = offline_stage(pb, c);
  log << "offline: " << basis.locals.size() << " neighborhoods, ell = " << basis.ell << ", "
      << detail::seconds_since(t0) << " s\n";

  struct Setting {
    std::string label;
    std::vector<int> blocks;
    SplitConfig split;
  };
  std::vector<Setting> settings;
  if (axis == SweepAxis::Tau) {
    std::vector<double> taus = c.sweep_tau;
    if (taus.empty())
      for (double f : {4.0, 2.0, 1.0, 0.5, 0.25}) {
        SplitConfig s = c.split();
        s.tau = f * c.tau;
        try {
          s.validate();
          taus.push_back(s.tau);
        } catch (const ConfigError&) {
          log << "tau=" << detail::format_real(s.tau) << " skipped: does not divide T = " << c.T << '\n';
        }
      }
    for (double t : taus) {
      SplitConfig s = c.split();
      s.tau = t;
      settings.push_back({"tau=" + detail::format_real(t), c.blocks, s});
    }
  } else if (axis == SweepAxis::Params) {
    auto params = c.sweep_params;
    if (params.empty()) params = {{1.0, 1.0}, {1.0, 1.5}, {1.5, 1.0}, {1.5, 1.5}};
    for (auto [m, sg] : params) {
      SplitConfig s = c.split();
      s.mu = m;
      s.sigma = sg;
      settings.push_back({"mu=" + detail::format_real(m) + ";sigma=" + detail::format_real(sg), c.blocks, s});
    }
  } else {
    auto bl = c.sweep_blocks;
    if (bl.empty())
      for (int l1 = 1; l1 < c.ell; ++l1) bl.push_back({l1, c.ell - l1});
    for (const auto& b : bl) settings.push_back({blocks_label(b), b, c.split()});
  }

  std::vector<TableRow> rows;
  for (const auto& st : settings) {
    TableRow row;
    row.setting = st.label;
    try {
      const auto start = std::chrono::steady_clock::now();
      const SettingRun run = run_setting(pb, basis, st.blocks, st.split, c.reference_tau);
      row.e_l2 = run.report.e_l2;
      row.e_a = run.report.e_a;
      row.seconds = detail::seconds_since(start);
      log << st.label << ": e_l2 = " << row.e_l2 << ", e_a = " << row.e_a << " (" << row.seconds << " s"
          << (run.certificate.passed() ? "" : ", certificate fails") << ")\n";
    } catch (const std::exception& e) {
      row.error = e.what();
      log << st.label << ": failed: " << row.error << '\n';
    }
    rows.push_back(std::move(row));
  }
  write_table_to(c.csv, rows, csv_fallback);
  return rows;
}

}  // namespace msplit
