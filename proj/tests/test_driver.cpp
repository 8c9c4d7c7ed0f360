#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <regex>
#include <sstream>

#include "msplit/experiment.hpp"

using namespace msplit;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(# small problem for fast tests
coarse_nx = 4
coarse_ny = 4
refinement = 4
ell = 3
blocks = 1+2
tau = 0.01
T = 0.1
)";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "msplit_driver_tests";
  fs::create_directories(dir);
  return dir / name;
}

ExperimentConfig small(const std::string& extra = "") { return parse_config_text(std::string(kSmall) + extra); }

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Config, DefaultsAreTheFirstExample) {
  const ExperimentConfig c = parse_config_text("");
  EXPECT_EQ(c.coarse_nx, 16);
  EXPECT_EQ(c.refinement, 16);
  EXPECT_EQ(c.ell, 6);
  EXPECT_EQ(c.blocks, (std::vector<int>{1, 5}));
  EXPECT_DOUBLE_EQ(c.tau, 1e-3);
  EXPECT_DOUBLE_EQ(c.T, 0.25);
  EXPECT_EQ(c.permeability, "example1");
  EXPECT_EQ(c.variant, SplitVariant::BlockDiagonal);
}

TEST(Config, ParsesEveryListKey) {
  const ExperimentConfig c = small(
      "sweep_tau = 0.02, 0.01\nsweep_params = 1:1, 1.5:2\nsweep_blocks = 1+2, 2+1\nvariant = triangular\n"
      "orthonormalize = false\nreference_tau = 0.005\n");
  EXPECT_EQ(c.sweep_tau, (std::vector<double>{0.02, 0.01}));
  ASSERT_EQ(c.sweep_params.size(), 2u);
  EXPECT_EQ(c.sweep_params[1], (std::pair<double, double>{1.5, 2.0}));
  ASSERT_EQ(c.sweep_blocks.size(), 2u);
  EXPECT_EQ(c.sweep_blocks[1], (std::vector<int>{2, 1}));
  EXPECT_EQ(c.variant, SplitVariant::Triangular);
  EXPECT_FALSE(c.orthonormalize);
  EXPECT_DOUBLE_EQ(c.reference_tau, 0.005);
}

TEST(Config, Errors) {
  EXPECT_THROW(small("colour = blue\n"), ConfigError);
  EXPECT_THROW(small("tau = 0.02\n"), ConfigError);        // duplicate key
  EXPECT_THROW(small("just some words\n"), ConfigError);   // no '='
  EXPECT_THROW(parse_config_text("tau = abc\n"), ConfigError);
  EXPECT_THROW(parse_config_text("tau = 0.003\n"), ConfigError);  // does not divide T
  EXPECT_THROW(parse_config_text("blocks = 2+2\n"), ConfigError);
  EXPECT_THROW(parse_config_text("blocks = 0+6\n"), ConfigError);
  EXPECT_THROW(parse_config_text("variant = upper\n"), ConfigError);
  EXPECT_THROW(parse_config_text("permeability = raster\npermeability_file = /nonexistent/k.txt\n"), ConfigError);
  EXPECT_THROW(parse_config_text("basis_file = /nonexistent/basis.txt\n"), ConfigError);
  EXPECT_THROW(parse_config_text("mu = -1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("refinement = 0\n"), ConfigError);
  EXPECT_THROW(parse_config_text("base = example9\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.cfg"), ConfigError);
}

TEST(Config, ErrorNamesTheLine) {
  try {
    parse_config_text("tau = 0.001\n\nbogus = 1\n", "my.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos) << e.what();
  }
  try {
    parse_config_text("tau = 0.001\ntau = 0.002\n", "my.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("my.cfg:2"), std::string::npos) << e.what();
  }
}

TEST(Config, BaseBuiltinThenOverrides) {
  const ExperimentConfig c = parse_config_text("tau = 1e-4\nbase = example2-synthetic\n");
  EXPECT_EQ(c.permeability, "channels");
  EXPECT_EQ(c.ell, 10);
  EXPECT_EQ(c.blocks, (std::vector<int>{1, 9}));
  EXPECT_DOUBLE_EQ(c.tau, 1e-4);
}

TEST(Builtins, AllLoadAndValidate) {
  for (const auto& name : builtin_names()) {
    const ExperimentConfig c = load_config(name);
    EXPECT_EQ(c.name, name);
    EXPECT_NO_THROW(validate(c));
  }
  const ExperimentConfig e3 = load_config("example3-synthetic");
  EXPECT_EQ(e3.source, "example3");
  EXPECT_EQ(e3.ell, 10);
  EXPECT_TRUE(is_builtin("example1"));
  EXPECT_FALSE(is_builtin("example4"));
}

TEST(Builtins, ProblemData) {
  using std::numbers::pi;
  const double x = 0.3, y = 0.7;
  EXPECT_NEAR(example1_kappa(x, y),
              (2 + std::sin(11 * pi * x) * std::sin(13 * pi * y)) / (1.4 + std::cos(12 * pi * x) * std::cos(7 * pi * y)),
              1e-15);
  ExperimentConfig c;
  const SourceTerm s1 = make_source(c);
  EXPECT_NEAR(s1(0.7, x, y), std::exp((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)), 1e-15);
  c.source = "example3";
  const SourceTerm s3 = make_source(c);
  EXPECT_NEAR(s3(0.0, x, y), std::sin(pi * x) * std::sin(pi * y), 1e-15);
  EXPECT_NEAR(s3(0.5, x, y), 2.0 * std::sin(pi * x) * std::sin(pi * y), 1e-15);
  const auto u0 = make_initial(c);
  EXPECT_NEAR(u0(x, y), std::sin(pi * x) * std::sin(pi * y), 1e-15);
  c.initial = "zero";
  EXPECT_FALSE(make_initial(c));
}

TEST(Builtins, Example3SourceAtZeroEqualsStaticSineLoad) {
  const GridPair g = build_grids(4, 4, 4);
  ExperimentConfig c;
  c.source = "example3";
  const SourceTerm s3 = make_source(c);
  c.source = "sine";
  const SourceTerm sine = make_source(c);
  const Vector a = load(g, [&](double t, double x, double y) { return s3(t, x, y); }, 0.0);
  const Vector b = load(g, [&](double t, double x, double y) { return sine(t, x, y); }, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Channels, DeterministicAndTwoValued) {
  ChannelSpec spec;
  spec.seed = 42;
  const RasterField a = channel_field(64, 48, spec), b = channel_field(64, 48, spec);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.rows, 48u);
  EXPECT_EQ(a.cols, 64u);
  std::size_t high = 0;
  for (double v : a.values) {
    EXPECT_TRUE(v == spec.background || v == spec.contrast);
    high += v == spec.contrast ? 1 : 0;
  }
  EXPECT_GT(high, 0u);
  EXPECT_LT(high, a.values.size());
  spec.seed = 43;
  EXPECT_NE(channel_field(64, 48, spec).values, a.values);
  spec.count = 0;
  for (double v : channel_field(64, 48, spec).values) EXPECT_EQ(v, spec.background);
}

TEST(Reconstruction, ZeroAndUnitCoefficients) {
  const ExperimentConfig c = small();
  const Problem pb = make_problem(c);
  const OfflineBasis basis = offline_stage(pb, c);
  const Prolongation p = assemble_prolongation(pb.grid, basis, c.blocks);
  EXPECT_EQ(max_abs(reconstruct_fine(p, Vector(p.size(), 0.0))), 0.0);
  Vector e(p.size(), 0.0);
  e[4] = 1.0;
  const Vector u = reconstruct_fine(p, e);
  const DenseMatrix r0 = p.dense_block(0);
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_EQ(u[i], r0(i, 4));
  e[4] = 0.0;
  e[p.offsets()[1] + 2] = 1.0;
  const Vector w = reconstruct_fine(p, e);
  const DenseMatrix r1 = p.dense_block(1);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(w[i], r1(i, 2));
}

TEST(Compare, IdenticalRunsHaveZeroError) {
  const ExperimentConfig c = small();
  const Problem pb = make_problem(c);
  const OfflineBasis basis = offline_stage(pb, c);
  const SettingRun run = run_setting(pb, basis, c.blocks, c.split());
  const ErrorReport same = compare(run.split, run.split, run.prolongation, pb.fine, *run.system);
  EXPECT_EQ(same.e_l2, 0.0);
  EXPECT_EQ(same.e_a, 0.0);
  EXPECT_EQ(same.history.size(), run.split.steps());
  const Trajectory other = backward_euler(*run.system, 0.005, c.T);
  EXPECT_THROW(compare(other, run.split, run.prolongation, pb.fine, *run.system), ConfigError);
}

TEST(RunSetting, SingleBlockMatchesReference) {
  const ExperimentConfig c = small();
  const Problem pb = make_problem(c);
  const OfflineBasis basis = offline_stage(pb, c);
  const SettingRun run = run_setting(pb, basis, {3}, c.split());
  EXPECT_LE(run.report.e_l2, 1e-9);
  EXPECT_LE(run.report.e_a, 1e-9);
  EXPECT_EQ(run.report.coarse_dofs, 27u);
}

TEST(Output, CsvFormat) {
  std::ostringstream out;
  write_table(out, {TableRow{"1+5", 1.25e-3, 2.5e-2, 0.1, {}}, TableRow{"2+4", 0, 0, 0, "boom"}});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "setting,e_l2,e_a");
  std::getline(in, line);
  EXPECT_TRUE(std::regex_match(line, std::regex(R"(1\+5,1\.2500000000e-03,2\.5000000000e-02)"))) << line;
  std::getline(in, line);
  EXPECT_EQ(line, "2+4,nan,nan");
}

TEST(Output, RunIsDeterministicAndWritesFiles) {
  const fs::path csv1 = scratch("a.csv"), csv2 = scratch("b.csv"), hist = scratch("h.csv");
  const fs::path split_dump = scratch("split.txt"), ref_dump = scratch("ref.txt");
  ExperimentConfig c = small();
  c.csv = csv1.string();
  c.history = hist.string();
  c.field_dump = split_dump.string();
  c.reference_dump = ref_dump.string();
  std::ostringstream log, sink;
  const RunSummary s = run_example(c, log, sink);
  c.csv = csv2.string();
  run_example(c, log, sink);
  EXPECT_EQ(read_file(csv1), read_file(csv2));
  EXPECT_NE(log.str().find("dofs: 27 (blocks 9 18)"), std::string::npos) << log.str();

  std::istringstream h(read_file(hist));
  std::string line;
  std::getline(h, line);
  EXPECT_EQ(line, "t,e_a");
  std::size_t rows = 0;
  while (std::getline(h, line)) ++rows;
  EXPECT_EQ(rows, 10u);

  // Dumped fields reproduce the reported errors.
  const Problem pb = make_problem(c);
  const Vector us = raster_to_interior(pb.grid, read_raster(split_dump.string()));
  const Vector ur = raster_to_interior(pb.grid, read_raster(ref_dump.string()));
  const FineNorms nd = norms(pb.fine, subtract(ur, us)), nr = norms(pb.fine, ur);
  EXPECT_NEAR(nd.l2 / nr.l2, s.report.e_l2, 1e-12);
  EXPECT_NEAR(nd.energy / nr.energy, s.report.e_a, 1e-12);
}

TEST(Output, FieldRasterRoundTrip) {
  const GridPair g = build_grids(3, 2, 3);
  Vector v(g.interior_nodes().size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(static_cast<double>(i));
  const RasterField f = field_raster(g, v);
  EXPECT_EQ(f.rows, 7u);
  EXPECT_EQ(f.cols, 10u);
  EXPECT_EQ(raster_to_interior(g, f), v);
  EXPECT_THROW(raster_to_interior(build_grids(3, 3, 3), f), ConfigError);
}

TEST(Sweep, SingleItemSweepEqualsRun) {
  ExperimentConfig c = small("sweep_blocks = 1+2\n");
  std::ostringstream log, sink;
  const RunSummary s = run_example(c, log, sink);
  const auto rows = sweep(c, SweepAxis::Blocks, log, sink);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].setting, "1+2");
  EXPECT_EQ(rows[0].e_l2, s.report.e_l2);
  EXPECT_EQ(rows[0].e_a, s.report.e_a);
}

TEST(Sweep, DefaultAxes) {
  ExperimentConfig c = small();
  c.T = 0.08;
  std::ostringstream log, sink;
  EXPECT_EQ(sweep(c, SweepAxis::Blocks, log, sink).size(), 2u);
  const auto params = sweep(c, SweepAxis::Params, log, sink);
  ASSERT_EQ(params.size(), 4u);
  EXPECT_EQ(params[1].setting, "mu=1;sigma=1.5");
  const auto taus = sweep(c, SweepAxis::Tau, log, sink);
  ASSERT_EQ(taus.size(), 5u);
  EXPECT_EQ(taus[0].setting, "tau=0.04");
  for (const auto& r : taus) EXPECT_TRUE(r.error.empty()) << r.error;
  EXPECT_THROW(parse_axis("sigma"), ConfigError);
}

TEST(Sweep, DefaultTauSkipsStepsThatDoNotDivideT) {
  ExperimentConfig c = small();
  c.tau = 0.02;  // 4 tau and 2 tau do not divide T = 0.1
  std::ostringstream log, sink;
  const auto rows = sweep(c, SweepAxis::Tau, log, sink);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].setting, "tau=0.02");
  EXPECT_NE(log.str().find("tau=0.08 skipped"), std::string::npos);
  EXPECT_NE(log.str().find("tau=0.04 skipped"), std::string::npos);
}

TEST(Sweep, SplittingErrorShrinksWithTau) {
  ExperimentConfig c = small("sweep_tau = 0.02, 0.01, 0.005, 0.0025\n");
  std::ostringstream log, sink;
  const auto rows = sweep(c, SweepAxis::Tau, log, sink);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_LT(rows[k].e_a, rows[k - 1].e_a) << rows[k].setting;
}

TEST(Basis, DumpAndReloadGiveIdenticalErrors) {
  const fs::path bpath = scratch("basis.txt");
  ExperimentConfig c = small();
  const Problem pb = make_problem(c);
  {
    std::ofstream out(bpath);
    write_basis(out, pb.grid, offline_stage(pb, c));
  }
  std::ostringstream log, sink;
  const RunSummary direct = run_example(c, log, sink);
  c.basis_file = bpath.string();
  const RunSummary loaded = run_example(c, log, sink);
  EXPECT_EQ(direct.report.e_l2, loaded.report.e_l2);
  EXPECT_EQ(direct.report.e_a, loaded.report.e_a);
  c.ell = 4;
  c.blocks = {1, 3};
  EXPECT_THROW(run_example(c, log, sink), ConfigError);
}

TEST(FineReference, ErrorShrinksWithMoreModes) {
  std::vector<std::pair<double, double>> errs;
  for (int ell : {2, 4, 8}) {
    ExperimentConfig c = small("fine_reference = true\n");
    c.ell = ell;
    c.blocks = {1, ell - 1};
    std::ostringstream log, sink;
    const RunSummary s = run_example(c, log, sink);
    ASSERT_TRUE(s.fine_reference.has_value());
    errs.push_back(*s.fine_reference);
  }
  for (std::size_t k = 1; k < errs.size(); ++k) {
    EXPECT_LT(errs[k].first, errs[k - 1].first);
    EXPECT_LT(errs[k].second, errs[k - 1].second);
  }
}
