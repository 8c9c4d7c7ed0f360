// Command-line front end.
//
//   msplit run <config>
//   msplit sweep <config> --axis tau|params|blocks
//   msplit offline <config> --dump-basis <path>
//   msplit check-stability <config>
//
// <config> is a file path or a builtin name. Exit codes: 0 success,
// 2 configuration error, 3 numerical failure.

#include <chrono>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "msplit/msplit.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kNumericalExit = 3;

msplit::ExperimentConfig load(const std::string& path, unsigned threads) {
  msplit::ExperimentConfig c = msplit::load_config(path);
  if (threads > 0) c.threads = threads;
  return c;
}

int cmd_run(const std::string& path, unsigned threads) {
  const auto c = load(path, threads);
  msplit::run_example(c, std::cerr, std::cout);
  return 0;
}

int cmd_sweep(const std::string& path, const std::string& axis, unsigned threads) {
  const auto c = load(path, threads);
  msplit::sweep(c, msplit::parse_axis(axis), std::cerr, std::cout);
  return 0;
}

int cmd_offline(const std::string& path, const std::string& dump, unsigned threads) {
  const auto c = load(path, threads);
  const auto t0 = std::chrono::steady_clock::now();
  const msplit::Problem pb = msplit::make_problem(c);
  const msplit::OfflineBasis basis = msplit::offline_stage(pb, c);
  std::cerr << "offline: " << basis.locals.size() << " neighborhoods, ell = " << basis.ell
            << ", dofs: " << basis.dof_count() << ", " << msplit::detail::seconds_since(t0) << " s\n";
  if (!dump.empty()) {
    std::ofstream out(dump);
    if (!out) throw msplit::ConfigError("cannot write basis dump '" + dump + "'");
    msplit::write_basis(out, pb.grid, basis);
    std::cerr << "basis written to " << dump << '\n';
  }
  return 0;
}

int cmd_check(const std::string& path, unsigned threads) {
  const auto c = load(path, threads);
  const msplit::Problem pb = msplit::make_problem(c);
  const msplit::OfflineBasis basis = msplit::offline_stage(pb, c);
  const msplit::Prolongation p = msplit::assemble_prolongation(pb.grid, basis, c.blocks);
  const msplit::CoarseSystem cs = msplit::project_coarse(pb.fine, p, pb.source, pb.initial);
  const msplit::SplitParts sp = msplit::make_split(cs, c.variant);
  const auto cert = msplit::check_stability(sp, c.mu, c.sigma);
  std::cout << "blocks " << msplit::blocks_label(c.blocks) << ", variant " << msplit::to_string(c.variant)
            << ", mu = " << c.mu << ", sigma = " << c.sigma << '\n';
  msplit::print_certificate(std::cout, cert);
  std::cout << "certificate: " << (cert.passed() ? "PASS" : "FAIL") << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale solution splitting for parabolic problems"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads for the offline stage")->check(CLI::PositiveNumber);

  std::string config, axis, dump;
  auto* run = app.add_subcommand("run", "Offline stage, split run and unsplit reference");
  run->add_option("config", config, "Config file or builtin name")->required();
  auto* sweep = app.add_subcommand("sweep", "Error table over tau, (mu, sigma) or block splittings");
  sweep->add_option("config", config, "Config file or builtin name")->required();
  sweep->add_option("--axis", axis, "tau | params | blocks")->required();
  auto* offline = app.add_subcommand("offline", "Build the offline basis");
  offline->add_option("config", config, "Config file or builtin name")->required();
  offline->add_option("--dump-basis", dump, "Write the basis to this file");
  auto* check = app.add_subcommand("check-stability", "Evaluate the sufficient stability conditions");
  check->add_option("config", config, "Config file or builtin name")->required();
  for (auto* sub : {run, sweep, offline, check})
    sub->add_option("--threads", threads, "Worker threads for the offline stage")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    if (*run) return cmd_run(config, threads);
    if (*sweep) return cmd_sweep(config, axis, threads);
    if (*offline) return cmd_offline(config, dump, threads);
    if (*check) return cmd_check(config, threads);
  } catch (const msplit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const msplit::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalExit;
  }
  return 0;
}
