#include <CLI11.hpp>
#include <json.hpp>
#include <iostream>
#include <string>

#include "qbsde/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo solver and checks for diagonally quadratic BSDE systems"};
  app.set_version_flag("--version", qbsde::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  qbsde::RunConfig flags;
  std::string mode;
  std::string basis;
  double epsilon = 0.0;
  double segment = 0.0;

  const char* commands[][2] = {
      {"constants", "evaluate the constants ledger of an instance"},
      {"solve-local", "Picard solve on a window [T - eps, T]"},
      {"solve-global", "stitched solve over [0, T]"},
      {"verify-lemmas", "run the lemma check batteries"},
      {"list-instances", "list built-in instances and batteries"},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c[0], c[1]);
    if (std::string(c[0]) == "list-instances") continue;
    sub->add_option("--config", config_path, "key = value run configuration file");
    sub->add_option("--instance", flags.instance, "built-in id or instance file");
    sub->add_option("--seed", flags.seed);
    sub->add_option("--steps", flags.steps, "time steps");
    sub->add_option("--paths", flags.paths, "Monte Carlo paths");
    sub->add_option("--mode", mode, "certified or working")->check(CLI::IsMember({"certified", "working"}));
    sub->add_option("--out", flags.out_dir, "output directory");
    sub->add_option("--epsilon", epsilon, "local window length");
    sub->add_option("--segment-length", segment, "working-mode segment length");
    sub->add_option("--tol", flags.tol);
    sub->add_option("--max-iter", flags.max_iter);
    sub->add_option("--basis", basis, "poly or bins")->check(CLI::IsMember({"poly", "bins"}));
    sub->add_option("--basis-order", flags.basis_order, "polynomial degree or bin count");
    sub->add_flag("--uniqueness", flags.uniqueness, "solve-global: run the uniqueness probe");
    sub->add_option("--count", flags.battery_count, "verify-lemmas: random cases per battery");
  }
  CLI11_PARSE(app, argc, argv);

  CLI::App* sub = app.get_subcommands().front();
  qbsde::RunConfig cfg;
  if (!config_path.empty()) {
    try {
      cfg = qbsde::load_run_config(config_path);
    } catch (const qbsde::Error& e) {
      nlohmann::json j{{"error", std::string(qbsde::to_string(e.code()))},
                       {"code", static_cast<int>(e.code())},
                       {"message", e.what()}};
      if (const auto* pe = dynamic_cast<const qbsde::ParseError*>(&e)) {
        j["line"] = pe->line();
        j["column"] = pe->column();
      }
      std::cerr << j.dump() << "\n";
      return static_cast<int>(e.code());
    }
  }
  cfg.command = sub->get_name();
  auto given = [&](const char* name) { return sub->get_option_no_throw(name) && sub->count(name) > 0; };
  if (given("--instance")) cfg.instance = flags.instance;
  if (given("--seed")) cfg.seed = flags.seed;
  if (given("--steps")) cfg.steps = flags.steps;
  if (given("--paths")) cfg.paths = flags.paths;
  if (given("--mode")) cfg.mode = mode == "certified" ? qbsde::SolveMode::kCertified : qbsde::SolveMode::kWorking;
  if (given("--out")) cfg.out_dir = flags.out_dir;
  if (given("--epsilon")) cfg.epsilon = epsilon;
  if (given("--segment-length")) cfg.segment_length = segment;
  if (given("--tol")) cfg.tol = flags.tol;
  if (given("--max-iter")) cfg.max_iter = flags.max_iter;
  if (given("--basis")) cfg.basis = basis == "bins" ? qbsde::BasisKind::kBins : qbsde::BasisKind::kPolynomial;
  if (given("--basis-order")) cfg.basis_order = flags.basis_order;
  if (given("--uniqueness")) cfg.uniqueness = true;
  if (given("--count")) cfg.battery_count = flags.battery_count;
  return qbsde::run(cfg, std::cout, std::cerr);
}
