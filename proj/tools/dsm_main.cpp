// dsm: command-line front end. See include/dsm/cli.hpp for exit codes.

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dsm/cli.hpp"

namespace {

struct Flags {
  std::map<std::string, CLI::Option*> opts;
  CLI::Option* config = nullptr;
};

void add_flags(CLI::App& sub, Flags& f) {
  auto str = [&](const std::string& name, const std::string& help) {
    f.opts[name] = sub.add_option("--" + name, help)->type_name("TEXT");
  };
  auto num = [&](const std::string& name, const std::string& help) {
    f.opts[name] = sub.add_option("--" + name, help)->type_name("NUM");
  };
  f.opts["builtin"] = sub.add_option("--builtin", "built-in problem name (repeatable)")->type_name("NAME");
  f.opts["problem"] = sub.add_option("--problem", "problem JSON file (repeatable)")->type_name("PATH");
  num("dim", "dimension of built-in problems");
  num("seed", "generator seed");
  num("scale", "nonlinearity scale of built-in problems");
  num("rank", "rank of singular built-in problems");
  num("eps0", "first eps of the continuation schedule");
  num("eps-ratio", "geometric ratio of the schedule");
  num("eps-count", "number of eps values");
  num("eps-floor", "smallest eps");
  num("t-max", "final flow time");
  num("rel-tol", "relative integrator tolerance");
  num("abs-tol", "absolute integrator tolerance");
  num("p-stop", "stop when p(t) <= p-stop * p(0)");
  str("out", "output directory");
  num("jobs", "worker threads for batches of problems");
  f.config = sub.add_option("--config", "JSON config; flags take precedence")->type_name("PATH");
  for (auto& [name, opt] : f.opts)
    if (name == "builtin" || name == "problem") opt->expected(1)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
}

nlohmann::json given_flags(const Flags& f) {
  static const std::map<std::string, int> kinds{
      {"builtin", 0}, {"problem", 0}, {"out", 1},       {"dim", 2},       {"seed", 2},      {"eps-count", 2},
      {"rank", 2},    {"jobs", 2},    {"scale", 3},     {"eps0", 3},      {"eps-ratio", 3}, {"eps-floor", 3},
      {"t-max", 3},   {"rel-tol", 3}, {"abs-tol", 3},   {"p-stop", 3}};
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, opt] : f.opts) {
    if (opt->count() == 0) continue;
    switch (kinds.at(name)) {
      case 0: j[name] = opt->as<std::vector<std::string>>(); break;
      case 1: j[name] = opt->as<std::string>(); break;
      case 2: j[name] = opt->as<unsigned long long>(); break;
      default: j[name] = opt->as<double>(); break;
    }
  }
  return j;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamical systems method solver for L v + g(v) = 0"};
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"solve", "integrate the flow to the solution and write trajectory.csv, report.json, certificates.json"},
      {"continue", "eps-continuation to the minimal-norm solution; writes continuation.csv, report.json"},
      {"certify", "evaluate hypothesis certificates"},
      {"oracle-check", "compare against Newton, pseudoinverse and membership oracles"},
      {"decay-audit", "check p(t) = p(0) exp(-t) at three integrator tolerances"}};
  std::map<std::string, Flags> flags;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    subs[name] = app.add_subcommand(name, help);
    add_flags(*subs[name], flags[name]);
  }
  CLI11_PARSE(app, argc, argv);

  dsm::cli::RunConfig cfg;
  try {
    for (const auto& [name, sub] : subs) {
      if (!sub->parsed()) continue;
      cfg.command = name;
      const Flags& f = flags[name];
      if (f.config->count() > 0) {
        const auto path = f.config->as<std::string>();
        std::ifstream in(path);
        if (!in) throw dsm::ParseError(path + ": cannot open config file");
        dsm::cli::apply_config(cfg, nlohmann::json::parse(in));
      }
      dsm::cli::apply_config(cfg, given_flags(f));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dsm::cli::exit_code::error;
  }
  return dsm::cli::run(cfg, std::cerr);
}
