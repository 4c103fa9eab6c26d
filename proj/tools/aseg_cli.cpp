// aseg: estimate constants, run, sweep and compare federated extragradient
// experiments from a flat key=value config.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aseg/config.hpp"
#include "aseg/experiment.hpp"

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string output;
  std::size_t jobs = 1;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_path, "key=value config file");
  sub->add_option("-s,--set", c.sets, "override, key=value (repeatable)");
  sub->add_option("-o,--output", c.output, "output directory");
  sub->add_option("-j,--jobs", c.jobs, "concurrent runs")->check(CLI::PositiveNumber);
}

aseg::RunConfig load(const Common& c) {
  aseg::KeyValues kv;
  if (!c.config_path.empty()) kv = aseg::read_key_values_file(c.config_path);
  for (const auto& s : c.sets) kv.push_back(aseg::split_assignment(s));
  if (!c.output.empty()) kv.emplace_back("output", c.output);
  if (const char* env = std::getenv("ASEG_SEED")) kv.emplace_back("seeds", env);
  return aseg::build_config(kv);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void print_keys() {
  for (const auto& [k, v] : aseg::config_keys()) std::cout << k << "\t" << v << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated accelerated extragradient experiments"};
  app.require_subcommand(1);
  bool list_keys = false;
  app.add_flag("--list-keys", list_keys, "print the accepted config keys and exit");

  Common common;
  auto* est = app.add_subcommand("estimate", "estimate mu, L, L1, delta and sigma_sim^2");
  add_common(est, common);
  auto* run = app.add_subcommand("run", "run every configured seed");
  add_common(run, common);
  auto* sweep = app.add_subcommand("sweep", "run one configuration per axis value");
  add_common(sweep, common);
  std::string axis, values;
  sweep->add_option("--axis", axis, "B | noise | epoch | theta")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  auto* cmp = app.add_subcommand("compare", "ASEG against the full-participation baseline");
  add_common(cmp, common);
  auto* exp = app.add_subcommand("export-libsvm", "write the data source in libsvm format");
  add_common(exp, common);
  std::string export_path;
  exp->add_option("--to", export_path, "destination file")->required();

  if (argc == 2 && std::string(argv[1]) == "--list-keys") {
    print_keys();
    return 0;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const aseg::RunConfig cfg = load(common);
    if (*est) {
      std::cout << aseg::cmd_estimate(cfg);
    } else if (*run) {
      const auto rep = aseg::cmd_run(cfg, common.jobs);
      const auto& last = rep.aggregate.back();
      std::cout << "config_hash=" << rep.hash << "\nseeds=" << rep.seeds.size()
                << "\nfinal_gap_mean=" << aseg::format_double(last.gap_mean)
                << "\nfinal_phi_mean=" << aseg::format_double(last.phi_mean)
                << "\ncontacts=" << aseg::format_double(last.contacts_mean) << '\n';
    } else if (*sweep) {
      const auto reps =
          aseg::cmd_sweep(cfg, aseg::parse_sweep_axis(axis), split_list(values), common.jobs);
      const auto vals = split_list(values);
      for (std::size_t i = 0; i < reps.size(); ++i)
        std::cout << axis << "=" << vals[i]
                  << " final_gap_mean=" << aseg::format_double(reps[i].aggregate.back().gap_mean)
                  << '\n';
    } else if (*cmp) {
      const auto rep = aseg::cmd_compare(cfg, common.jobs);
      std::cout << "aseg_contacts=" << rep.aseg.traces.front().ledger.contacts
                << "\naeg_contacts=" << rep.aeg.traces.front().ledger.contacts << '\n';
    } else if (*exp) {
      aseg::cmd_export_libsvm(cfg, export_path);
    }
  } catch (const aseg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const aseg::ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const aseg::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
