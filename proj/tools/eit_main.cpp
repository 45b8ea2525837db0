#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "eit/eit.h"
#include "json.hpp"

namespace {

using nlohmann::json;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CLI::ValidationError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  json cfg = json::parse(slurp(path), nullptr, false);
  if (cfg.is_discarded()) throw CLI::ValidationError(path + " is not valid JSON");
  return cfg;
}

int report_error(int32_t code) {
  std::cerr << eit_last_error_json() << "\n";
  return code;
}

int emit(eit_artifacts* a, const std::string& out_dir) {
  const int32_t rc = eit_artifacts_write(a, out_dir.c_str());
  if (rc != EIT_OK) {
    eit_artifacts_free(a);
    return report_error(rc);
  }
  for (int32_t i = 0; i < eit_artifacts_count(a); ++i)
    std::cout << out_dir << "/" << eit_artifacts_name(a, i) << "\n";
  std::cout << out_dir << "/manifest.json\n";
  eit_artifacts_free(a);
  return 0;
}

// flags set on the command line override the config file
bool given(const CLI::App& cmd, const std::string& flag) {
  const CLI::Option* opt = cmd.get_option_no_throw(flag);
  return opt && opt->count() > 0;
}

void overlay(json& cfg, const CLI::App& cmd, const std::string& flag, const std::string& key,
             const json& value) {
  if (given(cmd, flag)) cfg[key] = value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"resistor-network EIT toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", eit_version());

  std::string config_path, out_dir = "out";
  app.add_option("--config", config_path, "JSON configuration file")->capture_default_str();
  app.add_option("--out", out_dir, "output directory")->capture_default_str();

  int n = 0, hbar = 1, nr = 256, ntheta = 512, gn_steps = 0, seed = 0;
  double beta = 0.0;
  std::string mode, phantom, electrodes, boundary, topology, grid_mode, data_path, ref_path;

  CLI::App* grid = app.add_subcommand("grid", "emit an optimal staggered grid");
  grid->add_option("--n", n, "boundary node count");
  grid->add_option("--hbar", hbar, "grid offset parameter (0 or 1)");
  grid->add_option("--mode", mode, "interpolation | truncated");

  CLI::App* forward = app.add_subcommand("forward", "synthesize DtN measurements");
  forward->add_option("--phantom", phantom, "none | smooth | chest | layered-smooth");
  forward->add_option("--n", n, "electrode count");
  forward->add_option("--electrodes", electrodes, "box | bandlimited");
  forward->add_option("--nr", nr, "radial resolution");
  forward->add_option("--ntheta", ntheta, "angular resolution");
  forward->add_option("--boundary", boundary, "full | one-sided | two-sided");
  forward->add_option("--beta", beta, "arc half-width for partial boundaries");
  forward->add_option("--seed", seed, "seed recorded in provenance");

  CLI::App* invert = app.add_subcommand("invert", "recover a network and reconstruct");
  invert->add_option("--topology", topology, "circular | pyramidal | two-sided");
  invert->add_option("--data", data_path, "measured DtN CSV")->required();
  invert->add_option("--reference", ref_path, "reference DtN CSV")->required();
  invert->add_option("--grid", grid_mode, "optimal | sensitivity");
  invert->add_option("--gn-steps", gn_steps, "Gauss-Newton refinement steps");
  invert->add_option("--nr", nr, "refinement radial resolution");
  invert->add_option("--ntheta", ntheta, "refinement angular resolution");

  CLI::App* run = app.add_subcommand("run", "full experiment: synthesize, invert, refine");
  run->add_option("--phantom", phantom, "none | smooth | chest | layered-smooth");
  run->add_option("--n", n, "electrode count");
  run->add_option("--electrodes", electrodes, "box | bandlimited");
  run->add_option("--nr", nr, "radial resolution");
  run->add_option("--ntheta", ntheta, "angular resolution");
  run->add_option("--boundary", boundary, "full | one-sided | two-sided");
  run->add_option("--beta", beta, "arc half-width for partial boundaries");
  run->add_option("--topology", topology, "circular | pyramidal | two-sided");
  run->add_option("--grid", grid_mode, "optimal | sensitivity");
  run->add_option("--gn-steps", gn_steps, "Gauss-Newton refinement steps");
  run->add_option("--seed", seed, "seed recorded in provenance");

  CLI::App* selfcheck = app.add_subcommand("selfcheck", "run the invariant suite at small sizes");

  // lets --config / --out appear after the subcommand name
  for (CLI::App* sc : app.get_subcommands([](const CLI::App*) { return true; }))
    sc->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    json cfg = load_config(config_path);
    CLI::App* cmd = app.get_subcommands().front();
    overlay(cfg, *cmd, "--n", "n", n);
    overlay(cfg, *cmd, "--hbar", "hbar", hbar);
    overlay(cfg, *cmd, "--mode", "mode", mode);
    overlay(cfg, *cmd, "--phantom", "phantom", phantom);
    overlay(cfg, *cmd, "--electrodes", "electrodes", electrodes);
    overlay(cfg, *cmd, "--nr", "nr", nr);
    overlay(cfg, *cmd, "--ntheta", "ntheta", ntheta);
    overlay(cfg, *cmd, "--seed", "seed", seed);
    overlay(cfg, *cmd, "--topology", "topology", topology);
    overlay(cfg, *cmd, "--grid", "grid", grid_mode);
    overlay(cfg, *cmd, "--gn-steps", "gn_steps", gn_steps);
    if (given(*cmd, "--boundary")) cfg["boundary"]["type"] = boundary;
    if (given(*cmd, "--beta")) cfg["boundary"]["beta"] = beta;

    eit_artifacts* a = nullptr;
    int32_t rc = EIT_OK;
    if (cmd == grid) {
      rc = eit_grid(cfg.dump().c_str(), &a);
    } else if (cmd == forward) {
      rc = eit_forward(cfg.dump().c_str(), &a);
    } else if (cmd == invert) {
      const std::string data = slurp(data_path), ref = slurp(ref_path);
      rc = eit_invert(cfg.dump().c_str(), data.c_str(), ref.c_str(), &a);
    } else if (cmd == run) {
      rc = eit_run(cfg.dump().c_str(), &a);
    } else if (cmd == selfcheck) {
      int32_t failures = 0;
      rc = eit_selfcheck(&failures, &a);
      if (rc != EIT_OK) return report_error(rc);
      std::cout << eit_artifacts_content(a, "selfcheck.txt");
      const int out = emit(a, out_dir);
      return out != 0 ? out : (failures > 0 ? 1 : 0);
    }
    if (rc != EIT_OK) return report_error(rc);
    return emit(a, out_dir);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"code", EIT_ERROR_RUNTIME}, {"message", e.what()}}}}.dump()
              << "\n";
    return EIT_ERROR_RUNTIME;
  }
}
