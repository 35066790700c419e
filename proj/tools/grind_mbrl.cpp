// grind_mbrl: experiment runner for the grinding shape-control loop.
//
//   grind_mbrl run --config configs/default.ini --seed 0 --seed 1 --out runs/a
//   grind_mbrl gen-shapes --object all --out shapes
//   grind_mbrl eval --out runs/a

#include <iostream>

#include <CLI11.hpp>

#include "csam/run_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Cutting-surface-aware model-based RL for grinding (simulation)"};
  app.require_subcommand(1);

  csam::RunOptions run;
  std::string run_config, run_out = "runs";
  auto* run_cmd = app.add_subcommand("run", "run the learning loop and write CSV logs");
  run_cmd->add_option("--config", run_config, "INI experiment config")->required();
  run_cmd->add_option("--seed", run.seeds, "experiment seed (repeatable)");
  run_cmd->add_option("--policy", run.policy, "random | geometric | proposed | proposed_gt");
  run_cmd->add_option("--object", run.object, "A | B | C");
  run_cmd->add_option("--out", run_out, "output directory");

  csam::GenShapesOptions gen;
  std::string gen_config, gen_out = "shapes";
  auto* gen_cmd = app.add_subcommand("gen-shapes", "write initial/target point clouds");
  gen_cmd->add_option("--config", gen_config, "INI config supplying the object geometry");
  gen_cmd->add_option("--object", gen.object, "A | B | C | all");
  gen_cmd->add_option("--seed", gen.seed, "sampling seed");
  gen_cmd->add_option("--density", gen.density, "points per unit volume");
  gen_cmd->add_option("--out", gen_out, "output directory");

  std::string eval_dir;
  auto* eval_cmd = app.add_subcommand("eval", "summarise a run directory");
  eval_cmd->add_option("--out", eval_dir, "run directory written by `run`")->required();

  CLI11_PARSE(app, argc, argv);

  if (*run_cmd) {
    run.config = run_config;
    run.out = run_out;
    return csam::cmd_run(run, std::cout, std::cerr);
  }
  if (*gen_cmd) {
    if (!gen_config.empty()) gen.config = gen_config;
    gen.out = gen_out;
    return csam::cmd_gen_shapes(gen, std::cout, std::cerr);
  }
  return csam::cmd_eval(eval_dir, std::cout, std::cerr);
}
