#include "omcrl/app/pipeline.hpp"
#include "omcrl/log.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>

using namespace omcrl;

int main(int argc, char** argv) {
  CLI::App cli{"omcrl: masked contrastive pretraining and oracle-guided PPO navigation"};
  cli.require_subcommand(1);

  std::string config_path;
  app::Overrides ov;
  bool force = false;
  bool quiet = false;
  std::string target = "student";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run config (TOML)")->check(CLI::ExistingFile);
    sub->add_option("--seed", ov.seed, "override seed");
    sub->add_option("--mask-prob", ov.mask_prob, "override upstream.mask_prob")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--decay", ov.decay, "override decay.kind")
        ->check(CLI::IsMember({"linear", "exp", "exponential", "fixed"}));
    sub->add_flag("--no-oracle", ov.no_oracle, "train the student without teacher guidance");
    sub->add_flag("--no-projection", ov.no_projection, "drop the projection head");
    sub->add_flag("--curl-mode", ov.curl_mode, "single-stack contrastive pretraining");
    sub->add_option("--out", ov.out, "output directory");
    sub->add_flag("--force", force, "accept checkpoints whose config hash differs");
    sub->add_flag("-q,--quiet", quiet, "only print warnings");
  };

  auto* collect = cli.add_subcommand("collect", "record the image corpus");
  auto* pretrain = cli.add_subcommand("pretrain", "train encoder, projection and transformer");
  auto* teach = cli.add_subcommand("teach", "train the privileged oracle");
  auto* distill = cli.add_subcommand("distill", "train the student under oracle guidance");
  auto* evaluate = cli.add_subcommand("eval", "evaluate a saved checkpoint");
  auto* plot = cli.add_subcommand("plot", "render SVG charts from the CSV logs");
  for (auto* s : {collect, pretrain, teach, distill, evaluate, plot}) add_common(s);
  evaluate->add_option("--target", target, "checkpoint to evaluate")->check(CLI::IsMember({"oracle", "student"}));

  CLI11_PARSE(cli, argc, argv);
  if (quiet) set_log_level(LogLevel::warn);

  try {
    const io::RunConfig config = app::resolve_config(config_path, ov);
    if (collect->parsed()) {
      app::collect(config);
    } else if (pretrain->parsed()) {
      app::pretrain(config);
    } else if (teach->parsed()) {
      const auto r = app::teach(config);
      std::cout << eval::format_table({{"oracle", r.report}});
    } else if (distill->parsed()) {
      const auto r = app::distill(config, force);
      std::cout << eval::format_table({{"student", r.report}});
    } else if (evaluate->parsed()) {
      const auto report = app::evaluate(config, target, force);
      std::cout << eval::format_table({{target, report}});
    } else if (plot->parsed()) {
      for (const auto& p : app::plot(config)) std::cout << p.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "omcrl: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
