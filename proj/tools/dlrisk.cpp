#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dlrisk/core.hpp"
#include "dlrisk/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool paper_scale = false;
};

dlrisk::pipeline::RunConfig resolve(const Options& o) {
  auto c = o.config.empty() ? dlrisk::pipeline::RunConfig{} : dlrisk::pipeline::RunConfig::load(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.paper_scale) c.apply_paper_scale();
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic trader risk classification and hedging pipeline"};
  app.require_subcommand(1);
  Options opts;
  std::string stage;
  for (const auto& name : dlrisk::pipeline::stage_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " stage");
    sub->add_option("--config", opts.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "master seed (overrides the config)");
    sub->add_option("--out", opts.out, "output directory (overrides the config)");
    sub->add_flag("--paper-scale", opts.paper_scale, "128-1024-1024-128 SdA and 10 folds");
    sub->callback([&stage, name] { stage = name; });
  }
  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = resolve(opts);
    dlrisk::pipeline::run_stage(stage, config);
  } catch (const dlrisk::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
