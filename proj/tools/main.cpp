// subfinsler: batch front end over the library.
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "subfinsler/errors.hpp"

using namespace subfinsler;
using namespace subfinsler::cli;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  long seed = -1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "key = value config file");
  cmd->add_option("-s,--set", c.sets, "override a config key (key=value); wins over the file")->take_all();
  cmd->add_option("-o,--out", c.out, "output directory");
  cmd->add_option("--seed", c.seed, "random seed (default 0)");
}

RunContext context(const Common& c, const std::string& default_out) {
  RunContext ctx;
  if (!c.config.empty()) ctx.config.load_file(c.config);
  for (const auto& s : c.sets) ctx.config.set_override(s);
  if (c.seed >= 0) ctx.config.set_override("seed=" + std::to_string(c.seed));
  if (!c.out.empty()) ctx.config.set_override("out=" + c.out);
  ctx.out = ctx.config.get_string("out", default_out);
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sub-Finsler geometry of first-order operators: distances, flows, mollifiers, propagation."};
  app.require_subcommand(1);

  Common common;
  std::string gallery_name;
  auto* dist = app.add_subcommand("dist", "control distance from a source set");
  auto* prop = app.add_subcommand("propagate", "evolve du/dt = iDu and check the propagation cone");
  auto* wave2 = app.add_subcommand("wave2", "second-order wave through the doubled operator");
  auto* flow = app.add_subcommand("flowapprox", "approximate a subunit curve by piecewise flows");
  auto* moll = app.add_subcommand("mollify", "mollifier support and commutator sweeps");
  auto* gallery = app.add_subcommand("gallery", "list or export gallery symbols");
  gallery->require_subcommand(1);
  auto* glist = gallery->add_subcommand("list", "list gallery symbols");
  auto* gexport = gallery->add_subcommand("export", "write a symbol bundle");
  gexport->add_option("name", gallery_name, "gallery symbol name")->required();
  for (auto* cmd : {dist, prop, wave2, flow, moll, glist, gexport}) add_common(cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (dist->parsed()) {
      RunContext ctx = context(common, "out/dist");
      return cmd_dist(ctx);
    }
    if (prop->parsed()) {
      RunContext ctx = context(common, "out/propagate");
      return cmd_propagate(ctx);
    }
    if (wave2->parsed()) {
      RunContext ctx = context(common, "out/wave2");
      return cmd_wave2(ctx);
    }
    if (flow->parsed()) {
      RunContext ctx = context(common, "out/flowapprox");
      return cmd_flowapprox(ctx);
    }
    if (moll->parsed()) {
      RunContext ctx = context(common, "out/mollify");
      return cmd_mollify(ctx);
    }
    if (glist->parsed()) {
      RunContext ctx = context(common, "out/gallery");
      return cmd_gallery_list(ctx);
    }
    if (gexport->parsed()) {
      RunContext ctx = context(common, "out/gallery");
      return cmd_gallery_export(ctx, gallery_name);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CflError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "verification failed: " << e.what() << '\n';
    return kExitVerificationFail;
  }
  return kExitUsage;
}
