#pragma once

#include <filesystem>
#include <string>

#include "config.hpp"

namespace subfinsler::cli {

// Exit codes.
inline constexpr int kExitPass = 0;
inline constexpr int kExitVerificationFail = 1;
inline constexpr int kExitUsage = 2;

struct RunContext {
  Config config;
  std::filesystem::path out;
};

int cmd_dist(RunContext& ctx);
int cmd_propagate(RunContext& ctx);
int cmd_wave2(RunContext& ctx);
int cmd_flowapprox(RunContext& ctx);
int cmd_mollify(RunContext& ctx);
int cmd_gallery_list(RunContext& ctx);
int cmd_gallery_export(RunContext& ctx, const std::string& name);

}  // namespace subfinsler::cli
