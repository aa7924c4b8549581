#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "subfinsler/propagate.hpp"

namespace subfinsler {

// Symbol bundle: `<stem>.json` manifest plus one matrix field file per
// coefficient (`<stem>_a<j>.sfpf`, `<stem>_b.sfpf`). Analytic coefficients
// are sampled at the grid nodes. The manifest holds
//   { "format": "subfinsler-symbol", "version": 1, "name", "n", "r", "s",
//     "a": [file...], "b": file }
// with file names relative to the manifest.
std::filesystem::path save_symbol(const SymbolField& sym, const std::filesystem::path& dir,
                                  const std::string& stem);

// Throws FormatError for malformed manifests or inconsistent field files.
SymbolField load_symbol(const std::filesystem::path& manifest);

struct TrajectoryExport {
  std::filesystem::path manifest;
  std::filesystem::path diagnostics;
};

// Writes `<stem>_<k>.sfpf` per state, `<stem>.json` listing (t, energy, file)
// and `<stem>_diagnostics.csv` with columns t, energy, radius (radius only when
// `radii` is non-empty; +inf written as inf).
TrajectoryExport save_trajectory(const Trajectory& traj, const std::vector<RadiusSample>& radii,
                                 const std::filesystem::path& dir, const std::string& stem);

}  // namespace subfinsler
