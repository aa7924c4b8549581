#include "subfinsler/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace subfinsler {

namespace {

using nlohmann::json;

MatrixField sample_coefficient(const Coefficient& c, const Grid& grid) {
  return MatrixField::from_function(grid, c.rows(), c.cols(), [&](const Vec& x) { return c(x); });
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw PreconditionError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

std::filesystem::path save_symbol(const SymbolField& sym, const std::filesystem::path& dir,
                                  const std::string& stem) {
  std::filesystem::create_directories(dir);
  json j;
  j["format"] = "subfinsler-symbol";
  j["version"] = 1;
  j["name"] = sym.name();
  j["n"] = sym.n();
  j["r"] = sym.r();
  j["s"] = sym.s();
  j["a"] = json::array();
  for (std::size_t k = 0; k < sym.n(); ++k) {
    const std::string file = stem + "_a" + std::to_string(k + 1) + ".sfpf";
    save_field(sample_coefficient(sym.a(k), sym.grid()), dir / file);
    j["a"].push_back(file);
  }
  const std::string bfile = stem + "_b.sfpf";
  save_field(sample_coefficient(sym.b(), sym.grid()), dir / bfile);
  j["b"] = bfile;
  const auto path = dir / (stem + ".json");
  write_json(j, path);
  return path;
}

SymbolField load_symbol(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw FormatError("load_symbol: cannot open " + manifest.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("load_symbol: " + manifest.string() + " is not valid JSON: " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "subfinsler-symbol")
      throw FormatError("load_symbol: unexpected manifest format");
    if (j.at("version").get<int>() != 1) throw FormatError("load_symbol: unsupported manifest version");
    const auto n = j.at("n").get<std::size_t>();
    const auto r = j.at("r").get<std::size_t>();
    const auto s = j.at("s").get<std::size_t>();
    const auto files = j.at("a").get<std::vector<std::string>>();
    if (files.size() != n) throw FormatError("load_symbol: need one coefficient file per axis");
    const auto base = manifest.parent_path();
    std::vector<Coefficient> a;
    Grid grid;
    for (const auto& f : files) {
      MatrixField field = load_field<ElementKind::ComplexMatrix>(base / f);
      if (a.empty()) {
        grid = field.grid();
      } else if (!(field.grid() == grid)) {
        throw FormatError("load_symbol: coefficient grids differ");
      }
      a.push_back(Coefficient::gridded(std::move(field)));
    }
    MatrixField b = load_field<ElementKind::ComplexMatrix>(base / j.at("b").get<std::string>());
    if (!(b.grid() == grid)) throw FormatError("load_symbol: coefficient grids differ");
    if (grid.ndim() != n) throw FormatError("load_symbol: grid dimension differs from n");
    try {
      return SymbolField(grid, r, s, std::move(a), Coefficient::gridded(std::move(b)),
                         j.value("name", std::string()));
    } catch (const PreconditionError& e) {
      throw FormatError(std::string("load_symbol: ") + e.what());
    }
  } catch (const json::exception& e) {
    throw FormatError("load_symbol: malformed manifest: " + std::string(e.what()));
  }
}

TrajectoryExport save_trajectory(const Trajectory& traj, const std::vector<RadiusSample>& radii,
                                 const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  if (!radii.empty() && radii.size() != traj.states.size())
    throw PreconditionError("save_trajectory: need one radius per state");
  json j;
  j["format"] = "subfinsler-trajectory";
  j["version"] = 1;
  j["dt"] = traj.dt;
  j["steps"] = traj.steps;
  j["states"] = json::array();
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    std::ostringstream name;
    name << stem << '_' << std::setw(5) << std::setfill('0') << k << ".sfpf";
    save_field(traj.states[k].u, dir / name.str());
    j["states"].push_back({{"t", traj.states[k].t}, {"energy", traj.states[k].energy}, {"file", name.str()}});
  }
  TrajectoryExport out;
  out.manifest = dir / (stem + ".json");
  write_json(j, out.manifest);
  out.diagnostics = dir / (stem + "_diagnostics.csv");
  std::ofstream csv(out.diagnostics);
  if (!csv) throw PreconditionError("cannot write " + out.diagnostics.string());
  csv << (radii.empty() ? "t,energy\n" : "t,energy,radius\n") << std::setprecision(17);
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    csv << traj.states[k].t << ',' << traj.states[k].energy;
    if (!radii.empty()) csv << ',' << radii[k].radius;
    csv << '\n';
  }
  return out;
}

}  // namespace subfinsler
