#include "lakit/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "lakit/criteria.hpp"

namespace lakit {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(where + ": not a number: '" + s + "'");
  }
}

int to_int(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(where + ": not an integer: '" + s + "'");
  }
}

Eigen::Vector2d to_vec2(const std::string& s, const std::string& where) {
  const auto t = split_ws(s);
  if (t.size() != 2) throw std::invalid_argument(where + ": expected two numbers, got '" + s + "'");
  return {to_double(t[0], where), to_double(t[1], where)};
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::set<std::string>& formulations() {
  static const std::set<std::string> s = {"ub", "ub-disc", "lb", "mixed", "homog-kin",
                                          "thick-plate"};
  return s;
}

void validate(ProblemConfig& cfg, const std::string& origin) {
  auto fail = [&](const std::string& msg) { throw std::invalid_argument(origin + ": " + msg); };

  if (!formulations().count(cfg.formulation))
    fail("unknown formulation '" + cfg.formulation + "'");
  if (cfg.formulation == "mixed") {
    if (cfg.sigma_degree < 0) cfg.sigma_degree = cfg.degree - 1;
    const bool ok = (cfg.degree == 1 && cfg.sigma_degree == 0) ||
                    (cfg.degree == 2 && cfg.sigma_degree == 1);
    if (!ok)
      fail("formulation mixed with degrees (" + std::to_string(cfg.degree) + "," +
           std::to_string(cfg.sigma_degree) + "); allowed pairs are (1,0) and (2,1)");
  } else if (cfg.formulation == "thick-plate") {
    if (cfg.degree != 2) fail("formulation thick-plate uses degree 2 deflection only");
  } else if (cfg.degree < 1 || cfg.degree > 2) {
    fail("formulation " + cfg.formulation + " needs degree 1 or 2, got " +
         std::to_string(cfg.degree));
  }

  const auto names = criterion_names();
  if (std::find(names.begin(), names.end(), cfg.criterion.name) == names.end())
    fail("unknown criterion '" + cfg.criterion.name + "'");

  if (cfg.mesh.file.empty()) {
    if (cfg.mesh.nx < 1 || cfg.mesh.ny < 1) fail("mesh: nx and ny must be >= 1");
    if (cfg.mesh.width <= 0 || cfg.mesh.height <= 0) fail("mesh: width and height must be > 0");
  }

  if (cfg.refinement.mode != "none" && cfg.refinement.mode != "uniform" &&
      cfg.refinement.mode != "adaptive")
    fail("refinement mode must be none, uniform or adaptive");
  if (cfg.refinement.mode != "none" && cfg.refinement.steps < 1)
    fail("refinement steps must be >= 1 for mode " + cfg.refinement.mode);
  if (!(cfg.refinement.eta > 0.0 && cfg.refinement.eta <= 1.0))
    fail("refinement eta must lie in (0, 1]");

  for (const auto& f : cfg.output.formats)
    if (f != "vtk" && f != "csv" && f != "cbf" && f != "log")
      fail("unknown output format '" + f + "'");
}

}  // namespace

ProblemConfig parse_config_text(const std::string& text, const std::string& origin) {
  ProblemConfig cfg;
  bool mesh_generator_keys = false;

  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      static const std::set<std::string> known = {"problem",  "mesh",       "criterion", "loading",
                                                  "bc",       "solver",     "refinement", "output"};
      if (!known.count(section)) fail("unknown section [" + section + "]");
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) fail("empty key");
    const std::string where = origin + ":" + std::to_string(lineno) + " [" + section + "] " + key;

    if (section == "problem") {
      if (key == "formulation") {
        cfg.formulation = val;
      } else if (key == "degree") {
        cfg.degree = to_int(val, where);
      } else if (key == "sigma_degree") {
        cfg.sigma_degree = to_int(val, where);
      } else if (key == "pressure") {
        cfg.pressure = to_double(val, where);
      } else if (key == "sigma0") {
        const auto t = split_ws(val);
        if (t.size() != 3) fail("sigma0 needs three numbers");
        for (int k = 0; k < 3; ++k) cfg.sigma0[k] = to_double(t[k], where);
      } else {
        fail("unknown key '" + key + "' in [problem]");
      }
    } else if (section == "mesh") {
      if (key == "file") {
        cfg.mesh.file = val;
      } else if (key == "width") {
        cfg.mesh.width = to_double(val, where);
        mesh_generator_keys = true;
      } else if (key == "height") {
        cfg.mesh.height = to_double(val, where);
        mesh_generator_keys = true;
      } else if (key == "nx") {
        cfg.mesh.nx = to_int(val, where);
        mesh_generator_keys = true;
      } else if (key == "ny") {
        cfg.mesh.ny = to_int(val, where);
        mesh_generator_keys = true;
      } else {
        fail("unknown key '" + key + "' in [mesh]");
      }
    } else if (section == "criterion") {
      if (key == "name")
        cfg.criterion.name = val;
      else
        cfg.criterion.params[key] = to_double(val, where);
    } else if (section == "loading") {
      if (key == "body_force") {
        cfg.body_force = {to_vec2(val, where)};
      } else if (key == "fixed_body_force") {
        cfg.fixed_body_force = {to_vec2(val, where)};
      } else if (key.rfind("traction.", 0) == 0) {
        cfg.tractions[key.substr(9)] = to_vec2(val, where);
      } else if (key.rfind("fixed_traction.", 0) == 0) {
        cfg.fixed_tractions[key.substr(15)] = to_vec2(val, where);
      } else {
        fail("unknown key '" + key + "' in [loading]");
      }
    } else if (section == "bc") {
      cfg.bcs.push_back({key, val});
    } else if (section == "solver") {
      if (key == "tol_gap")
        cfg.solver.tol_gap = to_double(val, where);
      else if (key == "tol_feas")
        cfg.solver.tol_feas = to_double(val, where);
      else if (key == "max_iterations")
        cfg.solver.max_iterations = to_int(val, where);
      else if (key == "step_fraction")
        cfg.solver.step_fraction = to_double(val, where);
      else if (key == "static_regularization")
        cfg.solver.static_regularization = to_double(val, where);
      else if (key == "verbose")
        cfg.solver.verbose = to_int(val, where) != 0;
      else
        fail("unknown key '" + key + "' in [solver]");
    } else if (section == "refinement") {
      if (key == "mode")
        cfg.refinement.mode = val;
      else if (key == "steps")
        cfg.refinement.steps = to_int(val, where);
      else if (key == "eta")
        cfg.refinement.eta = to_double(val, where);
      else
        fail("unknown key '" + key + "' in [refinement]");
    } else if (section == "output") {
      if (key == "directory")
        cfg.output.directory = val;
      else if (key == "formats")
        cfg.output.formats = split_ws(val);
      else
        fail("unknown key '" + key + "' in [output]");
    } else {
      fail("key outside any section");
    }
  }

  if (!cfg.mesh.file.empty() && mesh_generator_keys)
    throw std::invalid_argument(origin + ": mesh: give either file or generator keys, not both");

  validate(cfg, origin);
  return cfg;
}

ProblemConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("parse_config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string emit_config(const ProblemConfig& config) {
  std::ostringstream o;
  o << "[problem]\n";
  o << "formulation = " << config.formulation << "\n";
  o << "degree = " << config.degree << "\n";
  if (config.sigma_degree >= 0) o << "sigma_degree = " << config.sigma_degree << "\n";
  o << "pressure = " << fmt(config.pressure) << "\n";
  o << "sigma0 = " << fmt(config.sigma0[0]) << " " << fmt(config.sigma0[1]) << " "
    << fmt(config.sigma0[2]) << "\n";

  o << "\n[mesh]\n";
  if (!config.mesh.file.empty()) {
    o << "file = " << config.mesh.file << "\n";
  } else {
    o << "width = " << fmt(config.mesh.width) << "\n";
    o << "height = " << fmt(config.mesh.height) << "\n";
    o << "nx = " << config.mesh.nx << "\n";
    o << "ny = " << config.mesh.ny << "\n";
  }

  o << "\n[criterion]\n";
  o << "name = " << config.criterion.name << "\n";
  for (const auto& [k, v] : config.criterion.params) o << k << " = " << fmt(v) << "\n";

  o << "\n[loading]\n";
  if (!config.body_force.empty())
    o << "body_force = " << fmt(config.body_force[0].x()) << " " << fmt(config.body_force[0].y())
      << "\n";
  if (!config.fixed_body_force.empty())
    o << "fixed_body_force = " << fmt(config.fixed_body_force[0].x()) << " "
      << fmt(config.fixed_body_force[0].y()) << "\n";
  for (const auto& [tag, t] : config.tractions)
    o << "traction." << tag << " = " << fmt(t.x()) << " " << fmt(t.y()) << "\n";
  for (const auto& [tag, t] : config.fixed_tractions)
    o << "fixed_traction." << tag << " = " << fmt(t.x()) << " " << fmt(t.y()) << "\n";

  o << "\n[bc]\n";
  for (const auto& bc : config.bcs) o << bc.tag << " = " << bc.value << "\n";

  o << "\n[solver]\n";
  o << "tol_gap = " << fmt(config.solver.tol_gap) << "\n";
  o << "tol_feas = " << fmt(config.solver.tol_feas) << "\n";
  o << "max_iterations = " << config.solver.max_iterations << "\n";
  o << "step_fraction = " << fmt(config.solver.step_fraction) << "\n";
  o << "static_regularization = " << fmt(config.solver.static_regularization) << "\n";
  o << "verbose = " << (config.solver.verbose ? 1 : 0) << "\n";

  o << "\n[refinement]\n";
  o << "mode = " << config.refinement.mode << "\n";
  o << "steps = " << config.refinement.steps << "\n";
  o << "eta = " << fmt(config.refinement.eta) << "\n";

  o << "\n[output]\n";
  o << "directory = " << config.output.directory << "\n";
  if (!config.output.formats.empty()) {
    o << "formats =";
    for (const auto& f : config.output.formats) o << " " << f;
    o << "\n";
  }
  return o.str();
}

}  // namespace lakit
