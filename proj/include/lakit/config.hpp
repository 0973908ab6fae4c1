#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "lakit/ipm.hpp"

namespace lakit {

struct MeshSpec {
  std::string file;  // nonempty: load from disk, generator keys rejected
  double width = 1.0, height = 1.0;
  int nx = 1, ny = 1;
};

struct CriterionSpec {
  std::string name = "vonMises2D";
  std::map<std::string, double> params;
};

// Raw boundary condition line; the runner interprets the value per
// formulation ("x|y|both" plus optional numbers, or "clamped|supported").
struct BcSpec {
  std::string tag;
  std::string value;
};

struct RefinementSpec {
  std::string mode = "none";  // none | uniform | adaptive
  int steps = 0;
  double eta = 0.5;
};

struct OutputSpec {
  std::string directory = "out";
  // Subset of {vtk, csv, cbf, log}; cbf is opt-in because programs get big.
  std::vector<std::string> formats = {"vtk", "csv", "log"};
};

struct ProblemConfig {
  std::string formulation = "ub";  // ub | ub-disc | lb | mixed | homog-kin | thick-plate
  int degree = 2;
  int sigma_degree = -1;  // mixed: -1 means degree - 1
  double pressure = 1.0;
  Eigen::Vector3d sigma0{1.0, -1.0, 0.0};
  MeshSpec mesh;
  CriterionSpec criterion;
  std::vector<Eigen::Vector2d> body_force;  // empty or one uniform vector
  std::map<std::string, Eigen::Vector2d> tractions;
  std::vector<Eigen::Vector2d> fixed_body_force;
  std::map<std::string, Eigen::Vector2d> fixed_tractions;
  std::vector<BcSpec> bcs;
  SolverSettings solver;
  RefinementSpec refinement;
  OutputSpec output;
};

// Strict INI-style reader: [section] headers, key = value lines, #
// comments.  Unknown sections or keys are errors, as are formulation /
// degree combinations the builders would reject.
ProblemConfig parse_config(const std::string& path);
ProblemConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");

// Normalized emission; parse_config_text(emit_config(c)) reproduces c.
std::string emit_config(const ProblemConfig& config);

}  // namespace lakit
