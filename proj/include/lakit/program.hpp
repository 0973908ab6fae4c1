#pragma once

#include <Eigen/SparseCore>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "lakit/cones.hpp"

namespace lakit {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Expansion of a reduced variable block back to its full field vector.
// Assemblers eliminate constrained degrees of freedom (Dirichlet data,
// periodic followers) before the solver sees them; extraction reverses that.
struct BlockRecovery {
  int full_dim = 0;                  // 0 when the block is not reduced
  std::vector<int> active;           // full index -> reduced index, or -1
  std::vector<double> fixed_values;  // value substituted when active == -1
};

struct VariableBlock {
  std::string name;
  int offset = 0;  // first column in the program-wide numbering
  int dim = 0;
  ConeProduct cones;  // covers exactly dim entries
  BlockRecovery recovery;
};

// Conic program with ranged rows  lo <= M z <= hi  over named variable
// blocks.  Builders accumulate triplets; to_standard_form (ipm module)
// turns ranges into equalities with slacks and reorders columns so all
// free entries lead.
class ConicProgram {
 public:
  int add_block(const std::string& name, const ConeProduct& cones);
  int add_block(const std::string& name, ConeKind kind, int dim);

  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  const VariableBlock& block(int id) const { return blocks_.at(id); }
  VariableBlock& block(int id) { return blocks_.at(id); }
  int block_id(const std::string& name) const;  // -1 when absent
  int num_vars() const { return num_vars_; }
  int num_rows() const { return static_cast<int>(lo_.size()); }

  // Objective coefficients accumulate; the sense is always minimize.
  void add_objective(int block, int local, double coeff);
  const std::vector<double>& objective() const { return obj_; }

  int add_row(double lo, double hi, const std::string& group);
  void add_coeff(int row, int block, int local, double value);
  void clear_rows();

  double row_lo(int row) const { return lo_.at(row); }
  double row_hi(int row) const { return hi_.at(row); }
  const std::string& row_group(int row) const { return group_.at(row); }
  std::vector<int> rows_in_group(const std::string& group) const;
  const std::vector<Eigen::Triplet<double>>& triplets() const { return trips_; }

 private:
  std::vector<VariableBlock> blocks_;
  std::map<std::string, int> by_name_;
  int num_vars_ = 0;
  std::vector<double> obj_;
  std::vector<Eigen::Triplet<double>> trips_;
  std::vector<double> lo_, hi_;
  std::vector<std::string> group_;
};

}  // namespace lakit
