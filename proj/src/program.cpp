#include "lakit/program.hpp"

#include <stdexcept>

namespace lakit {

int ConicProgram::add_block(const std::string& name, const ConeProduct& cones) {
  if (by_name_.count(name)) throw std::invalid_argument("duplicate block name: " + name);
  VariableBlock b;
  b.name = name;
  b.offset = num_vars_;
  b.dim = cones.total_dim();
  b.cones = cones;
  num_vars_ += b.dim;
  obj_.resize(num_vars_, 0.0);
  by_name_[name] = static_cast<int>(blocks_.size());
  blocks_.push_back(std::move(b));
  return static_cast<int>(blocks_.size()) - 1;
}

int ConicProgram::add_block(const std::string& name, ConeKind kind, int dim) {
  ConeProduct p;
  p.append(kind, dim);
  return add_block(name, p);
}

int ConicProgram::block_id(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? -1 : it->second;
}

void ConicProgram::add_objective(int block, int local, double coeff) {
  const auto& b = blocks_.at(block);
  if (local < 0 || local >= b.dim) throw std::out_of_range("objective index outside block");
  obj_[b.offset + local] += coeff;
}

int ConicProgram::add_row(double lo, double hi, const std::string& group) {
  if (!(lo <= hi)) throw std::invalid_argument("row with lo > hi in group " + group);
  lo_.push_back(lo);
  hi_.push_back(hi);
  group_.push_back(group);
  return static_cast<int>(lo_.size()) - 1;
}

void ConicProgram::add_coeff(int row, int block, int local, double value) {
  if (row < 0 || row >= num_rows()) throw std::out_of_range("row index");
  const auto& b = blocks_.at(block);
  if (local < 0 || local >= b.dim) throw std::out_of_range("coefficient index outside block");
  if (value != 0.0) trips_.emplace_back(row, b.offset + local, value);
}

void ConicProgram::clear_rows() {
  trips_.clear();
  lo_.clear();
  hi_.clear();
  group_.clear();
}

std::vector<int> ConicProgram::rows_in_group(const std::string& group) const {
  std::vector<int> out;
  for (int i = 0; i < num_rows(); ++i)
    if (group_[i] == group) out.push_back(i);
  return out;
}

}  // namespace lakit
