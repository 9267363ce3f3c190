#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uae/autodiff.hpp"
#include "uae/data.hpp"

namespace uae {

struct ModelConfig {
  int hidden_layers = 2;
  int hidden_units = 128;
  // ordering[p] is the column modelled at autoregressive position p.
  // Empty means left to right.
  std::vector<int> ordering;
  bool residual = true;
  std::uint64_t seed = 0;
};

class BoundModel;

// Masked residual MLP. Position p's output head reads only the input bits of
// columns at positions < p.
//
// Layout with residual connections and L hidden layers:
//   h = x W_in + b_in
//   L-1 times: h = h + (relu(relu(h) W_1 + b_1) W_2 + b_2)
//   logits_c = relu(h) W_c + b_c
// Without residual connections every hidden layer is relu(h W + b).
//
// Weights are kept with their masked entries at exactly zero.
class ResMade {
 public:
  ResMade() = default;
  ResMade(ModelConfig config, InputEncoding encoding);

  const ModelConfig& config() const noexcept { return config_; }
  const InputEncoding& encoding() const noexcept { return encoding_; }
  std::size_t num_columns() const noexcept { return encoding_.num_columns(); }

  int position(std::size_t col) const { return position_.at(col); }
  std::size_t column_at(int pos) const { return static_cast<std::size_t>(config_.ordering.at(pos)); }

  std::vector<Matrix>& parameters() noexcept { return params_; }
  const std::vector<Matrix>& parameters() const noexcept { return params_; }
  const std::vector<std::string>& parameter_names() const noexcept { return names_; }
  // 0/1 connectivity of each parameter (all ones for biases).
  const std::vector<Matrix>& masks() const noexcept { return masks_; }
  std::size_t parameter_count() const;

  // Zeroes masked weight entries.
  void apply_masks();

  Matrix hidden(const Matrix& inputs) const;
  Matrix logits(const Matrix& hidden, std::size_t col) const;
  std::vector<Matrix> forward(const Matrix& inputs) const;

  BoundModel bind(ad::Tape& tape) const;

  std::size_t head_index(std::size_t col) const { return head_param_ + 2 * col; }

 private:
  void add_param(std::string name, Matrix mask, double bound, std::uint64_t& stream);
  std::size_t block_count() const;

  ModelConfig config_;
  InputEncoding encoding_;
  std::vector<int> position_;
  std::vector<Matrix> params_;
  std::vector<Matrix> masks_;
  std::vector<std::string> names_;
  std::size_t head_param_ = 0;
};

// Model parameters recorded as leaves of one tape.
class BoundModel {
 public:
  BoundModel(const ResMade& model, ad::Tape& tape);

  const ResMade& model() const noexcept { return *model_; }
  ad::Tape& tape() const noexcept { return *tape_; }
  // Leaf for parameter i; its tape gradient is dL/dtheta_i.
  const ad::Variable& leaf(std::size_t i) const { return leaves_.at(i); }
  std::size_t size() const noexcept { return leaves_.size(); }

  ad::Variable hidden(const ad::Variable& inputs) const;
  ad::Variable logits(const ad::Variable& hidden, std::size_t col) const;
  std::vector<ad::Variable> forward(const ad::Variable& inputs) const;

  // Gradients of every parameter after tape.backward().
  std::vector<Matrix> gradients() const;

 private:
  const ResMade* model_;
  ad::Tape* tape_;
  std::vector<ad::Variable> leaves_;
  std::vector<ad::Variable> effective_;  // masked weights, plain biases
};

// Mean over rows of -sum_c log P(x_c | x_<c), skipping columns flagged in
// `skipped`. `inputs` must already carry wildcard tokens for those columns.
ad::Variable nll_loss(const BoundModel& model, const Matrix& inputs, std::span<const Code> codes,
                      const ad::Mask* skipped = nullptr);

// Mean negative log-likelihood of fully specified tuples, no tape.
double mean_nll(const ResMade& model, std::span<const Code> codes, std::size_t rows);

// Joint probability of each fully specified tuple (teacher forcing).
std::vector<double> density(const ResMade& model, std::span<const Code> codes, std::size_t rows);
double density(const ResMade& model, std::span<const Code> tuple);

// Model file ("UAE1"): schema block, config block, parameters as little-endian f64.
struct ModelFile {
  Schema schema;
  std::uint64_t row_count = 0;
  ResMade model;
};

void save_model(const std::filesystem::path& path, const ResMade& model, const Schema& schema, std::uint64_t row_count);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace uae
