#include "uae/model.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "uae/binary_io.hpp"
#include "uae/error.hpp"

namespace uae {
namespace {

constexpr std::string_view kModelMagic = "UAE1";

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

void add_row(Matrix& m, const Matrix& bias) { m.rowwise() += bias.row(0); }

}  // namespace

ResMade::ResMade(ModelConfig config, InputEncoding encoding) : config_(std::move(config)), encoding_(std::move(encoding)) {
  const std::size_t n = encoding_.num_columns();
  if (n == 0) throw ValidationError("model needs at least one column");
  if (config_.hidden_layers < 1 || config_.hidden_units < 1) throw ValidationError("model needs a hidden layer");
  if (config_.residual && config_.hidden_layers < 1) throw ValidationError("residual model needs a hidden layer");
  if (config_.ordering.empty()) {
    config_.ordering.resize(n);
    std::iota(config_.ordering.begin(), config_.ordering.end(), 0);
  }
  if (config_.ordering.size() != n) throw ValidationError("ordering does not cover every column");
  position_.assign(n, -1);
  for (std::size_t p = 0; p < n; ++p) {
    const int c = config_.ordering[p];
    if (c < 0 || static_cast<std::size_t>(c) >= n || position_[c] != -1) {
      throw ValidationError("ordering is not a permutation of the columns");
    }
    position_[c] = static_cast<int>(p);
  }

  const int in = encoding_.total_width();
  const int hidden = config_.hidden_units;
  std::vector<int> input_degree(in);
  for (std::size_t c = 0; c < n; ++c) {
    for (int b = 0; b < encoding_.width(c); ++b) input_degree[encoding_.offset(c) + b] = position_[c] + 1;
  }
  std::vector<int> hidden_degree(hidden);
  const int span = std::max<int>(static_cast<int>(n) - 1, 1);
  for (int u = 0; u < hidden; ++u) hidden_degree[u] = u % span + 1;

  std::uint64_t stream = config_.seed;

  Matrix in_mask(in, hidden);
  for (int j = 0; j < in; ++j) {
    for (int u = 0; u < hidden; ++u) in_mask(j, u) = input_degree[j] <= hidden_degree[u] ? 1.0 : 0.0;
  }
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(in));
  add_param("input.weight", in_mask, in_bound, stream);
  add_param("input.bias", Matrix::Ones(1, hidden), in_bound, stream);

  Matrix hh_mask(hidden, hidden);
  for (int u = 0; u < hidden; ++u) {
    for (int v = 0; v < hidden; ++v) hh_mask(u, v) = hidden_degree[u] <= hidden_degree[v] ? 1.0 : 0.0;
  }
  const double h_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  const std::size_t layers_per_block = config_.residual ? 2 : 1;
  for (std::size_t b = 0; b < block_count(); ++b) {
    for (std::size_t l = 0; l < layers_per_block; ++l) {
      const auto prefix = fmt::format("block{}.fc{}", b, l);
      add_param(prefix + ".weight", hh_mask, h_bound, stream);
      add_param(prefix + ".bias", Matrix::Ones(1, hidden), h_bound, stream);
    }
  }

  head_param_ = params_.size();
  for (std::size_t c = 0; c < n; ++c) {
    const Code k = encoding_.domain_size(c);
    Matrix head_mask(hidden, k);
    for (int u = 0; u < hidden; ++u) head_mask.row(u).setConstant(hidden_degree[u] <= position_[c] ? 1.0 : 0.0);
    add_param(fmt::format("head{}.weight", c), head_mask, h_bound, stream);
    add_param(fmt::format("head{}.bias", c), Matrix::Ones(1, k), h_bound, stream);
  }
}

std::size_t ResMade::block_count() const { return static_cast<std::size_t>(config_.hidden_layers - 1); }

void ResMade::add_param(std::string name, Matrix mask, double bound, std::uint64_t& stream) {
  std::mt19937_64 rng(stream++);
  Matrix w(mask.rows(), mask.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    w.data()[i] = (2.0 * u - 1.0) * bound;
  }
  params_.push_back(w.cwiseProduct(mask));
  masks_.push_back(std::move(mask));
  names_.push_back(std::move(name));
}

std::size_t ResMade::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += static_cast<std::size_t>(p.size());
  return total;
}

void ResMade::apply_masks() {
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i] = params_[i].cwiseProduct(masks_[i]);
}

Matrix ResMade::hidden(const Matrix& inputs) const {
  if (inputs.cols() != encoding_.total_width()) {
    throw ValidationError(fmt::format("input width {} does not match encoding width {}", inputs.cols(),
                                      encoding_.total_width()));
  }
  Matrix h;
  h.noalias() = inputs * params_[0];
  add_row(h, params_[1]);
  std::size_t p = 2;
  if (config_.residual) {
    for (std::size_t b = 0; b < block_count(); ++b, p += 4) {
      Matrix t;
      t.noalias() = relu(h) * params_[p];
      add_row(t, params_[p + 1]);
      Matrix u;
      u.noalias() = relu(t) * params_[p + 2];
      add_row(u, params_[p + 3]);
      h += u;
    }
    return relu(h);
  }
  h = relu(h);
  for (std::size_t b = 0; b < block_count(); ++b, p += 2) {
    Matrix t;
    t.noalias() = h * params_[p];
    add_row(t, params_[p + 1]);
    h = relu(t);
  }
  return h;
}

Matrix ResMade::logits(const Matrix& hidden, std::size_t col) const {
  const std::size_t w = head_index(col);
  Matrix out;
  out.noalias() = hidden * params_[w];
  add_row(out, params_[w + 1]);
  return out;
}

std::vector<Matrix> ResMade::forward(const Matrix& inputs) const {
  const Matrix h = hidden(inputs);
  std::vector<Matrix> out;
  out.reserve(num_columns());
  for (std::size_t c = 0; c < num_columns(); ++c) out.push_back(logits(h, c));
  return out;
}

BoundModel ResMade::bind(ad::Tape& tape) const { return BoundModel(*this, tape); }

BoundModel::BoundModel(const ResMade& model, ad::Tape& tape) : model_(&model), tape_(&tape) {
  const auto& params = model.parameters();
  const auto& masks = model.masks();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto leaf = tape.parameter(params[i]);
    leaves_.push_back(leaf);
    if (masks[i].minCoeff() < 1.0) {
      effective_.push_back(ad::mul(leaf, tape.constant(masks[i])));
    } else {
      effective_.push_back(leaf);
    }
  }
}

ad::Variable BoundModel::hidden(const ad::Variable& inputs) const {
  const auto& cfg = model_->config();
  if (inputs.cols() != model_->encoding().total_width()) {
    throw ValidationError(fmt::format("input width {} does not match encoding width {}", inputs.cols(),
                                      model_->encoding().total_width()));
  }
  auto h = ad::add_bias(ad::matmul(inputs, effective_[0]), effective_[1]);
  std::size_t p = 2;
  const auto blocks = static_cast<std::size_t>(cfg.hidden_layers - 1);
  if (cfg.residual) {
    for (std::size_t b = 0; b < blocks; ++b, p += 4) {
      auto t = ad::add_bias(ad::matmul(ad::relu(h), effective_[p]), effective_[p + 1]);
      auto u = ad::add_bias(ad::matmul(ad::relu(t), effective_[p + 2]), effective_[p + 3]);
      h = h + u;
    }
    return ad::relu(h);
  }
  h = ad::relu(h);
  for (std::size_t b = 0; b < blocks; ++b, p += 2) {
    h = ad::relu(ad::add_bias(ad::matmul(h, effective_[p]), effective_[p + 1]));
  }
  return h;
}

ad::Variable BoundModel::logits(const ad::Variable& hidden, std::size_t col) const {
  const std::size_t w = model_->head_index(col);
  return ad::add_bias(ad::matmul(hidden, effective_[w]), effective_[w + 1]);
}

std::vector<ad::Variable> BoundModel::forward(const ad::Variable& inputs) const {
  const auto h = hidden(inputs);
  std::vector<ad::Variable> out;
  for (std::size_t c = 0; c < model_->num_columns(); ++c) out.push_back(logits(h, c));
  return out;
}

std::vector<Matrix> BoundModel::gradients() const {
  std::vector<Matrix> grads;
  grads.reserve(leaves_.size());
  for (const auto& leaf : leaves_) grads.push_back(tape_->grad(leaf));
  return grads;
}

ad::Variable nll_loss(const BoundModel& model, const Matrix& inputs, std::span<const Code> codes, const ad::Mask* skipped) {
  const std::size_t n = model.model().num_columns();
  const auto rows = inputs.rows();
  if (codes.size() != static_cast<std::size_t>(rows) * n) throw ContractError("nll_loss: code buffer size mismatch");
  auto& tape = model.tape();
  const auto logits = model.forward(tape.constant(inputs));
  std::vector<ad::Variable> terms;
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<ad::Index> target(static_cast<std::size_t>(rows));
    Matrix keep = Matrix::Ones(rows, 1);
    for (ad::Index r = 0; r < rows; ++r) {
      target[static_cast<std::size_t>(r)] = codes[static_cast<std::size_t>(r) * n + c];
      if (skipped && (*skipped)(r, static_cast<ad::Index>(c))) keep(r, 0) = 0.0;
    }
    if (keep.sum() == 0.0) continue;
    auto picked = ad::gather(ad::log_softmax(logits[c]), std::move(target));
    if (keep.minCoeff() == 0.0) picked = ad::mul(picked, tape.constant(keep));
    terms.push_back(ad::sum(picked));
  }
  if (terms.empty()) return tape.constant(ad::Tensord::scalar(0.0));
  auto total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = total + terms[i];
  return total * (-1.0 / static_cast<double>(rows));
}

namespace {

// log P(x_c | x_<c) for every row and column.
Matrix log_likelihoods(const ResMade& model, std::span<const Code> codes, std::size_t rows) {
  const std::size_t n = model.num_columns();
  if (codes.size() != rows * n) throw ContractError("code buffer size mismatch");
  const auto logits = model.forward(model.encoding().encode(codes, rows));
  Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
  for (std::size_t c = 0; c < n; ++c) {
    const auto& l = logits[c];
    for (Eigen::Index r = 0; r < l.rows(); ++r) {
      const double m = l.row(r).maxCoeff();
      const double lse = m + std::log((l.row(r).array() - m).exp().sum());
      out(r, static_cast<Eigen::Index>(c)) = l(r, codes[static_cast<std::size_t>(r) * n + c]) - lse;
    }
  }
  return out;
}

}  // namespace

double mean_nll(const ResMade& model, std::span<const Code> codes, std::size_t rows) {
  if (rows == 0) return 0.0;
  double total = 0;
  constexpr std::size_t kChunk = 4096;
  const std::size_t n = model.num_columns();
  for (std::size_t at = 0; at < rows; at += kChunk) {
    const std::size_t m = std::min(kChunk, rows - at);
    total += log_likelihoods(model, codes.subspan(at * n, m * n), m).sum();
  }
  return -total / static_cast<double>(rows);
}

std::vector<double> density(const ResMade& model, std::span<const Code> codes, std::size_t rows) {
  const Matrix ll = log_likelihoods(model, codes, rows);
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = std::exp(ll.row(static_cast<Eigen::Index>(r)).sum());
  return out;
}

double density(const ResMade& model, std::span<const Code> tuple) {
  if (tuple.size() != model.num_columns()) throw ValidationError("tuple width does not match the model");
  for (std::size_t c = 0; c < tuple.size(); ++c) {
    if (tuple[c] < 0 || tuple[c] >= model.encoding().domain_size(c)) {
      throw ValidationError(fmt::format("code {} outside the domain of column {}", tuple[c], c));
    }
  }
  return density(model, tuple, 1).front();
}

void save_model(const std::filesystem::path& path, const ResMade& model, const Schema& schema, std::uint64_t row_count) {
  if (schema.size() != model.num_columns()) throw ContractError("schema does not match the model");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  io::write_magic(out, kModelMagic);

  io::write_u64(out, row_count);
  io::write_u32(out, static_cast<std::uint32_t>(schema.size()));
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& col = schema[c];
    io::write_string(out, col.name());
    io::write_u8(out, static_cast<std::uint8_t>(col.kind()));
    io::write_u32(out, static_cast<std::uint32_t>(col.domain_size()));
    io::write_u32(out, static_cast<std::uint32_t>(model.encoding().width(c)));
    for (const auto& v : col.values()) io::write_string(out, v);
  }
  for (int c : model.config().ordering) io::write_u32(out, static_cast<std::uint32_t>(c));

  const auto& cfg = model.config();
  io::write_u32(out, static_cast<std::uint32_t>(cfg.hidden_layers));
  io::write_u32(out, static_cast<std::uint32_t>(cfg.hidden_units));
  io::write_u8(out, cfg.residual ? 1 : 0);
  io::write_u64(out, cfg.seed);

  const auto& params = model.parameters();
  io::write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    io::write_string(out, model.parameter_names()[i]);
    io::write_u32(out, static_cast<std::uint32_t>(params[i].rows()));
    io::write_u32(out, static_cast<std::uint32_t>(params[i].cols()));
    for (Eigen::Index k = 0; k < params[i].size(); ++k) io::write_f64(out, params[i].data()[k]);
  }
  if (!out) throw ValidationError(fmt::format("failed writing '{}'", path.string()));
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  io::expect_magic(in, kModelMagic, "model");

  ModelFile file;
  file.row_count = io::read_u64(in);
  const auto ncols = io::read_u32(in);
  std::vector<std::uint32_t> widths;
  for (std::uint32_t c = 0; c < ncols; ++c) {
    auto name = io::read_string(in);
    const auto kind = static_cast<ColumnKind>(io::read_u8(in));
    const auto domain = io::read_u32(in);
    widths.push_back(io::read_u32(in));
    std::vector<std::string> values(domain);
    for (auto& v : values) v = io::read_string(in);
    file.schema.push_back(ColumnDictionary::from_sorted(std::move(name), kind, std::move(values)));
  }
  ModelConfig cfg;
  for (std::uint32_t c = 0; c < ncols; ++c) cfg.ordering.push_back(static_cast<int>(io::read_u32(in)));
  cfg.hidden_layers = static_cast<int>(io::read_u32(in));
  cfg.hidden_units = static_cast<int>(io::read_u32(in));
  cfg.residual = io::read_u8(in) != 0;
  cfg.seed = io::read_u64(in);

  file.model = ResMade(cfg, InputEncoding(file.schema));
  for (std::uint32_t c = 0; c < ncols; ++c) {
    if (static_cast<int>(widths[c]) != file.model.encoding().width(c)) throw ValidationError("bit width mismatch in model file");
  }
  auto& params = file.model.parameters();
  const auto count = io::read_u32(in);
  if (count != params.size()) throw ValidationError("parameter count mismatch in model file");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto name = io::read_string(in);
    const auto rows = io::read_u32(in);
    const auto cols = io::read_u32(in);
    if (name != file.model.parameter_names()[i] || rows != params[i].rows() || cols != params[i].cols()) {
      throw ValidationError(fmt::format("parameter '{}' does not match the model layout", name));
    }
    for (Eigen::Index k = 0; k < params[i].size(); ++k) params[i].data()[k] = io::read_f64(in);
    if (params[i].cwiseProduct(file.model.masks()[i]) != params[i]) {
      throw ValidationError(fmt::format("parameter '{}' violates the autoregressive mask", name));
    }
  }
  return file;
}

}  // namespace uae
