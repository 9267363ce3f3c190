#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

#include "uae/data.hpp"

namespace uae {

using CodeMask = Eigen::Array<bool, 1, Eigen::Dynamic>;

// R^q = R_1 x ... x R_n as one allowed-code mask per column. A wildcard
// column is unqueried: its mask is the full domain and samplers skip it.
struct QueryRegion {
  std::vector<CodeMask> allowed;
  std::vector<bool> wildcard;

  static QueryRegion full(const std::vector<Code>& domain_sizes, bool wildcard = true) {
    QueryRegion r;
    for (Code d : domain_sizes) {
      r.allowed.push_back(CodeMask::Constant(d, true));
      r.wildcard.push_back(wildcard);
    }
    return r;
  }

  std::size_t num_columns() const noexcept { return allowed.size(); }

  bool empty() const {
    for (const auto& m : allowed) {
      if (!m.any()) return true;
    }
    return false;
  }

  bool is_full(std::size_t col) const { return allowed[col].all(); }

  // Number of distinct tuples in the region.
  double volume() const {
    double v = 1;
    for (const auto& m : allowed) v *= static_cast<double>(m.count());
    return v;
  }

  bool contains(std::span<const Code> tuple) const {
    for (std::size_t c = 0; c < allowed.size(); ++c) {
      if (!allowed[c][tuple[c]]) return false;
    }
    return true;
  }
};

}  // namespace uae
