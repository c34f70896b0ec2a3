#pragma once

#include <cstddef>
#include <vector>

namespace promind::num {

struct SvdResult {
  std::vector<double> singular_values;    // top k, non-increasing
  std::vector<double> variance_fractions; // sigma_i^2 / sum_j sigma_j^2
};

// Top-k singular spectrum of a row-wise mean-centered (n x d) matrix via
// one-sided Jacobi. Variance fractions are relative to the full centered
// spectrum, so they are each in [0,1] and sum to <= 1 over the top k.
SvdResult top_k_svd(const std::vector<double>& m, size_t n, size_t d, size_t k);

// Plain (non-autodiff) cosine similarity; throws on zero vectors.
double cosine_sim(const std::vector<double>& u, const std::vector<double>& v);
float cosine_sim(const std::vector<float>& u, const std::vector<float>& v);

}  // namespace promind::num
