#include "promind/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace promind::num {

SvdResult top_k_svd(const std::vector<double>& m, size_t n, size_t d, size_t k) {
  if (n < 2) throw std::invalid_argument("top_k_svd: need at least 2 rows");
  if (m.size() != n * d) throw std::invalid_argument("top_k_svd: bad matrix size");
  if (k == 0 || k > std::min(n, d)) throw std::invalid_argument("top_k_svd: k out of range");

  // Center columns (mean over rows).
  std::vector<double> a(m);
  for (size_t j = 0; j < d; ++j) {
    double mu = 0.0;
    for (size_t i = 0; i < n; ++i) mu += a[i * d + j];
    mu /= static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) a[i * d + j] -= mu;
  }

  // One-sided Jacobi: rotate column pairs until all are mutually orthogonal.
  auto col_dot = [&](size_t p, size_t q) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += a[i * d + p] * a[i * d + q];
    return s;
  };
  const double tol = 1e-12;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (size_t p = 0; p + 1 < d; ++p) {
      for (size_t q = p + 1; q < d; ++q) {
        double app = col_dot(p, p), aqq = col_dot(q, q), apq = col_dot(p, q);
        if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
        double tau = (aqq - app) / (2.0 * apq);
        double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = c * t;
        for (size_t i = 0; i < n; ++i) {
          double vp = a[i * d + p], vq = a[i * d + q];
          a[i * d + p] = c * vp - s * vq;
          a[i * d + q] = s * vp + c * vq;
        }
        rotated = true;
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(d);
  for (size_t j = 0; j < d; ++j) sigma[j] = std::sqrt(std::max(col_dot(j, j), 0.0));
  std::sort(sigma.rbegin(), sigma.rend());

  double total = 0.0;
  for (double s : sigma) total += s * s;

  SvdResult out;
  out.singular_values.assign(sigma.begin(), sigma.begin() + k);
  out.variance_fractions.resize(k);
  for (size_t i = 0; i < k; ++i) {
    out.variance_fractions[i] = total > 0.0 ? sigma[i] * sigma[i] / total : 0.0;
  }
  return out;
}

namespace {

template <typename T>
double cosine_impl(const std::vector<T>& u, const std::vector<T>& v) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine_sim: length mismatch");
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    uv += static_cast<double>(u[i]) * v[i];
    uu += static_cast<double>(u[i]) * u[i];
    vv += static_cast<double>(v[i]) * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw std::invalid_argument("cosine_sim: zero vector");
  double c = uv / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace

double cosine_sim(const std::vector<double>& u, const std::vector<double>& v) {
  return cosine_impl(u, v);
}

float cosine_sim(const std::vector<float>& u, const std::vector<float>& v) {
  return static_cast<float>(cosine_impl(u, v));
}

}  // namespace promind::num
