#pragma once

// Test-only oracles, independent of the library implementation paths they
// check: central finite differences for gradients and a cyclic Jacobi
// eigensolver for SVD spectra.

#include <cmath>
#include <functional>
#include <vector>

#include "promind/tensor.hpp"

namespace oracle {

using promind::num::Tensor64;

// Max relative error between autodiff gradients and central finite
// differences at eps, over every coordinate of every parameter.
inline double gradcheck(const std::vector<Tensor64>& params,
                        const std::function<Tensor64()>& loss_fn, double eps = 1e-4) {
  Tensor64 loss = loss_fn();
  promind::num::backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) {
    analytic.push_back(p.has_grad() ? p.grad() : std::vector<double>(p.numel(), 0.0));
  }

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor64 p = params[pi];
    for (size_t i = 0; i < p.numel(); ++i) {
      double saved = p.data()[i];
      p.data()[i] = saved + eps;
      double up = loss_fn().item();
      p.data()[i] = saved - eps;
      double down = loss_fn().item();
      p.data()[i] = saved;
      double fd = (up - down) / (2.0 * eps);
      double a = analytic[pi][i];
      double rel = std::abs(a - fd) / (std::max(std::abs(a), std::abs(fd)) + 1e-6);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

// Eigenvalues of a symmetric (d x d) matrix via cyclic Jacobi rotations,
// sorted descending.
inline std::vector<double> jacobi_eigenvalues(std::vector<double> a, size_t d) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (size_t p = 0; p < d; ++p) {
      for (size_t q = p + 1; q < d; ++q) off += a[p * d + q] * a[p * d + q];
    }
    if (off < 1e-24) break;
    for (size_t p = 0; p + 1 < d; ++p) {
      for (size_t q = p + 1; q < d; ++q) {
        double apq = a[p * d + q];
        if (std::abs(apq) < 1e-18) continue;
        double app = a[p * d + p], aqq = a[q * d + q];
        double tau = (aqq - app) / (2.0 * apq);
        double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = c * t;
        for (size_t i = 0; i < d; ++i) {
          double aip = a[i * d + p], aiq = a[i * d + q];
          a[i * d + p] = c * aip - s * aiq;
          a[i * d + q] = s * aip + c * aiq;
        }
        for (size_t i = 0; i < d; ++i) {
          double api = a[p * d + i], aqi = a[q * d + i];
          a[p * d + i] = c * api - s * aqi;
          a[q * d + i] = s * api + c * aqi;
        }
      }
    }
  }
  std::vector<double> eig(d);
  for (size_t i = 0; i < d; ++i) eig[i] = a[i * d + i];
  std::sort(eig.rbegin(), eig.rend());
  return eig;
}

// Centered-Gram spectrum oracle: eigenvalues of (M - rowmean)^T (M - rowmean).
inline std::vector<double> centered_gram_eigenvalues(const std::vector<double>& m,
                                                     size_t n, size_t d) {
  std::vector<double> c(m);
  for (size_t j = 0; j < d; ++j) {
    double mu = 0.0;
    for (size_t i = 0; i < n; ++i) mu += c[i * d + j];
    mu /= static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) c[i * d + j] -= mu;
  }
  std::vector<double> gram(d * d, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t p = 0; p < d; ++p) {
      for (size_t q = 0; q < d; ++q) gram[p * d + q] += c[i * d + p] * c[i * d + q];
    }
  }
  return jacobi_eigenvalues(std::move(gram), d);
}

}  // namespace oracle
