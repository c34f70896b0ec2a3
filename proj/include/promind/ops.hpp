#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "promind/tensor.hpp"

namespace promind::num {

namespace detail {

// C (m x n) += or = A op B with optional transposes; row-major raw loops.
template <typename T>
void gemm(bool trans_a, bool trans_b, size_t m, size_t n, size_t k, const T* a,
          const T* b, T* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, T(0));
  if (!trans_a && !trans_b) {
    // C[i,:] += A[i,l] * B[l,:]
    for (size_t i = 0; i < m; ++i) {
      for (size_t l = 0; l < k; ++l) {
        T aval = a[i * k + l];
        if (aval == T(0)) continue;
        const T* brow = b + l * n;
        T* crow = c + i * n;
        for (size_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
    // C[i,j] += dot(A[i,:], B[j,:])
    for (size_t i = 0; i < m; ++i) {
      const T* arow = a + i * k;
      for (size_t j = 0; j < n; ++j) {
        const T* brow = b + j * k;
        T acc = T(0);
        for (size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
        c[i * n + j] += acc;
      }
    }
  } else if (trans_a && !trans_b) {
    // C[i,:] += A[l,i] * B[l,:]
    for (size_t l = 0; l < k; ++l) {
      const T* brow = b + l * n;
      for (size_t i = 0; i < m; ++i) {
        T aval = a[l * m + i];
        if (aval == T(0)) continue;
        T* crow = c + i * n;
        for (size_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
      }
    }
  } else {
    for (size_t i = 0; i < m; ++i) {
      for (size_t j = 0; j < n; ++j) {
        T acc = T(0);
        for (size_t l = 0; l < k; ++l) acc += a[l * m + i] * b[j * k + l];
        c[i * n + j] += acc;
      }
    }
  }
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

template <typename T>
void accumulate(const Tensor<T>& parent, const std::vector<T>& delta) {
  auto* impl = parent.impl();
  impl->ensure_grad();
  for (size_t i = 0; i < delta.size(); ++i) impl->grad[i] += delta[i];
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "add");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  check_finite(out, "add");
  if (any_requires_grad<T>({&a, &b})) {
    out.attach_node({a, b}, [a, b](const typename Tensor<T>::Impl& o) {
      if (a.requires_grad()) detail::accumulate(a, o.grad);
      if (b.requires_grad()) detail::accumulate(b, o.grad);
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "sub");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  check_finite(out, "sub");
  if (any_requires_grad<T>({&a, &b})) {
    out.attach_node({a, b}, [a, b](const typename Tensor<T>::Impl& o) {
      if (a.requires_grad()) detail::accumulate(a, o.grad);
      if (b.requires_grad()) {
        auto* impl = b.impl();
        impl->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) impl->grad[i] -= o.grad[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  check_finite(out, "mul");
  if (any_requires_grad<T>({&a, &b})) {
    out.attach_node({a, b}, [a, b](const typename Tensor<T>::Impl& o) {
      if (a.requires_grad()) {
        auto* impl = a.impl();
        impl->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) impl->grad[i] += o.grad[i] * b.data()[i];
      }
      if (b.requires_grad()) {
        auto* impl = b.impl();
        impl->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) impl->grad[i] += o.grad[i] * a.data()[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "div");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] / b.data()[i];
  check_finite(out, "div");
  if (any_requires_grad<T>({&a, &b})) {
    out.attach_node({a, b}, [a, b](const typename Tensor<T>::Impl& o) {
      if (a.requires_grad()) {
        auto* impl = a.impl();
        impl->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) impl->grad[i] += o.grad[i] / b.data()[i];
      }
      if (b.requires_grad()) {
        auto* impl = b.impl();
        impl->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) {
          impl->grad[i] -= o.grad[i] * o.values[i] / b.data()[i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] * c;
  check_finite(out, "scale");
  if (a.requires_grad()) {
    out.attach_node({a}, [a, c](const typename Tensor<T>::Impl& o) {
      auto* impl = a.impl();
      impl->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) impl->grad[i] += o.grad[i] * c;
    });
  }
  return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: incompatible shapes");
  }
  size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor<T> out = Tensor<T>::zeros({m, n});
  detail::gemm(false, false, m, n, k, a.data(), b.data(), out.data(), false);
  check_finite(out, "matmul");
  if (any_requires_grad<T>({&a, &b})) {
    out.attach_node({a, b}, [a, b, m, k, n](const typename Tensor<T>::Impl& o) {
      if (a.requires_grad()) {
        a.impl()->ensure_grad();
        detail::gemm(false, true, m, k, n, o.grad.data(), b.data(),
                     a.impl()->grad.data(), true);
      }
      if (b.requires_grad()) {
        b.impl()->ensure_grad();
        detail::gemm(true, false, k, n, m, a.data(), o.grad.data(),
                     b.impl()->grad.data(), true);
      }
    });
  }
  return out;
}

// a (m x k) times b^T where b is (n x k).
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_nt: incompatible shapes");
  }
  size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor<T> out = Tensor<T>::zeros({m, n});
  detail::gemm(false, true, m, n, k, a.data(), b.data(), out.data(), false);
  check_finite(out, "matmul_nt");
  if (any_requires_grad<T>({&a, &b})) {
    out.attach_node({a, b}, [a, b, m, k, n](const typename Tensor<T>::Impl& o) {
      if (a.requires_grad()) {
        a.impl()->ensure_grad();
        detail::gemm(false, false, m, k, n, o.grad.data(), b.data(),
                     a.impl()->grad.data(), true);
      }
      if (b.requires_grad()) {
        b.impl()->ensure_grad();
        detail::gemm(true, false, n, k, m, o.grad.data(), a.data(),
                     b.impl()->grad.data(), true);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (size_t i = 0; i < a.numel(); ++i) out.data()[i] = a.data()[i] > T(0) ? a.data()[i] : T(0);
  if (a.requires_grad()) {
    out.attach_node({a}, [a](const typename Tensor<T>::Impl& o) {
      auto* impl = a.impl();
      impl->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) {
        if (a.data()[i] > T(0)) impl->grad[i] += o.grad[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (size_t i = 0; i < a.numel(); ++i) {
    out.data()[i] = T(1) / (T(1) + std::exp(-a.data()[i]));
  }
  check_finite(out, "sigmoid");
  if (a.requires_grad()) {
    out.attach_node({a}, [a](const typename Tensor<T>::Impl& o) {
      auto* impl = a.impl();
      impl->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) {
        T s = o.values[i];
        impl->grad[i] += o.grad[i] * s * (T(1) - s);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (size_t i = 0; i < a.numel(); ++i) out.data()[i] = std::tanh(a.data()[i]);
  if (a.requires_grad()) {
    out.attach_node({a}, [a](const typename Tensor<T>::Impl& o) {
      auto* impl = a.impl();
      impl->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) {
        T t = o.values[i];
        impl->grad[i] += o.grad[i] * (T(1) - t * t);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> log_op(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (size_t i = 0; i < a.numel(); ++i) out.data()[i] = std::log(a.data()[i]);
  check_finite(out, "log");
  if (a.requires_grad()) {
    out.attach_node({a}, [a](const typename Tensor<T>::Impl& o) {
      auto* impl = a.impl();
      impl->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) impl->grad[i] += o.grad[i] / a.data()[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> sqrt_op(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (size_t i = 0; i < a.numel(); ++i) out.data()[i] = std::sqrt(a.data()[i]);
  check_finite(out, "sqrt");
  if (a.requires_grad()) {
    out.attach_node({a}, [a](const typename Tensor<T>::Impl& o) {
      auto* impl = a.impl();
      impl->ensure_grad();
      for (size_t i = 0; i < o.grad.size(); ++i) {
        impl->grad[i] += o.grad[i] / (T(2) * o.values[i]);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc = T(0);
  for (size_t i = 0; i < a.numel(); ++i) acc += a.data()[i];
  Tensor<T> out = Tensor<T>::scalar(acc);
  check_finite(out, "sum");
  if (a.requires_grad()) {
    out.attach_node({a}, [a](const typename Tensor<T>::Impl& o) {
      auto* impl = a.impl();
      impl->ensure_grad();
      for (size_t i = 0; i < impl->grad.size(); ++i) impl->grad[i] += o.grad[0];
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  if (a.numel() == 0) throw std::invalid_argument("mean: empty tensor");
  Tensor<T> s = sum(a);
  return scale(s, T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> dot(const Tensor<T>& u, const Tensor<T>& v) {
  detail::check_same_shape(u, v, "dot");
  T acc = T(0);
  for (size_t i = 0; i < u.numel(); ++i) acc += u.data()[i] * v.data()[i];
  Tensor<T> out = Tensor<T>::scalar(acc);
  check_finite(out, "dot");
  if (any_requires_grad<T>({&u, &v})) {
    out.attach_node({u, v}, [u, v](const typename Tensor<T>::Impl& o) {
      if (u.requires_grad()) {
        auto* impl = u.impl();
        impl->ensure_grad();
        for (size_t i = 0; i < impl->grad.size(); ++i) impl->grad[i] += o.grad[0] * v.data()[i];
      }
      if (v.requires_grad()) {
        auto* impl = v.impl();
        impl->ensure_grad();
        for (size_t i = 0; i < impl->grad.size(); ++i) impl->grad[i] += o.grad[0] * u.data()[i];
      }
    });
  }
  return out;
}

// Embedding-style row gather; backward scatter-adds into the table.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, const std::vector<int>& ids) {
  if (table.rank() != 2) throw std::invalid_argument("gather_rows: table must be 2-D");
  size_t d = table.cols();
  for (int id : ids) {
    if (id < 0 || static_cast<size_t>(id) >= table.rows()) {
      throw std::out_of_range("gather_rows: row id out of range");
    }
  }
  Tensor<T> out = Tensor<T>::zeros({ids.size(), d});
  for (size_t i = 0; i < ids.size(); ++i) {
    const T* src = table.data() + static_cast<size_t>(ids[i]) * d;
    std::copy(src, src + d, out.data() + i * d);
  }
  if (table.requires_grad()) {
    out.attach_node({table}, [table, ids, d](const typename Tensor<T>::Impl& o) {
      auto* impl = table.impl();
      impl->ensure_grad();
      for (size_t i = 0; i < ids.size(); ++i) {
        T* dst = impl->grad.data() + static_cast<size_t>(ids[i]) * d;
        const T* src = o.grad.data() + i * d;
        for (size_t j = 0; j < d; ++j) dst[j] += src[j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, size_t start, size_t len) {
  if (a.rank() != 2 || start + len > a.cols()) {
    throw std::invalid_argument("slice_cols: out of range");
  }
  size_t m = a.rows(), n = a.cols();
  Tensor<T> out = Tensor<T>::zeros({m, len});
  for (size_t i = 0; i < m; ++i) {
    std::copy(a.data() + i * n + start, a.data() + i * n + start + len,
              out.data() + i * len);
  }
  if (a.requires_grad()) {
    out.attach_node({a}, [a, start, len, m, n](const typename Tensor<T>::Impl& o) {
      auto* impl = a.impl();
      impl->ensure_grad();
      for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < len; ++j) {
          impl->grad[i * n + start + j] += o.grad[i * len + j];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  size_t m = parts[0].rows(), total = 0;
  bool needs_grad = false;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.rows() != m) {
      throw std::invalid_argument("concat_cols: row mismatch");
    }
    total += p.cols();
    needs_grad = needs_grad || p.requires_grad();
  }
  Tensor<T> out = Tensor<T>::zeros({m, total});
  size_t off = 0;
  for (const auto& p : parts) {
    size_t w = p.cols();
    for (size_t i = 0; i < m; ++i) {
      std::copy(p.data() + i * w, p.data() + (i + 1) * w, out.data() + i * total + off);
    }
    off += w;
  }
  if (needs_grad) {
    out.attach_node(parts, [parts, m, total](const typename Tensor<T>::Impl& o) {
      size_t off2 = 0;
      for (const auto& p : parts) {
        size_t w = p.cols();
        if (p.requires_grad()) {
          auto* impl = p.impl();
          impl->ensure_grad();
          for (size_t i = 0; i < m; ++i) {
            for (size_t j = 0; j < w; ++j) {
              impl->grad[i * w + j] += o.grad[i * total + off2 + j];
            }
          }
        }
        off2 += w;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_vec(const std::vector<Tensor<T>>& parts) {
  size_t total = 0;
  bool needs_grad = false;
  for (const auto& p : parts) {
    total += p.numel();
    needs_grad = needs_grad || p.requires_grad();
  }
  Tensor<T> out = Tensor<T>::zeros({total});
  size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data(), p.data() + p.numel(), out.data() + off);
    off += p.numel();
  }
  if (needs_grad) {
    out.attach_node(parts, [parts](const typename Tensor<T>::Impl& o) {
      size_t off2 = 0;
      for (const auto& p : parts) {
        if (p.requires_grad()) {
          auto* impl = p.impl();
          impl->ensure_grad();
          for (size_t i = 0; i < p.numel(); ++i) impl->grad[i] += o.grad[off2 + i];
        }
        off2 += p.numel();
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> pick(const Tensor<T>& v, size_t index) {
  if (index >= v.numel()) throw std::out_of_range("pick: index out of range");
  Tensor<T> out = Tensor<T>::scalar(v.data()[index]);
  if (v.requires_grad()) {
    out.attach_node({v}, [v, index](const typename Tensor<T>::Impl& o) {
      auto* impl = v.impl();
      impl->ensure_grad();
      impl->grad[index] += o.grad[0];
    });
  }
  return out;
}

// Broadcast add of a length-d vector to each row of an (n x d) matrix.
template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& m, const Tensor<T>& v) {
  if (m.rank() != 2 || v.rank() != 1 || m.cols() != v.numel()) {
    throw std::invalid_argument("add_rowvec: shape mismatch");
  }
  size_t rows = m.rows(), d = m.cols();
  Tensor<T> out = Tensor<T>::zeros({rows, d});
  for (size_t i = 0; i < rows; ++i) {
    for (size_t j = 0; j < d; ++j) out.data()[i * d + j] = m.data()[i * d + j] + v.data()[j];
  }
  check_finite(out, "add_rowvec");
  if (any_requires_grad<T>({&m, &v})) {
    out.attach_node({m, v}, [m, v, rows, d](const typename Tensor<T>::Impl& o) {
      if (m.requires_grad()) detail::accumulate(m, o.grad);
      if (v.requires_grad()) {
        auto* impl = v.impl();
        impl->ensure_grad();
        for (size_t i = 0; i < rows; ++i) {
          for (size_t j = 0; j < d; ++j) impl->grad[j] += o.grad[i * d + j];
        }
      }
    });
  }
  return out;
}

namespace detail {

template <typename T>
void softmax_row(const T* in, T* out, size_t n) {
  T mx = in[0];
  for (size_t j = 1; j < n; ++j) mx = std::max(mx, in[j]);
  T denom = T(0);
  for (size_t j = 0; j < n; ++j) {
    out[j] = std::exp(in[j] - mx);
    denom += out[j];
  }
  for (size_t j = 0; j < n; ++j) out[j] /= denom;
}

template <typename T>
void softmax_row_backward(const T* y, const T* dy, T* dx, size_t n) {
  T dotsum = T(0);
  for (size_t j = 0; j < n; ++j) dotsum += y[j] * dy[j];
  for (size_t j = 0; j < n; ++j) dx[j] += y[j] * (dy[j] - dotsum);
}

}  // namespace detail

// Row-wise softmax with max subtraction.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a) {
  if (a.rank() != 2) throw std::invalid_argument("softmax_rows: need 2-D");
  size_t m = a.rows(), n = a.cols();
  Tensor<T> out = Tensor<T>::zeros({m, n});
  for (size_t i = 0; i < m; ++i) {
    detail::softmax_row(a.data() + i * n, out.data() + i * n, n);
  }
  check_finite(out, "softmax_rows");
  if (a.requires_grad()) {
    out.attach_node({a}, [a, m, n](const typename Tensor<T>::Impl& o) {
      auto* impl = a.impl();
      impl->ensure_grad();
      for (size_t i = 0; i < m; ++i) {
        detail::softmax_row_backward(o.values.data() + i * n, o.grad.data() + i * n,
                                     impl->grad.data() + i * n, n);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax_vec(const Tensor<T>& a) {
  if (a.rank() != 1) throw std::invalid_argument("softmax_vec: need 1-D");
  size_t n = a.numel();
  Tensor<T> out = Tensor<T>::zeros({n});
  detail::softmax_row(a.data(), out.data(), n);
  check_finite(out, "softmax_vec");
  if (a.requires_grad()) {
    out.attach_node({a}, [a, n](const typename Tensor<T>::Impl& o) {
      auto* impl = a.impl();
      impl->ensure_grad();
      detail::softmax_row_backward(o.values.data(), o.grad.data(), impl->grad.data(), n);
    });
  }
  return out;
}

// Causal row-wise softmax of an (n x n) score matrix: row i covers columns
// 0..i, later columns are exactly zero.
template <typename T>
Tensor<T> causal_softmax_rows(const Tensor<T>& scores) {
  if (scores.rank() != 2 || scores.rows() != scores.cols()) {
    throw std::invalid_argument("causal_softmax_rows: need square matrix");
  }
  size_t n = scores.rows();
  Tensor<T> out = Tensor<T>::zeros({n, n});
  for (size_t i = 0; i < n; ++i) {
    detail::softmax_row(scores.data() + i * n, out.data() + i * n, i + 1);
  }
  check_finite(out, "causal_softmax_rows");
  if (scores.requires_grad()) {
    out.attach_node({scores}, [scores, n](const typename Tensor<T>::Impl& o) {
      auto* impl = scores.impl();
      impl->ensure_grad();
      for (size_t i = 0; i < n; ++i) {
        detail::softmax_row_backward(o.values.data() + i * n, o.grad.data() + i * n,
                                     impl->grad.data() + i * n, i + 1);
      }
    });
  }
  return out;
}

// Fused per-row layer norm with learned gain/bias.
template <typename T>
Tensor<T> layer_norm_rows(const Tensor<T>& x, const Tensor<T>& gain,
                          const Tensor<T>& bias, T eps = T(1e-5)) {
  if (x.rank() != 2 || gain.numel() != x.cols() || bias.numel() != x.cols()) {
    throw std::invalid_argument("layer_norm_rows: shape mismatch");
  }
  size_t m = x.rows(), d = x.cols();
  Tensor<T> out = Tensor<T>::zeros({m, d});
  std::vector<T> inv_std(m), means(m);
  for (size_t i = 0; i < m; ++i) {
    const T* row = x.data() + i * d;
    T mu = T(0);
    for (size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    T is = T(1) / std::sqrt(var + eps);
    means[i] = mu;
    inv_std[i] = is;
    for (size_t j = 0; j < d; ++j) {
      out.data()[i * d + j] = (row[j] - mu) * is * gain.data()[j] + bias.data()[j];
    }
  }
  check_finite(out, "layer_norm_rows");
  if (any_requires_grad<T>({&x, &gain, &bias})) {
    out.attach_node({x, gain, bias},
                    [x, gain, bias, m, d, means, inv_std](const typename Tensor<T>::Impl& o) {
      for (size_t i = 0; i < m; ++i) {
        const T* row = x.data() + i * d;
        const T* go = o.grad.data() + i * d;
        T mu = means[i], is = inv_std[i];
        if (gain.requires_grad()) {
          auto* gi = gain.impl();
          gi->ensure_grad();
          for (size_t j = 0; j < d; ++j) gi->grad[j] += go[j] * (row[j] - mu) * is;
        }
        if (bias.requires_grad()) {
          auto* bi = bias.impl();
          bi->ensure_grad();
          for (size_t j = 0; j < d; ++j) bi->grad[j] += go[j];
        }
        if (x.requires_grad()) {
          auto* xi = x.impl();
          xi->ensure_grad();
          // dL/dxhat, then standard layer-norm backward.
          T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
          for (size_t j = 0; j < d; ++j) {
            T xhat = (row[j] - mu) * is;
            T dxhat = go[j] * gain.data()[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
          }
          for (size_t j = 0; j < d; ++j) {
            T xhat = (row[j] - mu) * is;
            T dxhat = go[j] * gain.data()[j];
            xi->grad[i * d + j] +=
                is * (dxhat - sum_dxhat / static_cast<T>(d) -
                      xhat * sum_dxhat_xhat / static_cast<T>(d));
          }
        }
      }
    });
  }
  return out;
}

// Mean token-level cross entropy over rows; target < 0 means "ignore".
template <typename T>
Tensor<T> cross_entropy_rows(const Tensor<T>& logits, const std::vector<int>& targets) {
  if (logits.rank() != 2 || targets.size() != logits.rows()) {
    throw std::invalid_argument("cross_entropy_rows: shape mismatch");
  }
  size_t m = logits.rows(), v = logits.cols();
  std::vector<T> probs(m * v);
  size_t counted = 0;
  T loss = T(0);
  for (size_t i = 0; i < m; ++i) {
    detail::softmax_row(logits.data() + i * v, probs.data() + i * v, v);
    if (targets[i] < 0) continue;
    if (static_cast<size_t>(targets[i]) >= v) {
      throw std::out_of_range("cross_entropy_rows: target out of range");
    }
    loss -= std::log(std::max(probs[i * v + targets[i]], std::numeric_limits<T>::min()));
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("cross_entropy_rows: no targets");
  Tensor<T> out = Tensor<T>::scalar(loss / static_cast<T>(counted));
  check_finite(out, "cross_entropy_rows");
  if (logits.requires_grad()) {
    out.attach_node({logits}, [logits, targets, probs, m, v,
                               counted](const typename Tensor<T>::Impl& o) {
      auto* impl = logits.impl();
      impl->ensure_grad();
      T g = o.grad[0] / static_cast<T>(counted);
      for (size_t i = 0; i < m; ++i) {
        if (targets[i] < 0) continue;
        for (size_t j = 0; j < v; ++j) {
          T delta = probs[i * v + j] - (static_cast<size_t>(targets[i]) == j ? T(1) : T(0));
          impl->grad[i * v + j] += g * delta;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "mse");
  Tensor<T> d = sub(a, b);
  Tensor<T> sq = mul(d, d);
  return mean(sq);
}

// Differentiable cosine similarity between two 1-D tensors.
template <typename T>
Tensor<T> cosine(const Tensor<T>& u, const Tensor<T>& v) {
  Tensor<T> uv = dot(u, v);
  Tensor<T> uu = dot(u, u);
  Tensor<T> vv = dot(v, v);
  Tensor<T> denom = sqrt_op(mul(uu, vv));
  return div(uv, denom);
}

}  // namespace promind::num
