#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "promind/checkpoint.hpp"
#include "promind/ops.hpp"
#include "promind/tensor.hpp"

namespace promind::num {

// Two-layer perceptron Linear -> ReLU -> Linear; hidden == 0 collapses to a
// single linear layer (BetaGate style).
template <typename T>
struct Mlp {
  Tensor<T> w1, b1, w2, b2;
  size_t in = 0, hidden = 0, out = 0;

  static Mlp init(size_t in, size_t hidden, size_t out, Rng& rng) {
    Mlp net;
    net.in = in;
    net.hidden = hidden;
    net.out = out;
    if (hidden == 0) {
      T std2 = static_cast<T>(1.0 / std::sqrt(static_cast<double>(in)));
      net.w2 = Tensor<T>::randn({in, out}, rng, std2, true);
      net.b2 = Tensor<T>::zeros({out}, true);
    } else {
      T std1 = static_cast<T>(std::sqrt(2.0 / static_cast<double>(in)));
      T std2 = static_cast<T>(std::sqrt(2.0 / static_cast<double>(hidden)));
      net.w1 = Tensor<T>::randn({in, hidden}, rng, std1, true);
      net.b1 = Tensor<T>::zeros({hidden}, true);
      net.w2 = Tensor<T>::randn({hidden, out}, rng, std2, true);
      net.b2 = Tensor<T>::zeros({out}, true);
    }
    return net;
  }

  // x: (n x in) -> (n x out)
  Tensor<T> forward(const Tensor<T>& x) const {
    if (hidden == 0) return add_rowvec(matmul(x, w2), b2);
    Tensor<T> h = relu(add_rowvec(matmul(x, w1), b1));
    return add_rowvec(matmul(h, w2), b2);
  }

  std::vector<Tensor<T>> params() const {
    if (hidden == 0) return {w2, b2};
    return {w1, b1, w2, b2};
  }

  void save_into(Checkpoint& ck, const std::string& prefix) const {
    if (hidden != 0) {
      ck.put(prefix + ".w1", w1);
      ck.put(prefix + ".b1", b1);
    }
    ck.put(prefix + ".w2", w2);
    ck.put(prefix + ".b2", b2);
  }

  static Mlp load_from(const Checkpoint& ck, const std::string& prefix, size_t in,
                       size_t hidden, size_t out) {
    Mlp net;
    net.in = in;
    net.hidden = hidden;
    net.out = out;
    if (hidden != 0) {
      net.w1 = load_tensor(ck, prefix + ".w1");
      net.b1 = load_tensor(ck, prefix + ".b1");
    }
    net.w2 = load_tensor(ck, prefix + ".w2");
    net.b2 = load_tensor(ck, prefix + ".b2");
    return net;
  }

  static Tensor<T> load_tensor(const Checkpoint& ck, const std::string& name) {
    if constexpr (sizeof(T) == 4) {
      return ck.get_f32(name);
    } else {
      return ck.get_f64(name);
    }
  }
};

// Gated two-branch classifier: a sigmoid gate mixes a primary-input branch
// with a context branch before the output layer.
template <typename T>
struct GatedMlp {
  Tensor<T> wv, bv, wc, bc, wg, bg, w2, b2;
  size_t in = 0, hidden = 0, out = 0;

  static GatedMlp init(size_t in, size_t hidden, size_t out, Rng& rng) {
    GatedMlp net;
    net.in = in;
    net.hidden = hidden;
    net.out = out;
    T std1 = static_cast<T>(std::sqrt(2.0 / static_cast<double>(in)));
    T stdg = static_cast<T>(std::sqrt(1.0 / static_cast<double>(2 * in)));
    T std2 = static_cast<T>(std::sqrt(2.0 / static_cast<double>(hidden)));
    net.wv = Tensor<T>::randn({in, hidden}, rng, std1, true);
    net.bv = Tensor<T>::zeros({hidden}, true);
    net.wc = Tensor<T>::randn({in, hidden}, rng, std1, true);
    net.bc = Tensor<T>::zeros({hidden}, true);
    net.wg = Tensor<T>::randn({2 * in, hidden}, rng, stdg, true);
    net.bg = Tensor<T>::zeros({hidden}, true);
    net.w2 = Tensor<T>::randn({hidden, out}, rng, std2, true);
    net.b2 = Tensor<T>::zeros({out}, true);
    return net;
  }

  // value: (n x in), context: (n x in) -> logits (n x out)
  Tensor<T> forward(const Tensor<T>& value, const Tensor<T>& context) const {
    Tensor<T> fv = add_rowvec(matmul(value, wv), bv);
    Tensor<T> fc = add_rowvec(matmul(context, wc), bc);
    Tensor<T> both = concat_cols<T>({value, context});
    Tensor<T> g = sigmoid(add_rowvec(matmul(both, wg), bg));
    Tensor<T> ones = Tensor<T>::full(g.shape(), T(1));
    Tensor<T> mixed = add(mul(g, fv), mul(sub(ones, g), fc));
    return add_rowvec(matmul(relu(mixed), w2), b2);
  }

  std::vector<Tensor<T>> params() const { return {wv, bv, wc, bc, wg, bg, w2, b2}; }

  void save_into(Checkpoint& ck, const std::string& prefix) const {
    ck.put(prefix + ".wv", wv);
    ck.put(prefix + ".bv", bv);
    ck.put(prefix + ".wc", wc);
    ck.put(prefix + ".bc", bc);
    ck.put(prefix + ".wg", wg);
    ck.put(prefix + ".bg", bg);
    ck.put(prefix + ".w2", w2);
    ck.put(prefix + ".b2", b2);
  }

  static GatedMlp load_from(const Checkpoint& ck, const std::string& prefix, size_t in,
                            size_t hidden, size_t out) {
    GatedMlp net;
    net.in = in;
    net.hidden = hidden;
    net.out = out;
    net.wv = Mlp<T>::load_tensor(ck, prefix + ".wv");
    net.bv = Mlp<T>::load_tensor(ck, prefix + ".bv");
    net.wc = Mlp<T>::load_tensor(ck, prefix + ".wc");
    net.bc = Mlp<T>::load_tensor(ck, prefix + ".bc");
    net.wg = Mlp<T>::load_tensor(ck, prefix + ".wg");
    net.bg = Mlp<T>::load_tensor(ck, prefix + ".bg");
    net.w2 = Mlp<T>::load_tensor(ck, prefix + ".w2");
    net.b2 = Mlp<T>::load_tensor(ck, prefix + ".b2");
    return net;
  }
};

// Attention-pooled token scorer: per-token score from a shared tanh feature,
// softmax over positions gives a selection distribution.
template <typename T>
struct AttnPool {
  Tensor<T> w, b, v;
  size_t in = 0, hidden = 0;

  static AttnPool init(size_t in, size_t hidden, Rng& rng) {
    AttnPool net;
    net.in = in;
    net.hidden = hidden;
    T std1 = static_cast<T>(std::sqrt(1.0 / static_cast<double>(in)));
    net.w = Tensor<T>::randn({in, hidden}, rng, std1, true);
    net.b = Tensor<T>::zeros({hidden}, true);
    net.v = Tensor<T>::randn({hidden, 1}, rng, std1, true);
    return net;
  }

  // tokens: (n x in) -> per-position logits (n)
  Tensor<T> forward(const Tensor<T>& tokens) const {
    Tensor<T> u = tanh_op(add_rowvec(matmul(tokens, w), b));
    Tensor<T> logits = matmul(u, v);  // (n x 1)
    return concat_vec<T>({logits});   // flatten to (n)
  }

  std::vector<Tensor<T>> params() const { return {w, b, v}; }

  void save_into(Checkpoint& ck, const std::string& prefix) const {
    ck.put(prefix + ".w", w);
    ck.put(prefix + ".b", b);
    ck.put(prefix + ".v", v);
  }

  static AttnPool load_from(const Checkpoint& ck, const std::string& prefix, size_t in,
                            size_t hidden) {
    AttnPool net;
    net.in = in;
    net.hidden = hidden;
    net.w = Mlp<T>::load_tensor(ck, prefix + ".w");
    net.b = Mlp<T>::load_tensor(ck, prefix + ".b");
    net.v = Mlp<T>::load_tensor(ck, prefix + ".v");
    return net;
  }
};

// Pre-LN causal transformer block (attention + MLP with residuals).
template <typename T>
struct TransformerBlock {
  Tensor<T> ln1_g, ln1_b, wq, wk, wv, wo, ln2_g, ln2_b, w1, b1, w2, b2;
  size_t width = 0, heads = 0;

  static TransformerBlock init(size_t width, size_t heads, Rng& rng) {
    TransformerBlock blk;
    blk.width = width;
    blk.heads = heads;
    T stda = static_cast<T>(std::sqrt(1.0 / static_cast<double>(width)));
    size_t ff = 4 * width;
    blk.ln1_g = Tensor<T>::full({width}, T(1), true);
    blk.ln1_b = Tensor<T>::zeros({width}, true);
    blk.wq = Tensor<T>::randn({width, width}, rng, stda, true);
    blk.wk = Tensor<T>::randn({width, width}, rng, stda, true);
    blk.wv = Tensor<T>::randn({width, width}, rng, stda, true);
    blk.wo = Tensor<T>::randn({width, width}, rng, stda, true);
    blk.ln2_g = Tensor<T>::full({width}, T(1), true);
    blk.ln2_b = Tensor<T>::zeros({width}, true);
    blk.w1 = Tensor<T>::randn({width, ff}, rng, stda, true);
    blk.b1 = Tensor<T>::zeros({ff}, true);
    blk.w2 = Tensor<T>::randn({ff, width}, rng, static_cast<T>(std::sqrt(1.0 / static_cast<double>(ff))), true);
    blk.b2 = Tensor<T>::zeros({width}, true);
    return blk;
  }

  size_t head_dim() const { return width / heads; }

  // x: (n x width) -> (n x width); when attn_out is non-null the per-head
  // causal attention matrices (n x n each) are copied there.
  Tensor<T> forward(const Tensor<T>& x, std::vector<std::vector<T>>* attn_out = nullptr) const {
    size_t n = x.rows();
    size_t dk = head_dim();
    Tensor<T> normed = layer_norm_rows(x, ln1_g, ln1_b);
    Tensor<T> q = matmul(normed, wq);
    Tensor<T> k = matmul(normed, wk);
    Tensor<T> v = matmul(normed, wv);
    std::vector<Tensor<T>> ctx;
    ctx.reserve(heads);
    T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk)));
    for (size_t h = 0; h < heads; ++h) {
      Tensor<T> qh = slice_cols(q, h * dk, dk);
      Tensor<T> kh = slice_cols(k, h * dk, dk);
      Tensor<T> vh = slice_cols(v, h * dk, dk);
      Tensor<T> scores = scale(matmul_nt(qh, kh), inv_sqrt);
      Tensor<T> attn = causal_softmax_rows(scores);
      if (attn_out) attn_out->push_back(attn.values());
      ctx.push_back(matmul(attn, vh));
    }
    Tensor<T> merged = heads == 1 ? ctx[0] : concat_cols(ctx);
    Tensor<T> x1 = add(x, matmul(merged, wo));
    Tensor<T> normed2 = layer_norm_rows(x1, ln2_g, ln2_b);
    Tensor<T> ff = add_rowvec(matmul(relu(add_rowvec(matmul(normed2, w1), b1)), w2), b2);
    (void)n;
    return add(x1, ff);
  }

  std::vector<Tensor<T>> params() const {
    return {ln1_g, ln1_b, wq, wk, wv, wo, ln2_g, ln2_b, w1, b1, w2, b2};
  }

  void save_into(Checkpoint& ck, const std::string& prefix) const {
    ck.put(prefix + ".ln1_g", ln1_g);
    ck.put(prefix + ".ln1_b", ln1_b);
    ck.put(prefix + ".wq", wq);
    ck.put(prefix + ".wk", wk);
    ck.put(prefix + ".wv", wv);
    ck.put(prefix + ".wo", wo);
    ck.put(prefix + ".ln2_g", ln2_g);
    ck.put(prefix + ".ln2_b", ln2_b);
    ck.put(prefix + ".w1", w1);
    ck.put(prefix + ".b1", b1);
    ck.put(prefix + ".w2", w2);
    ck.put(prefix + ".b2", b2);
  }

  static TransformerBlock load_from(const Checkpoint& ck, const std::string& prefix,
                                    size_t width, size_t heads) {
    TransformerBlock blk;
    blk.width = width;
    blk.heads = heads;
    blk.ln1_g = Mlp<T>::load_tensor(ck, prefix + ".ln1_g");
    blk.ln1_b = Mlp<T>::load_tensor(ck, prefix + ".ln1_b");
    blk.wq = Mlp<T>::load_tensor(ck, prefix + ".wq");
    blk.wk = Mlp<T>::load_tensor(ck, prefix + ".wk");
    blk.wv = Mlp<T>::load_tensor(ck, prefix + ".wv");
    blk.wo = Mlp<T>::load_tensor(ck, prefix + ".wo");
    blk.ln2_g = Mlp<T>::load_tensor(ck, prefix + ".ln2_g");
    blk.ln2_b = Mlp<T>::load_tensor(ck, prefix + ".ln2_b");
    blk.w1 = Mlp<T>::load_tensor(ck, prefix + ".w1");
    blk.b1 = Mlp<T>::load_tensor(ck, prefix + ".b1");
    blk.w2 = Mlp<T>::load_tensor(ck, prefix + ".w2");
    blk.b2 = Mlp<T>::load_tensor(ck, prefix + ".b2");
    return blk;
  }
};

// Residual projection net f(x) = x + W2 relu(W1 x + b1) + b2. The residual
// branch starts at zero so an untrained net is exactly the identity map.
template <typename T>
struct ResidualProjection {
  Tensor<T> w1, b1, w2, b2;
  size_t width = 0, hidden = 0;

  static ResidualProjection init(size_t width, size_t hidden, Rng& rng, T noise = T(0)) {
    ResidualProjection net;
    net.width = width;
    net.hidden = hidden;
    T std1 = static_cast<T>(std::sqrt(2.0 / static_cast<double>(width)));
    net.w1 = Tensor<T>::randn({width, hidden}, rng, std1, true);
    net.b1 = Tensor<T>::zeros({hidden}, true);
    net.w2 = noise == T(0) ? Tensor<T>::zeros({hidden, width}, true)
                           : Tensor<T>::randn({hidden, width}, rng, noise, true);
    net.b2 = Tensor<T>::zeros({width}, true);
    return net;
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    Tensor<T> h = relu(add_rowvec(matmul(x, w1), b1));
    return add(x, add_rowvec(matmul(h, w2), b2));
  }

  std::vector<Tensor<T>> params() const { return {w1, b1, w2, b2}; }

  void save_into(Checkpoint& ck, const std::string& prefix) const {
    ck.put(prefix + ".w1", w1);
    ck.put(prefix + ".b1", b1);
    ck.put(prefix + ".w2", w2);
    ck.put(prefix + ".b2", b2);
  }

  static ResidualProjection load_from(const Checkpoint& ck, const std::string& prefix,
                                      size_t width, size_t hidden) {
    ResidualProjection net;
    net.width = width;
    net.hidden = hidden;
    net.w1 = Mlp<T>::load_tensor(ck, prefix + ".w1");
    net.b1 = Mlp<T>::load_tensor(ck, prefix + ".b1");
    net.w2 = Mlp<T>::load_tensor(ck, prefix + ".w2");
    net.b2 = Mlp<T>::load_tensor(ck, prefix + ".b2");
    return net;
  }
};

}  // namespace promind::num
