#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cmlid/rng.hpp"
#include "cmlid/tensor.hpp"

namespace cmlid {

enum class Activation { Identity, Relu, Sigmoid, Tanh };
enum class Mode { Train, Infer };

// Glorot-uniform weights in [-sqrt(6/(fan_in+fan_out)), +sqrt(...)].
void glorot_uniform(Parameter& p, std::size_t fan_in, std::size_t fan_out, Rng& rng);
void uniform_init(Parameter& p, double lo, double hi, Rng& rng);

// Layers keep their parameters as public members so models, optimizers and
// the archive code can walk them. Forward passes are const and write any
// state backward needs into an explicit cache; backward accumulates into the
// parameter gradients and returns the gradient with respect to the input.

class Embedding {
 public:
  Embedding() = default;
  Embedding(std::size_t vocab_size, std::size_t dim);

  void init(Rng& rng);  // uniform [-0.1, 0.1]

  std::size_t vocab_size() const { return table.value.dim(0); }
  std::size_t dim() const { return table.value.dim(1); }

  // [len, dim]; row i is table[ids[i]].
  Tensor forward(std::span<const int> ids) const;
  // Scatter-adds dy rows into the table gradient.
  void backward(std::span<const int> ids, const Tensor& dy);

  std::vector<Parameter*> parameters() { return {&table}; }

  Parameter table;
};

struct Conv1DCache {
  Tensor input;
  Tensor output;
};

// Stride 1, no padding: [len, in_dim] -> [len - kernel + 1, filters].
class Conv1D {
 public:
  Conv1D() = default;
  Conv1D(std::size_t in_dim, std::size_t filters, std::size_t kernel_size,
         Activation activation = Activation::Relu);

  void init(Rng& rng);

  std::size_t in_dim() const { return kernels.value.dim(2); }
  std::size_t filters() const { return kernels.value.dim(0); }
  std::size_t kernel_size() const { return kernels.value.dim(1); }

  Tensor forward(const Tensor& x, Conv1DCache* cache = nullptr) const;
  Tensor backward(const Conv1DCache& cache, const Tensor& dy);

  std::vector<Parameter*> parameters() { return {&kernels, &bias}; }

  Parameter kernels;  // [filters, kernel_size, in_dim]
  Parameter bias;     // [filters]
  Activation activation = Activation::Relu;
};

struct MaxPoolCache {
  Shape input_shape;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

// Non-overlapping windows; the trailing remainder is dropped. Backward routes
// each output gradient to the first maximal position of its window.
Tensor maxpool1d_forward(const Tensor& x, std::size_t pool, MaxPoolCache* cache = nullptr);
Tensor maxpool1d_backward(const MaxPoolCache& cache, const Tensor& dy);

struct DropoutCache {
  std::vector<double> mask;  // empty means identity
};

// Inverted dropout. Infer mode (or rate 0) is the identity and ignores rng.
Tensor dropout_forward(const Tensor& x, double rate, Mode mode, Rng* rng,
                       DropoutCache* cache = nullptr);
Tensor dropout_backward(const DropoutCache& cache, const Tensor& dy);

struct LstmCache {
  Tensor input;   // [T, in]
  Tensor gates;   // [T, 4H] post-activation, order i, f, g, o
  Tensor cells;   // [T, H]
  Tensor hidden;  // [T, H]
};

// Single-direction LSTM with zero initial state.
class Lstm {
 public:
  Lstm() = default;
  Lstm(std::size_t in_dim, std::size_t hidden);

  void init(Rng& rng);

  std::size_t in_dim() const { return input_weights.value.dim(1); }
  std::size_t hidden_size() const { return recurrent_weights.value.dim(1); }

  // Full hidden sequence [T, H].
  Tensor forward(const Tensor& x, LstmCache* cache = nullptr) const;
  // dh is [T, H]; returns dx [T, in]. Backpropagation through time.
  Tensor backward(const LstmCache& cache, const Tensor& dh);

  // Final hidden state [H] and its matching backward.
  Tensor forward_last(const Tensor& x, LstmCache* cache = nullptr) const;
  Tensor backward_last(const LstmCache& cache, const Tensor& dh_last);

  std::vector<Parameter*> parameters() {
    return {&input_weights, &recurrent_weights, &bias};
  }

  Parameter input_weights;      // [4H, in]
  Parameter recurrent_weights;  // [4H, H]
  Parameter bias;               // [4H]
};

struct BiLstmCache {
  LstmCache forward;
  LstmCache backward;
};

// out[t] = (forward_h[t], backward_h over reversed input at position t).
class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(std::size_t in_dim, std::size_t hidden);

  void init(Rng& rng);

  std::size_t in_dim() const { return forward_layer.in_dim(); }
  std::size_t hidden_size() const { return forward_layer.hidden_size(); }

  Tensor forward(const Tensor& x, BiLstmCache* cache = nullptr) const;  // [T, 2H]
  Tensor backward(const BiLstmCache& cache, const Tensor& dy);

  // (forward final state, backward final state) = [2H]: a fixed-size summary.
  Tensor forward_summary(const Tensor& x, BiLstmCache* cache = nullptr) const;
  Tensor backward_summary(const BiLstmCache& cache, const Tensor& dy);

  std::vector<Parameter*> parameters();

  Lstm forward_layer;
  Lstm backward_layer;
};

struct DenseCache {
  Tensor input;
  Tensor output;
};

// Affine map then activation. Accepts [in] or [N, in] (row-wise).
class Dense {
 public:
  Dense() = default;
  Dense(std::size_t in_dim, std::size_t out_dim, Activation activation);

  void init(Rng& rng);

  std::size_t in_dim() const { return weight.value.dim(1); }
  std::size_t out_dim() const { return weight.value.dim(0); }

  Tensor forward(const Tensor& x, DenseCache* cache = nullptr) const;
  Tensor backward(const DenseCache& cache, const Tensor& dy);

  std::vector<Parameter*> parameters() { return {&weight, &bias}; }

  Parameter weight;  // [out, in]
  Parameter bias;    // [out]
  Activation activation = Activation::Identity;
};

struct CharEncoderCache {
  std::vector<int> ids;
  BiLstmCache lstm;
};

// Character embeddings summarized by a Bi-LSTM's two final states.
class CharEncoder {
 public:
  CharEncoder() = default;
  CharEncoder(std::size_t vocab_size, std::size_t char_dim, std::size_t hidden);

  void init(Rng& rng);

  std::size_t output_dim() const { return 2 * encoder.hidden_size(); }

  Tensor forward(std::span<const int> ids, CharEncoderCache* cache = nullptr) const;
  void backward(const CharEncoderCache& cache, const Tensor& dy);

  std::vector<Parameter*> parameters();

  Embedding embedding;
  BiLstm encoder;
};

struct BceResult {
  double loss;
  double grad;  // dL/dp
};

inline constexpr double kBceEpsilon = 1e-7;

// Binary cross-entropy with p clamped to [eps, 1 - eps].
BceResult bce_loss(double p, int label);

double sigmoid(double x);

}  // namespace cmlid
