#include "cmlid/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cmlid {

namespace {

double activate(Activation act, double z) {
  switch (act) {
    case Activation::Identity:
      return z;
    case Activation::Relu:
      return z > 0.0 ? z : 0.0;
    case Activation::Sigmoid:
      return sigmoid(z);
    case Activation::Tanh:
      return std::tanh(z);
  }
  return z;
}

// Derivative expressed through the activation output.
double activation_grad(Activation act, double y) {
  switch (act) {
    case Activation::Identity:
      return 1.0;
    case Activation::Relu:
      return y > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid:
      return y * (1.0 - y);
    case Activation::Tanh:
      return 1.0 - y * y;
  }
  return 1.0;
}

Tensor reversed_rows(const Tensor& x) {
  Tensor out(x.shape());
  const std::size_t rows = x.dim(0);
  for (std::size_t t = 0; t < rows; ++t) {
    std::copy(x.row(t).begin(), x.row(t).end(), out.row(rows - 1 - t).begin());
  }
  return out;
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void glorot_uniform(Parameter& p, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  uniform_init(p, -limit, limit, rng);
}

void uniform_init(Parameter& p, double lo, double hi, Rng& rng) {
  for (double& v : p.value.data()) v = rng.uniform(lo, hi);
}

// ---------------------------------------------------------------- Embedding

Embedding::Embedding(std::size_t vocab_size, std::size_t dim)
    : table("table", {vocab_size, dim}) {}

void Embedding::init(Rng& rng) { uniform_init(table, -0.1, 0.1, rng); }

Tensor Embedding::forward(std::span<const int> ids) const {
  const std::size_t d = dim();
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab_size()) {
      throw std::out_of_range("embedding id " + std::to_string(ids[i]) +
                              " outside vocabulary of size " + std::to_string(vocab_size()));
    }
    auto src = table.value.row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void Embedding::backward(std::span<const int> ids, const Tensor& dy) {
  require_shape(dy, {ids.size(), dim()}, "Embedding::backward");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto dst = table.grad.row(static_cast<std::size_t>(ids[i]));
    auto src = dy.row(i);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

// ------------------------------------------------------------------- Conv1D

Conv1D::Conv1D(std::size_t in_dim, std::size_t filters, std::size_t kernel_size,
               Activation act)
    : kernels("kernels", {filters, kernel_size, in_dim}),
      bias("bias", {filters}),
      activation(act) {}

void Conv1D::init(Rng& rng) {
  // Keras convention: fan_in = k * in, fan_out = k * filters.
  glorot_uniform(kernels, kernel_size() * in_dim(), kernel_size() * filters(), rng);
  bias.value.zero();
}

Tensor Conv1D::forward(const Tensor& x, Conv1DCache* cache) const {
  require_rank(x, 2, "Conv1D::forward");
  if (x.dim(1) != in_dim()) {
    throw ShapeError("Conv1D::forward: input width " + std::to_string(x.dim(1)) +
                     " != " + std::to_string(in_dim()));
  }
  const std::size_t k = kernel_size();
  if (x.dim(0) < k) {
    throw ShapeError("Conv1D::forward: sequence length " + std::to_string(x.dim(0)) +
                     " shorter than kernel " + std::to_string(k));
  }
  const std::size_t out_len = x.dim(0) - k + 1;
  const std::size_t window = k * in_dim();
  const std::size_t nf = filters();
  Tensor out({out_len, nf});
  const double* xd = x.data().data();
  const double* kd = kernels.value.data().data();
  for (std::size_t t = 0; t < out_len; ++t) {
    const double* xw = xd + t * in_dim();  // k consecutive rows are contiguous
    for (std::size_t f = 0; f < nf; ++f) {
      const double* kf = kd + f * window;
      double acc = bias.value[f];
      for (std::size_t j = 0; j < window; ++j) acc += kf[j] * xw[j];
      out.at(t, f) = activate(activation, acc);
    }
  }
  if (cache) {
    cache->input = x;
    cache->output = out;
  }
  return out;
}

Tensor Conv1D::backward(const Conv1DCache& cache, const Tensor& dy) {
  require_shape(dy, cache.output.shape(), "Conv1D::backward");
  const std::size_t window = kernel_size() * in_dim();
  const std::size_t nf = filters();
  const std::size_t out_len = dy.dim(0);
  Tensor dx(cache.input.shape());
  const double* xd = cache.input.data().data();
  const double* kd = kernels.value.data().data();
  double* gk = kernels.grad.data().data();
  double* dxd = dx.data().data();
  for (std::size_t t = 0; t < out_len; ++t) {
    const double* xw = xd + t * in_dim();
    double* dxw = dxd + t * in_dim();
    for (std::size_t f = 0; f < nf; ++f) {
      const double dz = dy.at(t, f) * activation_grad(activation, cache.output.at(t, f));
      if (dz == 0.0) continue;
      bias.grad[f] += dz;
      const double* kf = kd + f * window;
      double* gkf = gk + f * window;
      for (std::size_t j = 0; j < window; ++j) {
        gkf[j] += dz * xw[j];
        dxw[j] += dz * kf[j];
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------------ MaxPool

Tensor maxpool1d_forward(const Tensor& x, std::size_t pool, MaxPoolCache* cache) {
  require_rank(x, 2, "maxpool1d_forward");
  if (pool == 0) throw std::invalid_argument("maxpool1d_forward: pool must be positive");
  if (x.dim(0) < pool) {
    throw ShapeError("maxpool1d_forward: length " + std::to_string(x.dim(0)) +
                     " shorter than pool " + std::to_string(pool));
  }
  const std::size_t out_len = x.dim(0) / pool;
  const std::size_t ch = x.dim(1);
  Tensor out({out_len, ch});
  std::vector<std::size_t> argmax(out_len * ch);
  for (std::size_t w = 0; w < out_len; ++w) {
    for (std::size_t c = 0; c < ch; ++c) {
      std::size_t best = w * pool;
      for (std::size_t t = w * pool + 1; t < (w + 1) * pool; ++t) {
        if (x.at(t, c) > x.at(best, c)) best = t;
      }
      out.at(w, c) = x.at(best, c);
      argmax[w * ch + c] = best * ch + c;
    }
  }
  if (cache) {
    cache->input_shape = x.shape();
    cache->argmax = std::move(argmax);
  }
  return out;
}

Tensor maxpool1d_backward(const MaxPoolCache& cache, const Tensor& dy) {
  if (dy.size() != cache.argmax.size()) {
    throw ShapeError("maxpool1d_backward: gradient size mismatch");
  }
  Tensor dx(cache.input_shape);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[cache.argmax[i]] += dy[i];
  return dx;
}

// ------------------------------------------------------------------ Dropout

Tensor dropout_forward(const Tensor& x, double rate, Mode mode, Rng* rng,
                       DropoutCache* cache) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (cache) cache->mask.clear();
  if (mode == Mode::Infer || rate == 0.0) return x;
  if (!rng) throw std::invalid_argument("dropout_forward: train mode requires an rng");
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  Tensor out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = rng->bernoulli(rate) ? 0.0 : keep_scale;
    out[i] *= mask[i];
  }
  if (cache) cache->mask = std::move(mask);
  return out;
}

Tensor dropout_backward(const DropoutCache& cache, const Tensor& dy) {
  if (cache.mask.empty()) return dy;
  if (cache.mask.size() != dy.size()) throw ShapeError("dropout_backward: size mismatch");
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= cache.mask[i];
  return dx;
}

// --------------------------------------------------------------------- LSTM

Lstm::Lstm(std::size_t in_dim, std::size_t hidden)
    : input_weights("input_weights", {4 * hidden, in_dim}),
      recurrent_weights("recurrent_weights", {4 * hidden, hidden}),
      bias("bias", {4 * hidden}) {}

void Lstm::init(Rng& rng) {
  const std::size_t h = hidden_size();
  glorot_uniform(input_weights, in_dim(), 4 * h, rng);
  glorot_uniform(recurrent_weights, h, 4 * h, rng);
  bias.value.zero();
}

Tensor Lstm::forward(const Tensor& x, LstmCache* cache) const {
  require_rank(x, 2, "Lstm::forward");
  const std::size_t in = in_dim();
  const std::size_t h = hidden_size();
  if (x.dim(1) != in) {
    throw ShapeError("Lstm::forward: input width " + std::to_string(x.dim(1)) +
                     " != " + std::to_string(in));
  }
  const std::size_t steps = x.dim(0);
  if (steps == 0) throw ShapeError("Lstm::forward: empty sequence");

  Tensor gates({steps, 4 * h});
  Tensor cells({steps, h});
  Tensor hidden({steps, h});
  std::vector<double> z(4 * h);
  const double* wx = input_weights.value.data().data();
  const double* wh = recurrent_weights.value.data().data();

  for (std::size_t t = 0; t < steps; ++t) {
    const double* xt = x.data().data() + t * in;
    const double* hprev = t ? hidden.data().data() + (t - 1) * h : nullptr;
    for (std::size_t r = 0; r < 4 * h; ++r) {
      double acc = bias.value[r];
      const double* wxr = wx + r * in;
      for (std::size_t c = 0; c < in; ++c) acc += wxr[c] * xt[c];
      if (hprev) {
        const double* whr = wh + r * h;
        for (std::size_t c = 0; c < h; ++c) acc += whr[c] * hprev[c];
      }
      z[r] = acc;
    }
    auto g = gates.row(t);
    for (std::size_t j = 0; j < h; ++j) {
      g[j] = sigmoid(z[j]);
      g[h + j] = sigmoid(z[h + j]);
      g[2 * h + j] = std::tanh(z[2 * h + j]);
      g[3 * h + j] = sigmoid(z[3 * h + j]);
      const double cprev = t ? cells.at(t - 1, j) : 0.0;
      const double c = g[h + j] * cprev + g[j] * g[2 * h + j];
      cells.at(t, j) = c;
      hidden.at(t, j) = g[3 * h + j] * std::tanh(c);
    }
  }
  if (cache) {
    cache->input = x;
    cache->gates = std::move(gates);
    cache->cells = std::move(cells);
    cache->hidden = hidden;
  }
  return hidden;
}

Tensor Lstm::backward(const LstmCache& cache, const Tensor& dh_seq) {
  const std::size_t in = in_dim();
  const std::size_t h = hidden_size();
  const std::size_t steps = cache.input.dim(0);
  require_shape(dh_seq, {steps, h}, "Lstm::backward");

  Tensor dx({steps, in});
  std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0), dz(4 * h);
  const double* wx = input_weights.value.data().data();
  const double* wh = recurrent_weights.value.data().data();
  double* gwx = input_weights.grad.data().data();
  double* gwh = recurrent_weights.grad.data().data();

  for (std::size_t t = steps; t-- > 0;) {
    auto g = cache.gates.row(t);
    for (std::size_t j = 0; j < h; ++j) {
      const double i_g = g[j], f_g = g[h + j], c_g = g[2 * h + j], o_g = g[3 * h + j];
      const double c = cache.cells.at(t, j);
      const double cprev = t ? cache.cells.at(t - 1, j) : 0.0;
      const double tc = std::tanh(c);
      const double dh = dh_seq.at(t, j) + dh_next[j];
      const double dc = dh * o_g * (1.0 - tc * tc) + dc_next[j];
      dz[j] = dc * c_g * i_g * (1.0 - i_g);
      dz[h + j] = dc * cprev * f_g * (1.0 - f_g);
      dz[2 * h + j] = dc * i_g * (1.0 - c_g * c_g);
      dz[3 * h + j] = dh * tc * o_g * (1.0 - o_g);
      dc_next[j] = dc * f_g;
    }
    const double* xt = cache.input.data().data() + t * in;
    const double* hprev = t ? cache.hidden.data().data() + (t - 1) * h : nullptr;
    double* dxt = dx.data().data() + t * in;
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    for (std::size_t r = 0; r < 4 * h; ++r) {
      const double d = dz[r];
      if (d == 0.0) continue;
      bias.grad[r] += d;
      const double* wxr = wx + r * in;
      double* gwxr = gwx + r * in;
      for (std::size_t c = 0; c < in; ++c) {
        gwxr[c] += d * xt[c];
        dxt[c] += d * wxr[c];
      }
      if (hprev) {
        const double* whr = wh + r * h;
        double* gwhr = gwh + r * h;
        for (std::size_t c = 0; c < h; ++c) {
          gwhr[c] += d * hprev[c];
          dh_next[c] += d * whr[c];
        }
      }
    }
  }
  return dx;
}

Tensor Lstm::forward_last(const Tensor& x, LstmCache* cache) const {
  Tensor seq = forward(x, cache);
  const auto last = seq.row(seq.dim(0) - 1);
  return Tensor::vector(std::vector<double>(last.begin(), last.end()));
}

Tensor Lstm::backward_last(const LstmCache& cache, const Tensor& dh_last) {
  const std::size_t h = hidden_size();
  require_shape(dh_last, {h}, "Lstm::backward_last");
  Tensor dh({cache.input.dim(0), h});
  auto last = dh.row(dh.dim(0) - 1);
  std::copy(dh_last.data().begin(), dh_last.data().end(), last.begin());
  return backward(cache, dh);
}

// ------------------------------------------------------------------- BiLSTM

BiLstm::BiLstm(std::size_t in_dim, std::size_t hidden)
    : forward_layer(in_dim, hidden), backward_layer(in_dim, hidden) {
  for (Parameter* p : forward_layer.parameters()) p->name = "forward." + p->name;
  for (Parameter* p : backward_layer.parameters()) p->name = "backward." + p->name;
}

void BiLstm::init(Rng& rng) {
  forward_layer.init(rng);
  backward_layer.init(rng);
}

std::vector<Parameter*> BiLstm::parameters() {
  auto out = forward_layer.parameters();
  for (Parameter* p : backward_layer.parameters()) out.push_back(p);
  return out;
}

Tensor BiLstm::forward(const Tensor& x, BiLstmCache* cache) const {
  if (forward_layer.hidden_size() != backward_layer.hidden_size()) {
    throw ShapeError("BiLstm: direction hidden sizes differ");
  }
  require_rank(x, 2, "BiLstm::forward");
  const std::size_t h = hidden_size();
  const std::size_t steps = x.dim(0);
  Tensor fwd = forward_layer.forward(x, cache ? &cache->forward : nullptr);
  Tensor bwd = backward_layer.forward(reversed_rows(x), cache ? &cache->backward : nullptr);
  Tensor out({steps, 2 * h});
  for (std::size_t t = 0; t < steps; ++t) {
    auto dst = out.row(t);
    std::copy(fwd.row(t).begin(), fwd.row(t).end(), dst.begin());
    std::copy(bwd.row(steps - 1 - t).begin(), bwd.row(steps - 1 - t).end(),
              dst.begin() + static_cast<std::ptrdiff_t>(h));
  }
  return out;
}

Tensor BiLstm::backward(const BiLstmCache& cache, const Tensor& dy) {
  const std::size_t h = hidden_size();
  const std::size_t steps = cache.forward.input.dim(0);
  require_shape(dy, {steps, 2 * h}, "BiLstm::backward");
  Tensor dfwd({steps, h});
  Tensor dbwd({steps, h});
  for (std::size_t t = 0; t < steps; ++t) {
    auto src = dy.row(t);
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(h), dfwd.row(t).begin());
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(h), src.end(),
              dbwd.row(steps - 1 - t).begin());
  }
  Tensor dx = forward_layer.backward(cache.forward, dfwd);
  Tensor dx_rev = backward_layer.backward(cache.backward, dbwd);
  for (std::size_t t = 0; t < steps; ++t) {
    auto dst = dx.row(t);
    auto src = dx_rev.row(steps - 1 - t);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
  }
  return dx;
}

Tensor BiLstm::forward_summary(const Tensor& x, BiLstmCache* cache) const {
  Tensor seq = forward(x, cache);
  const std::size_t h = hidden_size();
  const std::size_t steps = seq.dim(0);
  Tensor out({2 * h});
  for (std::size_t j = 0; j < h; ++j) {
    out[j] = seq.at(steps - 1, j);
    out[h + j] = seq.at(0, h + j);
  }
  return out;
}

Tensor BiLstm::backward_summary(const BiLstmCache& cache, const Tensor& dy) {
  const std::size_t h = hidden_size();
  require_shape(dy, {2 * h}, "BiLstm::backward_summary");
  const std::size_t steps = cache.forward.input.dim(0);
  Tensor dseq({steps, 2 * h});
  for (std::size_t j = 0; j < h; ++j) {
    dseq.at(steps - 1, j) = dy[j];
    dseq.at(0, h + j) += dy[h + j];
  }
  return backward(cache, dseq);
}

// -------------------------------------------------------------------- Dense

Dense::Dense(std::size_t in_dim, std::size_t out_dim, Activation act)
    : weight("weight", {out_dim, in_dim}), bias("bias", {out_dim}), activation(act) {}

void Dense::init(Rng& rng) {
  glorot_uniform(weight, in_dim(), out_dim(), rng);
  bias.value.zero();
}

Tensor Dense::forward(const Tensor& x, DenseCache* cache) const {
  const std::size_t in = in_dim();
  const std::size_t out_n = out_dim();
  const bool batched = x.rank() == 2;
  if (!(x.rank() == 1 || batched) || x.shape().back() != in) {
    throw ShapeError("Dense::forward: expected [" + std::to_string(in) + "] or [N, " +
                     std::to_string(in) + "], got " + to_string(x.shape()));
  }
  const std::size_t rows = batched ? x.dim(0) : 1;
  Tensor out = batched ? Tensor({rows, out_n}) : Tensor({out_n});
  const double* w = weight.value.data().data();
  for (std::size_t n = 0; n < rows; ++n) {
    const double* xr = x.data().data() + n * in;
    for (std::size_t o = 0; o < out_n; ++o) {
      double acc = bias.value[o];
      const double* wo = w + o * in;
      for (std::size_t c = 0; c < in; ++c) acc += wo[c] * xr[c];
      out[n * out_n + o] = activate(activation, acc);
    }
  }
  if (cache) {
    cache->input = x;
    cache->output = out;
  }
  return out;
}

Tensor Dense::backward(const DenseCache& cache, const Tensor& dy) {
  require_shape(dy, cache.output.shape(), "Dense::backward");
  const std::size_t in = in_dim();
  const std::size_t out_n = out_dim();
  const std::size_t rows = cache.input.size() / in;
  Tensor dx(cache.input.shape());
  const double* w = weight.value.data().data();
  double* gw = weight.grad.data().data();
  for (std::size_t n = 0; n < rows; ++n) {
    const double* xr = cache.input.data().data() + n * in;
    double* dxr = dx.data().data() + n * in;
    for (std::size_t o = 0; o < out_n; ++o) {
      const double dz =
          dy[n * out_n + o] * activation_grad(activation, cache.output[n * out_n + o]);
      if (dz == 0.0) continue;
      bias.grad[o] += dz;
      const double* wo = w + o * in;
      double* gwo = gw + o * in;
      for (std::size_t c = 0; c < in; ++c) {
        gwo[c] += dz * xr[c];
        dxr[c] += dz * wo[c];
      }
    }
  }
  return dx;
}

// -------------------------------------------------------------- CharEncoder

CharEncoder::CharEncoder(std::size_t vocab_size, std::size_t char_dim, std::size_t hidden)
    : embedding(vocab_size, char_dim), encoder(char_dim, hidden) {}

void CharEncoder::init(Rng& rng) {
  embedding.init(rng);
  encoder.init(rng);
}

std::vector<Parameter*> CharEncoder::parameters() {
  auto out = embedding.parameters();
  for (Parameter* p : encoder.parameters()) out.push_back(p);
  return out;
}

Tensor CharEncoder::forward(std::span<const int> ids, CharEncoderCache* cache) const {
  if (ids.empty()) throw ShapeError("CharEncoder::forward: empty character sequence");
  Tensor embedded = embedding.forward(ids);
  if (cache) cache->ids.assign(ids.begin(), ids.end());
  return encoder.forward_summary(embedded, cache ? &cache->lstm : nullptr);
}

void CharEncoder::backward(const CharEncoderCache& cache, const Tensor& dy) {
  Tensor dembedded = encoder.backward_summary(cache.lstm, dy);
  embedding.backward(cache.ids, dembedded);
}

// ---------------------------------------------------------------------- BCE

BceResult bce_loss(double p, int label) {
  if (label != 0 && label != 1) throw std::invalid_argument("bce_loss: label must be 0 or 1");
  const double q = std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon);
  if (label == 1) return {-std::log(q), -1.0 / q};
  return {-std::log(1.0 - q), 1.0 / (1.0 - q)};
}

}  // namespace cmlid
