#include "dbsadam/models.hpp"

#include <algorithm>
#include <cmath>

namespace dbsadam {

LstmCellParams LstmCellParams::zeros(std::size_t hidden, std::size_t input) {
  const std::size_t cols = hidden + input;
  LstmCellParams p;
  p.w_f = p.w_i = p.w_c = p.w_o = Matrix(hidden, cols);
  p.b_f = p.b_i = p.b_c = p.b_o = Vector(hidden, 0.0);
  return p;
}

void LstmCellParams::validate() const {
  const std::size_t h = b_f.size();
  for (const Matrix* w : {&w_f, &w_i, &w_c, &w_o}) {
    if (w->rows() != h || w->cols() < h || w->rows() != w_f.rows() || w->cols() != w_f.cols()) {
      throw DimensionError("LSTM gate weight " + w->shape_string() + " inconsistent with hidden " +
                           std::to_string(h));
    }
  }
  for (const Vector* b : {&b_i, &b_c, &b_o}) {
    if (b->size() != h) throw DimensionError("LSTM gate bias length mismatch");
  }
}

namespace {

Vector affine(const Matrix& w, std::span<const double> z, const Vector& b) {
  Vector a = matvec(w, z);
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
  return a;
}

void add_into(Vector& acc, std::span<const double> x) {
  for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += x[k];
}

}  // namespace

LstmState lstm_cell_forward(const LstmCellParams& params, const LstmState& prev,
                            std::span<const double> x, LstmCellCache* cache) {
  const std::size_t hidden = params.hidden();
  if (prev.h.size() != hidden || prev.c.size() != hidden) {
    throw DimensionError("LSTM state of size " + std::to_string(prev.h.size()) +
                         " for hidden " + std::to_string(hidden));
  }
  if (x.size() != params.input()) {
    throw DimensionError("LSTM input of width " + std::to_string(x.size()) + ", expected " +
                         std::to_string(params.input()));
  }
  Vector z(prev.h);
  z.insert(z.end(), x.begin(), x.end());

  Vector f = sigmoid(affine(params.w_f, z, params.b_f));
  Vector i = sigmoid(affine(params.w_i, z, params.b_i));
  Vector g = tanh_activation(affine(params.w_c, z, params.b_c));
  Vector o = sigmoid(affine(params.w_o, z, params.b_o));

  LstmState next{Vector(hidden), Vector(hidden)};
  Vector tanh_c(hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    next.c[k] = f[k] * prev.c[k] + i[k] * g[k];
    tanh_c[k] = std::tanh(next.c[k]);
    next.h[k] = o[k] * tanh_c[k];
  }
  if (cache != nullptr) {
    cache->z = std::move(z);
    cache->f = std::move(f);
    cache->i = std::move(i);
    cache->g = std::move(g);
    cache->o = std::move(o);
    cache->c_prev = prev.c;
    cache->c = next.c;
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

void lstm_cell_backward(const LstmCellParams& params, const LstmCellCache& cache,
                        std::span<const double> dh, std::span<const double> dc,
                        LstmCellParams& grad, Vector& dh_prev, Vector& dc_prev, Vector& dx) {
  const std::size_t hidden = params.hidden();
  Vector da_f(hidden), da_i(hidden), da_g(hidden), da_o(hidden);
  dc_prev.assign(hidden, 0.0);
  for (std::size_t k = 0; k < hidden; ++k) {
    const double t = cache.tanh_c[k];
    const double dc_total = dc[k] + dh[k] * cache.o[k] * (1.0 - t * t);
    const double d_o = dh[k] * t;
    const double d_f = dc_total * cache.c_prev[k];
    const double d_i = dc_total * cache.g[k];
    const double d_g = dc_total * cache.i[k];
    da_o[k] = d_o * cache.o[k] * (1.0 - cache.o[k]);
    da_f[k] = d_f * cache.f[k] * (1.0 - cache.f[k]);
    da_i[k] = d_i * cache.i[k] * (1.0 - cache.i[k]);
    da_g[k] = d_g * (1.0 - cache.g[k] * cache.g[k]);
    dc_prev[k] = dc_total * cache.f[k];
  }

  outer_accumulate(grad.w_f, da_f, cache.z);
  outer_accumulate(grad.w_i, da_i, cache.z);
  outer_accumulate(grad.w_c, da_g, cache.z);
  outer_accumulate(grad.w_o, da_o, cache.z);
  add_into(grad.b_f, da_f);
  add_into(grad.b_i, da_i);
  add_into(grad.b_c, da_g);
  add_into(grad.b_o, da_o);

  Vector dz(cache.z.size(), 0.0);
  matvec_transposed_accumulate(params.w_f, da_f, dz);
  matvec_transposed_accumulate(params.w_i, da_i, dz);
  matvec_transposed_accumulate(params.w_c, da_g, dz);
  matvec_transposed_accumulate(params.w_o, da_o, dz);
  dh_prev.assign(dz.begin(), dz.begin() + static_cast<std::ptrdiff_t>(hidden));
  dx.assign(dz.begin() + static_cast<std::ptrdiff_t>(hidden), dz.end());
}

BiLstmParams BiLstmParams::zeros(std::size_t hidden, std::size_t input) {
  return {LstmCellParams::zeros(hidden, input), LstmCellParams::zeros(hidden, input)};
}

Matrix bilstm_layer_forward(const BiLstmParams& params, const Matrix& sequence,
                            BiLstmCache* cache) {
  const std::size_t steps = sequence.rows();
  if (steps == 0) throw std::invalid_argument("bilstm_layer_forward: empty sequence");
  const std::size_t hidden = params.forward.hidden();
  if (params.backward.hidden() != hidden) {
    throw DimensionError("Bi-LSTM directions disagree on hidden size");
  }
  if (cache != nullptr) {
    cache->forward.assign(steps, {});
    cache->backward.assign(steps, {});
  }
  Matrix out(steps, hidden);
  LstmState state = LstmState::zeros(hidden);
  for (std::size_t t = 0; t < steps; ++t) {
    state = lstm_cell_forward(params.forward, state, sequence.row(t),
                              cache ? &cache->forward[t] : nullptr);
    std::copy(state.h.begin(), state.h.end(), out.row(t).begin());
  }
  state = LstmState::zeros(hidden);
  for (std::size_t t = steps; t-- > 0;) {
    state = lstm_cell_forward(params.backward, state, sequence.row(t),
                              cache ? &cache->backward[t] : nullptr);
    auto row = out.row(t);
    for (std::size_t k = 0; k < hidden; ++k) row[k] += state.h[k];
  }
  return out;
}

Matrix bilstm_layer_backward(const BiLstmParams& params, const BiLstmCache& cache,
                             const Matrix& d_output, BiLstmParams& grad) {
  const std::size_t steps = cache.forward.size();
  const std::size_t hidden = params.forward.hidden();
  if (d_output.rows() != steps || d_output.cols() != hidden || cache.backward.size() != steps) {
    throw DimensionError("Bi-LSTM backward: output gradient " + d_output.shape_string() +
                         " does not match cached sequence");
  }
  Matrix d_input(steps, params.forward.input());
  Vector dh_next(hidden, 0.0), dc_next(hidden, 0.0), dh(hidden);
  Vector dh_prev, dc_prev, dx;

  for (std::size_t t = steps; t-- > 0;) {
    for (std::size_t k = 0; k < hidden; ++k) dh[k] = d_output(t, k) + dh_next[k];
    lstm_cell_backward(params.forward, cache.forward[t], dh, dc_next, grad.forward, dh_prev,
                       dc_prev, dx);
    auto row = d_input.row(t);
    for (std::size_t k = 0; k < dx.size(); ++k) row[k] += dx[k];
    dh_next = dh_prev;
    dc_next = dc_prev;
  }

  std::fill(dh_next.begin(), dh_next.end(), 0.0);
  std::fill(dc_next.begin(), dc_next.end(), 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t k = 0; k < hidden; ++k) dh[k] = d_output(t, k) + dh_next[k];
    lstm_cell_backward(params.backward, cache.backward[t], dh, dc_next, grad.backward, dh_prev,
                       dc_prev, dx);
    auto row = d_input.row(t);
    for (std::size_t k = 0; k < dx.size(); ++k) row[k] += dx[k];
    dh_next = dh_prev;
    dc_next = dc_prev;
  }
  return d_input;
}

std::string to_string(Aggregation a) { return a == Aggregation::last ? "last" : "mean"; }

Aggregation parse_aggregation(const std::string& name) {
  if (name == "last") return Aggregation::last;
  if (name == "mean") return Aggregation::mean;
  throw std::invalid_argument("unknown aggregation '" + name + "'");
}

void NetworkShape::validate() const {
  if (input_width == 0 || hidden1 == 0 || hidden2 == 0 || dense == 0 || classes < 2) {
    throw std::invalid_argument("network shape: every width must be positive and classes >= 2");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout_rate must lie in [0, 1)");
  }
}

NetworkParams NetworkParams::zeros(const NetworkShape& shape) {
  NetworkParams p;
  p.bilstm1 = BiLstmParams::zeros(shape.hidden1, shape.input_width);
  p.bilstm2 = BiLstmParams::zeros(shape.hidden2, shape.hidden1);
  p.dense_w = Matrix(shape.dense, shape.hidden2);
  p.dense_b = Vector(shape.dense, 0.0);
  p.head_w = Matrix(shape.classes, shape.dense);
  p.head_b = Vector(shape.classes, 0.0);
  return p;
}

namespace {

template <typename Cell, typename Out, typename MatFn, typename VecFn>
void cell_tensors(Cell& cell, Out& out, MatFn mat, VecFn vec) {
  out.push_back(mat(cell.w_f));
  out.push_back(mat(cell.w_i));
  out.push_back(mat(cell.w_c));
  out.push_back(mat(cell.w_o));
  out.push_back(vec(cell.b_f));
  out.push_back(vec(cell.b_i));
  out.push_back(vec(cell.b_c));
  out.push_back(vec(cell.b_o));
}

template <typename Params, typename Out, typename MatFn, typename VecFn>
void all_tensors(Params& p, Out& out, MatFn mat, VecFn vec) {
  cell_tensors(p.bilstm1.forward, out, mat, vec);
  cell_tensors(p.bilstm1.backward, out, mat, vec);
  cell_tensors(p.bilstm2.forward, out, mat, vec);
  cell_tensors(p.bilstm2.backward, out, mat, vec);
  out.push_back(mat(p.dense_w));
  out.push_back(vec(p.dense_b));
  out.push_back(mat(p.head_w));
  out.push_back(vec(p.head_b));
}

}  // namespace

ParamViews NetworkParams::views() {
  ParamViews out;
  all_tensors(
      *this, out, [](Matrix& m) { return m.values(); },
      [](Vector& v) { return std::span<double>(v); });
  return out;
}

GradViews NetworkParams::views() const {
  GradViews out;
  all_tensors(
      *this, out, [](const Matrix& m) { return m.values(); },
      [](const Vector& v) { return std::span<const double>(v); });
  return out;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& v : views()) n += v.size();
  return n;
}

Vector NetworkParams::flatten() const {
  Vector flat;
  flat.reserve(parameter_count());
  for (const auto& v : views()) flat.insert(flat.end(), v.begin(), v.end());
  return flat;
}

void NetworkParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw DimensionError("assign: " + std::to_string(flat.size()) + " values for " +
                         std::to_string(parameter_count()) + " parameters");
  }
  std::size_t offset = 0;
  for (auto& v : views()) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), v.size(), v.begin());
    offset += v.size();
  }
}

namespace {

void glorot(Matrix& w, std::size_t fan_in, std::size_t fan_out, SeededRng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& x : w.values()) x = rng.uniform(-limit, limit);
}

void init_cell(LstmCellParams& cell, SeededRng& rng) {
  const std::size_t fan_in = cell.w_f.cols();
  const std::size_t fan_out = cell.w_f.rows();
  for (Matrix* w : {&cell.w_f, &cell.w_i, &cell.w_c, &cell.w_o}) glorot(*w, fan_in, fan_out, rng);
  std::fill(cell.b_f.begin(), cell.b_f.end(), 1.0);
}

bool same_shape(const NetworkParams& a, const NetworkParams& b) {
  const auto va = a.views();
  const auto vb = b.views();
  if (va.size() != vb.size()) return false;
  for (std::size_t k = 0; k < va.size(); ++k) {
    if (va[k].size() != vb[k].size()) return false;
  }
  return a.dense_w.rows() == b.dense_w.rows() && a.head_w.rows() == b.head_w.rows() &&
         a.bilstm1.forward.w_f.cols() == b.bilstm1.forward.w_f.cols();
}

}  // namespace

SequenceNetwork::SequenceNetwork(const NetworkShape& shape, SeededRng& rng)
    : shape_(shape), params_(NetworkParams::zeros(shape)) {
  shape_.validate();
  init_cell(params_.bilstm1.forward, rng);
  init_cell(params_.bilstm1.backward, rng);
  init_cell(params_.bilstm2.forward, rng);
  init_cell(params_.bilstm2.backward, rng);
  glorot(params_.dense_w, shape.hidden2, shape.dense, rng);
  glorot(params_.head_w, shape.dense, shape.classes, rng);
}

SequenceNetwork::SequenceNetwork(const NetworkShape& shape, NetworkParams params)
    : shape_(shape), params_(std::move(params)) {
  shape_.validate();
  if (!same_shape(params_, NetworkParams::zeros(shape_))) {
    throw DimensionError("network parameters do not match the declared shape");
  }
}

namespace {

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Mode mode, SeededRng* rng) {
  Matrix mask(rows, cols, 1.0);
  if (mode == Mode::eval || rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask.values()) m = rng->uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

void apply_mask(Matrix& x, const Matrix& mask) {
  auto xv = x.values();
  auto mv = mask.values();
  for (std::size_t k = 0; k < xv.size(); ++k) xv[k] *= mv[k];
}

}  // namespace

Matrix network_forward(const SequenceNetwork& net, std::span<const Matrix> batch, Mode mode,
                       SeededRng* rng, ForwardCache* cache) {
  const NetworkShape& shape = net.shape();
  const NetworkParams& p = net.params();
  if (mode == Mode::train && shape.dropout_rate > 0.0 && rng == nullptr) {
    throw std::invalid_argument("network_forward: train mode requires an rng");
  }
  if (cache != nullptr) {
    cache->shape = shape;
    cache->samples.assign(batch.size(), {});
  }
  Matrix logits(batch.size(), shape.classes);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const Matrix& seq = batch[n];
    if (seq.cols() != shape.input_width) {
      throw DimensionError("sample " + std::to_string(n) + " has width " +
                           std::to_string(seq.cols()) + ", network expects " +
                           std::to_string(shape.input_width));
    }
    SampleCache local;
    SampleCache& sc = cache ? cache->samples[n] : local;
    const bool keep = cache != nullptr;
    const std::size_t steps = seq.rows();
    sc.steps = steps;

    Matrix out1 = bilstm_layer_forward(p.bilstm1, seq, keep ? &sc.layer1 : nullptr);
    sc.mask1 = dropout_mask(steps, shape.hidden1, shape.dropout_rate, mode, rng);
    apply_mask(out1, sc.mask1);

    Matrix out2 = bilstm_layer_forward(p.bilstm2, out1, keep ? &sc.layer2 : nullptr);
    sc.mask2 = dropout_mask(steps, shape.hidden2, shape.dropout_rate, mode, rng);
    apply_mask(out2, sc.mask2);

    Vector pooled(shape.hidden2, 0.0);
    if (shape.aggregation == Aggregation::last) {
      auto last = out2.row(steps - 1);
      pooled.assign(last.begin(), last.end());
    } else {
      for (std::size_t t = 0; t < steps; ++t) add_into(pooled, out2.row(t));
      for (double& x : pooled) x /= static_cast<double>(steps);
    }

    Vector pre = affine(p.dense_w, pooled, p.dense_b);
    Matrix mask3 = dropout_mask(1, shape.dense, shape.dropout_rate, mode, rng);
    Vector act(shape.dense);
    for (std::size_t k = 0; k < shape.dense; ++k) act[k] = std::max(pre[k], 0.0) * mask3(0, k);

    const Vector out = affine(p.head_w, act, p.head_b);
    std::copy(out.begin(), out.end(), logits.row(n).begin());

    if (keep) {
      sc.out1 = std::move(out1);
      sc.pooled = std::move(pooled);
      sc.dense_pre = std::move(pre);
      sc.dense_out = std::move(act);
      sc.mask3.assign(mask3.values().begin(), mask3.values().end());
    }
  }
  return logits;
}

GradientSet network_backward(const SequenceNetwork& net, const ForwardCache& cache,
                             const Matrix& d_logits) {
  const NetworkShape& shape = net.shape();
  const NetworkParams& p = net.params();
  if (!(cache.shape == shape)) {
    throw std::invalid_argument("network_backward: cache was produced by a different network shape");
  }
  if (d_logits.rows() != cache.samples.size() || d_logits.cols() != shape.classes) {
    throw DimensionError("network_backward: logit gradient " + d_logits.shape_string() +
                         " for a cached batch of " + std::to_string(cache.samples.size()));
  }
  GradientSet grad = NetworkParams::zeros(shape);
  for (std::size_t n = 0; n < cache.samples.size(); ++n) {
    const SampleCache& sc = cache.samples[n];
    if (sc.layer1.forward.size() != sc.steps || sc.dense_out.size() != shape.dense) {
      throw std::invalid_argument("network_backward: stale cache for sample " + std::to_string(n));
    }
    auto d_out = d_logits.row(n);

    outer_accumulate(grad.head_w, d_out, sc.dense_out);
    add_into(grad.head_b, d_out);
    Vector d_act(shape.dense, 0.0);
    matvec_transposed_accumulate(p.head_w, d_out, d_act);

    Vector d_pre(shape.dense);
    for (std::size_t k = 0; k < shape.dense; ++k) {
      d_pre[k] = sc.dense_pre[k] > 0.0 ? d_act[k] * sc.mask3[k] : 0.0;
    }
    outer_accumulate(grad.dense_w, d_pre, sc.pooled);
    add_into(grad.dense_b, d_pre);
    Vector d_pooled(shape.hidden2, 0.0);
    matvec_transposed_accumulate(p.dense_w, d_pre, d_pooled);

    const std::size_t steps = sc.steps;
    Matrix d_out2(steps, shape.hidden2);
    if (shape.aggregation == Aggregation::last) {
      std::copy(d_pooled.begin(), d_pooled.end(), d_out2.row(steps - 1).begin());
    } else {
      const double inv = 1.0 / static_cast<double>(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t k = 0; k < shape.hidden2; ++k) d_out2(t, k) = d_pooled[k] * inv;
      }
    }
    apply_mask(d_out2, sc.mask2);

    Matrix d_out1 = bilstm_layer_backward(p.bilstm2, sc.layer2, d_out2, grad.bilstm2);
    apply_mask(d_out1, sc.mask1);
    bilstm_layer_backward(p.bilstm1, sc.layer1, d_out1, grad.bilstm1);
  }
  return grad;
}

Matrix row_to_sequence(std::span<const double> features, std::size_t steps) {
  if (steps == 0) throw std::invalid_argument("row_to_sequence: steps must be >= 1");
  const std::size_t width = (features.size() + steps - 1) / steps;
  Matrix seq(steps, width);
  std::copy(features.begin(), features.end(), seq.values().begin());
  return seq;
}

}  // namespace dbsadam
