#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dbsadam/numerics.hpp"
#include "dbsadam/optimizers.hpp"

namespace dbsadam {

/// Gate weights act on the concatenation [h_prev, x]; each W is hidden x (hidden + input).
struct LstmCellParams {
  Matrix w_f, w_i, w_c, w_o;
  Vector b_f, b_i, b_c, b_o;

  static LstmCellParams zeros(std::size_t hidden, std::size_t input);
  std::size_t hidden() const { return b_f.size(); }
  std::size_t input() const { return w_f.cols() - b_f.size(); }
  void validate() const;
};

struct LstmState {
  Vector h;
  Vector c;

  static LstmState zeros(std::size_t hidden) { return {Vector(hidden, 0.0), Vector(hidden, 0.0)}; }
};

/// Values retained from a forward step for backpropagation.
struct LstmCellCache {
  Vector z;  // [h_prev, x]
  Vector f, i, g, o;
  Vector c_prev, c, tanh_c;
};

LstmState lstm_cell_forward(const LstmCellParams& params, const LstmState& prev,
                            std::span<const double> x, LstmCellCache* cache = nullptr);

/// Backpropagate one step. `dh` and `dc` are gradients flowing into h_t and C_t;
/// parameter gradients accumulate into `grad`.
void lstm_cell_backward(const LstmCellParams& params, const LstmCellCache& cache,
                        std::span<const double> dh, std::span<const double> dc,
                        LstmCellParams& grad, Vector& dh_prev, Vector& dc_prev, Vector& dx);

struct BiLstmParams {
  LstmCellParams forward;
  LstmCellParams backward;

  static BiLstmParams zeros(std::size_t hidden, std::size_t input);
};

struct BiLstmCache {
  std::vector<LstmCellCache> forward;   // indexed by timestep
  std::vector<LstmCellCache> backward;  // indexed by timestep
};

/// Run both directions over `sequence` (T x input) and fuse additively.
/// Returns T x hidden.
Matrix bilstm_layer_forward(const BiLstmParams& params, const Matrix& sequence,
                            BiLstmCache* cache = nullptr);

/// Gradient w.r.t. the layer input (T x input); parameter gradients accumulate into `grad`.
Matrix bilstm_layer_backward(const BiLstmParams& params, const BiLstmCache& cache,
                             const Matrix& d_output, BiLstmParams& grad);

enum class Aggregation { last, mean };
std::string to_string(Aggregation a);
Aggregation parse_aggregation(const std::string& name);

struct NetworkShape {
  std::size_t input_width = 0;  // features per timestep
  std::size_t hidden1 = 256;
  std::size_t hidden2 = 128;
  std::size_t dense = 64;
  std::size_t classes = 3;
  double dropout_rate = 0.40;
  Aggregation aggregation = Aggregation::last;

  void validate() const;
  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

/// Every trainable tensor of the network. Also used as the gradient container,
/// so gradient shapes mirror parameter shapes by construction.
struct NetworkParams {
  BiLstmParams bilstm1;
  BiLstmParams bilstm2;
  Matrix dense_w;
  Vector dense_b;
  Matrix head_w;
  Vector head_b;

  static NetworkParams zeros(const NetworkShape& shape);

  ParamViews views();
  GradViews views() const;
  std::size_t parameter_count() const;
  /// Flat copy in views() order.
  Vector flatten() const;
  void assign(std::span<const double> flat);
};

using GradientSet = NetworkParams;

enum class Mode { train, eval };

struct SampleCache {
  BiLstmCache layer1;
  BiLstmCache layer2;
  Matrix mask1;  // dropout multipliers after layer 1 (T x hidden1)
  Matrix mask2;  // after layer 2 (T x hidden2)
  Matrix out1;   // layer 1 output after dropout
  std::size_t steps = 0;
  Vector pooled;
  Vector dense_pre;
  Vector dense_out;  // after ReLU and dropout
  Vector mask3;
};

struct ForwardCache {
  NetworkShape shape;
  std::vector<SampleCache> samples;
};

class SequenceNetwork {
 public:
  /// Glorot-uniform weights from `rng`, forget-gate bias 1, other biases 0.
  SequenceNetwork(const NetworkShape& shape, SeededRng& rng);
  /// Explicit parameters (shape-checked).
  SequenceNetwork(const NetworkShape& shape, NetworkParams params);

  const NetworkShape& shape() const { return shape_; }
  NetworkParams& params() { return params_; }
  const NetworkParams& params() const { return params_; }

 private:
  NetworkShape shape_;
  NetworkParams params_;
};

/// Logits (N x classes) for a batch of sequences, each T x input_width.
/// `rng` is required in train mode and ignored in eval mode.
Matrix network_forward(const SequenceNetwork& net, std::span<const Matrix> batch, Mode mode,
                       SeededRng* rng = nullptr, ForwardCache* cache = nullptr);

/// Exact gradient of the batch loss given dL/dlogits from the matching forward call.
GradientSet network_backward(const SequenceNetwork& net, const ForwardCache& cache,
                             const Matrix& d_logits);

/// Split a feature row into `steps` timesteps of equal width, zero-padding the tail.
Matrix row_to_sequence(std::span<const double> features, std::size_t steps);

}  // namespace dbsadam
