#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aggnet/rng.hpp"
#include "aggnet/tensor.hpp"

namespace aggnet::nn {

using aggnet::MaxpoolResult;
using aggnet::Rng;
using aggnet::Tensor;

enum class Mode { kTrain, kInfer };

// ---- Embedding -------------------------------------------------------------

// ids -> [len x d] by row lookup. Row 0 is the PAD row by convention.
Tensor embedding_forward(std::span<const int> ids, const Tensor& table);

// Scatters d_out rows into d_table. PAD (id 0) rows receive no gradient.
void embedding_backward(const Tensor& d_out, std::span<const int> ids, Tensor& d_table);

// ---- Conv + ReLU + inverted dropout ----------------------------------------

struct ConvReluDropoutCache {
  Tensor input;                    // [T x d_in]
  Tensor pre_act;                  // conv output before ReLU
  std::vector<std::uint8_t> keep;  // dropout keep mask over output cells
  double inv_keep = 1.0;
  bool dropout_active = false;
};

// Train mode draws a fresh keep mask from rng and scales kept units by
// 1/(1-p); infer mode applies no mask and no scaling. rng may be null when
// dropout is inactive (p == 0 or infer mode).
Tensor conv_relu_dropout_forward(const Tensor& x, const Tensor& kernels, const Tensor& bias,
                                 double dropout_p, Mode mode, Rng* rng,
                                 ConvReluDropoutCache* cache);

void conv_relu_dropout_backward(const Tensor& d_out, const ConvReluDropoutCache& cache,
                                const Tensor& kernels, Tensor& d_kernels, Tensor& d_bias,
                                Tensor& d_input);

// ---- Max pooling backward (forward lives in tensor.hpp) --------------------

void maxpool1d_backward(const Tensor& d_out, const MaxpoolResult& fwd, Tensor& d_input);

// ---- Squash ----------------------------------------------------------------

// v = (|s|^2 / (1 + |s|^2)) * s / |s|, with |s| = sqrt(sum s_i^2 + 1e-9).
// Maps any vector into the open unit ball, preserving direction.
Tensor squash(const Tensor& s);
Tensor squash_backward(const Tensor& s, const Tensor& d_v);

// ---- Dynamic routing -------------------------------------------------------

// Per-iteration snapshots. couplings[r] are the softmaxed weights actually used
// to form outputs[r]; logits[r] is b before that iteration's agreement update.
struct RoutingState {
  Tensor predictions;                 // u_hat [N_in x N_out x d]
  std::vector<Tensor> logits;         // per iteration [N_in x N_out]
  std::vector<Tensor> couplings;      // per iteration [N_in x N_out]
  std::vector<Tensor> weighted_sums;  // per iteration [N_out x d]
  std::vector<Tensor> outputs;        // per iteration [N_out x d]
};

// Routing-by-agreement over prediction vectors. Logits start at zero; each
// iteration softmaxes them per input capsule, forms weighted sums, squashes,
// and (except after the last iteration) adds the agreement u_hat . v.
// Returns the final output capsules [N_out x d].
Tensor dynamic_routing(const Tensor& u_hat, int iterations, RoutingState* state);

// Gradient through the fully unrolled routing loop, couplings included.
Tensor dynamic_routing_backward(const Tensor& d_v, const RoutingState& state);

// ---- Capsule layer ----------------------------------------------------------

struct CapsuleConfig {
  int capsules = 10;
  int dim = 16;
  int routing_iterations = 3;
};

struct CapsuleCache {
  Tensor input;  // [T x d_in]
  RoutingState routing;
};

// Every input row is one input capsule. The transformation W [d_in x (capsules*dim)]
// is shared across positions: u_hat[t,j,:] = x[t,:] * W[:, j*dim .. (j+1)*dim).
Tensor capsule_forward(const Tensor& x, const Tensor& w, const CapsuleConfig& cfg,
                       CapsuleCache* cache);

void capsule_backward(const Tensor& d_v, const CapsuleCache& cache, const Tensor& w,
                      Tensor& d_w, Tensor& d_x);

// ---- LSTM / biLSTM ----------------------------------------------------------

// Gate rows of w_ih [4U x d], w_hh [4U x U], b [4U] are packed i, f, g, o.
struct LstmWeights {
  const Tensor* w_ih;
  const Tensor* w_hh;
  const Tensor* b;
};

struct LstmGrads {
  Tensor* w_ih;
  Tensor* w_hh;
  Tensor* b;
};

struct LstmStepCache {
  Tensor x;      // input at this step [d]
  Tensor h_prev; // [U]
  Tensor c_prev; // [U]
  Tensor gates;  // post-activation i,f,g,o [4U]
  Tensor c;      // [U]
  Tensor h;      // [U]
};

// One LSTM step from (h_prev, c_prev). Returns the cache holding everything
// backward needs; outputs live in cache.h / cache.c.
void lstm_cell_forward(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                       const LstmWeights& w, LstmStepCache* cache);

// Accumulates parameter gradients and returns gradients for x, h_prev, c_prev
// through the output arguments.
void lstm_cell_backward(const Tensor& d_h, const Tensor& d_c, const LstmStepCache& cache,
                        const LstmWeights& w, const LstmGrads& g, Tensor& d_x,
                        Tensor& d_h_prev, Tensor& d_c_prev);

struct BilstmCache {
  std::vector<LstmStepCache> fwd;  // step t processes x[t]
  std::vector<LstmStepCache> bwd;  // step s processes x[T-1-s]
};

// Output row t is [h_fwd(t) ; h_bwd aligned at t], so the result is [T x 2U].
// Initial states are zero.
Tensor bilstm_forward(const Tensor& x, const LstmWeights& fwd, const LstmWeights& bwd,
                      std::size_t units, BilstmCache* cache);

void bilstm_backward(const Tensor& d_out, const BilstmCache& cache, const LstmWeights& fwd,
                     const LstmWeights& bwd, const LstmGrads& fwd_g, const LstmGrads& bwd_g,
                     Tensor& d_x);

// ---- Dense -----------------------------------------------------------------

struct DenseCache {
  Tensor input;    // [n]
  Tensor pre_act;  // [m]
};

// y = w [m x n] * x [n] + b, optionally followed by ReLU.
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b, bool relu,
                     DenseCache* cache);

void dense_backward(const Tensor& d_y, const DenseCache& cache, const Tensor& w, bool relu,
                    Tensor& d_w, Tensor& d_b, Tensor& d_x);

// ---- Merge -----------------------------------------------------------------

// Flattens each part row-major and concatenates in order.
Tensor concat_merge(const std::vector<const Tensor*>& parts);

// Splits d_merged back into gradients shaped like each part.
std::vector<Tensor> concat_merge_backward(const Tensor& d_merged,
                                          const std::vector<const Tensor*>& parts);

// ---- Softmax cross-entropy ---------------------------------------------------

struct CrossEntropyResult {
  double loss = 0.0;
  Tensor probs;        // softmax(logits)
  Tensor grad_logits;  // probs - onehot(target)
};

CrossEntropyResult softmax_cross_entropy(const Tensor& logits, int target);

}  // namespace aggnet::nn
