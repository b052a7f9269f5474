#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aggnet/model.hpp"
#include "aggnet/params.hpp"

namespace aggnet {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers aligned with a ParamStore. One step() applies
// the accumulated gradients of every trainable entry with bias correction.
class AdamState {
 public:
  AdamState(const ParamStore& params, AdamConfig cfg);

  void step(ParamStore& params);
  long steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

struct TrainConfig {
  int epochs = 10;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool shuffle = true;
  std::uint64_t seed = 42;
  int early_stop_patience = 0;  // 0 disables early stopping
};

struct EpochLog {
  int epoch = 0;       // 1-based
  double loss = 0.0;   // mean train-mode cross-entropy
  double dev_f1 = 0.0;
  bool has_dev = false;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;      // 1-based; 0 when no dev set was used
  double best_dev_f1 = 0.0;
};

// Minibatch Adam over averaged per-example gradients. Shuffling and dropout
// draw from one seeded stream, so a fixed (model, data, config) triple trains
// bitwise identically. A non-finite loss aborts with NumericError. With a dev
// set and patience > 0, the best-epoch weights are restored at the end.
TrainResult train(Model& model, const std::vector<EncodedExample>& train_set,
                  const TrainConfig& cfg,
                  const std::vector<EncodedExample>* dev_set = nullptr);

std::vector<int> predict_classes(const Model& model,
                                 const std::vector<EncodedExample>& examples);

// One "epoch<TAB>loss<TAB>dev_weighted_f1" line per epoch; "-" when no dev set.
// %.17g formatting keeps equal runs byte-identical.
std::string format_train_log(const TrainResult& result);

}  // namespace aggnet
