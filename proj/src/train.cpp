#include "aggnet/train.hpp"

#include <cmath>
#include <cstdio>

#include "aggnet/errors.hpp"
#include "aggnet/metrics.hpp"

namespace aggnet {

AdamState::AdamState(const ParamStore& params, AdamConfig cfg) : cfg_(cfg) {
  m_.reserve(params.count());
  v_.reserve(params.count());
  for (std::size_t i = 0; i < params.count(); ++i) {
    const Param& p = params.entry(i);
    if (p.trainable) {
      m_.push_back(Tensor::zeros(p.value.shape()));
      v_.push_back(Tensor::zeros(p.value.shape()));
    } else {
      m_.emplace_back();
      v_.emplace_back();
    }
  }
}

void AdamState::step(ParamStore& params) {
  if (m_.size() != params.count()) {
    throw ConfigError("optimizer state does not match the parameter store");
  }
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

  for (std::size_t i = 0; i < params.count(); ++i) {
    Param& p = params.entry(i);
    if (!p.trainable) continue;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      double g = p.grad[k];
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
      double m_hat = m[k] / bc1;
      double v_hat = v[k] / bc2;
      p.value[k] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

std::vector<int> predict_classes(const Model& model,
                                 const std::vector<EncodedExample>& examples) {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const EncodedExample& ex : examples) out.push_back(model.predict_class(ex));
  return out;
}

namespace {

double dev_weighted_f1(const Model& model, const std::vector<EncodedExample>& dev) {
  std::vector<int> gold;
  gold.reserve(dev.size());
  for (const EncodedExample& ex : dev) gold.push_back(ex.label);
  return weighted_f1(gold, predict_classes(model, dev));
}

std::vector<Tensor> snapshot_values(const ParamStore& params) {
  std::vector<Tensor> vals;
  vals.reserve(params.count());
  for (std::size_t i = 0; i < params.count(); ++i) vals.push_back(params.entry(i).value);
  return vals;
}

void restore_values(ParamStore& params, const std::vector<Tensor>& vals) {
  for (std::size_t i = 0; i < params.count(); ++i) params.entry(i).value = vals[i];
}

}  // namespace

TrainResult train(Model& model, const std::vector<EncodedExample>& train_set,
                  const TrainConfig& cfg, const std::vector<EncodedExample>* dev_set) {
  if (train_set.empty()) throw DataError("training set is empty");
  if (cfg.epochs < 1) throw ConfigError("training needs at least one epoch");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be positive");

  AdamState adam(model.params(), AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps});
  Rng rng(cfg.seed);

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  bool early_stopping = dev_set && cfg.early_stop_patience > 0;
  std::vector<Tensor> best_values;
  double best_f1 = -1.0;
  int best_epoch = 0;
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      for (std::size_t i = order.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(order[i - 1], order[j]);
      }
    }

    double loss_sum = 0.0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      std::size_t batch_end = std::min(pos + cfg.batch_size, order.size());
      std::size_t batch_n = batch_end - pos;
      model.params().zero_grads();

      for (std::size_t b = pos; b < batch_end; ++b) {
        const EncodedExample& ex = train_set[order[b]];
        ForwardCache cache;
        Tensor logits = model.forward(ex, nn::Mode::kTrain, &rng, &cache);
        nn::CrossEntropyResult ce = nn::softmax_cross_entropy(logits, ex.label);
        if (!std::isfinite(ce.loss)) {
          throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
        }
        loss_sum += ce.loss;
        model.backward(ce.grad_logits, cache);
      }

      model.params().scale_grads(1.0 / static_cast<double>(batch_n));
      adam.step(model.params());
      pos = batch_end;
    }

    EpochLog log;
    log.epoch = epoch;
    log.loss = loss_sum / static_cast<double>(train_set.size());
    if (!std::isfinite(log.loss)) {
      throw NumericError("non-finite epoch loss at epoch " + std::to_string(epoch));
    }
    if (dev_set) {
      log.has_dev = true;
      log.dev_f1 = dev_weighted_f1(model, *dev_set);
    }
    result.log.push_back(log);

    if (dev_set) {
      if (log.dev_f1 > best_f1) {
        best_f1 = log.dev_f1;
        best_epoch = epoch;
        since_best = 0;
        if (early_stopping) best_values = snapshot_values(model.params());
      } else {
        ++since_best;
      }
      if (early_stopping && since_best >= cfg.early_stop_patience) break;
    }
  }

  if (early_stopping && !best_values.empty()) {
    restore_values(model.params(), best_values);
  }
  result.best_epoch = best_epoch;
  result.best_dev_f1 = best_f1 < 0.0 ? 0.0 : best_f1;
  return result;
}

std::string format_train_log(const TrainResult& result) {
  std::string out;
  char buf[96];
  for (const EpochLog& log : result.log) {
    std::snprintf(buf, sizeof(buf), "%d\t%.17g\t", log.epoch, log.loss);
    out += buf;
    if (log.has_dev) {
      std::snprintf(buf, sizeof(buf), "%.17g", log.dev_f1);
      out += buf;
    } else {
      out += "-";
    }
    out += '\n';
  }
  return out;
}

}  // namespace aggnet
