#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "aggnet/embeddings.hpp"
#include "aggnet/layers.hpp"
#include "aggnet/params.hpp"
#include "aggnet/tensor.hpp"

#include "json.hpp"

namespace aggnet {

struct MaxpoolReducer {
  int window = 2;
};

struct CapsuleReducer {
  int capsules = 10;
  int dim = 16;
  int iterations = 3;
};

struct SubnetworkSpec {
  EmbeddingSource source = EmbeddingSource::kGlovePlusPlus;
  int kernel = 3;
  int filters = 128;
  std::variant<MaxpoolReducer, CapsuleReducer> reducer;
  int bilstm_units = 0;  // 0 = no recurrent stage
};

struct EnsembleConfig {
  std::string name = "custom";
  std::vector<SubnetworkSpec> subnetworks;
  std::vector<int> dense_hidden = {128};
  int num_classes = 3;
  double dropout = 0.5;
  bool train_embeddings = false;
  std::size_t max_len = 150;
  std::uint64_t seed = 42;

  bool uses_source(EmbeddingSource s) const;
};

// Built-in architectures: DL1, DL2, CN1, CN2. Unknown names raise ConfigError.
EnsembleConfig preset(const std::string& name);

nlohmann::json config_to_json(const EnsembleConfig& cfg);
EnsembleConfig config_from_json(const nlohmann::json& j);

// One input example after preprocessing and encoding. word_ids is always
// max_len long; trigram_ids only when the model has a trigram subnetwork.
struct EncodedExample {
  std::string id;
  int label = -1;
  std::vector<int> word_ids;
  std::vector<int> trigram_ids;
};

struct SnCache {
  std::vector<int> ids;
  Tensor emb;
  nn::ConvReluDropoutCache conv;
  Tensor conv_out;
  MaxpoolResult pool;
  nn::CapsuleCache capsule;
  Tensor reduced;
  nn::BilstmCache lstm;
  bool has_lstm = false;
  Tensor final_out;  // what this subnetwork contributes to the merge
};

struct ForwardCache {
  std::vector<SnCache> sns;
  Tensor merged;
  std::vector<nn::DenseCache> hidden;
  nn::DenseCache out;
  Tensor logits;
};

// The ensemble: per-subnetwork embedding -> conv/ReLU/dropout -> reducer
// (maxpool or capsule routing) -> optional biLSTM, flattened, concatenated,
// then a shared dense head ending in num_classes logits.
class Model {
 public:
  Model(EnsembleConfig cfg, std::map<EmbeddingSource, EmbeddingMatrix> embeddings);

  const EnsembleConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  std::size_t merge_width() const { return merge_width_; }
  std::size_t embedding_dim(EmbeddingSource s) const;

  // Train mode applies dropout and needs an rng; infer mode needs neither.
  Tensor forward(const EncodedExample& ex, nn::Mode mode, Rng* rng, ForwardCache* cache) const;

  // Accumulates parameter gradients for one example; cache must come from a
  // forward call on the same example.
  void backward(const Tensor& d_logits, const ForwardCache& cache);

  Tensor infer_probs(const EncodedExample& ex) const;
  int predict_class(const EncodedExample& ex) const;  // ties go to the lowest id

 private:
  void build_params();
  const Tensor& embedding_table(EmbeddingSource s) const;

  EnsembleConfig cfg_;
  ParamStore params_;
  std::size_t merge_width_ = 0;
  std::vector<std::size_t> sn_widths_;
};

// Lowest-index argmax, the tie rule used everywhere.
int argmax_class(const Tensor& probs);

}  // namespace aggnet
