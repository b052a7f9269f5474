#include "aggnet/model.hpp"

#include <algorithm>

#include "aggnet/errors.hpp"

namespace aggnet {

bool EnsembleConfig::uses_source(EmbeddingSource s) const {
  return std::any_of(subnetworks.begin(), subnetworks.end(),
                     [&](const SubnetworkSpec& sn) { return sn.source == s; });
}

EnsembleConfig preset(const std::string& name) {
  EnsembleConfig cfg;
  cfg.name = name;
  if (name == "DL1") {
    for (int k : {3, 5, 7}) {
      SubnetworkSpec sn;
      sn.source = EmbeddingSource::kGlovePlusPlus;
      sn.kernel = k;
      sn.reducer = MaxpoolReducer{2};
      cfg.subnetworks.push_back(sn);
    }
  } else if (name == "DL2") {
    for (EmbeddingSource src : {EmbeddingSource::kGlovePlusPlus, EmbeddingSource::kAggression,
                                EmbeddingSource::kTrigram}) {
      for (int k : {3, 5, 7}) {
        SubnetworkSpec sn;
        sn.source = src;
        sn.kernel = k;
        sn.reducer = MaxpoolReducer{2};
        sn.bilstm_units = 200;
        cfg.subnetworks.push_back(sn);
      }
    }
  } else if (name == "CN1" || name == "CN2") {
    for (int k : {3, 4, 5}) {
      SubnetworkSpec sn;
      sn.source = EmbeddingSource::kGlovePlusPlus;
      sn.kernel = k;
      sn.reducer = CapsuleReducer{10, 16, 3};
      if (name == "CN2") sn.bilstm_units = 300;
      cfg.subnetworks.push_back(sn);
    }
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  return cfg;
}

nlohmann::json config_to_json(const EnsembleConfig& cfg) {
  nlohmann::json j;
  j["name"] = cfg.name;
  j["dense_hidden"] = cfg.dense_hidden;
  j["num_classes"] = cfg.num_classes;
  j["dropout"] = cfg.dropout;
  j["train_embeddings"] = cfg.train_embeddings;
  j["max_len"] = cfg.max_len;
  j["seed"] = cfg.seed;
  j["subnetworks"] = nlohmann::json::array();
  for (const SubnetworkSpec& sn : cfg.subnetworks) {
    nlohmann::json s;
    s["source"] = embedding_source_name(sn.source);
    s["kernel"] = sn.kernel;
    s["filters"] = sn.filters;
    s["bilstm_units"] = sn.bilstm_units;
    if (const auto* mp = std::get_if<MaxpoolReducer>(&sn.reducer)) {
      s["reducer"] = {{"type", "maxpool"}, {"window", mp->window}};
    } else {
      const auto& cp = std::get<CapsuleReducer>(sn.reducer);
      s["reducer"] = {{"type", "capsule"},
                      {"capsules", cp.capsules},
                      {"dim", cp.dim},
                      {"iterations", cp.iterations}};
    }
    j["subnetworks"].push_back(std::move(s));
  }
  return j;
}

EnsembleConfig config_from_json(const nlohmann::json& j) {
  try {
    EnsembleConfig cfg;
    cfg.name = j.at("name").get<std::string>();
    cfg.dense_hidden = j.at("dense_hidden").get<std::vector<int>>();
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.dropout = j.at("dropout").get<double>();
    cfg.train_embeddings = j.at("train_embeddings").get<bool>();
    cfg.max_len = j.at("max_len").get<std::size_t>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("subnetworks")) {
      SubnetworkSpec sn;
      sn.source = parse_embedding_source(s.at("source").get<std::string>());
      sn.kernel = s.at("kernel").get<int>();
      sn.filters = s.at("filters").get<int>();
      sn.bilstm_units = s.at("bilstm_units").get<int>();
      const auto& r = s.at("reducer");
      std::string type = r.at("type").get<std::string>();
      if (type == "maxpool") {
        sn.reducer = MaxpoolReducer{r.at("window").get<int>()};
      } else if (type == "capsule") {
        sn.reducer = CapsuleReducer{r.at("capsules").get<int>(), r.at("dim").get<int>(),
                                    r.at("iterations").get<int>()};
      } else {
        throw ConfigError("unknown reducer type: " + type);
      }
      cfg.subnetworks.push_back(sn);
    }
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad model config: ") + e.what());
  }
}

namespace {

std::string sn_prefix(std::size_t i) { return "sn" + std::to_string(i); }

}  // namespace

Model::Model(EnsembleConfig cfg, std::map<EmbeddingSource, EmbeddingMatrix> embeddings)
    : cfg_(std::move(cfg)) {
  if (cfg_.subnetworks.empty()) throw ConfigError("model needs at least one subnetwork");
  if (cfg_.num_classes != 3) throw ConfigError("the classifier head is fixed at 3 classes");
  if (cfg_.dropout < 0.0 || cfg_.dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
  if (cfg_.max_len < 1) throw ConfigError("max_len must be positive");

  // Register embedding tables first, in a fixed source order.
  for (EmbeddingSource src : {EmbeddingSource::kGlovePlusPlus, EmbeddingSource::kAggression,
                              EmbeddingSource::kTrigram}) {
    if (!cfg_.uses_source(src)) continue;
    auto it = embeddings.find(src);
    if (it == embeddings.end()) {
      throw ConfigError(std::string("missing embedding matrix for source ") +
                        embedding_source_name(src));
    }
    EmbeddingMatrix& m = it->second;
    if (m.table.rank() != 2 || m.table.dim(0) < 2 || m.table.dim(1) < 1) {
      throw ConfigError("embedding table must be [|V| x dim] with |V| >= 2");
    }
    params_.add(std::string("embedding.") + embedding_source_name(src), std::move(m.table),
                cfg_.train_embeddings);
  }

  build_params();
}

const Tensor& Model::embedding_table(EmbeddingSource s) const {
  return params_.at(std::string("embedding.") + embedding_source_name(s)).value;
}

std::size_t Model::embedding_dim(EmbeddingSource s) const {
  return embedding_table(s).dim(1);
}

void Model::build_params() {
  Rng rng(cfg_.seed);
  merge_width_ = 0;
  sn_widths_.clear();

  for (std::size_t i = 0; i < cfg_.subnetworks.size(); ++i) {
    const SubnetworkSpec& sn = cfg_.subnetworks[i];
    if (sn.kernel < 1) throw ConfigError("kernel size must be positive");
    if (static_cast<std::size_t>(sn.kernel) > cfg_.max_len) {
      throw ConfigError("kernel size " + std::to_string(sn.kernel) +
                        " exceeds sequence length " + std::to_string(cfg_.max_len));
    }
    if (sn.filters < 1) throw ConfigError("filter count must be positive");
    std::size_t d_emb = embedding_dim(sn.source);
    std::size_t conv_t = cfg_.max_len - static_cast<std::size_t>(sn.kernel) + 1;

    std::string p = sn_prefix(i);
    params_.add(p + ".conv.kernels",
                Tensor::glorot({static_cast<std::size_t>(sn.kernel), d_emb,
                                static_cast<std::size_t>(sn.filters)},
                               rng));
    params_.add(p + ".conv.bias", Tensor::zeros({static_cast<std::size_t>(sn.filters)}));

    std::size_t red_rows = 0, red_cols = 0;
    if (const auto* mp = std::get_if<MaxpoolReducer>(&sn.reducer)) {
      if (mp->window != 2 && mp->window != 3) throw ConfigError("pool window must be 2 or 3");
      if (conv_t < static_cast<std::size_t>(mp->window)) {
        throw ConfigError("conv output too short for pooling");
      }
      red_rows = conv_t / static_cast<std::size_t>(mp->window);
      red_cols = static_cast<std::size_t>(sn.filters);
    } else {
      const auto& cp = std::get<CapsuleReducer>(sn.reducer);
      if (cp.capsules < 1 || cp.dim < 1) throw ConfigError("capsule sizes must be positive");
      if (cp.iterations < 1) throw ConfigError("routing needs at least one iteration");
      std::size_t width = static_cast<std::size_t>(cp.capsules) *
                          static_cast<std::size_t>(cp.dim);
      params_.add(p + ".capsule.w",
                  Tensor::glorot({static_cast<std::size_t>(sn.filters), width},
                                 static_cast<std::size_t>(sn.filters), width, rng));
      red_rows = static_cast<std::size_t>(cp.capsules);
      red_cols = static_cast<std::size_t>(cp.dim);
    }

    std::size_t final_width = red_rows * red_cols;
    if (sn.bilstm_units > 0) {
      std::size_t u = static_cast<std::size_t>(sn.bilstm_units);
      for (const char* dir : {"fwd", "bwd"}) {
        std::string q = p + ".bilstm." + dir;
        params_.add(q + ".w_ih", Tensor::glorot({4 * u, red_cols}, rng));
        params_.add(q + ".w_hh", Tensor::glorot({4 * u, u}, rng));
        Tensor b = Tensor::zeros({4 * u});
        for (std::size_t r = u; r < 2 * u; ++r) b[r] = 1.0;  // forget gate bias
        params_.add(q + ".b", std::move(b));
      }
      final_width = red_rows * 2 * u;
    }

    sn_widths_.push_back(final_width);
    merge_width_ += final_width;
  }

  std::size_t prev = merge_width_;
  for (std::size_t h = 0; h < cfg_.dense_hidden.size(); ++h) {
    int width = cfg_.dense_hidden[h];
    if (width < 1) throw ConfigError("dense hidden width must be positive");
    std::string q = "head" + std::to_string(h);
    params_.add(q + ".w", Tensor::glorot({static_cast<std::size_t>(width), prev}, rng));
    params_.add(q + ".b", Tensor::zeros({static_cast<std::size_t>(width)}));
    prev = static_cast<std::size_t>(width);
  }
  params_.add("out.w", Tensor::glorot({static_cast<std::size_t>(cfg_.num_classes), prev}, rng));
  params_.add("out.b", Tensor::zeros({static_cast<std::size_t>(cfg_.num_classes)}));
}

Tensor Model::forward(const EncodedExample& ex, nn::Mode mode, Rng* rng,
                      ForwardCache* cache) const {
  ForwardCache local;
  ForwardCache& fc = cache ? *cache : local;
  fc.sns.assign(cfg_.subnetworks.size(), SnCache{});

  for (std::size_t i = 0; i < cfg_.subnetworks.size(); ++i) {
    const SubnetworkSpec& sn = cfg_.subnetworks[i];
    SnCache& sc = fc.sns[i];
    const std::vector<int>& ids =
        sn.source == EmbeddingSource::kTrigram ? ex.trigram_ids : ex.word_ids;
    if (ids.size() != cfg_.max_len) {
      throw ShapeError("encoded example length " + std::to_string(ids.size()) +
                       " does not match model max_len " + std::to_string(cfg_.max_len));
    }
    sc.ids = ids;

    std::string p = sn_prefix(i);
    sc.emb = nn::embedding_forward(ids, embedding_table(sn.source));
    sc.conv_out = nn::conv_relu_dropout_forward(sc.emb, params_.at(p + ".conv.kernels").value,
                                                params_.at(p + ".conv.bias").value,
                                                cfg_.dropout, mode, rng, &sc.conv);

    if (const auto* mp = std::get_if<MaxpoolReducer>(&sn.reducer)) {
      sc.pool = maxpool1d(sc.conv_out, static_cast<std::size_t>(mp->window));
      sc.reduced = sc.pool.values;
    } else {
      const auto& cp = std::get<CapsuleReducer>(sn.reducer);
      nn::CapsuleConfig cc{cp.capsules, cp.dim, cp.iterations};
      sc.reduced = nn::capsule_forward(sc.conv_out, params_.at(p + ".capsule.w").value, cc,
                                       &sc.capsule);
    }

    if (sn.bilstm_units > 0) {
      sc.has_lstm = true;
      std::string q = p + ".bilstm.";
      nn::LstmWeights fwd{&params_.at(q + "fwd.w_ih").value, &params_.at(q + "fwd.w_hh").value,
                          &params_.at(q + "fwd.b").value};
      nn::LstmWeights bwd{&params_.at(q + "bwd.w_ih").value, &params_.at(q + "bwd.w_hh").value,
                          &params_.at(q + "bwd.b").value};
      sc.final_out = nn::bilstm_forward(sc.reduced, fwd, bwd,
                                        static_cast<std::size_t>(sn.bilstm_units), &sc.lstm);
    } else {
      sc.final_out = sc.reduced;
    }
  }

  std::vector<const Tensor*> parts;
  parts.reserve(fc.sns.size());
  for (const SnCache& sc : fc.sns) parts.push_back(&sc.final_out);
  fc.merged = nn::concat_merge(parts);

  Tensor x = fc.merged;
  fc.hidden.assign(cfg_.dense_hidden.size(), nn::DenseCache{});
  for (std::size_t h = 0; h < cfg_.dense_hidden.size(); ++h) {
    std::string q = "head" + std::to_string(h);
    x = nn::dense_forward(x, params_.at(q + ".w").value, params_.at(q + ".b").value, true,
                          &fc.hidden[h]);
  }
  fc.logits = nn::dense_forward(x, params_.at("out.w").value, params_.at("out.b").value, false,
                                &fc.out);
  return fc.logits;
}

void Model::backward(const Tensor& d_logits, const ForwardCache& cache) {
  Tensor d = d_logits;
  {
    Param& w = params_.at("out.w");
    Param& b = params_.at("out.b");
    Tensor d_x;
    nn::dense_backward(d, cache.out, w.value, false, w.grad, b.grad, d_x);
    d = std::move(d_x);
  }
  for (std::size_t h = cfg_.dense_hidden.size(); h-- > 0;) {
    std::string q = "head" + std::to_string(h);
    Param& w = params_.at(q + ".w");
    Param& b = params_.at(q + ".b");
    Tensor d_x;
    nn::dense_backward(d, cache.hidden[h], w.value, true, w.grad, b.grad, d_x);
    d = std::move(d_x);
  }

  std::vector<const Tensor*> parts;
  parts.reserve(cache.sns.size());
  for (const SnCache& sc : cache.sns) parts.push_back(&sc.final_out);
  std::vector<Tensor> part_grads = nn::concat_merge_backward(d, parts);

  for (std::size_t i = 0; i < cfg_.subnetworks.size(); ++i) {
    const SubnetworkSpec& sn = cfg_.subnetworks[i];
    const SnCache& sc = cache.sns[i];
    std::string p = sn_prefix(i);

    Tensor d_reduced;
    if (sc.has_lstm) {
      std::string q = p + ".bilstm.";
      nn::LstmWeights fwd{&params_.at(q + "fwd.w_ih").value, &params_.at(q + "fwd.w_hh").value,
                          &params_.at(q + "fwd.b").value};
      nn::LstmWeights bwd{&params_.at(q + "bwd.w_ih").value, &params_.at(q + "bwd.w_hh").value,
                          &params_.at(q + "bwd.b").value};
      nn::LstmGrads fwd_g{&params_.at(q + "fwd.w_ih").grad, &params_.at(q + "fwd.w_hh").grad,
                          &params_.at(q + "fwd.b").grad};
      nn::LstmGrads bwd_g{&params_.at(q + "bwd.w_ih").grad, &params_.at(q + "bwd.w_hh").grad,
                          &params_.at(q + "bwd.b").grad};
      nn::bilstm_backward(part_grads[i], sc.lstm, fwd, bwd, fwd_g, bwd_g, d_reduced);
    } else {
      d_reduced = part_grads[i];
    }

    Tensor d_conv;
    if (std::holds_alternative<MaxpoolReducer>(sn.reducer)) {
      nn::maxpool1d_backward(d_reduced, sc.pool, d_conv);
    } else {
      Param& w = params_.at(p + ".capsule.w");
      nn::capsule_backward(d_reduced, sc.capsule, w.value, w.grad, d_conv);
    }

    Tensor d_emb;
    Param& k = params_.at(p + ".conv.kernels");
    Param& b = params_.at(p + ".conv.bias");
    nn::conv_relu_dropout_backward(d_conv, sc.conv, k.value, k.grad, b.grad, d_emb);

    if (cfg_.train_embeddings) {
      Param& table = params_.at(std::string("embedding.") + embedding_source_name(sn.source));
      nn::embedding_backward(d_emb, sc.ids, table.grad);
    }
  }
}

Tensor Model::infer_probs(const EncodedExample& ex) const {
  Tensor logits = forward(ex, nn::Mode::kInfer, nullptr, nullptr);
  return softmax(logits);
}

int Model::predict_class(const EncodedExample& ex) const {
  return argmax_class(infer_probs(ex));
}

int argmax_class(const Tensor& probs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return static_cast<int>(best);
}

}  // namespace aggnet
