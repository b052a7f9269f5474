#include "aggnet/layers.hpp"

#include <cmath>
#include <string>

#include "aggnet/errors.hpp"

namespace aggnet::nn {

namespace {

constexpr double kSquashEps = 1e-9;

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": shape mismatch");
}

// out [m] (+)= w [m x n] * x [n]
void matvec_add(const Tensor& w, const double* x, double* out) {
  std::size_t m = w.dim(0), n = w.dim(1);
  for (std::size_t i = 0; i < m; ++i) {
    const double* wrow = w.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += wrow[j] * x[j];
    out[i] += acc;
  }
}

// out [n] += w^T [n x m] * d [m]
void matvec_transpose_add(const Tensor& w, const double* d, double* out) {
  std::size_t m = w.dim(0), n = w.dim(1);
  for (std::size_t i = 0; i < m; ++i) {
    const double* wrow = w.row(i);
    double dv = d[i];
    for (std::size_t j = 0; j < n; ++j) out[j] += dv * wrow[j];
  }
}

}  // namespace

// ---- Embedding -------------------------------------------------------------

Tensor embedding_forward(std::span<const int> ids, const Tensor& table) {
  if (table.rank() != 2) throw ShapeError("embedding table must be rank 2");
  std::size_t rows = table.dim(0), d = table.dim(1);
  Tensor out = Tensor::zeros({ids.size(), d});
  for (std::size_t t = 0; t < ids.size(); ++t) {
    int id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= rows) {
      throw DataError("embedding id " + std::to_string(id) + " out of range [0, " +
                      std::to_string(rows) + ")");
    }
    const double* src = table.row(static_cast<std::size_t>(id));
    double* dst = out.row(t);
    for (std::size_t j = 0; j < d; ++j) dst[j] = src[j];
  }
  return out;
}

void embedding_backward(const Tensor& d_out, std::span<const int> ids, Tensor& d_table) {
  if (d_out.dim(0) != ids.size() || d_out.dim(1) != d_table.dim(1)) {
    throw ShapeError("embedding backward: gradient shape mismatch");
  }
  std::size_t d = d_table.dim(1);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    int id = ids[t];
    if (id == 0) continue;  // PAD row stays fixed
    const double* src = d_out.row(t);
    double* dst = d_table.row(static_cast<std::size_t>(id));
    for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
  }
}

// ---- Conv + ReLU + dropout ---------------------------------------------------

Tensor conv_relu_dropout_forward(const Tensor& x, const Tensor& kernels, const Tensor& bias,
                                 double dropout_p, Mode mode, Rng* rng,
                                 ConvReluDropoutCache* cache) {
  if (dropout_p < 0.0 || dropout_p >= 1.0) {
    throw ConfigError("dropout probability must be in [0, 1)");
  }
  Tensor pre = conv1d_valid(x, kernels, bias);
  Tensor out = pre;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] < 0.0) out[i] = 0.0;
  }

  bool active = (mode == Mode::kTrain) && dropout_p > 0.0;
  double inv_keep = 1.0;
  std::vector<std::uint8_t> keep;
  if (active) {
    if (!rng) throw ConfigError("train-mode dropout needs an rng");
    inv_keep = 1.0 / (1.0 - dropout_p);
    keep.resize(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      bool k = !rng->bernoulli(dropout_p);
      keep[i] = k ? 1 : 0;
      out[i] = k ? out[i] * inv_keep : 0.0;
    }
  }

  if (cache) {
    cache->input = x;
    cache->pre_act = std::move(pre);
    cache->keep = std::move(keep);
    cache->inv_keep = inv_keep;
    cache->dropout_active = active;
  }
  return out;
}

void conv_relu_dropout_backward(const Tensor& d_out, const ConvReluDropoutCache& cache,
                                const Tensor& kernels, Tensor& d_kernels, Tensor& d_bias,
                                Tensor& d_input) {
  require_same_shape(d_out, cache.pre_act, "conv backward");
  require_same_shape(d_kernels, kernels, "conv backward kernels grad");

  // Undo dropout and ReLU to get the gradient at the conv output.
  Tensor d_pre = d_out;
  for (std::size_t i = 0; i < d_pre.size(); ++i) {
    double g = d_pre[i];
    if (cache.dropout_active) g = cache.keep[i] ? g * cache.inv_keep : 0.0;
    d_pre[i] = cache.pre_act[i] > 0.0 ? g : 0.0;
  }

  const Tensor& x = cache.input;
  std::size_t d_in = x.dim(1);
  std::size_t k = kernels.dim(0), d_out_ch = kernels.dim(2);
  std::size_t t_out = d_pre.dim(0);

  d_input = Tensor::zeros(x.shape());
  for (std::size_t t = 0; t < t_out; ++t) {
    const double* grow = d_pre.row(t);
    for (std::size_t o = 0; o < d_out_ch; ++o) d_bias[o] += grow[o];
    for (std::size_t i = 0; i < k; ++i) {
      const double* xrow = x.row(t + i);
      double* dxrow = d_input.row(t + i);
      double* kgrad = d_kernels.data() + i * d_in * d_out_ch;
      const double* kval = kernels.data() + i * d_in * d_out_ch;
      for (std::size_t c = 0; c < d_in; ++c) {
        double xv = xrow[c];
        double acc = 0.0;
        double* kgrow = kgrad + c * d_out_ch;
        const double* kvrow = kval + c * d_out_ch;
        for (std::size_t o = 0; o < d_out_ch; ++o) {
          kgrow[o] += xv * grow[o];
          acc += kvrow[o] * grow[o];
        }
        dxrow[c] += acc;
      }
    }
  }
}

// ---- Maxpool backward --------------------------------------------------------

void maxpool1d_backward(const Tensor& d_out, const MaxpoolResult& fwd, Tensor& d_input) {
  require_same_shape(d_out, fwd.values, "maxpool backward");
  std::size_t c_dim = fwd.values.dim(1);
  d_input = Tensor::zeros({fwd.input_rows, c_dim});
  for (std::size_t t = 0; t < fwd.values.dim(0); ++t) {
    for (std::size_t c = 0; c < c_dim; ++c) {
      d_input.at(fwd.argmax[t * c_dim + c], c) += d_out.at(t, c);
    }
  }
}

// ---- Squash ------------------------------------------------------------------

namespace {

// Shared by the standalone op and the routing loop so both see identical floats.
void squash_row(const double* s, double* v, std::size_t d) {
  double q = 0.0;
  for (std::size_t a = 0; a < d; ++a) q += s[a] * s[a];
  double n = std::sqrt(q + kSquashEps);
  double f = n / (1.0 + n * n);
  for (std::size_t a = 0; a < d; ++a) v[a] = s[a] * f;
}

void squash_row_backward(const double* s, const double* d_v, double* d_s, std::size_t d) {
  double q = 0.0, sg = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    q += s[a] * s[a];
    sg += s[a] * d_v[a];
  }
  double n = std::sqrt(q + kSquashEps);
  double denom = 1.0 + n * n;
  double f = n / denom;
  double fp = (1.0 - n * n) / (denom * denom);
  double coef = fp / n * sg;
  for (std::size_t a = 0; a < d; ++a) d_s[a] = f * d_v[a] + coef * s[a];
}

}  // namespace

Tensor squash(const Tensor& s) {
  if (s.rank() != 1) throw ShapeError("squash expects a rank-1 tensor");
  Tensor v = Tensor::zeros(s.shape());
  squash_row(s.data(), v.data(), s.size());
  return v;
}

Tensor squash_backward(const Tensor& s, const Tensor& d_v) {
  require_same_shape(s, d_v, "squash backward");
  Tensor d_s = Tensor::zeros(s.shape());
  squash_row_backward(s.data(), d_v.data(), d_s.data(), s.size());
  return d_s;
}

// ---- Dynamic routing -----------------------------------------------------------

Tensor dynamic_routing(const Tensor& u_hat, int iterations, RoutingState* state) {
  if (u_hat.rank() != 3) throw ShapeError("routing expects predictions [N_in x N_out x d]");
  if (iterations < 1) throw ConfigError("routing needs at least one iteration");
  std::size_t n_in = u_hat.dim(0), n_out = u_hat.dim(1), d = u_hat.dim(2);

  if (state) {
    *state = RoutingState{};
    state->predictions = u_hat;
  }

  Tensor b = Tensor::zeros({n_in, n_out});
  Tensor v = Tensor::zeros({n_out, d});
  for (int r = 0; r < iterations; ++r) {
    Tensor c = b;
    for (std::size_t i = 0; i < n_in; ++i) softmax_inplace(c.row(i), n_out);

    Tensor s = Tensor::zeros({n_out, d});
    for (std::size_t i = 0; i < n_in; ++i) {
      for (std::size_t j = 0; j < n_out; ++j) {
        double cij = c.at(i, j);
        double* srow = s.row(j);
        const double* urow = u_hat.row3(i, j);
        for (std::size_t a = 0; a < d; ++a) srow[a] += cij * urow[a];
      }
    }

    for (std::size_t j = 0; j < n_out; ++j) squash_row(s.row(j), v.row(j), d);

    if (state) {
      state->logits.push_back(b);
      state->couplings.push_back(c);
      state->weighted_sums.push_back(s);
      state->outputs.push_back(v);
    }

    if (r + 1 < iterations) {
      for (std::size_t i = 0; i < n_in; ++i) {
        for (std::size_t j = 0; j < n_out; ++j) {
          const double* urow = u_hat.row3(i, j);
          const double* vrow = v.row(j);
          double agree = 0.0;
          for (std::size_t a = 0; a < d; ++a) agree += urow[a] * vrow[a];
          b.at(i, j) += agree;
        }
      }
    }
  }
  return v;
}

Tensor dynamic_routing_backward(const Tensor& d_v, const RoutingState& state) {
  const Tensor& u = state.predictions;
  if (u.rank() != 3) throw ShapeError("routing state is empty");
  std::size_t n_in = u.dim(0), n_out = u.dim(1), d = u.dim(2);
  int rounds = static_cast<int>(state.couplings.size());
  if (rounds == 0) throw ShapeError("routing state holds no iterations");
  if (d_v.rank() != 2 || d_v.dim(0) != n_out || d_v.dim(1) != d) {
    throw ShapeError("routing backward: output gradient shape mismatch");
  }

  Tensor d_u = Tensor::zeros({n_in, n_out, d});
  Tensor g_b = Tensor::zeros({n_in, n_out});  // grad w.r.t. the next iteration's logits
  Tensor g_v = Tensor::zeros({n_out, d});
  Tensor g_s = Tensor::zeros({n_out, d});
  Tensor g_c = Tensor::zeros({n_in, n_out});

  for (int r = rounds - 1; r >= 0; --r) {
    const Tensor& c_r = state.couplings[static_cast<std::size_t>(r)];
    const Tensor& s_r = state.weighted_sums[static_cast<std::size_t>(r)];
    const Tensor& v_r = state.outputs[static_cast<std::size_t>(r)];

    bool has_agreement = r + 1 < rounds;  // this iteration fed the next logits
    if (r == rounds - 1) {
      g_v = d_v;
    } else {
      g_v.fill(0.0);
    }
    if (has_agreement) {
      // b_{r+1}[i,j] = b_r[i,j] + u[i,j,:] . v_r[j,:]
      for (std::size_t i = 0; i < n_in; ++i) {
        for (std::size_t j = 0; j < n_out; ++j) {
          double gb = g_b.at(i, j);
          if (gb == 0.0) continue;
          const double* urow = u.row3(i, j);
          const double* vrow = v_r.row(j);
          double* gvrow = g_v.row(j);
          double* durow = d_u.row3(i, j);
          for (std::size_t a = 0; a < d; ++a) {
            gvrow[a] += gb * urow[a];
            durow[a] += gb * vrow[a];
          }
        }
      }
    }

    for (std::size_t j = 0; j < n_out; ++j) {
      squash_row_backward(s_r.row(j), g_v.row(j), g_s.row(j), d);
    }

    g_c.fill(0.0);
    for (std::size_t i = 0; i < n_in; ++i) {
      for (std::size_t j = 0; j < n_out; ++j) {
        double cij = c_r.at(i, j);
        const double* urow = u.row3(i, j);
        const double* gsrow = g_s.row(j);
        double* durow = d_u.row3(i, j);
        double acc = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
          durow[a] += cij * gsrow[a];
          acc += urow[a] * gsrow[a];
        }
        g_c.at(i, j) = acc;
      }
    }

    // Row-wise softmax backward from couplings to logits, plus the identity
    // path carried down from later iterations.
    for (std::size_t i = 0; i < n_in; ++i) {
      const double* crow = c_r.row(i);
      const double* gcrow = g_c.row(i);
      double inner = 0.0;
      for (std::size_t j = 0; j < n_out; ++j) inner += gcrow[j] * crow[j];
      double* gbrow = g_b.row(i);
      for (std::size_t j = 0; j < n_out; ++j) {
        double from_softmax = crow[j] * (gcrow[j] - inner);
        gbrow[j] = (has_agreement ? gbrow[j] : 0.0) + from_softmax;
      }
    }
  }
  return d_u;
}

// ---- Capsule layer --------------------------------------------------------------

Tensor capsule_forward(const Tensor& x, const Tensor& w, const CapsuleConfig& cfg,
                       CapsuleCache* cache) {
  if (x.rank() != 2) throw ShapeError("capsule input must be rank 2 [T x d_in]");
  if (cfg.capsules < 1 || cfg.dim < 1) throw ConfigError("capsule layer needs positive sizes");
  std::size_t caps = static_cast<std::size_t>(cfg.capsules);
  std::size_t dim = static_cast<std::size_t>(cfg.dim);
  if (w.rank() != 2 || w.dim(0) != x.dim(1) || w.dim(1) != caps * dim) {
    throw ShapeError("capsule weights must be [d_in x capsules*dim]");
  }

  Tensor flat = matmul(x, w);  // [T x caps*dim], row-major == [T x caps x dim]
  std::vector<double> vals(flat.values().begin(), flat.values().end());
  Tensor u_hat = Tensor::from({x.dim(0), caps, dim}, std::move(vals));

  RoutingState local;
  RoutingState* st = cache ? &cache->routing : &local;
  Tensor v = dynamic_routing(u_hat, cfg.routing_iterations, st);
  if (cache) cache->input = x;
  return v;
}

void capsule_backward(const Tensor& d_v, const CapsuleCache& cache, const Tensor& w,
                      Tensor& d_w, Tensor& d_x) {
  Tensor d_u = dynamic_routing_backward(d_v, cache.routing);  // [T x caps x dim]
  const Tensor& x = cache.input;
  std::size_t t_len = x.dim(0), d_in = x.dim(1);
  std::size_t width = d_u.dim(1) * d_u.dim(2);
  require_same_shape(d_w, w, "capsule backward weight grad");

  d_x = Tensor::zeros(x.shape());
  const double* du = d_u.data();
  for (std::size_t t = 0; t < t_len; ++t) {
    const double* durow = du + t * width;
    const double* xrow = x.row(t);
    double* dxrow = d_x.row(t);
    for (std::size_t c = 0; c < d_in; ++c) {
      const double* wrow = w.row(c);
      double* dwrow = d_w.row(c);
      double xv = xrow[c];
      double acc = 0.0;
      for (std::size_t m = 0; m < width; ++m) {
        dwrow[m] += xv * durow[m];
        acc += wrow[m] * durow[m];
      }
      dxrow[c] += acc;
    }
  }
}

// ---- LSTM --------------------------------------------------------------------

namespace {

void check_lstm_weights(const LstmWeights& w, std::size_t units, std::size_t d_in) {
  if (!w.w_ih || !w.w_hh || !w.b) throw ConfigError("lstm weights not set");
  if (w.w_ih->rank() != 2 || w.w_ih->dim(0) != 4 * units || w.w_ih->dim(1) != d_in) {
    throw ShapeError("lstm w_ih must be [4U x d_in]");
  }
  if (w.w_hh->rank() != 2 || w.w_hh->dim(0) != 4 * units || w.w_hh->dim(1) != units) {
    throw ShapeError("lstm w_hh must be [4U x U]");
  }
  if (w.b->rank() != 1 || w.b->dim(0) != 4 * units) throw ShapeError("lstm bias must be [4U]");
}

}  // namespace

void lstm_cell_forward(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                       const LstmWeights& w, LstmStepCache* cache) {
  std::size_t units = h_prev.dim(0);
  check_lstm_weights(w, units, x.dim(0));

  Tensor z = *w.b;
  matvec_add(*w.w_ih, x.data(), z.data());
  matvec_add(*w.w_hh, h_prev.data(), z.data());

  Tensor gates = Tensor::zeros({4 * units});
  for (std::size_t u = 0; u < units; ++u) {
    gates[u] = sigmoid(z[u]);                          // i
    gates[units + u] = sigmoid(z[units + u]);          // f
    gates[2 * units + u] = std::tanh(z[2 * units + u]);  // g
    gates[3 * units + u] = sigmoid(z[3 * units + u]);  // o
  }

  Tensor c = Tensor::zeros({units});
  Tensor h = Tensor::zeros({units});
  for (std::size_t u = 0; u < units; ++u) {
    c[u] = gates[units + u] * c_prev[u] + gates[u] * gates[2 * units + u];
    h[u] = gates[3 * units + u] * std::tanh(c[u]);
  }

  cache->x = x;
  cache->h_prev = h_prev;
  cache->c_prev = c_prev;
  cache->gates = std::move(gates);
  cache->c = std::move(c);
  cache->h = std::move(h);
}

void lstm_cell_backward(const Tensor& d_h, const Tensor& d_c, const LstmStepCache& cache,
                        const LstmWeights& w, const LstmGrads& g, Tensor& d_x,
                        Tensor& d_h_prev, Tensor& d_c_prev) {
  std::size_t units = cache.h.dim(0);
  const Tensor& gates = cache.gates;

  Tensor d_z = Tensor::zeros({4 * units});
  d_c_prev = Tensor::zeros({units});
  for (std::size_t u = 0; u < units; ++u) {
    double i = gates[u];
    double f = gates[units + u];
    double gg = gates[2 * units + u];
    double o = gates[3 * units + u];
    double tc = std::tanh(cache.c[u]);

    double dc = d_c[u] + d_h[u] * o * (1.0 - tc * tc);
    double d_o = d_h[u] * tc;

    d_z[u] = dc * gg * i * (1.0 - i);
    d_z[units + u] = dc * cache.c_prev[u] * f * (1.0 - f);
    d_z[2 * units + u] = dc * i * (1.0 - gg * gg);
    d_z[3 * units + u] = d_o * o * (1.0 - o);
    d_c_prev[u] = dc * f;
  }

  for (std::size_t r = 0; r < 4 * units; ++r) {
    double dz = d_z[r];
    if (dz == 0.0) continue;
    double* wih_g = g.w_ih->row(r);
    const double* xv = cache.x.data();
    for (std::size_t j = 0; j < cache.x.dim(0); ++j) wih_g[j] += dz * xv[j];
    double* whh_g = g.w_hh->row(r);
    const double* hv = cache.h_prev.data();
    for (std::size_t j = 0; j < units; ++j) whh_g[j] += dz * hv[j];
    (*g.b)[r] += dz;
  }

  d_x = Tensor::zeros(cache.x.shape());
  d_h_prev = Tensor::zeros({units});
  matvec_transpose_add(*w.w_ih, d_z.data(), d_x.data());
  matvec_transpose_add(*w.w_hh, d_z.data(), d_h_prev.data());
}

Tensor bilstm_forward(const Tensor& x, const LstmWeights& fwd, const LstmWeights& bwd,
                      std::size_t units, BilstmCache* cache) {
  if (x.rank() != 2) throw ShapeError("bilstm input must be rank 2 [T x d]");
  std::size_t t_len = x.dim(0), d = x.dim(1);
  check_lstm_weights(fwd, units, d);
  check_lstm_weights(bwd, units, d);

  BilstmCache local;
  BilstmCache* cc = cache ? cache : &local;
  cc->fwd.assign(t_len, LstmStepCache{});
  cc->bwd.assign(t_len, LstmStepCache{});

  Tensor out = Tensor::zeros({t_len, 2 * units});

  Tensor h = Tensor::zeros({units});
  Tensor c = Tensor::zeros({units});
  for (std::size_t t = 0; t < t_len; ++t) {
    Tensor xt = Tensor::zeros({d});
    for (std::size_t j = 0; j < d; ++j) xt[j] = x.at(t, j);
    lstm_cell_forward(xt, h, c, fwd, &cc->fwd[t]);
    h = cc->fwd[t].h;
    c = cc->fwd[t].c;
    double* orow = out.row(t);
    for (std::size_t u = 0; u < units; ++u) orow[u] = h[u];
  }

  h.fill(0.0);
  c.fill(0.0);
  for (std::size_t s = 0; s < t_len; ++s) {
    std::size_t t = t_len - 1 - s;
    Tensor xt = Tensor::zeros({d});
    for (std::size_t j = 0; j < d; ++j) xt[j] = x.at(t, j);
    lstm_cell_forward(xt, h, c, bwd, &cc->bwd[s]);
    h = cc->bwd[s].h;
    c = cc->bwd[s].c;
    double* orow = out.row(t);
    for (std::size_t u = 0; u < units; ++u) orow[units + u] = h[u];
  }
  return out;
}

void bilstm_backward(const Tensor& d_out, const BilstmCache& cache, const LstmWeights& fwd,
                     const LstmWeights& bwd, const LstmGrads& fwd_g, const LstmGrads& bwd_g,
                     Tensor& d_x) {
  std::size_t t_len = cache.fwd.size();
  if (t_len == 0) throw ShapeError("bilstm cache is empty");
  std::size_t units = cache.fwd[0].h.dim(0);
  std::size_t d = cache.fwd[0].x.dim(0);
  if (d_out.rank() != 2 || d_out.dim(0) != t_len || d_out.dim(1) != 2 * units) {
    throw ShapeError("bilstm backward: gradient shape mismatch");
  }

  d_x = Tensor::zeros({t_len, d});

  Tensor d_h = Tensor::zeros({units});
  Tensor d_c = Tensor::zeros({units});
  for (std::size_t back = 0; back < t_len; ++back) {
    std::size_t t = t_len - 1 - back;
    const double* orow = d_out.row(t);
    for (std::size_t u = 0; u < units; ++u) d_h[u] += orow[u];
    Tensor d_xt, d_h_prev, d_c_prev;
    lstm_cell_backward(d_h, d_c, cache.fwd[t], fwd, fwd_g, d_xt, d_h_prev, d_c_prev);
    double* dxrow = d_x.row(t);
    for (std::size_t j = 0; j < d; ++j) dxrow[j] += d_xt[j];
    d_h = std::move(d_h_prev);
    d_c = std::move(d_c_prev);
  }

  d_h.fill(0.0);
  d_c.fill(0.0);
  for (std::size_t back = 0; back < t_len; ++back) {
    std::size_t s = t_len - 1 - back;     // reverse order over backward-direction steps
    std::size_t t = t_len - 1 - s;        // original position that step consumed
    const double* orow = d_out.row(t);
    for (std::size_t u = 0; u < units; ++u) d_h[u] += orow[units + u];
    Tensor d_xt, d_h_prev, d_c_prev;
    lstm_cell_backward(d_h, d_c, cache.bwd[s], bwd, bwd_g, d_xt, d_h_prev, d_c_prev);
    double* dxrow = d_x.row(t);
    for (std::size_t j = 0; j < d; ++j) dxrow[j] += d_xt[j];
    d_h = std::move(d_h_prev);
    d_c = std::move(d_c_prev);
  }
}

// ---- Dense --------------------------------------------------------------------

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b, bool relu,
                     DenseCache* cache) {
  if (x.rank() != 1) throw ShapeError("dense input must be rank 1");
  if (w.rank() != 2 || w.dim(1) != x.dim(0)) throw ShapeError("dense weights must be [m x n]");
  if (b.rank() != 1 || b.dim(0) != w.dim(0)) throw ShapeError("dense bias must be [m]");

  Tensor pre = b;
  matvec_add(w, x.data(), pre.data());
  Tensor out = pre;
  if (relu) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i] < 0.0) out[i] = 0.0;
    }
  }
  if (cache) {
    cache->input = x;
    cache->pre_act = std::move(pre);
  }
  return out;
}

void dense_backward(const Tensor& d_y, const DenseCache& cache, const Tensor& w, bool relu,
                    Tensor& d_w, Tensor& d_b, Tensor& d_x) {
  require_same_shape(d_y, cache.pre_act, "dense backward");
  std::size_t m = w.dim(0), n = w.dim(1);

  Tensor d_z = d_y;
  if (relu) {
    for (std::size_t i = 0; i < m; ++i) {
      if (cache.pre_act[i] <= 0.0) d_z[i] = 0.0;
    }
  }

  d_x = Tensor::zeros({n});
  for (std::size_t i = 0; i < m; ++i) {
    double dz = d_z[i];
    d_b[i] += dz;
    if (dz == 0.0) continue;
    double* dwrow = d_w.row(i);
    const double* xv = cache.input.data();
    for (std::size_t j = 0; j < n; ++j) dwrow[j] += dz * xv[j];
  }
  matvec_transpose_add(w, d_z.data(), d_x.data());
}

// ---- Merge --------------------------------------------------------------------

Tensor concat_merge(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw ShapeError("concat_merge needs at least one part");
  std::size_t total = 0;
  for (const Tensor* p : parts) total += p->size();
  Tensor out = Tensor::zeros({total});
  std::size_t off = 0;
  for (const Tensor* p : parts) {
    for (std::size_t i = 0; i < p->size(); ++i) out[off + i] = (*p)[i];
    off += p->size();
  }
  return out;
}

std::vector<Tensor> concat_merge_backward(const Tensor& d_merged,
                                          const std::vector<const Tensor*>& parts) {
  std::size_t total = 0;
  for (const Tensor* p : parts) total += p->size();
  if (d_merged.size() != total) throw ShapeError("concat backward: size mismatch");

  std::vector<Tensor> grads;
  grads.reserve(parts.size());
  std::size_t off = 0;
  for (const Tensor* p : parts) {
    Tensor g = Tensor::zeros(p->shape());
    for (std::size_t i = 0; i < p->size(); ++i) g[i] = d_merged[off + i];
    off += p->size();
    grads.push_back(std::move(g));
  }
  return grads;
}

// ---- Softmax cross-entropy -------------------------------------------------------

CrossEntropyResult softmax_cross_entropy(const Tensor& logits, int target) {
  if (logits.rank() != 1) throw ShapeError("cross-entropy expects rank-1 logits");
  std::size_t n = logits.size();
  if (target < 0 || static_cast<std::size_t>(target) >= n) {
    throw DataError("cross-entropy target " + std::to_string(target) + " out of range");
  }

  double mx = logits[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(logits[i] - mx);

  CrossEntropyResult res;
  res.loss = std::log(sum) - (logits[static_cast<std::size_t>(target)] - mx);
  res.probs = logits;
  softmax_inplace(res.probs.data(), n);
  res.grad_logits = res.probs;
  res.grad_logits[static_cast<std::size_t>(target)] -= 1.0;
  return res;
}

}  // namespace aggnet::nn
