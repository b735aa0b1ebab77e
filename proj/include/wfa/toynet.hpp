#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wfa/alignment.hpp"
#include "wfa/error.hpp"
#include "wfa/geometry.hpp"
#include "wfa/matrix.hpp"
#include "wfa/point_io.hpp"
#include "wfa/rng.hpp"
#include "wfa/rotations.hpp"
#include "wfa/sampling.hpp"
#include "wfa/shapes.hpp"

namespace wfa::net {

// Point classifier: FPS query points -> aligned neighborhoods -> shared
// per-point MLP (tanh) -> per-group max-pool -> global max-pool -> linear
// classifier. With use_wfa off, raw centered coordinates feed the first
// layer instead of aligned ones (the ablation baseline).
struct NetworkConfig {
  std::size_t num_queries = 32;
  std::size_t neighbors_per_query = 16;
  double radius = 0.35;
  std::vector<std::size_t> hidden_widths = {64, 128};
  std::size_t num_classes = 5;
  AxisOrder axis_order;
  bool use_wfa = true;
  Seed seed{1};
  WfaConfig wfa;
};

inline void validate_config(const NetworkConfig& cfg) {
  if (cfg.num_queries < 1) throw BadCount("config: num_queries must be at least 1");
  if (cfg.neighbors_per_query < 1) throw BadCount("config: neighbors_per_query must be at least 1");
  if (!(cfg.radius > 0.0)) throw BadRadius("config: radius must be positive");
  if (cfg.hidden_widths.empty()) throw BadCount("config: need at least one hidden layer");
  if (cfg.hidden_widths[0] < 3) throw BadCount("config: first hidden width must be at least 3");
  for (std::size_t w : cfg.hidden_widths)
    if (w < 1) throw BadCount("config: hidden widths must be positive");
  if (cfg.num_classes < 1) throw BadCount("config: num_classes must be at least 1");
}

struct NetworkParams {
  LayerWeights first_layer;                   // 3 -> hidden_widths[0]
  std::vector<Matrix> hidden_w;               // hidden_widths[i] x hidden_widths[i+1]
  std::vector<std::vector<double>> hidden_b;
  Matrix classifier_w;                        // hidden_widths.back() x num_classes
  std::vector<double> classifier_b;
};

inline void validate_params(const NetworkParams& p, const NetworkConfig& cfg) {
  const auto& w = cfg.hidden_widths;
  if (p.first_layer.w.size() != w[0] || p.first_layer.bias.size() != w[0])
    throw ShapeMismatch("params: first layer width mismatch");
  if (p.hidden_w.size() != w.size() - 1 || p.hidden_b.size() != w.size() - 1)
    throw ShapeMismatch("params: hidden layer count mismatch");
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    if (p.hidden_w[i].rows != w[i] || p.hidden_w[i].cols != w[i + 1] ||
        p.hidden_b[i].size() != w[i + 1])
      throw ShapeMismatch("params: hidden layer shape mismatch");
  }
  if (p.classifier_w.rows != w.back() || p.classifier_w.cols != cfg.num_classes ||
      p.classifier_b.size() != cfg.num_classes)
    throw ShapeMismatch("params: classifier shape mismatch");
}

inline NetworkParams zeros_like(const NetworkParams& p) {
  NetworkParams z;
  z.first_layer.w.assign(p.first_layer.w.size(), Vec3{});
  z.first_layer.bias.assign(p.first_layer.bias.size(), 0.0);
  for (const Matrix& m : p.hidden_w) z.hidden_w.emplace_back(m.rows, m.cols);
  for (const auto& b : p.hidden_b) z.hidden_b.emplace_back(b.size(), 0.0);
  z.classifier_w = Matrix(p.classifier_w.rows, p.classifier_w.cols);
  z.classifier_b.assign(p.classifier_b.size(), 0.0);
  return z;
}

// Flat parameter vector; fixed traversal order shared by flatten/unflatten,
// the Adam step, and the finite-difference probe.
inline std::vector<double> flatten(const NetworkParams& p) {
  std::vector<double> out;
  for (const Vec3& c : p.first_layer.w) {
    out.push_back(c.x);
    out.push_back(c.y);
    out.push_back(c.z);
  }
  out.insert(out.end(), p.first_layer.bias.begin(), p.first_layer.bias.end());
  for (const Matrix& m : p.hidden_w) out.insert(out.end(), m.data.begin(), m.data.end());
  for (const auto& b : p.hidden_b) out.insert(out.end(), b.begin(), b.end());
  out.insert(out.end(), p.classifier_w.data.begin(), p.classifier_w.data.end());
  out.insert(out.end(), p.classifier_b.begin(), p.classifier_b.end());
  return out;
}

inline void unflatten(std::span<const double> flat, NetworkParams& p) {
  std::size_t k = 0;
  for (Vec3& c : p.first_layer.w) {
    c.x = flat[k++];
    c.y = flat[k++];
    c.z = flat[k++];
  }
  for (double& b : p.first_layer.bias) b = flat[k++];
  for (Matrix& m : p.hidden_w)
    for (double& v : m.data) v = flat[k++];
  for (auto& b : p.hidden_b)
    for (double& v : b) v = flat[k++];
  for (double& v : p.classifier_w.data) v = flat[k++];
  for (double& v : p.classifier_b) v = flat[k++];
  if (k != flat.size()) throw ShapeMismatch("unflatten: size mismatch");
}

// Whether a weight frame has well-separated eigenvalues and a usable sign
// reference; the initial first layer is redrawn until this holds.
inline bool weight_frame_is_clean(const WeightFrame& wf, double gap_tol) {
  const double denom = std::fmax(wf.eigenvalues[0], 1e-300);
  const double g0 = (wf.eigenvalues[0] - wf.eigenvalues[1]) / denom;
  const double g1 = (wf.eigenvalues[1] - wf.eigenvalues[2]) / denom;
  return g0 >= gap_tol && g1 >= gap_tol && !wf.any_ambiguous();
}

// Uniform [-a, a] with a = sqrt(6/(fan_in+fan_out)); biases start at zero.
// The first layer is redrawn (bounded) until its weight frame is
// non-degenerate with a non-zero barycenter, so the alignment is defined
// from step zero.
inline NetworkParams init_params(const NetworkConfig& cfg, Rng& rng) {
  validate_config(cfg);
  const auto& w = cfg.hidden_widths;
  NetworkParams p;

  const double a1 = std::sqrt(6.0 / (3.0 + static_cast<double>(w[0])));
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    p.first_layer.w.clear();
    for (std::size_t k = 0; k < w[0]; ++k)
      p.first_layer.w.push_back({rng.uniform(-a1, a1), rng.uniform(-a1, a1), rng.uniform(-a1, a1)});
    p.first_layer.bias.assign(w[0], 0.0);
    try {
      ok = weight_frame_is_clean(weight_frame(p.first_layer, cfg.wfa.sign_tol, cfg.wfa.rank_tol),
                                 cfg.wfa.gap_tol);
    } catch (const RankDeficientWeights&) {
      ok = false;
    }
  }
  if (!ok) throw Error("init_params: no usable first-layer draw in 100 attempts");

  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const double a = std::sqrt(6.0 / static_cast<double>(w[i] + w[i + 1]));
    Matrix m(w[i], w[i + 1]);
    for (double& v : m.data) v = rng.uniform(-a, a);
    p.hidden_w.push_back(std::move(m));
    p.hidden_b.emplace_back(w[i + 1], 0.0);
  }

  const double ac = std::sqrt(6.0 / static_cast<double>(w.back() + cfg.num_classes));
  p.classifier_w = Matrix(w.back(), cfg.num_classes);
  for (double& v : p.classifier_w.data) v = rng.uniform(-ac, ac);
  p.classifier_b.assign(cfg.num_classes, 0.0);
  return p;
}

struct GroupCache {
  NeighborSet neighbors;
  bool degenerate = false;
  bool ambiguous = false;
  std::vector<Vec3> inputs;             // aligned (or centered) coordinates
  std::vector<Matrix> activations;      // [0] = inputs as 3 x n, then tanh outputs
  std::vector<std::size_t> pool_argmax; // winning point per final-layer unit
  std::vector<double> pooled;
};

struct ForwardCache {
  std::vector<std::size_t> queries;
  std::vector<GroupCache> groups;
  std::vector<std::size_t> global_argmax;  // winning group per unit
  std::vector<double> global_feature;
  std::vector<double> logits;
  // Smallest top1-top2 gap over all max-pools, exact duplicate columns
  // exempt (padding repeats a point; routing between identical columns
  // cannot change the loss). Probes regenerate their cloud when this is
  // small, since a flipping arg-max breaks finite differences.
  double pool_tie_margin = std::numeric_limits<double>::infinity();
};

// Deterministic forward pass. When frozen_frame is given it replaces the
// weight frame computed from params; the gradient and its finite-difference
// oracle both hold the frame fixed this way.
inline std::vector<double> forward(const NetworkParams& params, const PointCloud& cloud,
                                   const NetworkConfig& cfg, ForwardCache* cache = nullptr,
                                   const WeightFrame* frozen_frame = nullptr) {
  validate_config(cfg);
  validate_params(params, cfg);
  if (cloud.points.size() < cfg.num_queries)
    throw ShapeMismatch("forward: cloud has fewer points than num_queries");

  WeightFrame wf;
  if (cfg.use_wfa)
    wf = frozen_frame ? *frozen_frame
                      : weight_frame(params.first_layer, cfg.wfa.sign_tol, cfg.wfa.rank_tol);

  WfaConfig wcfg = cfg.wfa;
  wcfg.order = cfg.axis_order;

  const auto& widths = cfg.hidden_widths;
  const std::size_t L = widths.size();
  const std::size_t last = widths.back();

  const std::vector<std::size_t> queries = farthest_point_sample(cloud, cfg.num_queries, 0);

  std::vector<double> global(last, -std::numeric_limits<double>::infinity());
  std::vector<double> global_second(last, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> global_arg(last, 0);
  double tie_margin = std::numeric_limits<double>::infinity();

  if (cache) {
    cache->queries = queries;
    cache->groups.clear();
    cache->groups.reserve(queries.size());
  }

  for (std::size_t g = 0; g < queries.size(); ++g) {
    GroupCache gc;
    gc.neighbors = radius_neighbors(cloud, queries[g], cfg.radius, cfg.neighbors_per_query);

    if (cfg.use_wfa) {
      AlignedNeighborhood an = align_neighborhood(cloud, gc.neighbors, wf, wcfg);
      gc.inputs = std::move(an.aligned);
      gc.degenerate = an.frame.degenerate;
      gc.ambiguous = an.frame.any_ambiguous();
    } else {
      Vec3 bary{};
      for (std::size_t j : gc.neighbors.indices) bary += cloud.points[j];
      bary = bary / static_cast<double>(gc.neighbors.indices.size());
      gc.inputs.reserve(gc.neighbors.indices.size());
      for (std::size_t j : gc.neighbors.indices) gc.inputs.push_back(cloud.points[j] - bary);
    }

    const std::size_t n = gc.inputs.size();
    Matrix a0(3, n);
    for (std::size_t j = 0; j < n; ++j) {
      a0(0, j) = gc.inputs[j].x;
      a0(1, j) = gc.inputs[j].y;
      a0(2, j) = gc.inputs[j].z;
    }
    gc.activations.push_back(std::move(a0));

    Matrix z = feature_layer(gc.inputs, params.first_layer);
    for (double& v : z.data) v = std::tanh(v);
    gc.activations.push_back(std::move(z));

    for (std::size_t t = 2; t <= L; ++t) {
      const Matrix& a_prev = gc.activations[t - 1];
      const Matrix& w = params.hidden_w[t - 2];
      Matrix zt(widths[t - 1], n);
      for (std::size_t q = 0; q < widths[t - 1]; ++q) {
        const double b = params.hidden_b[t - 2][q];
        for (std::size_t j = 0; j < n; ++j) {
          double s = b;
          for (std::size_t pidx = 0; pidx < widths[t - 2]; ++pidx)
            s += w(pidx, q) * a_prev(pidx, j);
          zt(q, j) = std::tanh(s);
        }
      }
      gc.activations.push_back(std::move(zt));
    }

    const Matrix& a_last = gc.activations[L];
    gc.pooled.assign(last, 0.0);
    gc.pool_argmax.assign(last, 0);
    for (std::size_t u = 0; u < last; ++u) {
      double best = a_last(u, 0);
      std::size_t best_j = 0;
      for (std::size_t j = 1; j < n; ++j)
        if (a_last(u, j) > best) {  // strict: smallest index wins ties
          best = a_last(u, j);
          best_j = j;
        }
      gc.pooled[u] = best;
      gc.pool_argmax[u] = best_j;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == best_j) continue;
        if (gc.inputs[j] == gc.inputs[best_j]) continue;  // exact duplicate column
        const double gap = best - a_last(u, j);
        if (gap < tie_margin) tie_margin = gap;
      }
      if (gc.pooled[u] > global[u]) {  // strict: smallest group index wins ties
        global_second[u] = global[u];
        global[u] = gc.pooled[u];
        global_arg[u] = g;
      } else if (gc.pooled[u] > global_second[u]) {
        global_second[u] = gc.pooled[u];
      }
    }

    if (cache) cache->groups.push_back(std::move(gc));
  }

  for (std::size_t u = 0; u < last; ++u)
    if (queries.size() > 1) {
      const double gap = global[u] - global_second[u];
      if (gap < tie_margin) tie_margin = gap;
    }

  std::vector<double> logits(cfg.num_classes, 0.0);
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    double s = params.classifier_b[c];
    for (std::size_t u = 0; u < last; ++u) s += params.classifier_w(u, c) * global[u];
    logits[c] = s;
  }

  if (cache) {
    cache->global_argmax = std::move(global_arg);
    cache->global_feature = std::move(global);
    cache->logits = logits;
    cache->pool_tie_margin = tie_margin;
  }
  return logits;
}

// Numerically stable softmax cross-entropy; optionally returns the softmax.
inline double cross_entropy(const std::vector<double>& logits, int label,
                            std::vector<double>* softmax_out = nullptr) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw BadCount("cross_entropy: label out of range");
  double m = logits[0];
  for (double l : logits) m = std::fmax(m, l);
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  const double lse = m + std::log(sum);
  if (softmax_out) {
    softmax_out->resize(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c) (*softmax_out)[c] = std::exp(logits[c] - lse);
  }
  return lse - logits[static_cast<std::size_t>(label)];
}

inline double loss_only(const NetworkParams& params, std::span<const LabeledCloud> batch,
                        const NetworkConfig& cfg, const WeightFrame* frozen_frame = nullptr) {
  if (batch.empty()) throw BadCount("loss_only: empty batch");
  double total = 0.0;
  for (const LabeledCloud& s : batch)
    total += cross_entropy(forward(params, s.cloud, cfg, nullptr, frozen_frame), s.label);
  return total / static_cast<double>(batch.size());
}

namespace detail {

// Reverse-mode pass for one sample. Adds into grad; the first-layer entries
// accumulate d/d(centered weights) and are centering-corrected once per
// batch by the caller.
inline void backward_sample(const NetworkParams& params, const NetworkConfig& cfg,
                            const ForwardCache& cache, const std::vector<double>& dlogits,
                            NetworkParams& grad) {
  const auto& widths = cfg.hidden_widths;
  const std::size_t L = widths.size();
  const std::size_t last = widths.back();

  std::vector<double> d_global(last, 0.0);
  for (std::size_t u = 0; u < last; ++u) {
    double s = 0.0;
    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
      s += params.classifier_w(u, c) * dlogits[c];
      grad.classifier_w(u, c) += cache.global_feature[u] * dlogits[c];
    }
    d_global[u] = s;
  }
  for (std::size_t c = 0; c < cfg.num_classes; ++c) grad.classifier_b[c] += dlogits[c];

  for (std::size_t g = 0; g < cache.groups.size(); ++g) {
    const GroupCache& gc = cache.groups[g];
    const std::size_t n = gc.inputs.size();

    // gradient enters only through units whose global max lives in this group
    Matrix da(last, n);
    bool any = false;
    for (std::size_t u = 0; u < last; ++u)
      if (cache.global_argmax[u] == g && d_global[u] != 0.0) {
        da(u, gc.pool_argmax[u]) += d_global[u];
        any = true;
      }
    if (!any) continue;

    for (std::size_t t = L; t >= 2; --t) {
      const Matrix& a_t = gc.activations[t];
      const Matrix& a_prev = gc.activations[t - 1];
      const Matrix& w = params.hidden_w[t - 2];
      Matrix dz(widths[t - 1], n);
      for (std::size_t q = 0; q < widths[t - 1]; ++q)
        for (std::size_t j = 0; j < n; ++j)
          dz(q, j) = da(q, j) * (1.0 - a_t(q, j) * a_t(q, j));

      Matrix& gw = grad.hidden_w[t - 2];
      auto& gb = grad.hidden_b[t - 2];
      for (std::size_t q = 0; q < widths[t - 1]; ++q) {
        double bs = 0.0;
        for (std::size_t j = 0; j < n; ++j) bs += dz(q, j);
        gb[q] += bs;
      }
      for (std::size_t pidx = 0; pidx < widths[t - 2]; ++pidx)
        for (std::size_t q = 0; q < widths[t - 1]; ++q) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += a_prev(pidx, j) * dz(q, j);
          gw(pidx, q) += s;
        }

      Matrix da_prev(widths[t - 2], n);
      for (std::size_t pidx = 0; pidx < widths[t - 2]; ++pidx)
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t q = 0; q < widths[t - 1]; ++q) s += w(pidx, q) * dz(q, j);
          da_prev(pidx, j) = s;
        }
      da = std::move(da_prev);
    }

    const Matrix& a1 = gc.activations[1];
    const Matrix& a0 = gc.activations[0];
    for (std::size_t u = 0; u < widths[0]; ++u) {
      double bs = 0.0;
      Vec3 wg{};
      for (std::size_t j = 0; j < n; ++j) {
        const double dzv = da(u, j) * (1.0 - a1(u, j) * a1(u, j));
        bs += dzv;
        wg.x += a0(0, j) * dzv;
        wg.y += a0(1, j) * dzv;
        wg.z += a0(2, j) * dzv;
      }
      grad.first_layer.bias[u] += bs;
      grad.first_layer.w[u] += wg;
    }
  }
}

}  // namespace detail

struct LossResult {
  double loss = 0.0;
  NetworkParams grad;
};

// Mean softmax cross-entropy over the batch with reverse-mode gradients.
// The weight frame and all local frames are treated as constants of the
// step: they are recomputed every forward from the current weights and
// points, but no gradient flows through the eigendecompositions. Max-pools
// route gradient to the arg-max element, ties to the smallest index.
inline LossResult loss_and_grad(const NetworkParams& params, std::span<const LabeledCloud> batch,
                                const NetworkConfig& cfg) {
  if (batch.empty()) throw BadCount("loss_and_grad: empty batch");
  for (const LabeledCloud& s : batch)
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= cfg.num_classes)
      throw BadCount("loss_and_grad: label out of range");

  WeightFrame wf;
  const WeightFrame* wfp = nullptr;
  if (cfg.use_wfa) {
    wf = weight_frame(params.first_layer, cfg.wfa.sign_tol, cfg.wfa.rank_tol);
    wfp = &wf;
  }

  LossResult out;
  out.grad = zeros_like(params);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  for (const LabeledCloud& s : batch) {
    ForwardCache cache;
    const std::vector<double> logits = forward(params, s.cloud, cfg, &cache, wfp);
    std::vector<double> softmax;
    out.loss += cross_entropy(logits, s.label, &softmax);
    std::vector<double> dlogits(cfg.num_classes);
    for (std::size_t c = 0; c < cfg.num_classes; ++c)
      dlogits[c] = (softmax[c] - (static_cast<std::size_t>(s.label) == c ? 1.0 : 0.0)) * inv_b;
    detail::backward_sample(params, cfg, cache, dlogits, out.grad);
  }
  out.loss *= inv_b;

  // centered-weight chain rule: dw_k -= mean_v dw_v
  Vec3 mean{};
  for (const Vec3& gw : out.grad.first_layer.w) mean += gw;
  mean = mean / static_cast<double>(out.grad.first_layer.w.size());
  for (Vec3& gw : out.grad.first_layer.w) gw -= mean;

  return out;
}

struct AdamState {
  std::vector<double> m, v;
  int t = 0;
};

inline void adam_step(std::vector<double>& theta, std::span<const double> grad, AdamState& st,
                      double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (st.m.empty()) {
    st.m.assign(theta.size(), 0.0);
    st.v.assign(theta.size(), 0.0);
  }
  if (grad.size() != theta.size()) throw ShapeMismatch("adam_step: gradient size mismatch");
  ++st.t;
  const double c1 = 1.0 - std::pow(beta1, st.t);
  const double c2 = 1.0 - std::pow(beta2, st.t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * grad[i];
    st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    theta[i] -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + eps);
  }
}

// Accuracy under the given evaluation rotations, one derived seed per
// sample. Arg-max prediction, ties to the smallest class index.
inline double evaluate(const NetworkParams& params, const LabeledDataset& data,
                       const NetworkConfig& cfg, RotationMode mode, Seed eval_seed) {
  if (data.samples.empty()) throw BadCount("evaluate: empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const LabeledCloud& s = data.samples[i];
    std::vector<double> logits;
    if (mode == RotationMode::none) {
      logits = forward(params, s.cloud, cfg);
    } else {
      const Rotation3 r = random_rotation(derive_seed(eval_seed, i), mode);
      logits = forward(params, apply_rigid(s.cloud, r, Vec3{}), cfg);
    }
    std::size_t pred = 0;
    for (std::size_t c = 1; c < logits.size(); ++c)
      if (logits[c] > logits[pred]) pred = c;
    if (pred == static_cast<std::size_t>(s.label)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.samples.size());
}

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy_z = 0.0;
  double test_accuracy_arbitrary = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double final_train_accuracy = 0.0;
  double final_test_accuracy_z = 0.0;
  double final_test_accuracy_arbitrary = 0.0;
  // kept out of the canonical serialized report so fixed-seed reruns stay
  // byte-identical
  double wall_clock_seconds = 0.0;
};

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) over z-augmented minibatches,
// with the learning rate stepped down by lr_decay every lr_step epochs.
// The weight frame is recomputed from the first layer at the start of
// every step (inside loss_and_grad). Deterministic given cfg.seed.
inline std::pair<NetworkParams, TrainReport> train(const NetworkConfig& cfg,
                                                   const DatasetSplit& data, std::size_t epochs,
                                                   double lr, std::size_t batch_size = 8,
                                                   double lr_decay = 0.7,
                                                   std::size_t lr_step = 20) {
  validate_config(cfg);
  if (data.train.samples.empty()) throw BadCount("train: empty training set");
  if (batch_size < 1) throw BadCount("train: batch_size must be at least 1");

  const auto t_start = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);
  NetworkParams params = init_params(cfg, rng);
  AdamState adam;
  const Seed eval_seed = derive_seed(cfg.seed, 0x45564131);

  const std::size_t n = data.train.samples.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  TrainReport report;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const double epoch_lr =
        lr_step > 0 ? lr * std::pow(lr_decay, static_cast<double>(epoch / lr_step)) : lr;
    for (std::size_t i = n - 1; i > 0; --i) {  // Fisher-Yates, pinned RNG
      const std::size_t j = rng.uniform_under(i + 1);
      std::swap(order[i], order[j]);
    }

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t stop = std::min(start + batch_size, n);
      std::vector<LabeledCloud> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const LabeledCloud& s = data.train.samples[order[i]];
        const Rotation3 rz = z_rotation(wfa::detail::two_pi * rng.uniform());
        batch.push_back({apply_rigid(s.cloud, rz, Vec3{}), s.label, s.seed});
      }
      const LossResult res = loss_and_grad(params, batch, cfg);
      std::vector<double> theta = flatten(params);
      adam_step(theta, flatten(res.grad), adam, epoch_lr);
      unflatten(theta, params);
      loss_sum += res.loss * static_cast<double>(batch.size());
      loss_count += batch.size();
    }

    EpochStats st;
    st.epoch = epoch;
    st.loss = loss_sum / static_cast<double>(loss_count);
    st.train_accuracy = evaluate(params, data.train, cfg, RotationMode::none, eval_seed);
    if (!data.test.samples.empty()) {
      st.test_accuracy_z = evaluate(params, data.test, cfg, RotationMode::z_only, eval_seed);
      st.test_accuracy_arbitrary =
          evaluate(params, data.test, cfg, RotationMode::arbitrary, eval_seed);
    }
    report.epochs.push_back(st);
  }

  report.final_train_accuracy = evaluate(params, data.train, cfg, RotationMode::none, eval_seed);
  if (!data.test.samples.empty()) {
    report.final_test_accuracy_z =
        evaluate(params, data.test, cfg, RotationMode::z_only, eval_seed);
    report.final_test_accuracy_arbitrary =
        evaluate(params, data.test, cfg, RotationMode::arbitrary, eval_seed);
  }
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {std::move(params), std::move(report)};
}

struct GradCheckResult {
  std::size_t coords = 0;
  std::size_t within_1e5 = 0;    // coordinates with rel error <= 1e-5
  double max_rel = 0.0;
  double median_rel = 0.0;
  double frac_within_1e5 = 0.0;
  double pool_tie_margin = 0.0;
  std::vector<double> rel_errors;  // one per coordinate
};

// Central-difference oracle against the analytic gradient, step
// 1e-6 * max(1, |theta|). The weight frame is frozen at the unperturbed
// parameters on both paths. Relative error uses a small floor so
// coordinates whose true gradient sits below differencing noise do not
// divide by ~0.
inline GradCheckResult finite_difference_check(const NetworkParams& params,
                                               std::span<const LabeledCloud> batch,
                                               const NetworkConfig& cfg,
                                               double rel_floor = 1e-6) {
  WeightFrame wf;
  const WeightFrame* wfp = nullptr;
  if (cfg.use_wfa) {
    wf = weight_frame(params.first_layer, cfg.wfa.sign_tol, cfg.wfa.rank_tol);
    wfp = &wf;
  }

  GradCheckResult out;
  out.pool_tie_margin = std::numeric_limits<double>::infinity();
  for (const LabeledCloud& s : batch) {
    ForwardCache cache;
    forward(params, s.cloud, cfg, &cache, wfp);
    out.pool_tie_margin = std::fmin(out.pool_tie_margin, cache.pool_tie_margin);
  }

  const std::vector<double> ga = flatten(loss_and_grad(params, batch, cfg).grad);
  std::vector<double> theta = flatten(params);
  NetworkParams probe = params;

  std::vector<double> rels(theta.size(), 0.0);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double h = 1e-6 * std::fmax(1.0, std::fabs(theta[i]));
    const double saved = theta[i];
    theta[i] = saved + h;
    unflatten(theta, probe);
    const double lp = loss_only(probe, batch, cfg, wfp);
    theta[i] = saved - h;
    unflatten(theta, probe);
    const double lm = loss_only(probe, batch, cfg, wfp);
    theta[i] = saved;
    const double fd = (lp - lm) / (2.0 * h);
    rels[i] = std::fabs(ga[i] - fd) /
              std::fmax(rel_floor, std::fmax(std::fabs(ga[i]), std::fabs(fd)));
  }
  unflatten(theta, probe);

  out.coords = rels.size();
  for (double r : rels) {
    out.max_rel = std::fmax(out.max_rel, r);
    if (r <= 1e-5) ++out.within_1e5;
  }
  std::vector<double> sorted = rels;
  std::sort(sorted.begin(), sorted.end());
  out.median_rel = sorted[sorted.size() / 2];
  out.frac_within_1e5 = static_cast<double>(out.within_1e5) / static_cast<double>(rels.size());
  out.rel_errors = std::move(rels);
  return out;
}

// Dataset provenance stored alongside a checkpoint so evaluation can
// regenerate the exact split.
struct DatasetInfo {
  std::size_t per_class = 20;
  std::size_t n_points = 256;
  double noise_sigma = 0.02;
  double train_fraction = 0.8;
  Seed seed{0};
  std::size_t num_classes = 5;
};

inline DatasetSplit build_dataset(const DatasetInfo& info, bool with_normals = false) {
  ShapeSpec tpl;
  tpl.n_points = info.n_points;
  tpl.noise_sigma = info.noise_sigma;
  tpl.with_normals = with_normals;
  return make_dataset(info.per_class, tpl, info.train_fraction, info.seed, info.num_classes);
}

struct Checkpoint {
  NetworkConfig config;
  DatasetInfo data;
  NetworkParams params;
};

namespace detail {

inline void append_tensor(std::string& out, const std::string& name, std::size_t rows,
                          std::size_t cols, std::span<const double> data) {
  out += "tensor " + name + " " + std::to_string(rows) + " " + std::to_string(cols) + "\n";
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out += ' ';
      wfa::detail::append_double(out, data[r * cols + c]);
    }
    out += '\n';
  }
}

}  // namespace detail

// Plain-text key-value checkpoint, versioned, 17-significant-digit values
// (exact double round trip). Layout: header keys, then `tensor <name> <rows>
// <cols>` blocks with one row per line.
inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  validate_params(ckpt.params, ckpt.config);
  std::string out;
  out += "wfa_checkpoint_v1\n";
  const auto kv = [&out](const std::string& k, const std::string& v) { out += k + " " + v + "\n"; };
  const auto kvd = [&out](const std::string& k, double v) {
    out += k + " ";
    wfa::detail::append_double(out, v);
    out += "\n";
  };
  kv("num_queries", std::to_string(ckpt.config.num_queries));
  kv("neighbors_per_query", std::to_string(ckpt.config.neighbors_per_query));
  kvd("radius", ckpt.config.radius);
  {
    std::string hw = std::to_string(ckpt.config.hidden_widths.size());
    for (std::size_t w : ckpt.config.hidden_widths) hw += " " + std::to_string(w);
    kv("hidden_widths", hw);
  }
  kv("num_classes", std::to_string(ckpt.config.num_classes));
  kv("axis_order", ckpt.config.axis_order.to_string());
  kv("use_wfa", ckpt.config.use_wfa ? "1" : "0");
  kv("net_seed", std::to_string(ckpt.config.seed.value));
  kvd("sign_tol", ckpt.config.wfa.sign_tol);
  kvd("gap_tol", ckpt.config.wfa.gap_tol);
  kvd("rank_tol", ckpt.config.wfa.rank_tol);
  kv("data_per_class", std::to_string(ckpt.data.per_class));
  kv("data_n_points", std::to_string(ckpt.data.n_points));
  kvd("data_noise_sigma", ckpt.data.noise_sigma);
  kvd("data_train_fraction", ckpt.data.train_fraction);
  kv("data_seed", std::to_string(ckpt.data.seed.value));
  kv("data_num_classes", std::to_string(ckpt.data.num_classes));

  const std::size_t h0 = ckpt.config.hidden_widths[0];
  std::vector<double> first(3 * h0);
  for (std::size_t k = 0; k < h0; ++k) {
    first[0 * h0 + k] = ckpt.params.first_layer.w[k].x;
    first[1 * h0 + k] = ckpt.params.first_layer.w[k].y;
    first[2 * h0 + k] = ckpt.params.first_layer.w[k].z;
  }
  detail::append_tensor(out, "first_layer_w", 3, h0, first);
  detail::append_tensor(out, "first_layer_b", 1, h0, ckpt.params.first_layer.bias);
  for (std::size_t i = 0; i < ckpt.params.hidden_w.size(); ++i) {
    const Matrix& m = ckpt.params.hidden_w[i];
    detail::append_tensor(out, "hidden_w_" + std::to_string(i), m.rows, m.cols, m.data);
    detail::append_tensor(out, "hidden_b_" + std::to_string(i), 1, ckpt.params.hidden_b[i].size(),
                          ckpt.params.hidden_b[i]);
  }
  detail::append_tensor(out, "classifier_w", ckpt.params.classifier_w.rows,
                        ckpt.params.classifier_w.cols, ckpt.params.classifier_w.data);
  detail::append_tensor(out, "classifier_b", 1, ckpt.params.classifier_b.size(),
                        ckpt.params.classifier_b);
  wfa::detail::write_file(path, out);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  const std::vector<std::string> lines = wfa::detail::read_lines(path);
  std::size_t ln = 0;
  const auto next = [&]() -> std::vector<std::string> {
    if (ln >= lines.size()) throw ParseError("unexpected end of checkpoint", lines.size());
    return wfa::detail::split_tokens(lines[ln++]);
  };

  {
    const auto toks = next();
    if (toks.size() != 1 || toks[0] != "wfa_checkpoint_v1")
      throw ParseError("not a wfa_checkpoint_v1 file", 1);
  }

  Checkpoint ck;
  const auto want_key = [&](const std::string& key) -> std::vector<std::string> {
    const std::size_t line_no = ln + 1;
    auto toks = next();
    if (toks.size() < 2 || toks[0] != key)
      throw ParseError("expected key '" + key + "'", line_no);
    toks.erase(toks.begin());
    return toks;
  };
  const auto to_count = [&](const std::string& s) -> std::size_t {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw ParseError("bad integer '" + s + "'", ln);
    }
  };

  ck.config.num_queries = to_count(want_key("num_queries")[0]);
  ck.config.neighbors_per_query = to_count(want_key("neighbors_per_query")[0]);
  ck.config.radius = wfa::detail::parse_double(want_key("radius")[0], ln);
  {
    const auto toks = want_key("hidden_widths");
    const std::size_t cnt = to_count(toks[0]);
    if (toks.size() != cnt + 1) throw ParseError("hidden_widths count mismatch", ln);
    ck.config.hidden_widths.clear();
    for (std::size_t i = 0; i < cnt; ++i) ck.config.hidden_widths.push_back(to_count(toks[i + 1]));
  }
  ck.config.num_classes = to_count(want_key("num_classes")[0]);
  ck.config.axis_order = AxisOrder::from_string(want_key("axis_order")[0]);
  ck.config.use_wfa = want_key("use_wfa")[0] == "1";
  ck.config.seed.value = to_count(want_key("net_seed")[0]);
  ck.config.wfa.sign_tol = wfa::detail::parse_double(want_key("sign_tol")[0], ln);
  ck.config.wfa.gap_tol = wfa::detail::parse_double(want_key("gap_tol")[0], ln);
  ck.config.wfa.rank_tol = wfa::detail::parse_double(want_key("rank_tol")[0], ln);
  ck.config.wfa.order = ck.config.axis_order;
  ck.data.per_class = to_count(want_key("data_per_class")[0]);
  ck.data.n_points = to_count(want_key("data_n_points")[0]);
  ck.data.noise_sigma = wfa::detail::parse_double(want_key("data_noise_sigma")[0], ln);
  ck.data.train_fraction = wfa::detail::parse_double(want_key("data_train_fraction")[0], ln);
  ck.data.seed.value = to_count(want_key("data_seed")[0]);
  ck.data.num_classes = to_count(want_key("data_num_classes")[0]);

  const auto read_tensor = [&](const std::string& name, std::size_t rows,
                               std::size_t cols) -> std::vector<double> {
    const std::size_t line_no = ln + 1;
    const auto head = next();
    if (head.size() != 4 || head[0] != "tensor" || head[1] != name)
      throw ParseError("expected tensor '" + name + "'", line_no);
    if (to_count(head[2]) != rows || to_count(head[3]) != cols)
      throw ShapeMismatch("checkpoint tensor '" + name + "' has unexpected shape");
    std::vector<double> data;
    data.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t row_line = ln + 1;
      const auto toks = next();
      if (toks.size() != cols) throw ParseError("tensor row has wrong width", row_line);
      for (const std::string& t : toks) data.push_back(wfa::detail::parse_double(t, row_line));
    }
    return data;
  };

  const auto& w = ck.config.hidden_widths;
  if (w.empty()) throw ParseError("checkpoint has no hidden layers", 1);
  const std::size_t h0 = w[0];
  const std::vector<double> first = read_tensor("first_layer_w", 3, h0);
  ck.params.first_layer.w.resize(h0);
  for (std::size_t k = 0; k < h0; ++k)
    ck.params.first_layer.w[k] = {first[0 * h0 + k], first[1 * h0 + k], first[2 * h0 + k]};
  ck.params.first_layer.bias = read_tensor("first_layer_b", 1, h0);
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    Matrix m(w[i], w[i + 1]);
    m.data = read_tensor("hidden_w_" + std::to_string(i), w[i], w[i + 1]);
    ck.params.hidden_w.push_back(std::move(m));
    ck.params.hidden_b.push_back(read_tensor("hidden_b_" + std::to_string(i), 1, w[i + 1]));
  }
  ck.params.classifier_w = Matrix(w.back(), ck.config.num_classes);
  ck.params.classifier_w.data = read_tensor("classifier_w", w.back(), ck.config.num_classes);
  ck.params.classifier_b = read_tensor("classifier_b", 1, ck.config.num_classes);

  validate_params(ck.params, ck.config);
  return ck;
}

}  // namespace wfa::net
