#include "descnet/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "descnet/presets.hpp"

namespace descnet {

namespace {

void check_labels(const Tensor& features, std::span<const int> labels) {
  if (features.empty() || features.rank() != 2) throw ShapeError("features must be [N, F]");
  if (labels.size() != features.dim(0)) throw ShapeError("one label per feature row required");
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("labels must be nonnegative");
  }
}

void softmax_row(double* row, std::size_t K) {
  const double mx = *std::max_element(row, row + K);
  double sum = 0;
  for (std::size_t c = 0; c < K; ++c) {
    row[c] = std::exp(row[c] - mx);
    sum += row[c];
  }
  for (std::size_t c = 0; c < K; ++c) row[c] /= sum;
}

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

std::vector<double> standardized(const LogisticModel& m, const Tensor& features) {
  if (features.rank() != 2 || features.dim(1) != m.features) {
    throw ShapeError("feature rows must have " + std::to_string(m.features) + " entries");
  }
  const std::size_t N = features.dim(0), F = m.features;
  std::vector<double> x(N * F);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t f = 0; f < F; ++f) x[n * F + f] = (features[n * F + f] - m.shift[f]) * m.scale[f];
  }
  return x;
}

/// logits[n, c] = x_n . w_c + b_c
std::vector<double> logits(const LogisticModel& m, const std::vector<double>& x, std::size_t N) {
  const std::size_t F = m.features, K = m.classes;
  std::vector<double> out(N * K);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < K; ++c) {
      double acc = m.bias[c];
      const double* w = &m.weights[c * F];
      const double* xn = &x[n * F];
      for (std::size_t f = 0; f < F; ++f) acc += w[f] * xn[f];
      out[n * K + c] = acc;
    }
  }
  return out;
}

}  // namespace

LogisticModel train_logistic(const Tensor& features, std::span<const int> labels,
                             const LogisticConfig& cfg) {
  check_labels(features, labels);
  const std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw std::invalid_argument("logistic regression needs at least two classes");
  const std::size_t N = features.dim(0), F = features.dim(1);
  LogisticModel m;
  m.classes = static_cast<std::size_t>(*distinct.rbegin()) + 1;
  m.features = F;
  m.one_vs_all = cfg.one_vs_all;
  m.weights.assign(m.classes * F, 0.0);
  m.bias.assign(m.classes, 0.0);
  m.shift.assign(F, 0.0);
  m.scale.assign(F, 1.0);
  if (cfg.standardize) {
    for (std::size_t f = 0; f < F; ++f) {
      double mean = 0, sq = 0;
      for (std::size_t n = 0; n < N; ++n) mean += features[n * F + f];
      mean /= static_cast<double>(N);
      for (std::size_t n = 0; n < N; ++n) {
        const double d = features[n * F + f] - mean;
        sq += d * d;
      }
      const double sd = std::sqrt(sq / static_cast<double>(N));
      m.shift[f] = mean;
      m.scale[f] = sd > 1e-12 ? 1.0 / sd : 0.0;  // constant features carry no information
    }
  }
  const auto x = standardized(m, features);
  const std::size_t K = m.classes;
  std::vector<double> gw(K * F), gb(K);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    auto p = logits(m, x, N);
    for (std::size_t n = 0; n < N; ++n) {
      double* row = &p[n * K];
      if (m.one_vs_all) {
        for (std::size_t c = 0; c < K; ++c) row[c] = sigmoid(row[c]);
      } else {
        softmax_row(row, K);
      }
      row[labels[n]] -= 1.0;  // d(loss)/d(logit) = p - onehot for both losses
    }
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      const double* xn = &x[n * F];
      for (std::size_t c = 0; c < K; ++c) {
        const double r = p[n * K + c];
        if (r == 0) continue;
        double* g = &gw[c * F];
        for (std::size_t f = 0; f < F; ++f) g[f] += r * xn[f];
        gb[c] += r;
      }
    }
    const double inv = 1.0 / static_cast<double>(N);
    for (std::size_t i = 0; i < gw.size(); ++i) {
      m.weights[i] -= cfg.learning_rate * (gw[i] * inv + cfg.l2 * m.weights[i]);
    }
    for (std::size_t c = 0; c < K; ++c) m.bias[c] -= cfg.learning_rate * gb[c] * inv;
  }
  return m;
}

Tensor64 class_scores(const LogisticModel& m, const Tensor& features) {
  const auto x = standardized(m, features);
  const std::size_t N = features.dim(0), K = m.classes;
  auto p = logits(m, x, N);
  for (std::size_t n = 0; n < N; ++n) {
    if (m.one_vs_all) {
      for (std::size_t c = 0; c < K; ++c) p[n * K + c] = sigmoid(p[n * K + c]);
    } else {
      softmax_row(&p[n * K], K);
    }
  }
  return Tensor64({N, K}, std::move(p));
}

std::vector<int> classify_one_vs_all(const LogisticModel& m, const Tensor& features) {
  const auto s = class_scores(m, features);
  const std::size_t N = s.dim(0), K = s.dim(1);
  std::vector<int> out(N);
  for (std::size_t n = 0; n < N; ++n) {
    const double* row = s.data() + n * K;
    out[n] = static_cast<int>(std::max_element(row, row + K) - row);
  }
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size() || labels.empty()) {
    throw std::invalid_argument("accuracy needs equally sized, nonempty label lists");
  }
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

ReferenceClassifier make_reference_classifier(std::size_t grid, std::size_t classes, Rng& rng) {
  if (classes < 2) throw std::invalid_argument("reference classifier needs at least two classes");
  DescriptorArchitecture arch;
  arch.grid = static_cast<int>(grid);
  arch.convs = {{8, 4, 2}, {16, 3, 2}};
  const auto body = build_descriptor<float>(arch);
  ReferenceClassifier clf;
  clf.classes = classes;
  clf.input_shape = body.input_shape;
  // Reuse the conv stack, replace the scalar head with a K-way one.
  clf.layers.assign(body.layers.begin(), body.layers.end() - 1);
  const std::size_t fan_in = body.layers.back().kernel.dim(1);
  clf.layers.push_back(Layer<float>::fully_connected(fan_in, classes));
  for (auto& l : clf.layers) {
    if (l.kernel.empty()) continue;
    const double fan = static_cast<double>(l.kernel.item_size());
    const double sd = std::sqrt(2.0 / fan);
    for (std::size_t i = 0; i < l.kernel.size(); ++i) l.kernel[i] = static_cast<float>(sd * rng.normal());
    l.bias.fill(0.0f);
  }
  return clf;
}

Tensor64 ReferenceClassifier::probabilities(const Tensor& batch) const {
  if (batch.empty()) throw ShapeError("classifier input batch is empty");
  Shape expected{batch.dim(0)};
  expected.insert(expected.end(), input_shape.begin(), input_shape.end());
  require_same_shape(batch.shape(), expected, "classifier input");
  const auto out = forward_trace(layers, batch, Mode::Infer).output();
  const std::size_t N = batch.dim(0);
  Tensor64 p({N, classes});
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = out[i];
  for (std::size_t n = 0; n < N; ++n) softmax_row(p.data() + n * classes, classes);
  return p;
}

std::vector<int> ReferenceClassifier::predict(const Tensor& batch) const {
  const auto p = probabilities(batch);
  std::vector<int> out(p.dim(0));
  for (std::size_t n = 0; n < out.size(); ++n) {
    const double* row = p.data() + n * classes;
    out[n] = static_cast<int>(std::max_element(row, row + classes) - row);
  }
  return out;
}

double train_reference_classifier(ReferenceClassifier& clf, const Tensor& data,
                                  std::span<const int> labels, const ClassifierTrainConfig& cfg) {
  if (data.empty() || labels.size() != data.dim(0)) {
    throw std::invalid_argument("classifier training needs one label per item");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= clf.classes) {
      throw std::invalid_argument("label outside the classifier's class range");
    }
  }
  Rng rng(cfg.seed);
  const std::size_t M = data.dim(0);
  const std::size_t B = std::min(cfg.batch_size, M);
  std::vector<std::size_t> order(M);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = M;
  Shape shape = data.shape();
  shape[0] = B;
  AdamState<float> adam;
  double loss = 0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    Tensor batch(shape);
    std::vector<int> y(B);
    for (std::size_t j = 0; j < B; ++j) {
      if (cursor == M) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      batch.set_item(j, data.item(idx));
      y[j] = labels[idx];
    }
    const auto trace = forward_trace(clf.layers, batch, Mode::Train);
    const auto& out = trace.output();
    Tensor grad(out.shape());
    loss = 0;
    std::vector<double> row(clf.classes);
    for (std::size_t n = 0; n < B; ++n) {
      for (std::size_t c = 0; c < clf.classes; ++c) row[c] = out[n * clf.classes + c];
      softmax_row(row.data(), clf.classes);
      loss -= std::log(std::max(row[y[n]], 1e-300));
      row[y[n]] -= 1.0;
      for (std::size_t c = 0; c < clf.classes; ++c) {
        grad[n * clf.classes + c] = static_cast<float>(row[c] / static_cast<double>(B));
      }
    }
    loss /= static_cast<double>(B);
    auto g = backward_trace(clf.layers, trace, grad, Mode::Train, false, true);
    std::vector<const Tensor*> grads;
    for (const auto& lg : g.params) {
      if (!lg.grad_kernel.empty()) grads.push_back(&lg.grad_kernel);
      if (!lg.grad_bias.empty()) grads.push_back(&lg.grad_bias);
    }
    adam_step(adam, parameter_tensors(clf.layers), grads, cfg.adam);
  }
  return loss;
}

}  // namespace descnet
