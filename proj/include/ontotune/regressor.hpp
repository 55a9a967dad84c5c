#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ontotune/common.hpp"
#include "ontotune/feature_embed.hpp"
#include "ontotune/rng.hpp"
#include "ontotune/scaler.hpp"

namespace ontotune {

// Reward predictor: two 1-D convolutions over the feature matrix (kernels
// span all channels and slide over columns), global average pooling, arm
// one-hot late fusion into one hidden dense layer, sigmoid output. All
// arithmetic is 64-bit; training is plain seeded SGD so runs replay exactly.

struct ModelShape {
  std::size_t rows = 0;    // feature channels R
  std::size_t cols = 0;    // padded column capacity C_max
  std::size_t conv1 = 16;  // feature maps
  std::size_t conv2 = 8;
  std::size_t kernel = 3;  // column span of both convolutions
  std::size_t hidden = 32;
  std::size_t arms = 0;  // K

  std::size_t conv1_width() const { return cols - kernel + 1; }
  std::size_t conv2_width() const { return conv1_width() - kernel + 1; }

  void validate() const {
    if (rows == 0 || cols == 0) throw ConfigError("model shape must be positive");
    if (arms < 2) throw ConfigError("model requires at least 2 arms");
    if (cols < 2 * kernel - 1) throw ConfigError("column capacity too small for two convolutions");
  }

  // flat parameter layout: [W1 | b1 | W2 | b2 | W3 | b3 | W4 | b4]
  std::size_t w1_size() const { return conv1 * rows * kernel; }
  std::size_t w2_size() const { return conv2 * conv1 * kernel; }
  std::size_t dense_in() const { return conv2 + arms; }
  std::size_t w3_size() const { return hidden * dense_in(); }
  std::size_t param_count() const {
    return w1_size() + conv1 + w2_size() + conv2 + w3_size() + hidden + hidden + 1;
  }
  std::size_t off_b1() const { return w1_size(); }
  std::size_t off_w2() const { return off_b1() + conv1; }
  std::size_t off_b2() const { return off_w2() + w2_size(); }
  std::size_t off_w3() const { return off_b2() + conv2; }
  std::size_t off_b3() const { return off_w3() + w3_size(); }
  std::size_t off_w4() const { return off_b3() + hidden; }
  std::size_t off_b4() const { return off_w4() + hidden; }

  bool operator==(const ModelShape&) const = default;
};

struct TrainingSample {
  FeatureMatrix x;  // padded to (rows, cols)
  int arm = 0;
  double target = 0.0;  // reward in [0,1]
};

struct TrainOptions {
  std::size_t epochs = 150;
  std::size_t batch_size = 8;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
};

struct TrainResult;
class RewardModel;
TrainResult train_model(const RewardModel& start, std::span<const TrainingSample> data,
                        const TrainOptions& opts);

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

class RewardModel {
public:
  RewardModel() = default;

  static RewardModel init(const ModelShape& shape, std::uint64_t seed) {
    shape.validate();
    RewardModel m;
    m.shape_ = shape;
    m.seed_ = seed;
    m.params_.assign(shape.param_count(), 0.0);
    Rng rng(mix_seed(seed, 0x6d6f64656c));
    auto fill = [&](std::size_t off, std::size_t count, std::size_t fan_in) {
      const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (std::size_t i = 0; i < count; ++i) m.params_[off + i] = scale * rng.normal();
    };
    fill(0, shape.w1_size(), shape.rows * shape.kernel);
    fill(shape.off_w2(), shape.w2_size(), shape.conv1 * shape.kernel);
    fill(shape.off_w3(), shape.w3_size(), shape.dense_in());
    // small output layer keeps untrained predictions near 0.5
    Rng out_rng(mix_seed(seed, 0x6f7574));
    const double out_scale = std::sqrt(1.0 / static_cast<double>(shape.hidden));
    for (std::size_t i = 0; i < shape.hidden; ++i)
      m.params_[shape.off_w4() + i] = 0.1 * out_scale * out_rng.normal();
    return m;
  }

  const ModelShape& shape() const { return shape_; }
  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t step_count() const { return step_count_; }

  double predict(const FeatureMatrix& x, int arm) const {
    Workspace ws;
    return forward(x, arm, ws);
  }

  /// c_hat = 1 - r_hat, y_tilde = phi_inv(c_hat): predicted scaled cost and
  /// the runtime estimate used for arm scoring.
  std::pair<double, double> recover_cost(const FeatureMatrix& x, int arm,
                                         const LogMinMaxScaler& s) const {
    double c_hat = complement(predict(x, arm));
    return {c_hat, s.phi_inv(c_hat)};
  }

  double mse_loss(std::span<const TrainingSample> data) const {
    if (data.empty()) throw ValidationError("loss over empty training set");
    double sum = 0.0;
    for (const auto& sample : data) {
      double d = predict(sample.x, sample.arm) - sample.target;
      sum += d * d;
    }
    return sum / static_cast<double>(data.size());
  }

  // Loss plus a hash of every rectifier's on/off state. Two evaluations with
  // equal hashes lie on the same smooth piece of the loss surface.
  std::pair<double, std::uint64_t> loss_with_activation_pattern(
      std::span<const TrainingSample> data) const {
    if (data.empty()) throw ValidationError("loss over empty training set");
    double sum = 0.0;
    std::uint64_t pattern = 0xcbf29ce484222325ull;
    Workspace ws;
    for (const auto& sample : data) {
      double d = forward(sample.x, sample.arm, ws) - sample.target;
      sum += d * d;
      pattern = mix_pattern(pattern, ws);
    }
    return {sum / static_cast<double>(data.size()), pattern};
  }

  /// Mean-squared-error gradient over `data`, matching mse_loss exactly.
  std::vector<double> gradient(std::span<const TrainingSample> data) const {
    if (data.empty()) throw ValidationError("gradient over empty training set");
    std::vector<double> grad(params_.size(), 0.0);
    Workspace ws;
    for (const auto& sample : data) accumulate_gradient(sample, grad, ws);
    const double inv = 1.0 / static_cast<double>(data.size());
    for (auto& g : grad) g *= inv;
    return grad;
  }

  nlohmann::json to_json() const {
    nlohmann::json doc;
    doc["architecture"] = {{"rows", shape_.rows},     {"cols", shape_.cols},
                           {"conv1", shape_.conv1},   {"conv2", shape_.conv2},
                           {"kernel", shape_.kernel}, {"hidden", shape_.hidden},
                           {"arms", shape_.arms}};
    doc["params"] = params_;
    doc["seed"] = seed_;
    doc["step_count"] = step_count_;
    return doc;
  }

  static RewardModel from_json(const nlohmann::json& doc) {
    RewardModel m;
    const auto& a = doc.at("architecture");
    m.shape_.rows = a.at("rows").get<std::size_t>();
    m.shape_.cols = a.at("cols").get<std::size_t>();
    m.shape_.conv1 = a.at("conv1").get<std::size_t>();
    m.shape_.conv2 = a.at("conv2").get<std::size_t>();
    m.shape_.kernel = a.at("kernel").get<std::size_t>();
    m.shape_.hidden = a.at("hidden").get<std::size_t>();
    m.shape_.arms = a.at("arms").get<std::size_t>();
    m.shape_.validate();
    m.params_ = doc.at("params").get<std::vector<double>>();
    if (m.params_.size() != m.shape_.param_count())
      throw ValidationError("checkpoint parameter count does not match architecture");
    m.seed_ = doc.at("seed").get<std::uint64_t>();
    m.step_count_ = doc.at("step_count").get<std::uint64_t>();
    return m;
  }

private:
  struct Workspace {
    std::vector<double> h1, h2, pooled, dense_in, h3;
    std::vector<double> d_h1, d_h2, d_dense_in, d_h3;
  };

  static std::uint64_t mix_pattern(std::uint64_t h, const Workspace& ws) {
    auto fold = [&h](const std::vector<double>& v) {
      for (double a : v) {
        h ^= a > 0.0 ? 1u : 0u;
        h *= 0x100000001b3ull;
      }
    };
    fold(ws.h1);
    fold(ws.h2);
    fold(ws.h3);
    return h;
  }

  void check_input(const FeatureMatrix& x, int arm) const {
    if (x.rows != shape_.rows || x.cols != shape_.cols)
      throw ValidationError("input shape (" + std::to_string(x.rows) + "x" + std::to_string(x.cols) +
                            ") does not match model (" + std::to_string(shape_.rows) + "x" +
                            std::to_string(shape_.cols) + ")");
    if (arm < 0 || static_cast<std::size_t>(arm) >= shape_.arms)
      throw ValidationError("arm " + std::to_string(arm) + " outside [0," +
                            std::to_string(shape_.arms) + ")");
  }

  double forward(const FeatureMatrix& x, int arm, Workspace& ws) const {
    check_input(x, arm);
    const ModelShape& s = shape_;
    const std::size_t w1len = s.conv1_width();
    const std::size_t w2len = s.conv2_width();
    ws.h1.assign(s.conv1 * w1len, 0.0);
    ws.h2.assign(s.conv2 * w2len, 0.0);

    for (std::size_t f = 0; f < s.conv1; ++f) {
      const double* kw = &params_[f * s.rows * s.kernel];
      for (std::size_t j = 0; j < w1len; ++j) {
        double acc = params_[s.off_b1() + f];
        for (std::size_t r = 0; r < s.rows; ++r)
          for (std::size_t k = 0; k < s.kernel; ++k)
            acc += kw[r * s.kernel + k] * x.at(r, j + k);
        ws.h1[f * w1len + j] = acc > 0.0 ? acc : 0.0;
      }
    }
    for (std::size_t g = 0; g < s.conv2; ++g) {
      const double* kw = &params_[s.off_w2() + g * s.conv1 * s.kernel];
      for (std::size_t j = 0; j < w2len; ++j) {
        double acc = params_[s.off_b2() + g];
        for (std::size_t f = 0; f < s.conv1; ++f)
          for (std::size_t k = 0; k < s.kernel; ++k)
            acc += kw[f * s.kernel + k] * ws.h1[f * w1len + j + k];
        ws.h2[g * w2len + j] = acc > 0.0 ? acc : 0.0;
      }
    }
    ws.pooled.assign(s.conv2, 0.0);
    for (std::size_t g = 0; g < s.conv2; ++g) {
      double acc = 0.0;
      for (std::size_t j = 0; j < w2len; ++j) acc += ws.h2[g * w2len + j];
      ws.pooled[g] = acc / static_cast<double>(w2len);
    }
    ws.dense_in.assign(s.dense_in(), 0.0);
    for (std::size_t g = 0; g < s.conv2; ++g) ws.dense_in[g] = ws.pooled[g];
    ws.dense_in[s.conv2 + static_cast<std::size_t>(arm)] = 1.0;

    ws.h3.assign(s.hidden, 0.0);
    for (std::size_t h = 0; h < s.hidden; ++h) {
      double acc = params_[s.off_b3() + h];
      const double* row = &params_[s.off_w3() + h * s.dense_in()];
      for (std::size_t i = 0; i < s.dense_in(); ++i) acc += row[i] * ws.dense_in[i];
      ws.h3[h] = acc > 0.0 ? acc : 0.0;
    }
    double a4 = params_[s.off_b4()];
    for (std::size_t h = 0; h < s.hidden; ++h) a4 += params_[s.off_w4() + h] * ws.h3[h];
    return sigmoid(a4);
  }

  // adds d((f - r)^2)/dtheta for one sample into grad
  void accumulate_gradient(const TrainingSample& sample, std::vector<double>& grad,
                           Workspace& ws) const {
    const ModelShape& s = shape_;
    const double out = forward(sample.x, sample.arm, ws);
    const double d_a4 = 2.0 * (out - sample.target) * out * (1.0 - out);

    const std::size_t w1len = s.conv1_width();
    const std::size_t w2len = s.conv2_width();

    grad[s.off_b4()] += d_a4;
    ws.d_h3.assign(s.hidden, 0.0);
    for (std::size_t h = 0; h < s.hidden; ++h) {
      grad[s.off_w4() + h] += d_a4 * ws.h3[h];
      if (ws.h3[h] > 0.0) ws.d_h3[h] = d_a4 * params_[s.off_w4() + h];
    }
    ws.d_dense_in.assign(s.dense_in(), 0.0);
    for (std::size_t h = 0; h < s.hidden; ++h) {
      if (ws.d_h3[h] == 0.0) continue;
      const std::size_t row = s.off_w3() + h * s.dense_in();
      grad[s.off_b3() + h] += ws.d_h3[h];
      for (std::size_t i = 0; i < s.dense_in(); ++i) {
        grad[row + i] += ws.d_h3[h] * ws.dense_in[i];
        ws.d_dense_in[i] += ws.d_h3[h] * params_[row + i];
      }
    }
    // back through global average pooling into conv2 activations
    ws.d_h2.assign(s.conv2 * w2len, 0.0);
    for (std::size_t g = 0; g < s.conv2; ++g) {
      const double d_pool = ws.d_dense_in[g] / static_cast<double>(w2len);
      for (std::size_t j = 0; j < w2len; ++j)
        if (ws.h2[g * w2len + j] > 0.0) ws.d_h2[g * w2len + j] = d_pool;
    }
    ws.d_h1.assign(s.conv1 * w1len, 0.0);
    for (std::size_t g = 0; g < s.conv2; ++g) {
      const std::size_t kbase = s.off_w2() + g * s.conv1 * s.kernel;
      for (std::size_t j = 0; j < w2len; ++j) {
        const double d = ws.d_h2[g * w2len + j];
        if (d == 0.0) continue;
        grad[s.off_b2() + g] += d;
        for (std::size_t f = 0; f < s.conv1; ++f)
          for (std::size_t k = 0; k < s.kernel; ++k) {
            grad[kbase + f * s.kernel + k] += d * ws.h1[f * w1len + j + k];
            ws.d_h1[f * w1len + j + k] += d * params_[kbase + f * s.kernel + k];
          }
      }
    }
    for (std::size_t f = 0; f < s.conv1; ++f) {
      const std::size_t kbase = f * s.rows * s.kernel;
      for (std::size_t j = 0; j < w1len; ++j) {
        double d = ws.d_h1[f * w1len + j];
        if (d == 0.0 || ws.h1[f * w1len + j] <= 0.0) continue;
        grad[s.off_b1() + f] += d;
        for (std::size_t r = 0; r < s.rows; ++r)
          for (std::size_t k = 0; k < s.kernel; ++k)
            grad[kbase + r * s.kernel + k] += d * sample.x.at(r, j + k);
      }
    }
  }

  ModelShape shape_;
  std::vector<double> params_;
  std::uint64_t seed_ = 0;
  std::uint64_t step_count_ = 0;

  friend TrainResult train_model(const RewardModel&, std::span<const TrainingSample>,
                                 const TrainOptions&);
};

struct TrainResult {
  RewardModel model;
  std::vector<double> loss_trace;  // full-set MSE after each epoch
};

/// Plain seeded minibatch SGD on the MSE objective. Shuffling comes from the
/// seed alone, so (seed, data, options) fully determine the result.
inline TrainResult train_model(const RewardModel& start, std::span<const TrainingSample> data,
                               const TrainOptions& opts) {
  if (data.empty()) throw ValidationError("train: empty training set");
  for (const auto& s : data) {
    if (!(s.target >= 0.0 && s.target <= 1.0))
      throw ValidationError("train: target outside [0,1]");
    start.check_input(s.x, s.arm);
  }
  TrainResult result{start, {}};
  RewardModel& m = result.model;
  Rng rng(mix_seed(opts.seed, 0x747261696e));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  RewardModel::Workspace ws;
  std::vector<double> grad(m.params_.size());
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size(); begin += opts.batch_size) {
      std::size_t end = std::min(begin + opts.batch_size, order.size());
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = begin; i < end; ++i)
        m.accumulate_gradient(data[order[i]], grad, ws);
      const double step = opts.learning_rate / static_cast<double>(end - begin);
      for (std::size_t p = 0; p < grad.size(); ++p) m.params_[p] -= step * grad[p];
      ++m.step_count_;
    }
    result.loss_trace.push_back(m.mse_loss(data));
  }
  return result;
}

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked_params = 0;
};

/// Central-difference verification of the analytic MSE gradient on a seeded
/// parameter subset. Parameters whose +-h interval crosses a rectifier
/// boundary are skipped: the difference quotient is meaningless across a
/// kink. `inject_fault` perturbs the analytic side and exists so tests can
/// prove the check catches a broken gradient.
inline GradientCheckResult gradient_check(const RewardModel& model,
                                          std::span<const TrainingSample> data,
                                          std::size_t subset_size = 128,
                                          std::uint64_t seed = 7,
                                          double inject_fault = 0.0) {
  RewardModel probe = model;
  std::vector<double> analytic = probe.gradient(data);
  const double h = 1e-4;

  std::vector<std::size_t> indices(probe.params().size());
  std::iota(indices.begin(), indices.end(), 0);
  Rng rng(mix_seed(seed, 0x67726164));
  rng.shuffle(indices);
  const std::size_t target = std::max<std::size_t>(subset_size, 100);

  GradientCheckResult result;
  auto params = probe.mutable_params();
  for (std::size_t p : indices) {
    if (result.checked_params >= target) break;
    const double saved = params[p];
    params[p] = saved + h;
    const auto [up, pattern_up] = probe.loss_with_activation_pattern(data);
    params[p] = saved - h;
    const auto [down, pattern_down] = probe.loss_with_activation_pattern(data);
    params[p] = saved;
    if (pattern_up != pattern_down) continue;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[p] + inject_fault;
    const double denom = std::max(std::abs(a), std::abs(numeric));
    const double rel = denom < 1e-7 ? 0.0 : std::abs(a - numeric) / denom;
    result.max_relative_error = std::max(result.max_relative_error, rel);
    ++result.checked_params;
  }
  return result;
}

}  // namespace ontotune
