#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "musedance/common.hpp"

namespace musedance::nnet {

// Dense (n, h, w, c) activation block, channel fastest.
struct Tensor {
  int n = 0, h = 0, w = 0, c = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int n_, int h_, int w_, int c_)
      : n(n_), h(h_), w(w_), c(c_),
        v(static_cast<std::size_t>(n_) * h_ * w_ * c_, 0.0) {}

  double& at(int i, int j, int k, int l) {
    return v[((static_cast<std::size_t>(i) * h + j) * w + k) * c + l];
  }
  double at(int i, int j, int k, int l) const {
    return v[((static_cast<std::size_t>(i) * h + j) * w + k) * c + l];
  }
  std::size_t features() const { return static_cast<std::size_t>(h) * w * c; }
  std::array<int, 3> shape3() const { return {h, w, c}; }
};

enum class Mode { train, eval };

struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool trainable = true;

  ParamTensor(std::string n, std::vector<int> s, bool t = true);
  std::int64_t count() const { return static_cast<std::int64_t>(value.size()); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  virtual std::array<int, 3> output_shape(const std::array<int, 3>& in) const = 0;
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual std::vector<ParamTensor*> params() { return {}; }
  virtual void init(Rng&) {}
  std::int64_t param_count();
};

// Per-channel batch normalization over (n, h, w). Accounts four parameters
// per channel: gamma, beta, and the non-trainable running mean/variance.
class BatchNorm : public Layer {
 public:
  BatchNorm(int channels, std::string name, double eps = 1e-5, double momentum = 0.1);
  std::string kind() const override { return "batch_norm"; }
  std::array<int, 3> output_shape(const std::array<int, 3>& in) const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamTensor*> params() override;
  void init(Rng&) override;

 private:
  int channels_;
  double eps_, momentum_;
  ParamTensor gamma_, beta_, run_mean_, run_var_;
  Mode cached_mode_ = Mode::train;
  Tensor xhat_;
  std::vector<double> inv_std_;
};

// Stride-1 2D convolution with zero-padded "same" output, bias, and an
// optional fused tanh activation.
class Conv2d : public Layer {
 public:
  Conv2d(int in_c, int out_c, int kh, int kw, bool tanh_act, std::string name);
  std::string kind() const override { return "conv2d"; }
  std::array<int, 3> output_shape(const std::array<int, 3>& in) const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamTensor*> params() override;
  void init(Rng& rng) override;

 private:
  void im2col(const Tensor& x, int sample, Eigen::MatrixXd& col) const;

  int in_c_, out_c_, kh_, kw_;
  bool tanh_act_;
  ParamTensor kernel_, bias_;  // kernel rows: kh*kw*in_c, cols: out_c
  Tensor x_cache_, y_cache_;
};

// Average pooling with floor semantics: trailing rows/columns that do not
// fill a window are dropped.
class AvgPool2d : public Layer {
 public:
  AvgPool2d(int ph, int pw);
  std::string kind() const override { return "avg_pool2d"; }
  std::array<int, 3> output_shape(const std::array<int, 3>& in) const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int ph_, pw_;
  std::array<int, 4> in_shape_{};
};

// Reset-after GRU with separate input and recurrent biases, returning the
// final hidden state only. Input tensor shape (n, T, 1, d).
class Gru : public Layer {
 public:
  Gru(int input_dim, int units, std::string name);
  std::string kind() const override { return "gru"; }
  std::array<int, 3> output_shape(const std::array<int, 3>& in) const override;
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamTensor*> params() override;
  void init(Rng& rng) override;

 private:
  int d_, u_;
  ParamTensor w_, rw_, bias_in_, bias_rec_;  // w: d x 3u, rw: u x 3u (z|r|h)
  int t_steps_ = 0, batch_ = 0;
  std::vector<Eigen::MatrixXd> xs_, hs_, zs_, rs_, hhs_, arec_h_;
};

struct LayerRow {
  std::string kind;
  std::array<int, 3> shape;
  std::int64_t params;
};

// A branch is a fixed layer chain ending in a flatten. The two concrete
// builders check their shape traces at construction time.
class Branch {
 public:
  // 39x128x1 log-mel segments -> 128-d embeddings.
  static Branch audio(double bn_eps = 1e-5, double bn_momentum = 0.1);
  // 30-step, 119-feature movement segments -> 32-d embeddings.
  static Branch movement(double bn_eps = 1e-5, double bn_momentum = 0.1);

  const std::string& name() const { return name_; }
  const std::array<int, 3>& input_shape() const { return input_shape_; }
  int output_dim() const { return output_dim_; }

  void init_params(Rng& rng);
  Eigen::MatrixXd forward(const Tensor& x, Mode mode);
  Tensor backward(const Eigen::MatrixXd& d_out);
  std::vector<ParamTensor*> params();
  std::int64_t total_param_count();
  std::vector<LayerRow> layer_rows();  // leading "input" row with 0 params

 private:
  Branch(std::string name, std::array<int, 3> input_shape);
  void check_trace(const std::vector<std::array<int, 3>>& expected);

  std::string name_;
  std::array<int, 3> input_shape_;
  int output_dim_ = 0;
  std::array<int, 3> last_shape_{};
  std::vector<std::unique_ptr<Layer>> layers_;
};

struct OptimizerConfig {
  std::string kind = "adam";  // "adam" or "sgd"
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(std::move(cfg)) {}

  // Applies one update to every trainable parameter. Throws NumericError on
  // a non-finite gradient, naming the offending tensor.
  void step(const std::vector<ParamTensor*>& params);

  std::int64_t step_count() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

  // Moment buffers keyed "m:<param>" / "v:<param>", for checkpointing.
  std::map<std::string, std::vector<double>>& state() { return state_; }
  void set_step_count(std::int64_t t) { t_ = t; }

 private:
  OptimizerConfig cfg_;
  std::int64_t t_ = 0;
  std::map<std::string, std::vector<double>> state_;
};

}  // namespace musedance::nnet
