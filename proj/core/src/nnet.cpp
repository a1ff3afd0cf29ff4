#include "musedance/nnet.hpp"

#include <algorithm>
#include <cmath>

namespace musedance::nnet {

namespace {

using Eigen::MatrixXd;
using RowMajorMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMajorMap = Eigen::Map<
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

ParamTensor::ParamTensor(std::string n, std::vector<int> s, bool t)
    : name(std::move(n)), shape(std::move(s)), trainable(t) {
  std::size_t total = 1;
  for (int d : shape) total *= static_cast<std::size_t>(d);
  value.assign(total, 0.0);
  grad.assign(total, 0.0);
}

std::int64_t Layer::param_count() {
  std::int64_t total = 0;
  for (auto* p : params()) total += p->count();
  return total;
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(int channels, std::string name, double eps, double momentum)
    : channels_(channels), eps_(eps), momentum_(momentum),
      gamma_(name + ".gamma", {channels}),
      beta_(name + ".beta", {channels}),
      run_mean_(name + ".running_mean", {channels}, false),
      run_var_(name + ".running_var", {channels}, false) {
  std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0);
  std::fill(run_var_.value.begin(), run_var_.value.end(), 1.0);
}

std::array<int, 3> BatchNorm::output_shape(const std::array<int, 3>& in) const {
  if (in[2] != channels_)
    throw ConfigError("batch_norm built for " + std::to_string(channels_) +
                      " channels, input has " + std::to_string(in[2]));
  return in;
}

void BatchNorm::init(Rng&) {
  std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0);
  std::fill(beta_.value.begin(), beta_.value.end(), 0.0);
  std::fill(run_mean_.value.begin(), run_mean_.value.end(), 0.0);
  std::fill(run_var_.value.begin(), run_var_.value.end(), 1.0);
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
  output_shape(x.shape3());
  cached_mode_ = mode;
  const std::size_t m = static_cast<std::size_t>(x.n) * x.h * x.w;
  const int c = channels_;
  Tensor y(x.n, x.h, x.w, x.c);
  xhat_ = Tensor(x.n, x.h, x.w, x.c);
  inv_std_.assign(static_cast<std::size_t>(c), 0.0);

  std::vector<double> mean(static_cast<std::size_t>(c), 0.0);
  std::vector<double> var(static_cast<std::size_t>(c), 0.0);
  if (mode == Mode::train) {
    for (std::size_t i = 0; i < x.v.size(); ++i) mean[i % c] += x.v[i];
    for (int ch = 0; ch < c; ++ch) mean[static_cast<std::size_t>(ch)] /= static_cast<double>(m);
    for (std::size_t i = 0; i < x.v.size(); ++i) {
      const double d = x.v[i] - mean[i % c];
      var[i % c] += d * d;
    }
    for (int ch = 0; ch < c; ++ch) var[static_cast<std::size_t>(ch)] /= static_cast<double>(m);
    for (int ch = 0; ch < c; ++ch) {
      run_mean_.value[static_cast<std::size_t>(ch)] =
          (1.0 - momentum_) * run_mean_.value[static_cast<std::size_t>(ch)] +
          momentum_ * mean[static_cast<std::size_t>(ch)];
      run_var_.value[static_cast<std::size_t>(ch)] =
          (1.0 - momentum_) * run_var_.value[static_cast<std::size_t>(ch)] +
          momentum_ * var[static_cast<std::size_t>(ch)];
    }
  } else {
    mean = run_mean_.value;
    var = run_var_.value;
  }

  for (int ch = 0; ch < c; ++ch)
    inv_std_[static_cast<std::size_t>(ch)] = 1.0 / std::sqrt(var[static_cast<std::size_t>(ch)] + eps_);

  for (std::size_t i = 0; i < x.v.size(); ++i) {
    const std::size_t ch = i % c;
    const double xh = (x.v[i] - mean[ch]) * inv_std_[ch];
    xhat_.v[i] = xh;
    y.v[i] = gamma_.value[ch] * xh + beta_.value[ch];
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& dy) {
  const std::size_t m = static_cast<std::size_t>(dy.n) * dy.h * dy.w;
  const int c = channels_;
  Tensor dx(dy.n, dy.h, dy.w, dy.c);

  std::vector<double> sum_dxhat(static_cast<std::size_t>(c), 0.0);
  std::vector<double> sum_dxhat_xhat(static_cast<std::size_t>(c), 0.0);
  for (std::size_t i = 0; i < dy.v.size(); ++i) {
    const std::size_t ch = i % c;
    gamma_.grad[ch] += dy.v[i] * xhat_.v[i];
    beta_.grad[ch] += dy.v[i];
    const double dxhat = dy.v[i] * gamma_.value[ch];
    sum_dxhat[ch] += dxhat;
    sum_dxhat_xhat[ch] += dxhat * xhat_.v[i];
  }

  if (cached_mode_ == Mode::eval) {
    for (std::size_t i = 0; i < dy.v.size(); ++i) {
      const std::size_t ch = i % c;
      dx.v[i] = dy.v[i] * gamma_.value[ch] * inv_std_[ch];
    }
    return dx;
  }

  const double dm = static_cast<double>(m);
  for (std::size_t i = 0; i < dy.v.size(); ++i) {
    const std::size_t ch = i % c;
    const double dxhat = dy.v[i] * gamma_.value[ch];
    dx.v[i] = inv_std_[ch] / dm *
              (dm * dxhat - sum_dxhat[ch] - xhat_.v[i] * sum_dxhat_xhat[ch]);
  }
  return dx;
}

std::vector<ParamTensor*> BatchNorm::params() {
  return {&gamma_, &beta_, &run_mean_, &run_var_};
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int in_c, int out_c, int kh, int kw, bool tanh_act, std::string name)
    : in_c_(in_c), out_c_(out_c), kh_(kh), kw_(kw), tanh_act_(tanh_act),
      kernel_(name + ".kernel", {kh, kw, in_c, out_c}),
      bias_(name + ".bias", {out_c}) {}

std::array<int, 3> Conv2d::output_shape(const std::array<int, 3>& in) const {
  if (in[2] != in_c_)
    throw ConfigError("conv2d built for " + std::to_string(in_c_) +
                      " input channels, got " + std::to_string(in[2]));
  return {in[0], in[1], out_c_};
}

void Conv2d::init(Rng& rng) {
  const double fan_in = static_cast<double>(kh_) * kw_ * in_c_;
  const double fan_out = static_cast<double>(kh_) * kw_ * out_c_;
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : kernel_.value) v = rng.uniform(-limit, limit);
  std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
}

void Conv2d::im2col(const Tensor& x, int sample, Eigen::MatrixXd& col) const {
  const int pt = (kh_ - 1) / 2, pl = (kw_ - 1) / 2;
  col.setZero();
  for (int oi = 0; oi < x.h; ++oi) {
    for (int oj = 0; oj < x.w; ++oj) {
      const long row = static_cast<long>(oi) * x.w + oj;
      for (int di = 0; di < kh_; ++di) {
        const int si = oi + di - pt;
        if (si < 0 || si >= x.h) continue;
        for (int dj = 0; dj < kw_; ++dj) {
          const int sj = oj + dj - pl;
          if (sj < 0 || sj >= x.w) continue;
          const std::size_t base =
              ((static_cast<std::size_t>(sample) * x.h + si) * x.w + sj) * x.c;
          const long cbase = (static_cast<long>(di) * kw_ + dj) * in_c_;
          for (int ic = 0; ic < in_c_; ++ic)
            col(row, cbase + ic) = x.v[base + static_cast<std::size_t>(ic)];
        }
      }
    }
  }
}

Tensor Conv2d::forward(const Tensor& x, Mode) {
  output_shape(x.shape3());
  x_cache_ = x;
  Tensor y(x.n, x.h, x.w, out_c_);
  const long rows = static_cast<long>(x.h) * x.w;
  const long kdim = static_cast<long>(kh_) * kw_ * in_c_;
  Eigen::Map<const MatrixXd> kmat(kernel_.value.data(), kdim, out_c_);
  Eigen::Map<const Eigen::VectorXd> bias(bias_.value.data(), out_c_);
  Eigen::MatrixXd col(rows, kdim);
  for (int s = 0; s < x.n; ++s) {
    im2col(x, s, col);
    RowMajorMap out(y.v.data() + static_cast<std::size_t>(s) * y.features(), rows, out_c_);
    out.noalias() = col * kmat;
    out.rowwise() += bias.transpose();
  }
  if (tanh_act_)
    for (auto& v : y.v) v = std::tanh(v);
  y_cache_ = y;
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  Tensor dz = dy;
  if (tanh_act_)
    for (std::size_t i = 0; i < dz.v.size(); ++i)
      dz.v[i] *= 1.0 - y_cache_.v[i] * y_cache_.v[i];

  const Tensor& x = x_cache_;
  Tensor dx(x.n, x.h, x.w, x.c);
  const long rows = static_cast<long>(x.h) * x.w;
  const long kdim = static_cast<long>(kh_) * kw_ * in_c_;
  Eigen::Map<const MatrixXd> kmat(kernel_.value.data(), kdim, out_c_);
  Eigen::Map<MatrixXd> dkmat(kernel_.grad.data(), kdim, out_c_);
  Eigen::Map<Eigen::VectorXd> dbias(bias_.grad.data(), out_c_);

  Eigen::MatrixXd col(rows, kdim);
  Eigen::MatrixXd dcol(rows, kdim);
  const int pt = (kh_ - 1) / 2, pl = (kw_ - 1) / 2;
  for (int s = 0; s < x.n; ++s) {
    ConstRowMajorMap dout(dz.v.data() + static_cast<std::size_t>(s) * dz.features(),
                          rows, out_c_);
    im2col(x, s, col);
    dkmat.noalias() += col.transpose() * dout;
    dbias.noalias() += dout.colwise().sum().transpose();
    dcol.noalias() = dout * kmat.transpose();
    // col2im scatter
    for (int oi = 0; oi < x.h; ++oi) {
      for (int oj = 0; oj < x.w; ++oj) {
        const long row = static_cast<long>(oi) * x.w + oj;
        for (int di = 0; di < kh_; ++di) {
          const int si = oi + di - pt;
          if (si < 0 || si >= x.h) continue;
          for (int dj = 0; dj < kw_; ++dj) {
            const int sj = oj + dj - pl;
            if (sj < 0 || sj >= x.w) continue;
            const std::size_t base =
                ((static_cast<std::size_t>(s) * x.h + si) * x.w + sj) * x.c;
            const long cbase = (static_cast<long>(di) * kw_ + dj) * in_c_;
            for (int ic = 0; ic < in_c_; ++ic)
              dx.v[base + static_cast<std::size_t>(ic)] += dcol(row, cbase + ic);
          }
        }
      }
    }
  }
  return dx;
}

std::vector<ParamTensor*> Conv2d::params() { return {&kernel_, &bias_}; }

// ---------------------------------------------------------------------------
// AvgPool2d

AvgPool2d::AvgPool2d(int ph, int pw) : ph_(ph), pw_(pw) {
  if (ph <= 0 || pw <= 0) throw ConfigError("pool window must be positive");
}

std::array<int, 3> AvgPool2d::output_shape(const std::array<int, 3>& in) const {
  if (in[0] < ph_ || in[1] < pw_)
    throw ConfigError("pool window larger than input plane");
  return {in[0] / ph_, in[1] / pw_, in[2]};
}

Tensor AvgPool2d::forward(const Tensor& x, Mode) {
  const auto os = output_shape(x.shape3());
  in_shape_ = {x.n, x.h, x.w, x.c};
  Tensor y(x.n, os[0], os[1], os[2]);
  const double inv = 1.0 / (static_cast<double>(ph_) * pw_);
  for (int s = 0; s < x.n; ++s)
    for (int oi = 0; oi < y.h; ++oi)
      for (int oj = 0; oj < y.w; ++oj)
        for (int ch = 0; ch < x.c; ++ch) {
          double acc = 0.0;
          for (int di = 0; di < ph_; ++di)
            for (int dj = 0; dj < pw_; ++dj)
              acc += x.at(s, oi * ph_ + di, oj * pw_ + dj, ch);
          y.at(s, oi, oj, ch) = acc * inv;
        }
  return y;
}

Tensor AvgPool2d::backward(const Tensor& dy) {
  Tensor dx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
  const double inv = 1.0 / (static_cast<double>(ph_) * pw_);
  for (int s = 0; s < dy.n; ++s)
    for (int oi = 0; oi < dy.h; ++oi)
      for (int oj = 0; oj < dy.w; ++oj)
        for (int ch = 0; ch < dy.c; ++ch) {
          const double g = dy.at(s, oi, oj, ch) * inv;
          for (int di = 0; di < ph_; ++di)
            for (int dj = 0; dj < pw_; ++dj)
              dx.at(s, oi * ph_ + di, oj * pw_ + dj, ch) += g;
        }
  return dx;
}

// ---------------------------------------------------------------------------
// Gru

Gru::Gru(int input_dim, int units, std::string name)
    : d_(input_dim), u_(units),
      w_(name + ".w", {input_dim, 3 * units}),
      rw_(name + ".rw", {units, 3 * units}),
      bias_in_(name + ".bias_in", {3 * units}),
      bias_rec_(name + ".bias_rec", {3 * units}) {}

std::array<int, 3> Gru::output_shape(const std::array<int, 3>& in) const {
  if (in[1] != 1 || in[2] != d_)
    throw ConfigError("gru expects (T, 1, " + std::to_string(d_) + ") features");
  if (in[0] < 1) throw ConfigError("gru requires at least one timestep");
  return {1, 1, u_};
}

void Gru::init(Rng& rng) {
  const double lw = std::sqrt(6.0 / (d_ + 3.0 * u_));
  for (auto& v : w_.value) v = rng.uniform(-lw, lw);
  const double lr = std::sqrt(6.0 / (u_ + 3.0 * u_));
  for (auto& v : rw_.value) v = rng.uniform(-lr, lr);
  std::fill(bias_in_.value.begin(), bias_in_.value.end(), 0.0);
  std::fill(bias_rec_.value.begin(), bias_rec_.value.end(), 0.0);
}

Tensor Gru::forward(const Tensor& x, Mode) {
  output_shape(x.shape3());
  if (x.h == 0) throw DataError("gru forward on a zero-length sequence");
  t_steps_ = x.h;
  batch_ = x.n;
  const int n = x.n, T = x.h;

  Eigen::Map<const MatrixXd> w(w_.value.data(), d_, 3 * u_);
  Eigen::Map<const MatrixXd> rw(rw_.value.data(), u_, 3 * u_);
  Eigen::Map<const Eigen::VectorXd> bin(bias_in_.value.data(), 3 * u_);
  Eigen::Map<const Eigen::VectorXd> brec(bias_rec_.value.data(), 3 * u_);

  xs_.assign(static_cast<std::size_t>(T), MatrixXd());
  hs_.assign(static_cast<std::size_t>(T) + 1, MatrixXd::Zero(n, u_));
  zs_.assign(static_cast<std::size_t>(T), MatrixXd());
  rs_.assign(static_cast<std::size_t>(T), MatrixXd());
  hhs_.assign(static_cast<std::size_t>(T), MatrixXd());
  arec_h_.assign(static_cast<std::size_t>(T), MatrixXd());

  MatrixXd a_in(n, 3 * u_), a_rec(n, 3 * u_);
  for (int t = 0; t < T; ++t) {
    MatrixXd xt(n, d_);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d_; ++j) xt(i, j) = x.at(i, t, 0, j);
    const MatrixXd& h_prev = hs_[static_cast<std::size_t>(t)];

    a_in.noalias() = xt * w;
    a_in.rowwise() += bin.transpose();
    a_rec.noalias() = h_prev * rw;
    a_rec.rowwise() += brec.transpose();

    MatrixXd z = (a_in.leftCols(u_) + a_rec.leftCols(u_))
                     .unaryExpr([](double v) { return sigmoid(v); });
    MatrixXd r = (a_in.middleCols(u_, u_) + a_rec.middleCols(u_, u_))
                     .unaryExpr([](double v) { return sigmoid(v); });
    MatrixXd arec_h = a_rec.rightCols(u_);
    MatrixXd hh = (a_in.rightCols(u_) + r.cwiseProduct(arec_h))
                      .unaryExpr([](double v) { return std::tanh(v); });
    hs_[static_cast<std::size_t>(t) + 1] =
        z.cwiseProduct(h_prev) + (MatrixXd::Ones(n, u_) - z).cwiseProduct(hh);

    xs_[static_cast<std::size_t>(t)] = std::move(xt);
    zs_[static_cast<std::size_t>(t)] = std::move(z);
    rs_[static_cast<std::size_t>(t)] = std::move(r);
    hhs_[static_cast<std::size_t>(t)] = std::move(hh);
    arec_h_[static_cast<std::size_t>(t)] = std::move(arec_h);
  }

  Tensor y(n, 1, 1, u_);
  const MatrixXd& h_last = hs_[static_cast<std::size_t>(T)];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < u_; ++j) y.at(i, 0, 0, j) = h_last(i, j);
  return y;
}

Tensor Gru::backward(const Tensor& dy) {
  const int n = batch_, T = t_steps_;
  Eigen::Map<const MatrixXd> w(w_.value.data(), d_, 3 * u_);
  Eigen::Map<const MatrixXd> rw(rw_.value.data(), u_, 3 * u_);
  Eigen::Map<MatrixXd> dw(w_.grad.data(), d_, 3 * u_);
  Eigen::Map<MatrixXd> drw(rw_.grad.data(), u_, 3 * u_);
  Eigen::Map<Eigen::VectorXd> dbin(bias_in_.grad.data(), 3 * u_);
  Eigen::Map<Eigen::VectorXd> dbrec(bias_rec_.grad.data(), 3 * u_);

  MatrixXd dh(n, u_);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < u_; ++j) dh(i, j) = dy.at(i, 0, 0, j);

  Tensor dx(n, T, 1, d_);
  MatrixXd d_a_in(n, 3 * u_), d_a_rec(n, 3 * u_);
  for (int t = T - 1; t >= 0; --t) {
    const MatrixXd& z = zs_[static_cast<std::size_t>(t)];
    const MatrixXd& r = rs_[static_cast<std::size_t>(t)];
    const MatrixXd& hh = hhs_[static_cast<std::size_t>(t)];
    const MatrixXd& arec_h = arec_h_[static_cast<std::size_t>(t)];
    const MatrixXd& h_prev = hs_[static_cast<std::size_t>(t)];
    const MatrixXd& xt = xs_[static_cast<std::size_t>(t)];

    MatrixXd dhh = dh.cwiseProduct(MatrixXd::Ones(n, u_) - z);
    MatrixXd dz_pre =
        dh.cwiseProduct(h_prev - hh).cwiseProduct(z).cwiseProduct(MatrixXd::Ones(n, u_) - z);
    MatrixXd dpre_h =
        dhh.cwiseProduct(MatrixXd::Ones(n, u_) - hh.cwiseProduct(hh));
    MatrixXd dr_pre = dpre_h.cwiseProduct(arec_h)
                          .cwiseProduct(r)
                          .cwiseProduct(MatrixXd::Ones(n, u_) - r);

    d_a_in.leftCols(u_) = dz_pre;
    d_a_in.middleCols(u_, u_) = dr_pre;
    d_a_in.rightCols(u_) = dpre_h;
    d_a_rec.leftCols(u_) = dz_pre;
    d_a_rec.middleCols(u_, u_) = dr_pre;
    d_a_rec.rightCols(u_) = dpre_h.cwiseProduct(r);

    dw.noalias() += xt.transpose() * d_a_in;
    drw.noalias() += h_prev.transpose() * d_a_rec;
    dbin.noalias() += d_a_in.colwise().sum().transpose();
    dbrec.noalias() += d_a_rec.colwise().sum().transpose();

    MatrixXd dxt = d_a_in * w.transpose();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d_; ++j) dx.at(i, t, 0, j) = dxt(i, j);

    dh = dh.cwiseProduct(z) + d_a_rec * rw.transpose();
  }
  return dx;
}

std::vector<ParamTensor*> Gru::params() { return {&w_, &rw_, &bias_in_, &bias_rec_}; }

// ---------------------------------------------------------------------------
// Branch

Branch::Branch(std::string name, std::array<int, 3> input_shape)
    : name_(std::move(name)), input_shape_(input_shape) {}

void Branch::check_trace(const std::vector<std::array<int, 3>>& expected) {
  std::array<int, 3> cur = input_shape_;
  if (expected.size() != layers_.size())
    throw ConfigError("branch '" + name_ + "': trace length mismatch");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    cur = layers_[i]->output_shape(cur);
    if (cur != expected[i])
      throw ConfigError("branch '" + name_ + "': layer " + std::to_string(i) + " (" +
                        layers_[i]->kind() + ") produces " + std::to_string(cur[0]) +
                        "x" + std::to_string(cur[1]) + "x" + std::to_string(cur[2]) +
                        ", expected " + std::to_string(expected[i][0]) + "x" +
                        std::to_string(expected[i][1]) + "x" +
                        std::to_string(expected[i][2]));
  }
  last_shape_ = cur;
  output_dim_ = cur[0] * cur[1] * cur[2];
}

Branch Branch::audio(double bn_eps, double bn_momentum) {
  Branch b("audio", {39, 128, 1});
  b.layers_.push_back(std::make_unique<BatchNorm>(1, "audio/bn0", bn_eps, bn_momentum));
  b.layers_.push_back(std::make_unique<Conv2d>(1, 8, 6, 4, true, "audio/conv1"));
  b.layers_.push_back(std::make_unique<AvgPool2d>(3, 8));
  b.layers_.push_back(std::make_unique<BatchNorm>(8, "audio/bn1", bn_eps, bn_momentum));
  b.layers_.push_back(std::make_unique<Conv2d>(8, 16, 4, 4, true, "audio/conv2"));
  b.layers_.push_back(std::make_unique<AvgPool2d>(4, 4));
  b.layers_.push_back(std::make_unique<BatchNorm>(16, "audio/bn2", bn_eps, bn_momentum));
  b.layers_.push_back(std::make_unique<Conv2d>(16, 32, 3, 4, true, "audio/conv3"));
  b.layers_.push_back(std::make_unique<AvgPool2d>(3, 4));
  b.layers_.push_back(std::make_unique<BatchNorm>(32, "audio/bn3", bn_eps, bn_momentum));
  b.layers_.push_back(std::make_unique<Conv2d>(32, 128, 1, 1, false, "audio/conv4"));
  b.check_trace({{39, 128, 1},
                 {39, 128, 8},
                 {13, 16, 8},
                 {13, 16, 8},
                 {13, 16, 16},
                 {3, 4, 16},
                 {3, 4, 16},
                 {3, 4, 32},
                 {1, 1, 32},
                 {1, 1, 32},
                 {1, 1, 128}});
  return b;
}

Branch Branch::movement(double bn_eps, double bn_momentum) {
  Branch b("movement", {30, 1, 119});
  b.layers_.push_back(std::make_unique<BatchNorm>(119, "move/bn0", bn_eps, bn_momentum));
  b.layers_.push_back(std::make_unique<Gru>(119, 32, "move/gru"));
  b.check_trace({{30, 1, 119}, {1, 1, 32}});
  return b;
}

void Branch::init_params(Rng& rng) {
  for (auto& l : layers_) l->init(rng);
}

Eigen::MatrixXd Branch::forward(const Tensor& x, Mode mode) {
  if (x.shape3() != input_shape_)
    throw ConfigError("branch '" + name_ + "': unexpected input shape");
  Tensor cur = x;
  for (auto& l : layers_) cur = l->forward(cur, mode);
  Eigen::MatrixXd out(cur.n, output_dim_);
  for (int i = 0; i < cur.n; ++i)
    for (int j = 0; j < output_dim_; ++j)
      out(i, j) = cur.v[static_cast<std::size_t>(i) * cur.features() +
                        static_cast<std::size_t>(j)];
  return out;
}

Tensor Branch::backward(const Eigen::MatrixXd& d_out) {
  Tensor cur(static_cast<int>(d_out.rows()), last_shape_[0], last_shape_[1],
             last_shape_[2]);
  for (int i = 0; i < cur.n; ++i)
    for (int j = 0; j < output_dim_; ++j)
      cur.v[static_cast<std::size_t>(i) * cur.features() + static_cast<std::size_t>(j)] =
          d_out(i, j);
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    cur = (*it)->backward(cur);
  return cur;
}

std::vector<ParamTensor*> Branch::params() {
  std::vector<ParamTensor*> out;
  for (auto& l : layers_)
    for (auto* p : l->params()) out.push_back(p);
  return out;
}

std::int64_t Branch::total_param_count() {
  std::int64_t total = 0;
  for (auto& l : layers_) total += l->param_count();
  return total;
}

std::vector<LayerRow> Branch::layer_rows() {
  std::vector<LayerRow> rows;
  rows.push_back({"input", input_shape_, 0});
  std::array<int, 3> cur = input_shape_;
  for (auto& l : layers_) {
    cur = l->output_shape(cur);
    rows.push_back({l->kind(), cur, l->param_count()});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Optimizer

void Optimizer::step(const std::vector<ParamTensor*>& params) {
  ++t_;
  for (auto* p : params) {
    if (!p->trainable) continue;
    for (double g : p->grad)
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient in parameter '" + p->name + "'");

    if (cfg_.kind == "sgd") {
      for (std::size_t i = 0; i < p->value.size(); ++i)
        p->value[i] -= cfg_.lr * p->grad[i];
    } else if (cfg_.kind == "adam") {
      auto& m = state_["m:" + p->name];
      auto& v = state_["v:" + p->name];
      if (m.empty()) m.assign(p->value.size(), 0.0);
      if (v.empty()) v.assign(p->value.size(), 0.0);
      const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
      const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * p->grad[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * p->grad[i] * p->grad[i];
        p->value[i] -= cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
      }
    } else {
      throw ConfigError("unknown optimizer kind '" + cfg_.kind + "'");
    }
  }
}

}  // namespace musedance::nnet
