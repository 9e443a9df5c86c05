#include <cmath>

#include "binori/error.hpp"
#include "binori/estimator.hpp"

namespace binori {

std::size_t Architecture::length_after(std::size_t i) const {
  std::size_t len = in_length;
  for (std::size_t l = 0; l < i && l < conv.size(); ++l) {
    const std::size_t pad = conv[l].kernel / 2;
    if (len + 2 * pad < conv[l].kernel) return 0;
    len = (len + 2 * pad - conv[l].kernel) / conv[l].stride + 1;
  }
  return len;
}

std::size_t Architecture::flat_size() const {
  const std::size_t ch = conv.empty() ? in_channels : conv.back().out_channels;
  return ch * length_after(conv.size());
}

std::size_t Architecture::parameter_count() const {
  std::size_t n = 0, ch = in_channels;
  for (const auto& c : conv) {
    n += c.out_channels * ch * c.kernel + c.out_channels;
    ch = c.out_channels;
  }
  std::size_t in = flat_size();
  for (std::size_t out : fc) {
    n += out * in + out;
    in = out;
  }
  return n;
}

void Architecture::validate() const {
  require(in_channels > 0 && in_length > 0, ErrorCode::invalid_input, "empty network input");
  require(!fc.empty(), ErrorCode::invalid_input, "network needs at least one fully connected layer");
  require(dropout >= 0.0 && dropout < 1.0, ErrorCode::invalid_input, "dropout must lie in [0, 1)");
  std::size_t len = in_length;
  for (const auto& c : conv) {
    require(c.out_channels > 0 && c.kernel > 0 && c.stride > 0, ErrorCode::invalid_input,
            "conv layer sizes must be positive");
    const std::size_t pad = c.kernel / 2;
    require(len + 2 * pad >= c.kernel, ErrorCode::invalid_input, "conv layer has an empty output");
    len = (len + 2 * pad - c.kernel) / c.stride + 1;
  }
  for (std::size_t out : fc) require(out > 0, ErrorCode::invalid_input, "fc layer sizes must be positive");
}

Architecture default_architecture(std::size_t length) {
  Architecture a;
  a.in_length = length;
  const std::size_t widths[8] = {16, 16, 32, 32, 64, 64, 128, 128};
  for (std::size_t i = 0; i < 8; ++i) a.conv.push_back({widths[i], 7, i % 2 == 1 ? 2u : 1u});
  a.fc = {256, 64, 4};
  a.dropout = 0.3;
  return a;
}

template <typename T>
Network<T>::Network(Architecture arch) : arch_(std::move(arch)) {
  arch_.validate();
  params_.assign(arch_.parameter_count(), T(0));
  mean_.assign(arch_.in_channels, T(0));
  scale_.assign(arch_.in_channels, T(1));
  std::size_t off = 0, ch = arch_.in_channels;
  for (const auto& c : arch_.conv) {
    offsets_.push_back(off);
    off += c.out_channels * ch * c.kernel + c.out_channels;
    ch = c.out_channels;
  }
  std::size_t in = arch_.flat_size();
  for (std::size_t out : arch_.fc) {
    offsets_.push_back(off);
    off += out * in + out;
    in = out;
  }
}

template <typename T>
void Network<T>::initialize(Rng& rng) {
  std::size_t ch = arch_.in_channels, layer = 0;
  auto fill = [&](std::size_t off, std::size_t out, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < out * fan_in; ++i) params_[off + i] = static_cast<T>(rng.uniform(-limit, limit));
    for (std::size_t i = 0; i < out; ++i) params_[off + out * fan_in + i] = T(0);
  };
  for (const auto& c : arch_.conv) {
    fill(offsets_[layer++], c.out_channels, ch * c.kernel);
    ch = c.out_channels;
  }
  std::size_t in = arch_.flat_size();
  for (std::size_t out : arch_.fc) {
    fill(offsets_[layer++], out, in);
    in = out;
  }
}

namespace {

template <typename M>
void apply_dropout(M& out, M& mask, double rate, Rng* rng) {
  using T = typename M::Scalar;
  require(rng != nullptr, ErrorCode::invalid_input, "training forward pass needs a random generator");
  mask.resize(out.rows(), out.cols());
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  T* m = mask.data();
  for (Eigen::Index i = 0; i < mask.size(); ++i) m[i] = rng->uniform() < rate ? T(0) : keep;
  out.array() *= mask.array();
}

}  // namespace

namespace {

// Column (b, t) of the im2col matrix is the input slice of positions
// t * stride - pad .. + kernel - 1, which is contiguous in the (channel,
// position) column-major layout.
template <typename T>
void im2col(const T* in, T* col, std::size_t count, std::size_t ch, std::size_t len, std::size_t out_len,
            const ConvSpec& cs) {
  const std::size_t k = cs.kernel, width = ch * k;
  const auto pad = static_cast<std::ptrdiff_t>(k / 2), slen = static_cast<std::ptrdiff_t>(len);
  for (std::size_t b = 0; b < count; ++b)
    for (std::size_t t = 0; t < out_len; ++t) {
      T* dst = col + (b * out_len + t) * width;
      const std::ptrdiff_t first = static_cast<std::ptrdiff_t>(t * cs.stride) - pad;
      const T* src = in + b * len * ch;
      if (first >= 0 && first + static_cast<std::ptrdiff_t>(k) <= slen) {
        std::copy_n(src + static_cast<std::size_t>(first) * ch, width, dst);
        continue;
      }
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t pos = first + static_cast<std::ptrdiff_t>(j);
        if (pos < 0 || pos >= slen)
          std::fill_n(dst + j * ch, ch, T(0));
        else
          std::copy_n(src + static_cast<std::size_t>(pos) * ch, ch, dst + j * ch);
      }
    }
}

template <typename T>
void col2im(const T* col, T* out, std::size_t count, std::size_t ch, std::size_t len, std::size_t out_len,
            const ConvSpec& cs) {
  const std::size_t k = cs.kernel, width = ch * k;
  const auto pad = static_cast<std::ptrdiff_t>(k / 2), slen = static_cast<std::ptrdiff_t>(len);
  for (std::size_t b = 0; b < count; ++b)
    for (std::size_t t = 0; t < out_len; ++t) {
      const T* src = col + (b * out_len + t) * width;
      const std::ptrdiff_t first = static_cast<std::ptrdiff_t>(t * cs.stride) - pad;
      T* dst = out + b * len * ch;
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t pos = first + static_cast<std::ptrdiff_t>(j);
        if (pos < 0 || pos >= slen) continue;
        T* d = dst + static_cast<std::size_t>(pos) * ch;
        const T* s = src + j * ch;
        for (std::size_t c = 0; c < ch; ++c) d[c] += s[c];
      }
    }
}

}  // namespace

template <typename T>
const typename Network<T>::Matrix& Network<T>::forward(std::span<const T> x, std::size_t count, Mode mode,
                                                       Rng* rng) {
  const std::size_t C = arch_.in_channels, L = arch_.in_length;
  require(count > 0 && x.size() == count * C * L, ErrorCode::invalid_input,
          "input size does not match the network input shape");
  const std::size_t nc = arch_.conv.size(), nf = arch_.fc.size();
  const bool drop = mode == Mode::train && arch_.dropout > 0.0;
  cache_.resize(nc + nf);
  count_ = count;

  input_.resize(C, count * L);
  for (std::size_t b = 0; b < count; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const T* src = x.data() + (b * C + c) * L;
      for (std::size_t t = 0; t < L; ++t) input_(c, b * L + t) = (src[t] - mean_[c]) / scale_[c];
    }

  const Matrix* prev = &input_;
  std::size_t ch = C, len = L;
  for (std::size_t l = 0; l < nc; ++l) {
    const ConvSpec& cs = arch_.conv[l];
    const std::size_t k = cs.kernel, out_len = (len + 2 * (k / 2) - k) / cs.stride + 1;
    Cache& cc = cache_[l];
    cc.col.resize(ch * k, count * out_len);
    im2col(prev->data(), cc.col.data(), count, ch, len, out_len, cs);
    Eigen::Map<const Matrix> W(params_.data() + offsets_[l], cs.out_channels, ch * k);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(params_.data() + offsets_[l] + cs.out_channels * ch * k,
                                                                cs.out_channels);
    cc.pre.noalias() = W * cc.col;
    cc.pre.colwise() += bias;
    cc.act = cc.pre.cwiseMax(T(0));
    cc.mask.resize(0, 0);
    if (drop && l + 1 == nc) apply_dropout(cc.act, cc.mask, arch_.dropout, rng);
    prev = &cc.act;
    ch = cs.out_channels;
    len = out_len;
  }

  // Flattening is a reinterpretation: sample b's (ch x len) block is contiguous.
  std::size_t in_size = ch * len;
  for (std::size_t f = 0; f < nf; ++f) {
    const std::size_t l = nc + f, out = arch_.fc[f];
    Cache& cc = cache_[l];
    Eigen::Map<const Matrix> in(prev->data(), static_cast<Eigen::Index>(in_size), static_cast<Eigen::Index>(count));
    Eigen::Map<const Matrix> W(params_.data() + offsets_[l], out, in_size);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(params_.data() + offsets_[l] + out * in_size, out);
    cc.pre.noalias() = W * in;
    cc.pre.colwise() += bias;
    cc.mask.resize(0, 0);
    if (f + 1 < nf) {
      cc.act = cc.pre.cwiseMax(T(0));
      if (drop && f == 0) apply_dropout(cc.act, cc.mask, arch_.dropout, rng);
      prev = &cc.act;
    }
    in_size = out;
  }
  return cache_.back().pre;
}

template <typename T>
T Network<T>::backward(const Matrix& target, std::span<T> grad) {
  require(count_ > 0, ErrorCode::invalid_input, "backward() before forward()");
  const Matrix& output = cache_.back().pre;
  require(target.rows() == output.rows() && target.cols() == output.cols(), ErrorCode::invalid_input,
          "target shape does not match the network output");
  require(grad.size() == params_.size(), ErrorCode::invalid_input, "gradient buffer has the wrong size");
  const std::size_t nc = arch_.conv.size(), nf = arch_.fc.size();
  const T denom = static_cast<T>(output.size());
  Matrix& top = cache_.back().grad;
  top = output - target;
  const T loss_value = top.squaredNorm() / denom;
  top *= T(2) / denom;

  const auto relu_mask = [](Cache& cc) {
    if (cc.mask.size() > 0) cc.grad.array() *= cc.mask.array();
    cc.grad.array() *= (cc.pre.array() > T(0)).template cast<T>();
  };

  for (std::size_t f = nf; f-- > 0;) {
    const std::size_t l = nc + f, out = arch_.fc[f];
    Cache& cc = cache_[l];
    const Matrix& prev = l == 0 ? input_ : cache_[l - 1].act;
    const auto in_size = static_cast<Eigen::Index>(prev.size() / static_cast<Eigen::Index>(count_));
    Eigen::Map<const Matrix> in(prev.data(), in_size, static_cast<Eigen::Index>(count_));
    if (f + 1 < nf) relu_mask(cc);
    Eigen::Map<Matrix> dW(grad.data() + offsets_[l], out, in_size);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(grad.data() + offsets_[l] + out * in_size, out);
    dW.noalias() = cc.grad * in.transpose();
    db = cc.grad.rowwise().sum();
    if (l == 0) break;
    Eigen::Map<const Matrix> W(params_.data() + offsets_[l], out, in_size);
    Matrix& down = cache_[l - 1].grad;
    down.resize(prev.rows(), prev.cols());
    Eigen::Map<Matrix>(down.data(), in_size, static_cast<Eigen::Index>(count_)).noalias() = W.transpose() * cc.grad;
  }

  for (std::size_t l = nc; l-- > 0;) {
    const ConvSpec& cs = arch_.conv[l];
    const std::size_t ch = l == 0 ? arch_.in_channels : arch_.conv[l - 1].out_channels;
    const std::size_t in_len = arch_.length_after(l), out_len = arch_.length_after(l + 1), k = cs.kernel;
    Cache& cc = cache_[l];
    relu_mask(cc);
    Eigen::Map<Matrix> dW(grad.data() + offsets_[l], cs.out_channels, ch * k);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(grad.data() + offsets_[l] + cs.out_channels * ch * k,
                                                        cs.out_channels);
    dW.noalias() = cc.grad * cc.col.transpose();
    db = cc.grad.rowwise().sum();
    if (l == 0) break;
    Eigen::Map<const Matrix> W(params_.data() + offsets_[l], cs.out_channels, ch * k);
    cc.dcol.noalias() = W.transpose() * cc.grad;
    Matrix& down = cache_[l - 1].grad;
    down.setZero(ch, count_ * in_len);
    col2im(cc.dcol.data(), down.data(), count_, ch, in_len, out_len, cs);
  }
  return loss_value;
}

template class Network<float>;
template class Network<double>;

template <typename T>
Adam<T>::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(n, T(0)), v_(n, T(0)) {
  require(lr > 0.0, ErrorCode::invalid_input, "learning rate must be positive");
}

template <typename T>
void Adam<T>::step(std::span<T> params, std::span<const T> grad) {
  require(params.size() == m_.size() && grad.size() == m_.size(), ErrorCode::invalid_input,
          "optimizer size mismatch");
  ++t_;
  const T b1 = static_cast<T>(b1_), b2 = static_cast<T>(b2_);
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(b1_, static_cast<double>(t_))));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(b2_, static_cast<double>(t_))));
  const T lr = static_cast<T>(lr_), eps = static_cast<T>(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grad[i];
    m_[i] = b1 * m_[i] + (T(1) - b1) * g;
    v_[i] = b2 * v_[i] + (T(1) - b2) * g * g;
    params[i] -= lr * (m_[i] * c1) / (std::sqrt(v_[i] * c2) + eps);
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace binori
