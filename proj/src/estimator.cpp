#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "binio.hpp"
#include "binori/angles.hpp"
#include "binori/error.hpp"
#include "binori/estimator.hpp"

namespace binori {

std::array<double, 4> encode_angles(double theta_dir_deg, double theta_ori_deg) {
  const double d = deg2rad(theta_dir_deg), o = deg2rad(theta_ori_deg);
  return {std::sin(d), std::cos(d), std::sin(o), std::cos(o)};
}

AnglePrediction decode_angles(double sin_dir, double cos_dir, double sin_ori, double cos_ori) {
  AnglePrediction p{sin_dir, cos_dir, sin_ori, cos_ori, 0.0, 0.0};
  p.theta_dir_deg = wrap_deg(rad2deg(std::atan2(sin_dir, cos_dir)));
  p.theta_ori_deg = wrap_deg(rad2deg(std::atan2(sin_ori, cos_ori)));
  return p;
}

double loss(const AnglePrediction& pred, double theta_dir_deg, double theta_ori_deg) {
  const auto t = encode_angles(theta_dir_deg, theta_ori_deg);
  const double p[4] = {pred.sin_dir, pred.cos_dir, pred.sin_ori, pred.cos_ori};
  double s = 0.0;
  for (int i = 0; i < 4; ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
  return s / 4.0;
}

void TrainConfig::validate() const {
  require(batch_size >= 1, ErrorCode::invalid_input, "batch size must be at least 1");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::invalid_input,
          "learning rate must be positive");
  require(dropout >= 0.0 && dropout < 1.0, ErrorCode::invalid_input, "dropout must lie in [0, 1)");
}

namespace {

void fit_normalisation(EstimatorModel& model, const FeatureBatch& data) {
  const std::size_t C = kFeatureChannels, L = data.length;
  for (std::size_t c = 0; c < C; ++c) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < data.count(); ++i) {
      const float* x = data.data.data() + (i * C + c) * L;
      for (std::size_t t = 0; t < L; ++t) sum += x[t];
    }
    const double n = static_cast<double>(data.count() * L);
    const double mean = sum / n;
    for (std::size_t i = 0; i < data.count(); ++i) {
      const float* x = data.data.data() + (i * C + c) * L;
      for (std::size_t t = 0; t < L; ++t) sq += (x[t] - mean) * (x[t] - mean);
    }
    const double sd = std::sqrt(sq / n);
    model.input_mean()[c] = static_cast<float>(mean);
    model.input_scale()[c] = sd > 0.0 && std::isfinite(sd) ? static_cast<float>(sd) : 1.0f;
  }
}

}  // namespace

EstimatorModel train(const FeatureBatch& data, const TrainConfig& cfg, const Architecture& arch, TrainLog* log,
                     const EstimatorModel* start, const std::function<void(std::size_t, double, const EstimatorModel&)>& on_epoch) {
  cfg.validate();
  require(data.count() > 0, ErrorCode::invalid_input, "training set is empty");
  require(data.data.size() == data.count() * kFeatureChannels * data.length, ErrorCode::invalid_input,
          "training batch is inconsistent");
  Rng rng(cfg.seed);
  EstimatorModel model;
  if (cfg.resume) {
    require(start != nullptr, ErrorCode::invalid_input, "resume requested without a starting model");
    model = *start;
  } else {
    Architecture a = arch;
    a.dropout = cfg.dropout;
    model = EstimatorModel(a);
    model.initialize(rng);
    fit_normalisation(model, data);
  }
  require(model.architecture().in_channels == kFeatureChannels &&
              model.architecture().in_length == data.length && model.architecture().fc.back() == 4,
          ErrorCode::invalid_input, "model shape does not match the training data");

  const std::size_t n = data.count(), per = kFeatureChannels * data.length;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Adam<float> opt(model.parameter_count(), cfg.learning_rate);
  AlignedVector<float> grad(model.parameter_count());
  std::vector<float> x;
  EstimatorModel::Matrix target;
  if (log) log->epoch_loss.clear();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double total = 0.0;
    for (std::size_t s = 0; s < n; s += cfg.batch_size) {
      const std::size_t b = std::min(cfg.batch_size, n - s);
      x.resize(b * per);
      target.resize(4, static_cast<Eigen::Index>(b));
      for (std::size_t j = 0; j < b; ++j) {
        const std::size_t idx = order[s + j];
        const auto src = data.sample(idx);
        std::copy(src.begin(), src.end(), x.begin() + static_cast<std::ptrdiff_t>(j * per));
        const auto enc = encode_angles(data.labels[idx][0], data.labels[idx][1]);
        for (int r = 0; r < 4; ++r) target(r, static_cast<Eigen::Index>(j)) = static_cast<float>(enc[r]);
      }
      model.forward(x, b, Mode::train, &rng);
      const float l = model.backward(target, grad);
      opt.step(model.parameters(), grad);
      total += static_cast<double>(l) * static_cast<double>(b);
    }
    const double mean = total / static_cast<double>(n);
    if (log) log->epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean, model);
  }
  return model;
}

namespace {

AnglePrediction from_output(const EstimatorModel::Matrix& out, Eigen::Index j) {
  return decode_angles(out(0, j), out(1, j), out(2, j), out(3, j));
}

}  // namespace

AnglePrediction predict(const EstimatorModel& model, const FeatureTensor& x) {
  require(x.length() == model.architecture().in_length, ErrorCode::invalid_input,
          "feature length does not match the model");
  EstimatorModel m = model;
  const auto flat = flatten(x);
  return from_output(m.forward(flat, 1, Mode::inference), 0);
}

std::vector<AnglePrediction> predict(const EstimatorModel& model, const FeatureBatch& batch) {
  require(batch.length == model.architecture().in_length, ErrorCode::invalid_input,
          "feature length does not match the model");
  EstimatorModel m = model;
  std::vector<AnglePrediction> out;
  out.reserve(batch.count());
  const std::size_t chunk = 256, per = kFeatureChannels * batch.length;
  for (std::size_t s = 0; s < batch.count(); s += chunk) {
    const std::size_t b = std::min(chunk, batch.count() - s);
    std::span<const float> x(batch.data.data() + s * per, b * per);
    const auto& o = m.forward(x, b, Mode::inference);
    for (std::size_t j = 0; j < b; ++j) out.push_back(from_output(o, static_cast<Eigen::Index>(j)));
  }
  return out;
}

namespace {
constexpr std::uint32_t kModelVersion = 1;
}

void save_model(const std::string& path, const EstimatorModel& model) {
  const Architecture& a = model.architecture();
  detail::ByteWriter w;
  w.magic("BOCN");
  w.put<std::uint32_t>(kModelVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(a.in_channels));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(a.in_length));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(a.conv.size()));
  for (const auto& c : a.conv) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.out_channels));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.kernel));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.stride));
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(a.fc.size()));
  for (std::size_t f : a.fc) w.put<std::uint32_t>(static_cast<std::uint32_t>(f));
  w.put<float>(static_cast<float>(a.dropout));
  for (float v : model.input_mean()) w.put<float>(v);
  for (float v : model.input_scale()) w.put<float>(v);
  w.put<std::uint64_t>(model.parameter_count());
  for (float v : model.parameters()) w.put<float>(v);
  w.save(path);
}

EstimatorModel load_model(const std::string& path) {
  detail::ByteReader r(path);
  r.expect_magic("BOCN");
  require(r.get<std::uint32_t>() == kModelVersion, ErrorCode::format, path + ": unsupported model version");
  Architecture a;
  a.in_channels = r.get<std::uint32_t>();
  a.in_length = r.get<std::uint32_t>();
  const auto nc = r.get<std::uint32_t>();
  require(nc < 1024, ErrorCode::format, path + ": implausible layer count");
  for (std::uint32_t i = 0; i < nc; ++i) {
    ConvSpec c;
    c.out_channels = r.get<std::uint32_t>();
    c.kernel = r.get<std::uint32_t>();
    c.stride = r.get<std::uint32_t>();
    a.conv.push_back(c);
  }
  const auto nf = r.get<std::uint32_t>();
  require(nf < 1024, ErrorCode::format, path + ": implausible layer count");
  for (std::uint32_t i = 0; i < nf; ++i) a.fc.push_back(r.get<std::uint32_t>());
  a.dropout = r.get<float>();
  try {
    a.validate();
  } catch (const Error& e) {
    fail(ErrorCode::format, path + ": inconsistent layer shapes: " + e.what());
  }
  EstimatorModel m(a);
  for (float& v : m.input_mean()) v = r.get<float>();
  for (float& v : m.input_scale()) v = r.get<float>();
  const auto count = r.get<std::uint64_t>();
  require(count == m.parameter_count(), ErrorCode::format, path + ": parameter count does not match layers");
  require(r.remaining() == count * 4, ErrorCode::format, path + ": size does not match header");
  for (float& v : m.parameters()) {
    v = r.get<float>();
    require(std::isfinite(v), ErrorCode::format, path + ": non-finite parameter");
  }
  return m;
}

void TemplateBank::add(const FeatureTensor& x, double theta_dir_deg, double theta_ori_deg) {
  if (labels.empty()) length = x.length();
  require(x.length() == length, ErrorCode::invalid_input, "template length does not match the bank");
  std::vector<double> flat;
  flat.reserve(kFeatureChannels * length);
  for (const auto& ch : x.channels) flat.insert(flat.end(), ch.begin(), ch.end());
  features.push_back(std::move(flat));
  labels.push_back({theta_dir_deg, theta_ori_deg});
}

AnglePrediction template_match(const FeatureTensor& x, const TemplateBank& bank) {
  require(bank.size() > 0, ErrorCode::invalid_input, "template bank is empty");
  require(x.length() == bank.length, ErrorCode::invalid_input, "query length does not match the bank");
  std::vector<double> q;
  q.reserve(kFeatureChannels * bank.length);
  for (const auto& ch : x.channels) q.insert(q.end(), ch.begin(), ch.end());
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto& f = bank.features[i];
    double d = 0.0;
    for (std::size_t j = 0; j < q.size() && d < best; ++j) d += (q[j] - f[j]) * (q[j] - f[j]);
    if (d < best) {
      best = d;
      arg = i;
    }
  }
  const auto enc = encode_angles(bank.labels[arg][0], bank.labels[arg][1]);
  AnglePrediction p = decode_angles(enc[0], enc[1], enc[2], enc[3]);
  p.theta_dir_deg = bank.labels[arg][0];
  p.theta_ori_deg = bank.labels[arg][1];
  return p;
}

}  // namespace binori
