#ifndef CGBA_BLOB_MLP_HPP
#define CGBA_BLOB_MLP_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "cgba/errors.hpp"
#include "cgba/oracle.hpp"

namespace cgba {

/// One-hidden-layer ReLU network with an argmax head.
struct MlpWeights {
  Eigen::MatrixXd w1;  // hidden x n
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // classes x hidden
  Eigen::VectorXd b2;

  Eigen::Index dims() const { return w1.cols(); }
  Eigen::Index hidden() const { return w1.rows(); }
  Eigen::Index classes() const { return w2.rows(); }

  Eigen::VectorXd logits(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd hid = (w1 * x + b1).cwiseMax(0.0);
    return w2 * hid + b2;
  }
};

/// Synthetic Gaussian blobs in [0,1]^n, one per class.
struct BlobTask {
  int dims = 16;
  int classes = 4;
  int per_class = 200;
  double spread = 0.08;
  std::uint64_t seed = 7;
};

struct BlobData {
  std::vector<Eigen::VectorXd> centers;
  std::vector<Eigen::VectorXd> samples;
  std::vector<int> labels;
};

inline BlobData make_blobs(const BlobTask& task) {
  if (task.dims < 1 || task.dims > 64) throw InvalidConfig("blob task needs 1 <= n <= 64");
  if (task.classes < 2) throw InvalidConfig("blob task needs at least two classes");
  std::mt19937_64 rng(task.seed);
  std::uniform_real_distribution<double> center_dist(0.2, 0.8);
  std::normal_distribution<double> noise(0.0, task.spread);
  BlobData data;
  for (int c = 0; c < task.classes; ++c) {
    Eigen::VectorXd center(task.dims);
    for (int k = 0; k < task.dims; ++k) center[k] = center_dist(rng);
    data.centers.push_back(center);
  }
  for (int c = 0; c < task.classes; ++c) {
    for (int s = 0; s < task.per_class; ++s) {
      Eigen::VectorXd x(task.dims);
      for (int k = 0; k < task.dims; ++k) x[k] = std::clamp(data.centers[c][k] + noise(rng), 0.0, 1.0);
      data.samples.push_back(std::move(x));
      data.labels.push_back(c);
    }
  }
  return data;
}

/// Full-batch Adam on softmax cross-entropy. Deterministic for a fixed seed.
inline MlpWeights train_mlp(const BlobData& data, int classes, int hidden = 32, int epochs = 300,
                            std::uint64_t seed = 11) {
  const Eigen::Index n = data.samples.front().size();
  const Eigen::Index count = static_cast<Eigen::Index>(data.samples.size());
  Eigen::MatrixXd x(n, count);
  for (Eigen::Index j = 0; j < count; ++j) x.col(j) = data.samples[j];

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> init(0.0, 1.0);
  MlpWeights w;
  w.w1 = Eigen::MatrixXd::NullaryExpr(hidden, n, [&] { return init(rng) * std::sqrt(2.0 / n); });
  w.b1 = Eigen::VectorXd::Zero(hidden);
  w.w2 = Eigen::MatrixXd::NullaryExpr(classes, hidden, [&] { return init(rng) * std::sqrt(2.0 / hidden); });
  w.b2 = Eigen::VectorXd::Zero(classes);

  struct Moments {
    Eigen::MatrixXd m, v;
  };
  auto zeros_like = [](const Eigen::MatrixXd& a) { return Moments{Eigen::MatrixXd::Zero(a.rows(), a.cols()), Eigen::MatrixXd::Zero(a.rows(), a.cols())}; };
  Moments mw1 = zeros_like(w.w1), mb1 = zeros_like(w.b1), mw2 = zeros_like(w.w2), mb2 = zeros_like(w.b2);
  const double lr = 0.01, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  auto adam = [&](auto& param, const Eigen::MatrixXd& grad, Moments& mom, int step) {
    mom.m = beta1 * mom.m + (1 - beta1) * grad;
    mom.v = beta2 * mom.v + (1 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1 - std::pow(beta1, step);
    const double c2 = 1 - std::pow(beta2, step);
    param -= (lr * (mom.m / c1).array() / ((mom.v / c2).array().sqrt() + eps)).matrix();
  };

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const Eigen::MatrixXd pre = (w.w1 * x).colwise() + w.b1;
    const Eigen::MatrixXd hid = pre.cwiseMax(0.0);
    Eigen::MatrixXd logits = (w.w2 * hid).colwise() + w.b2;
    // softmax, then dL/dlogits = p - onehot
    for (Eigen::Index j = 0; j < count; ++j) {
      const double mx = logits.col(j).maxCoeff();
      logits.col(j) = (logits.col(j).array() - mx).exp();
      logits.col(j) /= logits.col(j).sum();
      logits(data.labels[j], j) -= 1.0;
    }
    const Eigen::MatrixXd dlogits = logits / static_cast<double>(count);
    const Eigen::MatrixXd gw2 = dlogits * hid.transpose();
    const Eigen::MatrixXd gb2 = dlogits.rowwise().sum();
    Eigen::MatrixXd dhid = w.w2.transpose() * dlogits;
    dhid = dhid.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    const Eigen::MatrixXd gw1 = dhid * x.transpose();
    const Eigen::MatrixXd gb1 = dhid.rowwise().sum();
    adam(w.w1, gw1, mw1, epoch);
    adam(w.b1, gb1, mb1, epoch);
    adam(w.w2, gw2, mw2, epoch);
    adam(w.b2, gb2, mb2, epoch);
  }
  return w;
}

inline nlohmann::json weights_to_json(const MlpWeights& w) {
  auto mat = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      std::vector<double> row(m.cols());
      for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
      rows.push_back(row);
    }
    return rows;
  };
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"format", "blobmlp-v1"}, {"n", w.dims()},      {"hidden", w.hidden()}, {"classes", w.classes()},
          {"w1", mat(w.w1)},        {"b1", vec(w.b1)},    {"w2", mat(w.w2)},      {"b2", vec(w.b2)}};
}

inline MlpWeights weights_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "blobmlp-v1") throw InvalidConfig("weights file: unknown format");
  auto mat = [](const nlohmann::json& rows, Eigen::Index r, Eigen::Index c) {
    if (static_cast<Eigen::Index>(rows.size()) != r) throw InvalidConfig("weights file: bad matrix shape");
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != c) throw InvalidConfig("weights file: bad matrix shape");
      for (Eigen::Index k = 0; k < c; ++k) m(i, k) = rows[i][k].get<double>();
    }
    return m;
  };
  auto vec = [](const nlohmann::json& a, Eigen::Index len) {
    if (static_cast<Eigen::Index>(a.size()) != len) throw InvalidConfig("weights file: bad vector length");
    Eigen::VectorXd v(len);
    for (Eigen::Index i = 0; i < len; ++i) v[i] = a[i].get<double>();
    return v;
  };
  const Eigen::Index n = j.at("n"), hidden = j.at("hidden"), classes = j.at("classes");
  MlpWeights w;
  w.w1 = mat(j.at("w1"), hidden, n);
  w.b1 = vec(j.at("b1"), hidden);
  w.w2 = mat(j.at("w2"), classes, hidden);
  w.b2 = vec(j.at("b2"), classes);
  return w;
}

/// Desk-scale stand-in for an image classifier: a seeded MLP trained on
/// Gaussian blobs. Inputs live in [0,1]^n.
class BlobMlpOracle final : public DecisionOracle {
 public:
  explicit BlobMlpOracle(MlpWeights weights, std::vector<Eigen::VectorXd> prototypes = {})
      : w_(std::move(weights)), prototypes_(std::move(prototypes)) {}

  static BlobMlpOracle train(const BlobTask& task) {
    BlobData data = make_blobs(task);
    MlpWeights w = train_mlp(data, task.classes, 32, 300, task.seed + 1);
    return BlobMlpOracle(std::move(w), std::move(data.centers));
  }

  static BlobMlpOracle load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open weights file " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    std::vector<Eigen::VectorXd> protos;
    if (j.contains("prototypes")) {
      for (const auto& p : j["prototypes"]) {
        std::vector<double> v = p.get<std::vector<double>>();
        protos.emplace_back(Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
      }
    }
    return BlobMlpOracle(weights_from_json(j), std::move(protos));
  }

  void save(const std::string& path) const {
    nlohmann::json j = weights_to_json(w_);
    nlohmann::json protos = nlohmann::json::array();
    for (const auto& p : prototypes_) protos.push_back(std::vector<double>(p.data(), p.data() + p.size()));
    j["prototypes"] = protos;
    std::ofstream(path) << j.dump() << '\n';
  }

  Label classify(const Point& x) const override {
    if (x.size() != w_.dims()) throw InvalidInput("blob MLP: dimension mismatch");
    const Eigen::VectorXd logits = w_.logits(x);
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < logits.size(); ++k) {
      if (logits[k] > logits[best]) best = k;
    }
    return static_cast<Label>(best);
  }
  Eigen::Index dims() const override { return w_.dims(); }
  Label classes() const override { return static_cast<Label>(w_.classes()); }
  bool is_image() const override { return true; }

  const MlpWeights& weights() const { return w_; }
  /// Blob centers, one per class (empty if the weights file carried none).
  const std::vector<Eigen::VectorXd>& prototypes() const { return prototypes_; }

  /// Draws `count` points near the prototype of `label` that the model
  /// classifies as `label`. Deterministic in `seed`.
  std::vector<Point> sample_class(Label label, int count, std::uint64_t seed, double spread = 0.08) const {
    if (label >= prototypes_.size()) throw InvalidInput("no prototype for requested class");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, spread);
    std::vector<Point> out;
    for (int attempt = 0; static_cast<int>(out.size()) < count; ++attempt) {
      if (attempt > 1000 * count) throw NumericalFailure("cannot sample correctly classified blob points");
      Point x = prototypes_[label];
      for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = std::clamp(x[k] + noise(rng), 0.0, 1.0);
      if (classify(x) == label) out.push_back(std::move(x));
    }
    return out;
  }

 private:
  MlpWeights w_;
  std::vector<Eigen::VectorXd> prototypes_;
};

}  // namespace cgba

#endif  // CGBA_BLOB_MLP_HPP
