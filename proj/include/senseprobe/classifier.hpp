#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "senseprobe/common.hpp"

namespace senseprobe {

struct LrConfig {
  double l2 = 1e-4;
  double tol = 1e-6;  // gradient norm stopping criterion
  int max_iter = 100000;
};

struct MlpConfig {
  int hidden = 64;
  double l2 = 1e-4;
  double lr = 0.1;
  double momentum = 0.9;
  int batch_size = 32;
  int max_epochs = 300;
  int patience = 10;
  double val_fraction = 0.1;
};

struct KnnConfig {
  int k = 5;
};

enum class ClassifierType { Lr, Mlp, Knn };

struct ClassifierKind {
  ClassifierType type = ClassifierType::Lr;
  LrConfig lr;
  MlpConfig mlp;
  KnnConfig knn;

  static ClassifierKind parse(const std::string& name) {
    ClassifierKind k;
    if (name == "lr") {
      k.type = ClassifierType::Lr;
    } else if (name == "mlp") {
      k.type = ClassifierType::Mlp;
    } else if (name == "knn") {
      k.type = ClassifierType::Knn;
    } else {
      throw std::invalid_argument("unknown classifier kind: " + name);
    }
    return k;
  }

  const char* name() const {
    switch (type) {
      case ClassifierType::Lr: return "lr";
      case ClassifierType::Mlp: return "mlp";
      default: return "knn";
    }
  }
};

class BinaryClassifier {
 public:
  virtual ~BinaryClassifier() = default;
  virtual double predict_proba(const Eigen::VectorXd& x) const = 0;

  bool predict(const Eigen::VectorXd& x) const { return predict_proba(x) >= 0.5; }
};

// Emitted when y is single-class; predicts that class everywhere.
class ConstantModel : public BinaryClassifier {
 public:
  explicit ConstantModel(double p) : p_(p) {}
  double predict_proba(const Eigen::VectorXd&) const override { return p_; }

 private:
  double p_;
};

// ---------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------

// Mean logistic loss plus 0.5*l2*||w||^2 (bias unregularized). params is
// [w; b]. Returns the loss and fills grad when non-null.
inline double lr_loss_grad(const Eigen::VectorXd& params, const Eigen::MatrixXd& X,
                           const Eigen::VectorXd& y, double l2,
                           Eigen::VectorXd* grad = nullptr) {
  const auto n = X.rows();
  const auto d = X.cols();
  Eigen::VectorXd w = params.head(d);
  double b = params(d);

  Eigen::VectorXd z = X * w;
  z.array() += b;
  double loss = 0.0;
  Eigen::VectorXd dz(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double zi = y(i) > 0.5 ? -z(i) : z(i);
    loss += zi > 30 ? zi : std::log1p(std::exp(zi));
    double p = 1.0 / (1.0 + std::exp(-z(i)));
    dz(i) = (p - y(i)) / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  loss += 0.5 * l2 * w.squaredNorm();

  if (grad != nullptr) {
    grad->resize(d + 1);
    grad->head(d) = X.transpose() * dz + l2 * w;
    (*grad)(d) = dz.sum();
  }
  return loss;
}

class LrModel : public BinaryClassifier {
 public:
  Eigen::VectorXd w;
  double b = 0.0;
  bool converged = false;

  double predict_proba(const Eigen::VectorXd& x) const override {
    return 1.0 / (1.0 + std::exp(-(w.dot(x) + b)));
  }
};

// Full-batch gradient descent with Armijo backtracking; runs until the
// gradient norm drops under cfg.tol or max_iter is hit.
inline LrModel fit_lr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const LrConfig& cfg = {}) {
  if (X.rows() == 0 || X.rows() != y.size()) {
    throw std::invalid_argument("fit_lr: |X| must equal |y| and be > 0");
  }
  Eigen::VectorXd params = Eigen::VectorXd::Zero(X.cols() + 1);
  Eigen::VectorXd grad, trial_grad;
  double loss = lr_loss_grad(params, X, y, cfg.l2, &grad);
  double step = 1.0;

  LrModel model;
  for (int it = 0; it < cfg.max_iter; ++it) {
    double gnorm = grad.norm();
    if (gnorm < cfg.tol) {
      model.converged = true;
      break;
    }
    step = std::min(step * 2.0, 1e8);
    for (;;) {
      Eigen::VectorXd trial = params - step * grad;
      double trial_loss = lr_loss_grad(trial, X, y, cfg.l2, &trial_grad);
      if (trial_loss <= loss - 1e-4 * step * gnorm * gnorm || step < 1e-18) {
        params = std::move(trial);
        loss = trial_loss;
        grad = trial_grad;
        break;
      }
      step *= 0.5;
    }
  }
  model.w = params.head(X.cols());
  model.b = params(X.cols());
  return model;
}

// ---------------------------------------------------------------------
// Multi-layer perceptron: one ReLU hidden layer, logistic output
// ---------------------------------------------------------------------

namespace detail {

struct MlpShape {
  Eigen::Index d = 0;
  Eigen::Index h = 0;

  Eigen::Index param_count() const { return h * d + h + h + 1; }
  // Layout: W1 (h*d, row-major by hidden unit), b1 (h), w2 (h), b2 (1).
  Eigen::Index w1_off() const { return 0; }
  Eigen::Index b1_off() const { return h * d; }
  Eigen::Index w2_off() const { return h * d + h; }
  Eigen::Index b2_off() const { return h * d + h + h; }
};

}  // namespace detail

// Mean binary cross-entropy of the MLP plus 0.5*l2*(||W1||^2 + ||w2||^2).
// Shared by training and by the finite-difference tests.
inline double mlp_loss_grad(const Eigen::VectorXd& params, const Eigen::MatrixXd& X,
                            const Eigen::VectorXd& y, int hidden, double l2,
                            Eigen::VectorXd* grad = nullptr) {
  detail::MlpShape shape{X.cols(), hidden};
  const auto n = X.rows();
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      W1(params.data() + shape.w1_off(), shape.h, shape.d);
  Eigen::Map<const Eigen::VectorXd> b1(params.data() + shape.b1_off(), shape.h);
  Eigen::Map<const Eigen::VectorXd> w2(params.data() + shape.w2_off(), shape.h);
  double b2 = params(shape.b2_off());

  Eigen::MatrixXd A = (X * W1.transpose()).rowwise() + b1.transpose();  // n x h
  Eigen::MatrixXd H = A.cwiseMax(0.0);
  Eigen::VectorXd z = H * w2;
  z.array() += b2;

  double loss = 0.0;
  Eigen::VectorXd dz(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double zi = y(i) > 0.5 ? -z(i) : z(i);
    loss += zi > 30 ? zi : std::log1p(std::exp(zi));
    double p = 1.0 / (1.0 + std::exp(-z(i)));
    dz(i) = (p - y(i)) / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  loss += 0.5 * l2 * (W1.squaredNorm() + w2.squaredNorm());

  if (grad != nullptr) {
    grad->setZero(shape.param_count());
    Eigen::MatrixXd dH = dz * w2.transpose();                 // n x h
    Eigen::MatrixXd mask = (A.array() > 0.0).cast<double>();  // ReLU gate
    Eigen::MatrixXd dA = dH.cwiseProduct(mask);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        gW1(grad->data() + shape.w1_off(), shape.h, shape.d);
    gW1 = dA.transpose() * X;
    gW1 += l2 * W1;
    Eigen::Map<Eigen::VectorXd>(grad->data() + shape.b1_off(), shape.h) =
        dA.colwise().sum();
    Eigen::Map<Eigen::VectorXd>(grad->data() + shape.w2_off(), shape.h) =
        H.transpose() * dz + l2 * w2;
    (*grad)(shape.b2_off()) = dz.sum();
  }
  return loss;
}

class MlpModel : public BinaryClassifier {
 public:
  Eigen::MatrixXd W1;
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;
  double b2 = 0.0;
  // Feature standardization fitted on the training set.
  Eigen::VectorXd feat_mean;
  Eigen::VectorXd feat_scale;

  double predict_proba(const Eigen::VectorXd& x) const override {
    Eigen::VectorXd xs = (x - feat_mean).cwiseQuotient(feat_scale);
    Eigen::VectorXd h = (W1 * xs + b1).cwiseMax(0.0);
    double z = w2.dot(h) + b2;
    return 1.0 / (1.0 + std::exp(-z));
  }
};

// Mini-batch SGD with momentum; 10% of the rows are held out for early
// stopping when there are enough of them. Deterministic for a given seed.
inline MlpModel fit_mlp(const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y,
                        const MlpConfig& cfg, std::uint64_t seed) {
  if (X_raw.rows() == 0 || X_raw.rows() != y.size()) {
    throw std::invalid_argument("fit_mlp: |X| must equal |y| and be > 0");
  }
  if (cfg.hidden < 1) throw std::invalid_argument("hidden width must be >= 1");

  MlpModel model;
  model.feat_mean = X_raw.colwise().mean();
  Eigen::MatrixXd centered = X_raw.rowwise() - model.feat_mean.transpose();
  model.feat_scale =
      (centered.array().square().colwise().mean()).sqrt().matrix();
  for (Eigen::Index j = 0; j < model.feat_scale.size(); ++j) {
    if (model.feat_scale(j) < 1e-12) model.feat_scale(j) = 1.0;
  }
  Eigen::MatrixXd X = centered.array().rowwise() / model.feat_scale.transpose().array();

  const auto n = X.rows();
  detail::MlpShape shape{X.cols(), cfg.hidden};

  Rng rng(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);

  Eigen::Index n_val = static_cast<Eigen::Index>(
      static_cast<double>(n) * cfg.val_fraction);
  if (n - n_val < 2) n_val = 0;  // too small to hold anything out
  Eigen::Index n_train = n - n_val;

  Eigen::MatrixXd Xtr(n_train, X.cols()), Xval(n_val, X.cols());
  Eigen::VectorXd ytr(n_train), yval(n_val);
  for (Eigen::Index i = 0; i < n_train; ++i) {
    Xtr.row(i) = X.row(order[static_cast<std::size_t>(i)]);
    ytr(i) = y(order[static_cast<std::size_t>(i)]);
  }
  for (Eigen::Index i = 0; i < n_val; ++i) {
    Xval.row(i) = X.row(order[static_cast<std::size_t>(n_train + i)]);
    yval(i) = y(order[static_cast<std::size_t>(n_train + i)]);
  }

  Eigen::VectorXd params(shape.param_count());
  double bound = std::sqrt(6.0 / static_cast<double>(shape.d + shape.h));
  for (Eigen::Index i = 0; i < shape.b1_off(); ++i) {
    params(i) = rng.uniform(-bound, bound);
  }
  params.segment(shape.b1_off(), shape.h).setZero();
  double bound2 = std::sqrt(6.0 / static_cast<double>(shape.h + 1));
  for (Eigen::Index i = 0; i < shape.h; ++i) {
    params(shape.w2_off() + i) = rng.uniform(-bound2, bound2);
  }
  params(shape.b2_off()) = 0.0;

  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(shape.param_count());
  Eigen::VectorXd grad;
  Eigen::VectorXd best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n_train));
  std::iota(idx.begin(), idx.end(), 0);
  Eigen::Index batch = std::min<Eigen::Index>(cfg.batch_size, n_train);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    shuffle(idx, rng);
    for (Eigen::Index start = 0; start < n_train; start += batch) {
      Eigen::Index count = std::min(batch, n_train - start);
      Eigen::MatrixXd Xb(count, X.cols());
      Eigen::VectorXd yb(count);
      for (Eigen::Index i = 0; i < count; ++i) {
        Xb.row(i) = Xtr.row(idx[static_cast<std::size_t>(start + i)]);
        yb(i) = ytr(idx[static_cast<std::size_t>(start + i)]);
      }
      mlp_loss_grad(params, Xb, yb, cfg.hidden, cfg.l2, &grad);
      velocity = cfg.momentum * velocity - cfg.lr * grad;
      params += velocity;
    }
    if (n_val > 0) {
      double val = mlp_loss_grad(params, Xval, yval, cfg.hidden, cfg.l2);
      if (val < best_val - 1e-9) {
        best_val = val;
        best_params = params;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
  }
  if (n_val > 0) params = best_params;

  model.W1 = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                            Eigen::RowMajor>>(
      params.data() + shape.w1_off(), shape.h, shape.d);
  model.b1 = params.segment(shape.b1_off(), shape.h);
  model.w2 = params.segment(shape.w2_off(), shape.h);
  model.b2 = params(shape.b2_off());
  return model;
}

// ---------------------------------------------------------------------
// K-nearest neighbors by cosine similarity
// ---------------------------------------------------------------------

// Indices of the k most cosine-similar rows of X; similarity ties break
// toward the lower row index.
inline std::vector<Eigen::Index> knn_indices(const Eigen::MatrixXd& X,
                                             const Eigen::VectorXd& query, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (k > X.rows()) throw std::invalid_argument("k exceeds training set size");
  double qn = query.norm();
  if (qn == 0.0) throw std::invalid_argument("cosine undefined for zero query vector");

  std::vector<std::pair<double, Eigen::Index>> sims;
  sims.reserve(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double xn = X.row(i).norm();
    double sim = xn == 0.0 ? -2.0 : X.row(i).dot(query) / (xn * qn);
    sims.emplace_back(sim, i);
  }
  std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<Eigen::Index> out(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = sims[static_cast<std::size_t>(i)].second;
  return out;
}

// Majority vote among the top-k neighbors; a tied vote goes to the label
// of the most similar neighbor carrying one of the tied labels.
inline int knn_classify(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                        const Eigen::VectorXd& query, int k) {
  if (static_cast<std::size_t>(X.rows()) != labels.size()) {
    throw std::invalid_argument("labels must match training rows");
  }
  auto nn = knn_indices(X, query, k);
  std::map<int, int> votes;
  for (Eigen::Index i : nn) votes[labels[static_cast<std::size_t>(i)]] += 1;
  int best = 0;
  for (const auto& [label, v] : votes) best = std::max(best, v);
  for (Eigen::Index i : nn) {  // neighbors are in similarity order
    int label = labels[static_cast<std::size_t>(i)];
    if (votes[label] == best) return label;
  }
  return labels[static_cast<std::size_t>(nn.front())];
}

class KnnModel : public BinaryClassifier {
 public:
  KnnModel(Eigen::MatrixXd X, std::vector<int> labels, int k)
      : X_(std::move(X)), labels_(std::move(labels)), k_(k) {
    if (k_ > X_.rows()) k_ = static_cast<int>(X_.rows());
  }

  // Positive vote share among the k nearest neighbors.
  double predict_proba(const Eigen::VectorXd& x) const override {
    auto nn = knn_indices(X_, x, k_);
    int pos = 0;
    for (Eigen::Index i : nn) pos += labels_[static_cast<std::size_t>(i)];
    return static_cast<double>(pos) / static_cast<double>(nn.size());
  }

 private:
  Eigen::MatrixXd X_;
  std::vector<int> labels_;
  int k_;
};

// ---------------------------------------------------------------------

inline std::unique_ptr<BinaryClassifier> fit_binary(
    const ClassifierKind& kind, const Eigen::MatrixXd& X,
    const std::vector<int>& y, std::uint64_t seed,
    std::vector<std::string>* warnings = nullptr) {
  if (X.rows() == 0 || static_cast<std::size_t>(X.rows()) != y.size()) {
    throw std::invalid_argument("fit_binary: |X| must equal |y| and be > 0");
  }
  bool any_pos = false, any_neg = false;
  for (int v : y) (v != 0 ? any_pos : any_neg) = true;
  if (!any_pos || !any_neg) {
    if (warnings) {
      warnings->push_back(std::string("single-class training labels (all ") +
                          (any_pos ? "positive" : "negative") +
                          "); constant predictor");
    }
    return std::make_unique<ConstantModel>(any_pos ? 1.0 : 0.0);
  }

  Eigen::VectorXd yv(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) {
    yv(static_cast<Eigen::Index>(i)) = y[i] != 0 ? 1.0 : 0.0;
  }

  switch (kind.type) {
    case ClassifierType::Lr:
      return std::make_unique<LrModel>(fit_lr(X, yv, kind.lr));
    case ClassifierType::Mlp:
      return std::make_unique<MlpModel>(fit_mlp(X, yv, kind.mlp, seed));
    case ClassifierType::Knn:
      return std::make_unique<KnnModel>(X, y, kind.knn.k);
  }
  throw std::logic_error("unreachable");
}

}  // namespace senseprobe
