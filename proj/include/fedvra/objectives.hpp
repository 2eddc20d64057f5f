#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedvra/numerics.hpp"
#include "fedvra/rng.hpp"

namespace fedvra {

// One client's local dataset.
struct Shard {
  Eigen::MatrixXd features;  // n x feature_dim, row-major samples
  std::vector<int> labels;   // empty for unlabeled data
  int num_classes = 0;       // 0 when unlabeled

  int n() const { return static_cast<int>(features.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
  bool labeled() const { return !labels.empty(); }

  void validate() const {
    if (features.rows() < 1) throw std::invalid_argument("Shard: needs at least one sample");
    if (labeled()) {
      if (static_cast<int>(labels.size()) != n())
        throw std::invalid_argument("Shard: label count != sample count");
      for (int y : labels) {
        if (y < 0 || y >= num_classes)
          throw std::invalid_argument("Shard: label outside [0, num_classes)");
      }
    }
  }
};

// Differentiable local cost f_i with a per-sample decomposition
// f_i(x) = (1/n) sum_j f_{ij}(x), so mini-batch stochastic gradients exist
// and are unbiased by construction.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual Eigen::Index dim() const = 0;
  virtual int num_samples() const = 0;
  virtual double loss(const Vec& x) const = 0;
  virtual Vec full_grad(const Vec& x) const = 0;
  virtual Vec sample_grad(const Vec& x, int j) const = 0;
  virtual double smoothness() const = 0;
  virtual std::optional<double> lower_bound() const { return std::nullopt; }
  virtual std::optional<double> variance_bound() const { return std::nullopt; }

  virtual Vec batch_grad(const Vec& x, std::span<const int> idx) const {
    Vec g = Vec::Zero(dim());
    for (int j : idx) g += sample_grad(x, j);
    return g / static_cast<double>(idx.size());
  }

  // Mini-batch SG: S samples drawn i.i.d. uniformly with replacement.
  Vec stoch_grad(const Vec& x, int S, RngStream& rng) const {
    if (S < 1 || S > num_samples())
      throw std::invalid_argument("stoch_grad: S out of [1, n_i]");
    const std::vector<int> idx = draw_batch(rng, static_cast<std::size_t>(num_samples()), S);
    return batch_grad(x, idx);
  }

  virtual Vec initial_point(RngStream& /*rng*/) const { return Vec::Zero(dim()); }

  // Classification objectives report accuracy on a held-out shard.
  virtual std::optional<double> accuracy(const Vec& /*x*/, const Shard& /*test*/) const {
    return std::nullopt;
  }
};

using ObjectivePtr = std::shared_ptr<const Objective>;

inline Vec stoch_grad(const Objective& obj, const Vec& x, int S, RngStream& rng) {
  return obj.stoch_grad(x, S, rng);
}

namespace detail {

// f(x) = 1/2 (x-c)^T A (x-c) with A = sum_j a_j a_j^T. The rank-one factors
// are the "samples": f_j(x) = (n/2) (a_j^T (x-c))^2, so the per-sample mean
// recovers f exactly and sigma^2 is computable from the factors.
class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(Eigen::MatrixXd A, Vec c, Eigen::MatrixXd factors, double lmax)
      : A_(std::move(A)), c_(std::move(c)), factors_(std::move(factors)), lmax_(lmax) {}

  Eigen::Index dim() const override { return c_.size(); }
  int num_samples() const override { return static_cast<int>(factors_.rows()); }

  double loss(const Vec& x) const override {
    const Vec d = x - c_;
    return 0.5 * d.dot(A_ * d);
  }
  Vec full_grad(const Vec& x) const override { return A_ * (x - c_); }
  Vec sample_grad(const Vec& x, int j) const override {
    const double s = factors_.row(j).dot(x - c_);
    return static_cast<double>(num_samples()) * s * factors_.row(j).transpose();
  }
  Vec batch_grad(const Vec& x, std::span<const int> idx) const override {
    Vec g = Vec::Zero(dim());
    const Vec d = x - c_;
    for (int j : idx) g += factors_.row(j).dot(d) * factors_.row(j).transpose();
    return g * (static_cast<double>(num_samples()) / static_cast<double>(idx.size()));
  }
  double smoothness() const override { return lmax_; }
  std::optional<double> lower_bound() const override { return 0.0; }

  const Vec& center() const { return c_; }
  const Eigen::MatrixXd& matrix() const { return A_; }

 private:
  Eigen::MatrixXd A_;
  Vec c_;
  Eigen::MatrixXd factors_;  // rows a_j^T
  double lmax_;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }

// l2-regularized cross-entropy. Binary when num_classes == 2 (single weight
// vector); one-vs-rest stack of binary models otherwise. No intercept: add a
// constant feature column when one is wanted.
class LogisticObjective final : public Objective {
 public:
  LogisticObjective(Shard shard, double l2_mu) : shard_(std::move(shard)), mu_(l2_mu) {
    shard_.validate();
    if (!shard_.labeled()) throw std::invalid_argument("make_logistic: labels required");
    if (mu_ < 0.0) throw std::invalid_argument("make_logistic: l2_mu must be >= 0");
    heads_ = shard_.num_classes == 2 ? 1 : shard_.num_classes;
    // standard bound: ||X||_op^2 / (4 n) + mu, per one-vs-rest head
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(shard_.features);
    const double op = svd.singularValues()(0);
    smoothness_ = op * op / (4.0 * shard_.n()) + mu_;
  }

  Eigen::Index dim() const override {
    return static_cast<Eigen::Index>(heads_) * shard_.feature_dim();
  }
  int num_samples() const override { return shard_.n(); }

  double loss(const Vec& x) const override {
    const auto W = weights(x);
    const Eigen::MatrixXd Z = shard_.features * W.transpose();  // n x heads
    double total = 0.0;
    for (int j = 0; j < shard_.n(); ++j) {
      for (int k = 0; k < heads_; ++k) {
        const double y = target(j, k);
        total += softplus(Z(j, k)) - y * Z(j, k);
      }
    }
    return total / shard_.n() + 0.5 * mu_ * x.squaredNorm();
  }

  Vec full_grad(const Vec& x) const override {
    std::vector<int> all(static_cast<std::size_t>(shard_.n()));
    for (int j = 0; j < shard_.n(); ++j) all[static_cast<std::size_t>(j)] = j;
    return batch_grad(x, all);
  }

  Vec sample_grad(const Vec& x, int j) const override {
    const int one[] = {j};
    return batch_grad(x, one);
  }

  Vec batch_grad(const Vec& x, std::span<const int> idx) const override {
    const auto W = weights(x);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(heads_, shard_.feature_dim());
    for (int j : idx) {
      const Vec z = W * shard_.features.row(j).transpose();
      for (int k = 0; k < heads_; ++k) {
        G.row(k) += (sigmoid(z(k)) - target(j, k)) * shard_.features.row(j);
      }
    }
    G /= static_cast<double>(idx.size());
    Vec g = Eigen::Map<const Vec>(G.data(), G.size());
    return g + mu_ * x;
  }

  double smoothness() const override { return smoothness_; }
  std::optional<double> lower_bound() const override { return 0.0; }

  std::optional<double> accuracy(const Vec& x, const Shard& test) const override {
    const auto W = weights(x);
    int correct = 0;
    for (int j = 0; j < test.n(); ++j) {
      const Vec z = W * test.features.row(j).transpose();
      int pred = 0;
      if (heads_ == 1) {
        pred = z(0) > 0.0 ? 1 : 0;
      } else {
        z.maxCoeff(&pred);
      }
      if (pred == test.labels[static_cast<std::size_t>(j)]) ++correct;
    }
    return static_cast<double>(correct) / test.n();
  }

 private:
  Eigen::Map<const Eigen::MatrixXd> weights(const Vec& x) const {
    return {x.data(), heads_, shard_.feature_dim()};
  }
  double target(int j, int k) const {
    const int y = shard_.labels[static_cast<std::size_t>(j)];
    return heads_ == 1 ? static_cast<double>(y) : (y == k ? 1.0 : 0.0);
  }

  Shard shard_;
  double mu_;
  int heads_;
  double smoothness_;
};

// One hidden layer, tanh activation, softmax cross-entropy, hand-coded
// batched backprop. Parameter layout: [W1 (h x d), b1, W2 (K x h), b2].
class MlpObjective final : public Objective {
 public:
  MlpObjective(Shard shard, int hidden, int num_classes)
      : shard_(std::move(shard)), h_(hidden), k_(num_classes) {
    shard_.validate();
    if (!shard_.labeled()) throw std::invalid_argument("make_mlp: labels required");
    if (shard_.num_classes != num_classes)
      throw std::invalid_argument("make_mlp: shard/class mismatch");
    d_ = shard_.feature_dim();
    estimate_smoothness();
  }

  Eigen::Index dim() const override {
    return static_cast<Eigen::Index>(h_) * d_ + h_ + static_cast<Eigen::Index>(k_) * h_ + k_;
  }
  int num_samples() const override { return shard_.n(); }

  double loss(const Vec& x) const override {
    std::vector<int> all(static_cast<std::size_t>(shard_.n()));
    for (int j = 0; j < shard_.n(); ++j) all[static_cast<std::size_t>(j)] = j;
    return batch_loss(x, all);
  }

  Vec full_grad(const Vec& x) const override {
    std::vector<int> all(static_cast<std::size_t>(shard_.n()));
    for (int j = 0; j < shard_.n(); ++j) all[static_cast<std::size_t>(j)] = j;
    return batch_grad(x, all);
  }

  Vec sample_grad(const Vec& x, int j) const override {
    const int one[] = {j};
    return batch_grad(x, one);
  }

  Vec batch_grad(const Vec& x, std::span<const int> idx) const override {
    const int B = static_cast<int>(idx.size());
    Eigen::MatrixXd X(B, d_);
    for (int r = 0; r < B; ++r) X.row(r) = shard_.features.row(idx[static_cast<std::size_t>(r)]);

    const ConstParams p = view(x);
    const Eigen::MatrixXd Z1 = (X * p.W1.transpose()).rowwise() + p.b1.transpose();
    const Eigen::MatrixXd H = Z1.array().tanh();
    const Eigen::MatrixXd Z2 = (H * p.W2.transpose()).rowwise() + p.b2.transpose();

    Eigen::MatrixXd P = softmax_rows(Z2);
    for (int r = 0; r < B; ++r) {
      P(r, shard_.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])]) -= 1.0;
    }
    P /= static_cast<double>(B);  // dZ2

    Vec g(dim());
    Params gp = view_mut(g);
    gp.W2 = P.transpose() * H;
    gp.b2 = P.colwise().sum().transpose();
    const Eigen::MatrixXd dH = P * p.W2;
    const Eigen::MatrixXd dZ1 = dH.array() * (1.0 - H.array().square());
    gp.W1 = dZ1.transpose() * X;
    gp.b1 = dZ1.colwise().sum().transpose();
    return g;
  }

  double smoothness() const override { return smoothness_; }

  Vec initial_point(RngStream& rng) const override {
    Vec x(dim());
    Params p = view_mut(x);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(d_));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(h_));
    for (int i = 0; i < h_; ++i)
      for (int j = 0; j < d_; ++j) p.W1(i, j) = s1 * rng.gaussian();
    p.b1.setZero();
    for (int i = 0; i < k_; ++i)
      for (int j = 0; j < h_; ++j) p.W2(i, j) = s2 * rng.gaussian();
    p.b2.setZero();
    return x;
  }

  std::optional<double> accuracy(const Vec& x, const Shard& test) const override {
    const ConstParams p = view(x);
    const Eigen::MatrixXd Z1 = (test.features * p.W1.transpose()).rowwise() + p.b1.transpose();
    const Eigen::MatrixXd H = Z1.array().tanh();
    const Eigen::MatrixXd Z2 = (H * p.W2.transpose()).rowwise() + p.b2.transpose();
    int correct = 0;
    for (int j = 0; j < test.n(); ++j) {
      int pred = 0;
      Z2.row(j).maxCoeff(&pred);
      if (pred == test.labels[static_cast<std::size_t>(j)]) ++correct;
    }
    return static_cast<double>(correct) / test.n();
  }

 private:
  struct Params {
    Eigen::Map<Eigen::MatrixXd> W1;
    Eigen::Map<Vec> b1;
    Eigen::Map<Eigen::MatrixXd> W2;
    Eigen::Map<Vec> b2;
  };
  struct ConstParams {
    Eigen::Map<const Eigen::MatrixXd> W1;
    Eigen::Map<const Vec> b1;
    Eigen::Map<const Eigen::MatrixXd> W2;
    Eigen::Map<const Vec> b2;
  };
  using ParamsView = ConstParams;

  ConstParams view(const Vec& x) const {
    const double* p = x.data();
    Eigen::Map<const Eigen::MatrixXd> W1(p, h_, d_);
    Eigen::Map<const Vec> b1(p + h_ * d_, h_);
    Eigen::Map<const Eigen::MatrixXd> W2(p + h_ * d_ + h_, k_, h_);
    Eigen::Map<const Vec> b2(p + h_ * d_ + h_ + k_ * h_, k_);
    return {W1, b1, W2, b2};
  }
  Params view_mut(Vec& x) const {
    double* p = x.data();
    Eigen::Map<Eigen::MatrixXd> W1(p, h_, d_);
    Eigen::Map<Vec> b1(p + h_ * d_, h_);
    Eigen::Map<Eigen::MatrixXd> W2(p + h_ * d_ + h_, k_, h_);
    Eigen::Map<Vec> b2(p + h_ * d_ + h_ + k_ * h_, k_);
    return {W1, b1, W2, b2};
  }

  static Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& Z) {
    Eigen::MatrixXd P = (Z.colwise() - Z.rowwise().maxCoeff()).array().exp();
    for (Eigen::Index r = 0; r < P.rows(); ++r) P.row(r) /= P.row(r).sum();
    return P;
  }

  double batch_loss(const Vec& x, std::span<const int> idx) const {
    const ConstParams p = view(x);
    double total = 0.0;
    for (int j : idx) {
      const Vec z1 = p.W1 * shard_.features.row(j).transpose() + p.b1;
      const Vec h = z1.array().tanh();
      Vec z2 = p.W2 * h + p.b2;
      const double zmax = z2.maxCoeff();
      const double lse = zmax + std::log((z2.array() - zmax).exp().sum());
      total += lse - z2(shard_.labels[static_cast<std::size_t>(j)]);
    }
    return total / static_cast<double>(idx.size());
  }

  // Empirical gradient-Lipschitz estimate over probe pairs near the init
  // region, times a safety factor of 2. The feasibility checker must never
  // be handed an underestimated L.
  void estimate_smoothness() {
    RngStream rng(stream_seed(0x6d6c705fULL, 0, static_cast<std::uint64_t>(dim())));
    double max_ratio = 0.0;
    const Vec ref = initial_point(rng);
    for (int trial = 0; trial < 40; ++trial) {
      Vec u = ref;
      for (Eigen::Index t = 0; t < u.size(); ++t) u(t) += 0.5 * rng.gaussian();
      Vec dir(u.size());
      for (Eigen::Index t = 0; t < dir.size(); ++t) dir(t) = rng.gaussian();
      dir *= (0.05 + 0.2 * rng.uniform()) / dir.norm();
      const Vec v = u + dir;
      const double num = (full_grad(u) - full_grad(v)).norm();
      const double den = dir.norm();
      max_ratio = std::max(max_ratio, num / den);
    }
    smoothness_ = 2.0 * max_ratio;
  }

  Shard shard_;
  int h_, k_, d_;
  double smoothness_ = 0.0;
};

}  // namespace detail

inline std::shared_ptr<Objective> make_quadratic(const Eigen::MatrixXd& A, const Vec& c) {
  if (A.rows() != A.cols() || A.rows() != c.size())
    throw std::invalid_argument("make_quadratic: A must be square and match c");
  if (!A.isApprox(A.transpose(), 1e-10))
    throw std::invalid_argument("make_quadratic: A must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
  const Vec evals = eig.eigenvalues();
  if ((evals.array() < -1e-10).any())
    throw std::invalid_argument("make_quadratic: A must be positive semidefinite");
  // rank-one factors a_j = sqrt(max(lambda_j,0)) v_j, so A = sum a_j a_j^T
  Eigen::MatrixXd factors(A.rows(), A.cols());
  for (Eigen::Index j = 0; j < A.rows(); ++j) {
    factors.row(j) = std::sqrt(std::max(evals(j), 0.0)) * eig.eigenvectors().col(j).transpose();
  }
  return std::make_shared<detail::QuadraticObjective>(A, c, std::move(factors),
                                                      std::max(evals.maxCoeff(), 0.0));
}

inline std::shared_ptr<Objective> make_logistic(Shard shard, double l2_mu) {
  return std::make_shared<detail::LogisticObjective>(std::move(shard), l2_mu);
}

inline std::shared_ptr<Objective> make_mlp(Shard shard, int hidden_width, int num_classes) {
  if (hidden_width < 1 || num_classes < 2)
    throw std::invalid_argument("make_mlp: need hidden_width >= 1 and num_classes >= 2");
  return std::make_shared<detail::MlpObjective>(std::move(shard), hidden_width, num_classes);
}

// Two-block local cost f_i(x, y_i) for the constrained variant. y_i lives in
// a product of simplices with one block per local sample.
class BlockObjective {
 public:
  virtual ~BlockObjective() = default;

  virtual Eigen::Index dim_x() const = 0;
  virtual Eigen::Index dim_y() const = 0;
  virtual int num_samples() const = 0;
  virtual SimplexProductSet y_set() const = 0;

  virtual double loss(const Vec& x, const Vec& y) const = 0;
  virtual Vec grad_x(const Vec& x, const Vec& y) const = 0;
  virtual Vec grad_y(const Vec& x, const Vec& y) const = 0;
  virtual Vec batch_grad_x(const Vec& x, const Vec& y, std::span<const int> idx) const = 0;
  virtual Vec batch_grad_y(const Vec& x, const Vec& y, std::span<const int> idx) const = 0;
  virtual double smoothness() const = 0;

  Vec stoch_grad_x(const Vec& x, const Vec& y, int S, RngStream& rng) const {
    const auto idx = draw_batch(rng, static_cast<std::size_t>(num_samples()), S);
    return batch_grad_x(x, y, idx);
  }
  Vec stoch_grad_y(const Vec& x, const Vec& y, int S, RngStream& rng) const {
    const auto idx = draw_batch(rng, static_cast<std::size_t>(num_samples()), S);
    return batch_grad_y(x, y, idx);
  }

  virtual Vec initial_y() const {
    const auto set = y_set();
    return Vec::Constant(set.dim(), 1.0 / set.block_size);
  }
};

using BlockObjectivePtr = std::shared_ptr<const BlockObjective>;

namespace detail {

// Soft clustering: f_i(X, y) = (1/n) sum_j [ sum_k y_jk ||xi_j - X_k||^2
// + (rho/2)||y_j||^2 ], X in a box, y_j on the simplex.
class SoftClusteringObjective final : public BlockObjective {
 public:
  SoftClusteringObjective(Shard shard, int K, double box_radius, double rho)
      : shard_(std::move(shard)), K_(K), radius_(box_radius), rho_(rho) {
    if (K_ < 1) throw std::invalid_argument("make_soft_clustering: K < 1");
    d_ = shard_.feature_dim();
    estimate_smoothness();
  }

  Eigen::Index dim_x() const override { return static_cast<Eigen::Index>(K_) * d_; }
  Eigen::Index dim_y() const override { return static_cast<Eigen::Index>(K_) * shard_.n(); }
  int num_samples() const override { return shard_.n(); }
  SimplexProductSet y_set() const override { return {K_, shard_.n()}; }
  BoxSet x_box() const { return BoxSet::uniform(dim_x(), -radius_, radius_); }
  double rho() const { return rho_; }

  double loss(const Vec& x, const Vec& y) const override {
    const auto C = centroids(x);
    double total = 0.0;
    for (int j = 0; j < shard_.n(); ++j) {
      for (int k = 0; k < K_; ++k) {
        const double dist2 = (shard_.features.row(j).transpose() - C.col(k)).squaredNorm();
        total += y(j * K_ + k) * dist2;
      }
      total += 0.5 * rho_ * y.segment(static_cast<Eigen::Index>(j) * K_, K_).squaredNorm();
    }
    return total / shard_.n();
  }

  Vec grad_x(const Vec& x, const Vec& y) const override {
    std::vector<int> all(static_cast<std::size_t>(shard_.n()));
    for (int j = 0; j < shard_.n(); ++j) all[static_cast<std::size_t>(j)] = j;
    return batch_grad_x(x, y, all);
  }
  Vec grad_y(const Vec& x, const Vec& y) const override {
    std::vector<int> all(static_cast<std::size_t>(shard_.n()));
    for (int j = 0; j < shard_.n(); ++j) all[static_cast<std::size_t>(j)] = j;
    return batch_grad_y(x, y, all);
  }

  Vec batch_grad_x(const Vec& x, const Vec& y, std::span<const int> idx) const override {
    const auto C = centroids(x);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d_, K_);
    for (int j : idx) {
      for (int k = 0; k < K_; ++k) {
        G.col(k) += y(j * K_ + k) * 2.0 * (C.col(k) - shard_.features.row(j).transpose());
      }
    }
    G /= static_cast<double>(idx.size());
    return Eigen::Map<const Vec>(G.data(), G.size());
  }

  // Per-sample y-gradients are supported on the sample's own block; the
  // batch mean over blocks stays unbiased for grad_y.
  Vec batch_grad_y(const Vec& x, const Vec& y, std::span<const int> idx) const override {
    const auto C = centroids(x);
    Vec g = Vec::Zero(dim_y());
    const double w = 1.0 / static_cast<double>(idx.size());
    for (int j : idx) {
      for (int k = 0; k < K_; ++k) {
        const double dist2 = (shard_.features.row(j).transpose() - C.col(k)).squaredNorm();
        g(j * K_ + k) += w * (dist2 + rho_ * y(j * K_ + k));
      }
    }
    return g;
  }

  double smoothness() const override { return smoothness_; }

 private:
  Eigen::Map<const Eigen::MatrixXd> centroids(const Vec& x) const {
    return {x.data(), d_, K_};  // column k = centroid k
  }

  void estimate_smoothness() {
    RngStream rng(stream_seed(0x736f6674ULL, 0, static_cast<std::uint64_t>(dim_x())));
    const auto ys = y_set();
    const auto box = x_box();
    double max_ratio = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
      Vec xu(dim_x()), xv(dim_x());
      for (Eigen::Index t = 0; t < xu.size(); ++t) xu(t) = rng.uniform(-radius_, radius_);
      Vec yu(dim_y()), yv(dim_y());
      for (Eigen::Index t = 0; t < yu.size(); ++t) yu(t) = rng.uniform();
      yu = project_simplex_product(yu, ys);
      xv = project_box(xu + 0.1 * Vec::NullaryExpr(dim_x(), [&](Eigen::Index) { return rng.gaussian(); }), box);
      yv = project_simplex_product(
          yu + 0.1 * Vec::NullaryExpr(dim_y(), [&](Eigen::Index) { return rng.gaussian(); }), ys);
      Vec gu(dim_x() + dim_y()), gv(dim_x() + dim_y());
      gu << grad_x(xu, yu), grad_y(xu, yu);
      gv << grad_x(xv, yv), grad_y(xv, yv);
      const double den = std::sqrt((xu - xv).squaredNorm() + (yu - yv).squaredNorm());
      if (den > 1e-12) max_ratio = std::max(max_ratio, (gu - gv).norm() / den);
    }
    smoothness_ = 2.0 * max_ratio;
  }

  Shard shard_;
  int K_, d_;
  double radius_, rho_;
  double smoothness_ = 0.0;
};

// Adapter making a one-block objective usable by the two-block engine; y is
// carried along untouched (K = 1 blocks, so each y block is pinned to 1).
class XOnlyBlockObjective final : public BlockObjective {
 public:
  explicit XOnlyBlockObjective(ObjectivePtr inner) : inner_(std::move(inner)) {}

  Eigen::Index dim_x() const override { return inner_->dim(); }
  Eigen::Index dim_y() const override { return inner_->num_samples(); }
  int num_samples() const override { return inner_->num_samples(); }
  SimplexProductSet y_set() const override { return {1, inner_->num_samples()}; }

  double loss(const Vec& x, const Vec&) const override { return inner_->loss(x); }
  Vec grad_x(const Vec& x, const Vec&) const override { return inner_->full_grad(x); }
  Vec grad_y(const Vec&, const Vec& y) const override { return Vec::Zero(y.size()); }
  Vec batch_grad_x(const Vec& x, const Vec&, std::span<const int> idx) const override {
    return inner_->batch_grad(x, idx);
  }
  Vec batch_grad_y(const Vec&, const Vec& y, std::span<const int>) const override {
    return Vec::Zero(y.size());
  }
  double smoothness() const override { return inner_->smoothness(); }

 private:
  ObjectivePtr inner_;
};

}  // namespace detail

inline std::shared_ptr<BlockObjective> make_soft_clustering(Shard shard, int K,
                                                            double box_radius,
                                                            double rho = 0.1) {
  return std::make_shared<detail::SoftClusteringObjective>(std::move(shard), K, box_radius, rho);
}

inline std::shared_ptr<BlockObjective> make_x_only_block(ObjectivePtr inner) {
  return std::make_shared<detail::XOnlyBlockObjective>(std::move(inner));
}

}  // namespace fedvra
