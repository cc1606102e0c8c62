#include "systems.hpp"

#include <cmath>
#include <numeric>

#include "errors.hpp"

namespace calm {
namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

Eigen::MatrixXd diag(std::initializer_list<double> v) {
  return vec(v).asDiagonal();
}

// Factor L with L L^T = cov for symmetric PSD cov: plain Cholesky when it
// succeeds, otherwise pivoted LDL^T (so singular and all-zero covariances
// are accepted and sampled exactly).
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov, std::size_t k) {
  constexpr double kJitter = 1e-10;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  if (ldlt.info() != Eigen::Success)
    throw InvalidArgument("gmm: covariance " + std::to_string(k) +
                          " is not factorizable");
  Eigen::VectorXd d = ldlt.vectorD();
  if (d.minCoeff() < -kJitter)
    throw InvalidArgument("gmm: covariance " + std::to_string(k) +
                          " is not positive semi-definite");
  Eigen::MatrixXd L = ldlt.matrixL();
  Eigen::MatrixXd scaled = L * d.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return ldlt.transpositionsP().transpose() * scaled;
}

}  // namespace

GmmSpec::GmmSpec(std::vector<Eigen::VectorXd> means,
                 std::vector<Eigen::MatrixXd> covariances,
                 std::vector<double> weights)
    : means_(std::move(means)),
      covariances_(std::move(covariances)),
      weights_(std::move(weights)) {
  const std::size_t k = means_.size();
  if (k == 0) throw InvalidArgument("gmm: at least one component required");
  if (covariances_.size() != k || weights_.size() != k)
    throw InvalidArgument("gmm: means, covariances and weights differ in count");
  const Eigen::Index m = means_[0].size();
  if (m == 0) throw InvalidArgument("gmm: zero-dimensional component");
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (means_[i].size() != m)
      throw InvalidArgument("gmm: mean " + std::to_string(i) + " has wrong dimension");
    if (covariances_[i].rows() != m || covariances_[i].cols() != m)
      throw InvalidArgument("gmm: covariance " + std::to_string(i) + " has wrong shape");
    if (!means_[i].allFinite() || !covariances_[i].allFinite())
      throw InvalidArgument("gmm: non-finite parameter in component " + std::to_string(i));
    if ((covariances_[i] - covariances_[i].transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw InvalidArgument("gmm: covariance " + std::to_string(i) + " is not symmetric");
    if (!(weights_[i] >= 0.0))
      throw InvalidArgument("gmm: negative weight in component " + std::to_string(i));
    total += weights_[i];
    factors_.push_back(psd_factor(covariances_[i], i));
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InvalidArgument("gmm: weights sum to " + std::to_string(total) + ", not 1");
}

Eigen::VectorXd GmmSpec::mixture_mean() const {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim());
  for (int k = 0; k < num_components(); ++k) mean += weights_[k] * means_[k];
  return mean;
}

GmmDraw sample_gmm(const GmmSpec& spec, Rng& rng) {
  const double u = rng.uniform();
  const int last = spec.num_components() - 1;
  int component = last;
  double cumulative = 0.0;
  for (int k = 0; k < last; ++k) {
    cumulative += spec.weights()[k];
    if (u < cumulative) {
      component = k;
      break;
    }
  }
  Eigen::VectorXd z(spec.dim());
  for (int i = 0; i < spec.dim(); ++i) z(i) = rng.normal();
  return {spec.means()[component] + spec.factors()[component] * z, component};
}

GmmSpec gmm_preset(std::string_view name) {
  const Eigen::MatrixXd half = diag({0.5, 0.5});
  const Eigen::MatrixXd corr = mat2(1.0, 0.8, 0.8, 1.0);
  const Eigen::MatrixXd anti = mat2(0.6, -0.3, -0.3, 0.5);
  if (name == "pendulum_2mode")
    return GmmSpec({vec({-3, -3}), vec({3, 3})}, {half, half}, {0.3, 0.7});
  if (name == "pendulum_3mode")
    return GmmSpec({vec({-3, -3}), vec({-5, 4}), vec({4, 4})},
                   {half, corr, anti}, {0.6, 0.3, 0.1});
  if (name == "vdp_2mode")
    return GmmSpec({vec({-5, -4}), vec({4, 5})}, {half, half}, {0.3, 0.7});
  if (name == "tracking_4mode")
    return GmmSpec({vec({-3, -3}), vec({-5, 4}), vec({2, -2}), vec({4, 4})},
                   {half, corr, anti, mat2(0.3, 0.1, 0.1, 0.4)},
                   {0.4, 0.3, 0.2, 0.1});
  if (name == "boeing_2mode")
    return GmmSpec({vec({-5, -4, -3, -2}), vec({4, 5, 3, 2})},
                   {diag({0.1, 0.2, 0.3, 0.4}), diag({0.4, 0.1, 0.3, 0.2})},
                   {0.3, 0.7});
  throw InvalidArgument("unknown gmm preset '" + std::string(name) + "'");
}

std::vector<std::string> gmm_preset_names() {
  return {"pendulum_2mode", "pendulum_3mode", "vdp_2mode", "tracking_4mode",
          "boeing_2mode"};
}

double riccati_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                        const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                        double gamma, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd BtPA = B.transpose() * P * A;
  const Eigen::MatrixXd S = R + gamma * B.transpose() * P * B;
  const Eigen::MatrixXd rhs = Q + gamma * A.transpose() * P * A -
                              gamma * gamma * BtPA.transpose() * S.ldlt().solve(BtPA);
  return (rhs - P).norm();
}

LqrSolution solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                       const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                       double gamma, const DareOptions& options) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != B.cols() || R.cols() != B.cols())
    throw InvalidArgument("dare: inconsistent matrix shapes");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw InvalidArgument("dare: discount must lie in (0, 1]");
  if (Eigen::LLT<Eigen::MatrixXd>(R).info() != Eigen::Success)
    throw InvalidArgument("dare: R must be positive definite");
  if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Q, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .minCoeff() < -1e-12)
    throw InvalidArgument("dare: Q must be positive semi-definite");

  Eigen::MatrixXd P = Q;
  double change = 0.0;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const Eigen::MatrixXd BtPA = B.transpose() * P * A;
    const Eigen::MatrixXd S = R + gamma * B.transpose() * P * B;
    Eigen::MatrixXd next = Q + gamma * A.transpose() * P * A -
                           gamma * gamma * BtPA.transpose() * S.ldlt().solve(BtPA);
    next = 0.5 * (next + next.transpose());
    if (!next.allFinite())
      throw NumericError("dare: iterate diverged at iteration " + std::to_string(it));
    change = (next - P).norm();
    P = std::move(next);
    if (change < options.tolerance * std::max(1.0, P.norm())) break;
  }
  LqrSolution sol;
  sol.P = P;
  sol.iterations = it + 1;
  sol.residual = riccati_residual(A, B, Q, R, gamma, P);
  if (it == options.max_iterations)
    throw NumericError("dare: no convergence after " +
                       std::to_string(options.max_iterations) +
                       " iterations, residual " + std::to_string(sol.residual));
  const Eigen::MatrixXd S = R + gamma * B.transpose() * P * B;
  sol.K = -gamma * S.ldlt().solve(B.transpose() * P * A);
  return sol;
}

SystemKind parse_system_kind(std::string_view name) {
  if (name == "pendulum") return SystemKind::kPendulum;
  if (name == "vdp") return SystemKind::kVdp;
  if (name == "tracking") return SystemKind::kTracking;
  if (name == "boeing747") return SystemKind::kBoeing747;
  throw InvalidArgument("unknown system '" + std::string(name) +
                        "' (expected pendulum|vdp|tracking|boeing747)");
}

bool system_is_controlled(SystemKind kind) { return kind != SystemKind::kVdp; }

int system_state_dim(SystemKind kind) {
  return kind == SystemKind::kBoeing747 ? 4 : 2;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> open_loop_matrices(SystemKind kind) {
  const double eps = kStepSeconds;
  switch (kind) {
    case SystemKind::kPendulum: {
      constexpr double g = 9.81, m = 0.15, b = 0.1, l = 0.5;
      Eigen::MatrixXd A(2, 2), B(2, 1);
      A << 1.0, eps, g / l * eps, 1.0 - b / (m * l * l) * eps;
      B << 0.0, eps / (m * l * l);
      return {A, B};
    }
    case SystemKind::kTracking: {
      Eigen::MatrixXd A(2, 2), B(2, 1);
      A << 1.0, 2.0, 0.0, 1.0 - 0.04 * eps;
      B << 0.0, eps;
      return {A, B};
    }
    case SystemKind::kBoeing747: {
      // Longitudinal Boeing 747 dynamics in steady level flight at 40,000 ft
      // and 774 ft/s, already discretised with a one-second step (Boyd &
      // Vandenberghe, "Introduction to Applied Linear Algebra").
      Eigen::MatrixXd A(4, 4), B(4, 2);
      A << 0.99, 0.03, -0.02, -0.32,
           0.01, 0.47, 4.7, 0.0,
           0.02, -0.06, 0.40, 0.0,
           0.01, -0.04, 0.72, 0.99;
      B << 0.01, 0.99,
           -3.44, 1.66,
           -0.83, 0.44,
           -0.47, 0.25;
      return {A, B};
    }
    case SystemKind::kVdp:
      break;
  }
  throw InvalidArgument("system has no control input");
}

SystemModel build_system(std::string_view name, const GmmSpec& gmm,
                         const std::optional<LqrSolution>& lqr) {
  SystemModel model;
  model.kind = parse_system_kind(name);
  model.name = std::string(name);
  model.state_dim = system_state_dim(model.kind);
  model.noise_dim = model.state_dim;
  if (gmm.dim() != model.noise_dim)
    throw InvalidArgument("system '" + model.name + "' needs " +
                          std::to_string(model.noise_dim) +
                          "-dimensional noise, gmm has dimension " +
                          std::to_string(gmm.dim()));
  if (!system_is_controlled(model.kind)) return model;

  if (!lqr) throw InvalidArgument("system '" + model.name + "' requires an LQR gain");
  auto [A, B] = open_loop_matrices(model.kind);
  if (lqr->K.rows() != B.cols() || lqr->K.cols() != A.rows())
    throw InvalidArgument("lqr gain has wrong shape for '" + model.name + "'");
  model.A = std::move(A);
  model.B = std::move(B);
  model.K = lqr->K;
  model.closed_loop = model.A + model.B * model.K;
  return model;
}

SystemModel build_system_lqr(std::string_view name, const GmmSpec& gmm,
                             double lqr_gamma) {
  const SystemKind kind = parse_system_kind(name);
  if (!system_is_controlled(kind)) return build_system(name, gmm, std::nullopt);
  auto [A, B] = open_loop_matrices(kind);
  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(A.rows(), A.rows());
  const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(B.cols(), B.cols());
  return build_system(name, gmm, solve_dare(A, B, Q, R, lqr_gamma));
}

Eigen::VectorXd step(const SystemModel& model, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& w) {
  if (x.size() != model.state_dim || w.size() != model.noise_dim)
    throw InvalidArgument("step: dimension mismatch for '" + model.name + "'");
  Eigen::VectorXd next;
  if (model.is_linear()) {
    next = model.closed_loop * x + w;
  } else {
    const double eps = kStepSeconds, mu = model.vdp_mu;
    next.resize(2);
    next(0) = x(0) + eps * (x(1) + w(0));
    // The -x2 restoring term is kept exactly as the benchmark defines it.
    next(1) = x(1) + eps * (mu * (1.0 - x(0) * x(0)) * x(1) - x(1) + w(1));
  }
  if (!next.allFinite())
    throw NumericError("step: non-finite state for '" + model.name + "'");
  return next;
}

Eigen::VectorXd predict(const SystemModel& model, const Eigen::VectorXd& x) {
  return step(model, x, Eigen::VectorXd::Zero(model.noise_dim));
}

}  // namespace calm
