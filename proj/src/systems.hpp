#ifndef CALM_SYSTEMS_HPP_
#define CALM_SYSTEMS_HPP_

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rng.hpp"

namespace calm {

// K-component Gaussian mixture; the process-noise law.
class GmmSpec {
 public:
  GmmSpec() = default;
  // Throws InvalidArgument unless weights are a probability vector (to
  // 1e-12), dimensions agree, and every covariance is symmetric PSD.
  GmmSpec(std::vector<Eigen::VectorXd> means,
          std::vector<Eigen::MatrixXd> covariances,
          std::vector<double> weights);

  int dim() const { return means_.empty() ? 0 : static_cast<int>(means_[0].size()); }
  int num_components() const { return static_cast<int>(means_.size()); }
  const std::vector<Eigen::VectorXd>& means() const { return means_; }
  const std::vector<Eigen::MatrixXd>& covariances() const { return covariances_; }
  const std::vector<double>& weights() const { return weights_; }
  // factors()[k] * factors()[k]^T == covariances()[k]
  const std::vector<Eigen::MatrixXd>& factors() const { return factors_; }
  Eigen::VectorXd mixture_mean() const;

 private:
  std::vector<Eigen::VectorXd> means_;
  std::vector<Eigen::MatrixXd> covariances_;
  std::vector<double> weights_;
  std::vector<Eigen::MatrixXd> factors_;
};

struct GmmDraw {
  Eigen::VectorXd value;
  int component = 0;
};

// Component by weight (one uniform draw), then mean + L z with z ~ N(0, I).
GmmDraw sample_gmm(const GmmSpec& spec, Rng& rng);

// Mixtures used in the experiments, by name: pendulum_2mode,
// pendulum_3mode, vdp_2mode, tracking_4mode, boeing_2mode.
GmmSpec gmm_preset(std::string_view name);
std::vector<std::string> gmm_preset_names();

struct LqrSolution {
  Eigen::MatrixXd P;
  Eigen::MatrixXd K;
  double residual = 0.0;
  int iterations = 0;
};

struct DareOptions {
  double tolerance = 1e-12;
  int max_iterations = 100000;
};

// Discounted DARE  P = Q + g A'PA - g^2 A'PB (R + g B'PB)^-1 B'PA  by
// fixed-point iteration from P0 = Q, with K = -g (R + g B'PB)^-1 B'PA so
// that u = K x. Throws NumericError (with the last residual) when the
// iteration fails to converge.
LqrSolution solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                       const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                       double gamma, const DareOptions& options = {});

// Frobenius norm of the Riccati defect at P.
double riccati_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                        const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                        double gamma, const Eigen::MatrixXd& P);

enum class SystemKind { kPendulum, kVdp, kTracking, kBoeing747 };

inline constexpr double kStepSeconds = 0.05;

struct SystemModel {
  SystemKind kind = SystemKind::kPendulum;
  std::string name;
  int state_dim = 0;
  int noise_dim = 0;
  // Linear systems only: open-loop A, B, gain K and closed loop A + B K.
  Eigen::MatrixXd A, B, K, closed_loop;
  double vdp_mu = 0.025;

  bool is_linear() const { return kind != SystemKind::kVdp; }
};

SystemKind parse_system_kind(std::string_view name);
bool system_is_controlled(SystemKind kind);
int system_state_dim(SystemKind kind);

// Open-loop (A, B) of a controlled benchmark.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> open_loop_matrices(SystemKind kind);

SystemModel build_system(std::string_view name, const GmmSpec& gmm,
                         const std::optional<LqrSolution>& lqr);

// Synthesises the LQR gain with Q = I, R = I at the given discount and then
// calls build_system.
SystemModel build_system_lqr(std::string_view name, const GmmSpec& gmm,
                             double lqr_gamma = 0.9999);

// x' = f(x, w). No randomness; throws NumericError on a non-finite result.
Eigen::VectorXd step(const SystemModel& model, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& w);
// f(x, 0)
Eigen::VectorXd predict(const SystemModel& model, const Eigen::VectorXd& x);

}  // namespace calm

#endif  // CALM_SYSTEMS_HPP_
