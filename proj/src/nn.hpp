#ifndef CALM_NN_HPP_
#define CALM_NN_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

namespace calm {

// Dense feed-forward network: ReLU on hidden layers, identity on the output.
// weights[l] is (layer_sizes[l+1] x layer_sizes[l]); biases[l] has
// layer_sizes[l+1] entries.
struct Mlp {
  std::vector<int> layer_sizes;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  std::size_t num_parameters() const;
};

// Parameter gradients (summed over a batch) congruent with an Mlp. `input`
// holds d/d(input) per sample column when requested.
struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Eigen::MatrixXd input;

  bool all_finite() const;
  void scale(double factor);
  void add(const Gradients& other);
};

struct AdamState {
  std::vector<Eigen::MatrixXd> m_weights, v_weights;
  std::vector<Eigen::VectorXd> m_biases, v_biases;
  std::int64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Decoupled (AdamW-style); applied to weight matrices only.
  double weight_decay = 0.0;
};

// Activations kept by forward_batch for a subsequent backward_batch.
// activations[0] is the input batch, activations[l] the post-activation
// output of layer l (columns are samples).
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;
};

// Uniform(-s, s) with s = output_scale / sqrt(fan_in) on the last layer and
// s = 1 / sqrt(fan_in) elsewhere; zero biases. Deterministic in `seed`.
Mlp init_mlp(std::span<const int> layer_sizes, std::uint64_t seed,
             double output_scale = 1.0);

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input);
Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs,
                              ForwardCache* cache = nullptr);

// Exact gradients of <upstream, forward(net, input)>. ReLU'(0) = 0.
Gradients backward(const Mlp& net, const Eigen::VectorXd& input,
                   const Eigen::VectorXd& upstream);
// Same, summed over the columns of `upstream`; `cache` must come from
// forward_batch on the same net.
Gradients backward_batch(const Mlp& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& upstream,
                         bool want_input_grad = false);

Gradients zero_gradients(const Mlp& net);
AdamState make_adam(const Mlp& net, double learning_rate,
                    double weight_decay = 0.0);

// One bias-corrected Adam step (descent on the gradient). Throws
// NumericError on a non-finite gradient; inputs are never modified.
std::pair<Mlp, AdamState> adam_step(const Mlp& net, const AdamState& state,
                                    const Gradients& grads);

// Checkpoint format: {"format": "calm.mlp", "version": 1, "layer_sizes",
// "activation", "weights" (row-major per layer), "biases", "meta"}.
inline constexpr int kCheckpointVersion = 1;
nlohmann::json mlp_to_json(const Mlp& net, const nlohmann::json& meta = {});
Mlp mlp_from_json(const nlohmann::json& doc, nlohmann::json* meta = nullptr);
void save_checkpoint(const std::filesystem::path& path, const Mlp& net,
                     const nlohmann::json& meta = {});
Mlp load_checkpoint(const std::filesystem::path& path,
                    nlohmann::json* meta = nullptr);

}  // namespace calm

#endif  // CALM_NN_HPP_
