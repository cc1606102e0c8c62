#include "nn.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "errors.hpp"
#include "rng.hpp"

namespace calm {
namespace {

void check_layer_sizes(std::span<const int> sizes) {
  if (sizes.size() < 2)
    throw InvalidArgument("mlp: layer_sizes needs at least input and output");
  for (int s : sizes)
    if (s < 1) throw InvalidArgument("mlp: layer sizes must be >= 1");
}

Eigen::MatrixXd relu(Eigen::MatrixXd z) { return z.cwiseMax(0.0); }

}  // namespace

std::size_t Mlp::num_parameters() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += weights[l].size() + biases[l].size();
  return n;
}

bool Gradients::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return input.allFinite();
}

void Gradients::scale(double factor) {
  for (auto& w : weights) w *= factor;
  for (auto& b : biases) b *= factor;
  input *= factor;
}

void Gradients::add(const Gradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
}

Mlp init_mlp(std::span<const int> layer_sizes, std::uint64_t seed,
             double output_scale) {
  check_layer_sizes(layer_sizes);
  Mlp net;
  net.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(Stream::kInit)}));
  const std::size_t layers = layer_sizes.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    if (l + 1 == layers) bound *= output_scale;
    Eigen::MatrixXd w(fan_out, fan_in);
    // Row-major fill so the draw order matches the checkpoint layout.
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

Eigen::MatrixXd forward_batch(const Mlp& net, const Eigen::MatrixXd& inputs,
                              ForwardCache* cache) {
  if (inputs.rows() != net.input_dim())
    throw InvalidArgument("mlp forward: input has " +
                          std::to_string(inputs.rows()) + " rows, expected " +
                          std::to_string(net.input_dim()));
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(inputs);
  }
  Eigen::MatrixXd a = inputs;
  const int layers = net.num_layers();
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = net.weights[l] * a;
    z.colwise() += net.biases[l];
    a = (l + 1 < layers) ? relu(std::move(z)) : std::move(z);
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input) {
  if (input.size() != net.input_dim())
    throw InvalidArgument("mlp forward: input length " +
                          std::to_string(input.size()) + ", expected " +
                          std::to_string(net.input_dim()));
  // Vector path avoids the cache and the matrix temporaries of the batch path.
  Eigen::VectorXd a = input;
  const int layers = net.num_layers();
  for (int l = 0; l < layers; ++l) {
    Eigen::VectorXd z = net.weights[l] * a + net.biases[l];
    a = (l + 1 < layers) ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

Gradients zero_gradients(const Mlp& net) {
  Gradients g;
  for (int l = 0; l < net.num_layers(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(),
                                              net.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  return g;
}

Gradients backward_batch(const Mlp& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& upstream,
                         bool want_input_grad) {
  const int layers = net.num_layers();
  if (static_cast<int>(cache.activations.size()) != layers + 1)
    throw InvalidArgument("mlp backward: cache does not match network");
  if (upstream.rows() != net.output_dim() ||
      upstream.cols() != cache.activations[0].cols())
    throw InvalidArgument("mlp backward: upstream gradient shape mismatch");

  Gradients g;
  g.weights.resize(layers);
  g.biases.resize(layers);
  Eigen::MatrixXd delta = upstream;  // dL/dz for the current layer
  for (int l = layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& a_in = cache.activations[l];
    g.weights[l].noalias() = delta * a_in.transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l == 0 && !want_input_grad) break;
    Eigen::MatrixXd da = net.weights[l].transpose() * delta;
    if (l == 0) {
      g.input = std::move(da);
      break;
    }
    // ReLU mask from the post-activation; a == 0 (including z == 0) -> 0.
    delta = (a_in.array() > 0.0).select(da, 0.0);
  }
  return g;
}

Gradients backward(const Mlp& net, const Eigen::VectorXd& input,
                   const Eigen::VectorXd& upstream) {
  if (input.size() != net.input_dim())
    throw InvalidArgument("mlp backward: input length mismatch");
  if (upstream.size() != net.output_dim())
    throw InvalidArgument("mlp backward: upstream length mismatch");
  ForwardCache cache;
  forward_batch(net, input, &cache);
  return backward_batch(net, cache, upstream, /*want_input_grad=*/true);
}

AdamState make_adam(const Mlp& net, double learning_rate,
                    double weight_decay) {
  if (!(learning_rate > 0.0))
    throw InvalidArgument("adam: learning rate must be positive");
  if (weight_decay < 0.0)
    throw InvalidArgument("adam: weight decay must be non-negative");
  AdamState s;
  s.learning_rate = learning_rate;
  s.weight_decay = weight_decay;
  Gradients zero = zero_gradients(net);
  s.m_weights = zero.weights;
  s.v_weights = zero.weights;
  s.m_biases = zero.biases;
  s.v_biases = zero.biases;
  return s;
}

std::pair<Mlp, AdamState> adam_step(const Mlp& net, const AdamState& state,
                                    const Gradients& grads) {
  const int layers = net.num_layers();
  if (static_cast<int>(grads.weights.size()) != layers ||
      static_cast<int>(state.m_weights.size()) != layers)
    throw InvalidArgument("adam: gradient/state layer count mismatch");
  for (int l = 0; l < layers; ++l) {
    if (grads.weights[l].rows() != net.weights[l].rows() ||
        grads.weights[l].cols() != net.weights[l].cols() ||
        grads.biases[l].size() != net.biases[l].size())
      throw InvalidArgument("adam: gradient shape mismatch at layer " +
                            std::to_string(l));
    if (!grads.weights[l].allFinite() || !grads.biases[l].allFinite())
      throw NumericError("adam: non-finite gradient at layer " +
                         std::to_string(l));
  }

  Mlp out = net;
  AdamState next = state;
  next.step = state.step + 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(next.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(next.step));
  const double lr = state.learning_rate;
  const double eps = state.epsilon;

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };

  for (int l = 0; l < layers; ++l) {
    if (state.weight_decay > 0.0)
      out.weights[l] *= (1.0 - lr * state.weight_decay);
    update(out.weights[l], next.m_weights[l], next.v_weights[l],
           grads.weights[l]);
    update(out.biases[l], next.m_biases[l], next.v_biases[l],
           grads.biases[l]);
  }
  return {std::move(out), std::move(next)};
}

nlohmann::json mlp_to_json(const Mlp& net, const nlohmann::json& meta) {
  nlohmann::json doc;
  doc["format"] = "calm.mlp";
  doc["version"] = kCheckpointVersion;
  doc["layer_sizes"] = net.layer_sizes;
  doc["activation"] = "relu";
  doc["output_activation"] = "identity";
  nlohmann::json ws = nlohmann::json::array();
  nlohmann::json bs = nlohmann::json::array();
  for (int l = 0; l < net.num_layers(); ++l) {
    std::vector<double> flat;
    flat.reserve(net.weights[l].size());
    for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c)
        flat.push_back(net.weights[l](r, c));
    ws.push_back(flat);
    bs.push_back(std::vector<double>(net.biases[l].data(),
                                     net.biases[l].data() + net.biases[l].size()));
  }
  doc["weights"] = std::move(ws);
  doc["biases"] = std::move(bs);
  doc["meta"] = meta.is_null() ? nlohmann::json::object() : meta;
  return doc;
}

Mlp mlp_from_json(const nlohmann::json& doc, nlohmann::json* meta) {
  try {
    if (doc.at("format").get<std::string>() != "calm.mlp")
      throw InvalidArgument("checkpoint: unknown format");
    if (doc.at("version").get<int>() != kCheckpointVersion)
      throw InvalidArgument("checkpoint: unsupported version");
    Mlp net;
    net.layer_sizes = doc.at("layer_sizes").get<std::vector<int>>();
    check_layer_sizes(net.layer_sizes);
    const auto& ws = doc.at("weights");
    const auto& bs = doc.at("biases");
    const std::size_t layers = net.layer_sizes.size() - 1;
    if (ws.size() != layers || bs.size() != layers)
      throw InvalidArgument("checkpoint: layer count mismatch");
    for (std::size_t l = 0; l < layers; ++l) {
      const int rows = net.layer_sizes[l + 1], cols = net.layer_sizes[l];
      auto flat = ws[l].get<std::vector<double>>();
      auto bias = bs[l].get<std::vector<double>>();
      if (flat.size() != static_cast<std::size_t>(rows) * cols ||
          bias.size() != static_cast<std::size_t>(rows))
        throw InvalidArgument("checkpoint: parameter count mismatch at layer " +
                              std::to_string(l));
      Eigen::MatrixXd w(rows, cols);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) w(r, c) = flat[r * cols + c];
      net.weights.push_back(std::move(w));
      net.biases.push_back(
          Eigen::Map<const Eigen::VectorXd>(bias.data(), rows));
    }
    if (meta) *meta = doc.value("meta", nlohmann::json::object());
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Mlp& net,
                     const nlohmann::json& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write checkpoint " + path.string());
  out << mlp_to_json(net, meta).dump(1) << '\n';
}

Mlp load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read checkpoint " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("checkpoint " + path.string() + ": " + e.what());
  }
  return mlp_from_json(doc, meta);
}

}  // namespace calm
