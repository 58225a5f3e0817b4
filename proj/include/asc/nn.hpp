#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "asc/error.hpp"
#include "asc/rng.hpp"

namespace asc {

using Shape = std::vector<size_t>;

size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

// Dense row-major tensor of doubles. Batched tensors carry the batch size
// as the leading dimension.
struct Tensor {
  Shape shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), v(shape_size(shape), 0.0) {}
  Tensor(Shape s, std::vector<double> values);

  size_t size() const { return v.size(); }
  double& operator[](size_t i) { return v[i]; }
  double operator[](size_t i) const { return v[i]; }
};

// A learnable tensor and the gradient accumulated by the last backward pass.
struct Param {
  Tensor value;
  Tensor grad;
};

enum class LayerKind { Dense, Conv2d, MaxPool2d, Relu, Flatten, ResidualAdd, Softmax };

enum class Padding { Same, Valid };

// Declarative layer description; models serialize as a list of these.
struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  // dense
  size_t units = 0;
  // conv2d
  size_t out_channels = 0;
  size_t kernel_h = 3;
  size_t kernel_w = 3;
  size_t stride = 1;
  Padding padding = Padding::Same;
  // maxpool2d (stride equals the pool size)
  size_t pool = 2;
  // residual_add: index of the activation to add; 0 is the model input,
  // i + 1 is the output of layer i.
  int skip_from = -1;

  nlohmann::json to_json() const;
  static LayerSpec from_json(const nlohmann::json& j);
};

LayerSpec dense_spec(size_t units);
LayerSpec conv2d_spec(size_t out_channels, size_t kernel = 3, size_t stride = 1,
                      Padding padding = Padding::Same);
LayerSpec maxpool2d_spec(size_t pool = 2);
LayerSpec relu_spec();
LayerSpec flatten_spec();
LayerSpec residual_add_spec(int skip_from);
LayerSpec softmax_spec();

class Layer;

// A validated layer chain with parameters. Activation index i is the input
// of layer i; index n_layers is the network output.
class Model {
 public:
  Model();
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  Shape input_shape;              // per-sample shape, no batch dimension
  std::vector<LayerSpec> specs;
  std::vector<std::unique_ptr<Layer>> layers;
  std::vector<Shape> act_shapes;  // per-sample shapes per activation index

  std::vector<Param*> params() const;
  Model clone() const;
};

// Validates the shape chain, initializes weights with fan-scaled uniforms
// (+-sqrt(6/(fan_in+fan_out))) from the seeded generator.
Model build_layers(Shape input_shape, std::vector<LayerSpec> specs, uint64_t seed);

// Activations per layer; acts[0] is the batch, acts.back() the output.
// Softmax rows sum to 1 within 1e-9.
std::vector<Tensor> forward(Model& model, const Tensor& batch);

// Mean over the batch of -ln p[label]. Probabilities below 1e-12 are clamped
// and, when clamped_out is given, flagged.
double cross_entropy(const Tensor& probabilities, std::span<const int> labels,
                     bool* clamped_out = nullptr);

// Mean over all elements of (prediction - target)^2.
double mse_loss(const Tensor& prediction, const Tensor& target);

// Reverse-mode gradients of mean cross-entropy; fills every Param::grad.
void backward(Model& model, const std::vector<Tensor>& activations,
              std::span<const int> labels);

// Reverse-mode gradients of the MSE reconstruction loss.
void backward_mse(Model& model, const std::vector<Tensor>& activations,
                  const Tensor& target);

// Plain SGD: p <- p - lr * g. Throws DivergenceError on non-finite gradients.
void sgd_step(std::span<Param* const> parameters, double learning_rate);
void sgd_step(Model& model, double learning_rate);

// Central-difference validation of backward on the cross-entropy objective.
// Returns max_i |g_bp - g_fd| / max(|g_bp|, |g_fd|, 1e-8).
double grad_check(Model& model, const Tensor& batch, std::span<const int> labels,
                  double epsilon);

size_t count_params(const Model& model);

// Parameter snapshot/restore, used for early-stopping checkpoints.
std::vector<double> snapshot_params(const Model& model);
void restore_params(Model& model, const std::vector<double>& snapshot);

// Batched argmax over the class axis; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Tensor& t);

}  // namespace asc
