#include "asc/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace asc {

size_t shape_size(const Shape& s) {
  size_t n = 1;
  for (size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream out;
  out << "[";
  for (size_t i = 0; i < s.size(); ++i) out << (i ? "x" : "") << s[i];
  out << "]";
  return out.str();
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), v(std::move(values)) {
  if (v.size() != shape_size(shape))
    throw ShapeError("tensor: " + std::to_string(v.size()) + " values for shape " +
                     shape_str(shape));
}

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::MaxPool2d: return "maxpool2d";
    case LayerKind::Relu: return "relu";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::ResidualAdd: return "residual_add";
    case LayerKind::Softmax: return "softmax";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& name) {
  for (LayerKind k : {LayerKind::Dense, LayerKind::Conv2d, LayerKind::MaxPool2d,
                      LayerKind::Relu, LayerKind::Flatten, LayerKind::ResidualAdd,
                      LayerKind::Softmax})
    if (name == kind_name(k)) return k;
  throw FormatError("unknown layer kind '" + name + "'");
}

Shape batch_item_shape(const Tensor& t) {
  if (t.shape.empty()) throw ShapeError("batch tensor must have a leading batch dim");
  return Shape(t.shape.begin() + 1, t.shape.end());
}

void init_uniform(Tensor& t, double limit, Rng& rng) {
  for (double& v : t.v) v = rng.uniform(-limit, limit);
}

}  // namespace

class Layer {
 public:
  explicit Layer(LayerSpec spec) : spec_(std::move(spec)) {}
  virtual ~Layer() = default;

  const LayerSpec& spec() const { return spec_; }

  virtual Shape infer_shape(const Shape& in, const std::vector<Shape>& act_shapes,
                            size_t index) const = 0;
  virtual void init(const Shape& in, Rng& rng) {}
  virtual Tensor forward(const Tensor& in) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<Param*> params() { return {}; }

 protected:
  LayerSpec spec_;
};

namespace {

class DenseLayer final : public Layer {
 public:
  using Layer::Layer;

  Shape infer_shape(const Shape& in, const std::vector<Shape>&, size_t) const override {
    if (in.size() != 1)
      throw ConfigError("dense expects a flat input, got shape " + shape_str(in) +
                        "; insert a flatten layer");
    if (spec_.units == 0) throw ConfigError("dense: units must be >= 1");
    return {spec_.units};
  }

  void init(const Shape& in, Rng& rng) override {
    in_dim_ = in[0];
    w_.value = Tensor({spec_.units, in_dim_});
    w_.grad = Tensor({spec_.units, in_dim_});
    b_.value = Tensor({spec_.units});
    b_.grad = Tensor({spec_.units});
    const double limit = std::sqrt(6.0 / static_cast<double>(in_dim_ + spec_.units));
    init_uniform(w_.value, limit, rng);
  }

  Tensor forward(const Tensor& in) override {
    input_ = in;
    const size_t n = in.shape[0];
    const size_t d = in_dim_;
    const size_t u = spec_.units;
    Tensor out({n, u});
    for (size_t i = 0; i < n; ++i) {
      const double* x = in.v.data() + i * d;
      double* y = out.v.data() + i * u;
      for (size_t o = 0; o < u; ++o) {
        const double* w = w_.value.v.data() + o * d;
        double acc = b_.value[o];
        for (size_t k = 0; k < d; ++k) acc += w[k] * x[k];
        y[o] = acc;
      }
    }
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    const size_t n = input_.shape[0];
    const size_t d = in_dim_;
    const size_t u = spec_.units;
    Tensor grad_in(input_.shape);
    for (size_t i = 0; i < n; ++i) {
      const double* g = grad_out.v.data() + i * u;
      const double* x = input_.v.data() + i * d;
      double* gx = grad_in.v.data() + i * d;
      for (size_t o = 0; o < u; ++o) {
        const double go = g[o];
        b_.grad[o] += go;
        double* gw = w_.grad.v.data() + o * d;
        const double* w = w_.value.v.data() + o * d;
        for (size_t k = 0; k < d; ++k) {
          gw[k] += go * x[k];
          gx[k] += go * w[k];
        }
      }
    }
    return grad_in;
  }

  std::vector<Param*> params() override { return {&w_, &b_}; }

 private:
  size_t in_dim_ = 0;
  Param w_, b_;
  Tensor input_;
};

class Conv2dLayer final : public Layer {
 public:
  using Layer::Layer;

  Shape infer_shape(const Shape& in, const std::vector<Shape>&, size_t) const override {
    if (in.size() != 3)
      throw ConfigError("conv2d expects input shape [channels, h, w], got " +
                        shape_str(in));
    if (spec_.out_channels == 0 || spec_.kernel_h == 0 || spec_.kernel_w == 0 ||
        spec_.stride == 0)
      throw ConfigError("conv2d: out_channels, kernel and stride must be >= 1");
    const ConvGeom g = geometry(in);
    if (g.oh == 0 || g.ow == 0)
      throw ConfigError("conv2d: kernel " + std::to_string(spec_.kernel_h) + "x" +
                        std::to_string(spec_.kernel_w) + " does not fit input " +
                        shape_str(in));
    return {spec_.out_channels, g.oh, g.ow};
  }

  void init(const Shape& in, Rng& rng) override {
    in_shape_ = in;
    const size_t ci = in[0];
    const size_t fan_in = ci * spec_.kernel_h * spec_.kernel_w;
    const size_t fan_out = spec_.out_channels * spec_.kernel_h * spec_.kernel_w;
    w_.value = Tensor({spec_.out_channels, ci, spec_.kernel_h, spec_.kernel_w});
    w_.grad = Tensor(w_.value.shape);
    b_.value = Tensor({spec_.out_channels});
    b_.grad = Tensor({spec_.out_channels});
    init_uniform(w_.value, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
  }

  Tensor forward(const Tensor& in) override {
    input_ = in;
    const size_t n = in.shape[0];
    const size_t ci = in_shape_[0], h = in_shape_[1], w = in_shape_[2];
    const ConvGeom geom = geometry(in_shape_);
    const size_t oh = geom.oh, ow = geom.ow, pt = geom.pad_top, pl = geom.pad_left;
    const size_t co = spec_.out_channels;
    Tensor out({n, co, oh, ow});
    const size_t kh = spec_.kernel_h, kw = spec_.kernel_w, s = spec_.stride;
    for (size_t b = 0; b < n; ++b) {
      const double* xb = in.v.data() + b * ci * h * w;
      double* yb = out.v.data() + b * co * oh * ow;
      for (size_t oc = 0; oc < co; ++oc) {
        const double* wt = w_.value.v.data() + oc * ci * kh * kw;
        for (size_t oy = 0; oy < oh; ++oy) {
          for (size_t ox = 0; ox < ow; ++ox) {
            double acc = b_.value[oc];
            for (size_t ic = 0; ic < ci; ++ic) {
              const double* xc = xb + ic * h * w;
              const double* wc = wt + ic * kh * kw;
              for (size_t ky = 0; ky < kh; ++ky) {
                const auto iy = static_cast<ptrdiff_t>(oy * s + ky) - static_cast<ptrdiff_t>(pt);
                if (iy < 0 || iy >= static_cast<ptrdiff_t>(h)) continue;
                for (size_t kx = 0; kx < kw; ++kx) {
                  const auto ix = static_cast<ptrdiff_t>(ox * s + kx) - static_cast<ptrdiff_t>(pl);
                  if (ix < 0 || ix >= static_cast<ptrdiff_t>(w)) continue;
                  acc += wc[ky * kw + kx] * xc[iy * static_cast<ptrdiff_t>(w) + ix];
                }
              }
            }
            yb[oc * oh * ow + oy * ow + ox] = acc;
          }
        }
      }
    }
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    const size_t n = input_.shape[0];
    const size_t ci = in_shape_[0], h = in_shape_[1], w = in_shape_[2];
    const ConvGeom geom = geometry(in_shape_);
    const size_t oh = geom.oh, ow = geom.ow, pt = geom.pad_top, pl = geom.pad_left;
    const size_t co = spec_.out_channels;
    const size_t kh = spec_.kernel_h, kw = spec_.kernel_w, s = spec_.stride;
    Tensor grad_in(input_.shape);
    for (size_t b = 0; b < n; ++b) {
      const double* xb = input_.v.data() + b * ci * h * w;
      const double* gb = grad_out.v.data() + b * co * oh * ow;
      double* gxb = grad_in.v.data() + b * ci * h * w;
      for (size_t oc = 0; oc < co; ++oc) {
        const double* wt = w_.value.v.data() + oc * ci * kh * kw;
        double* gwt = w_.grad.v.data() + oc * ci * kh * kw;
        for (size_t oy = 0; oy < oh; ++oy) {
          for (size_t ox = 0; ox < ow; ++ox) {
            const double g = gb[oc * oh * ow + oy * ow + ox];
            b_.grad[oc] += g;
            for (size_t ic = 0; ic < ci; ++ic) {
              const double* xc = xb + ic * h * w;
              double* gxc = gxb + ic * h * w;
              const double* wc = wt + ic * kh * kw;
              double* gwc = gwt + ic * kh * kw;
              for (size_t ky = 0; ky < kh; ++ky) {
                const auto iy = static_cast<ptrdiff_t>(oy * s + ky) - static_cast<ptrdiff_t>(pt);
                if (iy < 0 || iy >= static_cast<ptrdiff_t>(h)) continue;
                for (size_t kx = 0; kx < kw; ++kx) {
                  const auto ix = static_cast<ptrdiff_t>(ox * s + kx) - static_cast<ptrdiff_t>(pl);
                  if (ix < 0 || ix >= static_cast<ptrdiff_t>(w)) continue;
                  gwc[ky * kw + kx] += g * xc[iy * static_cast<ptrdiff_t>(w) + ix];
                  gxc[iy * static_cast<ptrdiff_t>(w) + ix] += g * wc[ky * kw + kx];
                }
              }
            }
          }
        }
      }
    }
    return grad_in;
  }

  std::vector<Param*> params() override { return {&w_, &b_}; }

 private:
  struct ConvGeom {
    size_t oh = 0, ow = 0, pad_top = 0, pad_left = 0;
  };

  ConvGeom geometry(const Shape& in) const {
    const size_t h = in[1], w = in[2];
    const size_t s = spec_.stride;
    if (spec_.padding == Padding::Valid) {
      if (h < spec_.kernel_h || w < spec_.kernel_w) return {};
      return {(h - spec_.kernel_h) / s + 1, (w - spec_.kernel_w) / s + 1, 0, 0};
    }
    const size_t oh = (h + s - 1) / s;
    const size_t ow = (w + s - 1) / s;
    const size_t need_h = (oh - 1) * s + spec_.kernel_h;
    const size_t need_w = (ow - 1) * s + spec_.kernel_w;
    const size_t pad_h = need_h > h ? need_h - h : 0;
    const size_t pad_w = need_w > w ? need_w - w : 0;
    return {oh, ow, pad_h / 2, pad_w / 2};
  }

  Shape in_shape_;
  Param w_, b_;
  Tensor input_;
};

class MaxPool2dLayer final : public Layer {
 public:
  using Layer::Layer;

  Shape infer_shape(const Shape& in, const std::vector<Shape>&, size_t) const override {
    if (in.size() != 3)
      throw ConfigError("maxpool2d expects input shape [channels, h, w], got " +
                        shape_str(in));
    if (spec_.pool == 0) throw ConfigError("maxpool2d: pool must be >= 1");
    if (in[1] < spec_.pool || in[2] < spec_.pool)
      throw ConfigError("maxpool2d: pool " + std::to_string(spec_.pool) +
                        " does not fit input " + shape_str(in));
    return {in[0], in[1] / spec_.pool, in[2] / spec_.pool};
  }

  void init(const Shape& in, Rng&) override { in_shape_ = in; }

  Tensor forward(const Tensor& in) override {
    const size_t n = in.shape[0];
    const size_t c = in_shape_[0], h = in_shape_[1], w = in_shape_[2];
    const size_t p = spec_.pool;
    const size_t oh = h / p, ow = w / p;
    in_size_ = c * h * w;
    Tensor out({n, c, oh, ow});
    argmax_.assign(out.size(), 0);
    for (size_t b = 0; b < n; ++b) {
      const double* xb = in.v.data() + b * in_size_;
      for (size_t ch = 0; ch < c; ++ch) {
        const double* xc = xb + ch * h * w;
        for (size_t oy = 0; oy < oh; ++oy)
          for (size_t ox = 0; ox < ow; ++ox) {
            size_t best = (oy * p) * w + ox * p;
            double best_v = xc[best];
            for (size_t ky = 0; ky < p; ++ky)
              for (size_t kx = 0; kx < p; ++kx) {
                const size_t idx = (oy * p + ky) * w + (ox * p + kx);
                if (xc[idx] > best_v) {
                  best_v = xc[idx];
                  best = idx;
                }
              }
            const size_t out_idx = ((b * c + ch) * oh + oy) * ow + ox;
            out.v[out_idx] = best_v;
            argmax_[out_idx] = b * in_size_ + ch * h * w + best;
          }
      }
    }
    in_shape_full_ = in.shape;
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    Tensor grad_in(in_shape_full_);
    for (size_t i = 0; i < grad_out.size(); ++i) grad_in.v[argmax_[i]] += grad_out.v[i];
    return grad_in;
  }

 private:
  Shape in_shape_;
  Shape in_shape_full_;
  size_t in_size_ = 0;
  std::vector<size_t> argmax_;
};

class ReluLayer final : public Layer {
 public:
  using Layer::Layer;

  Shape infer_shape(const Shape& in, const std::vector<Shape>&, size_t) const override {
    return in;
  }

  Tensor forward(const Tensor& in) override {
    input_ = in;
    Tensor out(in.shape);
    for (size_t i = 0; i < in.size(); ++i) out.v[i] = in.v[i] > 0.0 ? in.v[i] : 0.0;
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    Tensor grad_in(input_.shape);
    for (size_t i = 0; i < grad_out.size(); ++i)
      grad_in.v[i] = input_.v[i] > 0.0 ? grad_out.v[i] : 0.0;
    return grad_in;
  }

 private:
  Tensor input_;
};

class FlattenLayer final : public Layer {
 public:
  using Layer::Layer;

  Shape infer_shape(const Shape& in, const std::vector<Shape>&, size_t) const override {
    return {shape_size(in)};
  }

  Tensor forward(const Tensor& in) override {
    in_shape_full_ = in.shape;
    Tensor out = in;
    out.shape = {in.shape[0], in.size() / in.shape[0]};
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    Tensor grad_in = grad_out;
    grad_in.shape = in_shape_full_;
    return grad_in;
  }

 private:
  Shape in_shape_full_;
};

class ResidualAddLayer final : public Layer {
 public:
  using Layer::Layer;

  Shape infer_shape(const Shape& in, const std::vector<Shape>& act_shapes,
                    size_t index) const override {
    if (spec_.skip_from < 0 || static_cast<size_t>(spec_.skip_from) > index)
      throw ConfigError("residual_add: skip_from " + std::to_string(spec_.skip_from) +
                        " does not reference an earlier activation");
    const Shape& skip = act_shapes[static_cast<size_t>(spec_.skip_from)];
    if (skip != in)
      throw ConfigError("residual_add: input shape " + shape_str(in) +
                        " does not match skip shape " + shape_str(skip));
    return in;
  }

  void set_skip(const Tensor* skip) { skip_ = skip; }

  Tensor forward(const Tensor& in) override {
    if (skip_ == nullptr || skip_->size() != in.size())
      throw ShapeError("residual_add: skip activation not wired");
    Tensor out(in.shape);
    for (size_t i = 0; i < in.size(); ++i) out.v[i] = in.v[i] + skip_->v[i];
    return out;
  }

  // Gradient w.r.t. the direct input; the skip branch is handled by the
  // model-level backward pass.
  Tensor backward(const Tensor& grad_out) override { return grad_out; }

 private:
  const Tensor* skip_ = nullptr;
};

class SoftmaxLayer final : public Layer {
 public:
  using Layer::Layer;

  Shape infer_shape(const Shape& in, const std::vector<Shape>&, size_t) const override {
    if (in.size() != 1)
      throw ConfigError("softmax expects a flat input, got shape " + shape_str(in));
    return in;
  }

  Tensor forward(const Tensor& in) override {
    const size_t n = in.shape[0];
    const size_t c = in.size() / n;
    Tensor out(in.shape);
    for (size_t i = 0; i < n; ++i) {
      const double* x = in.v.data() + i * c;
      double* y = out.v.data() + i * c;
      double mx = x[0];
      for (size_t k = 1; k < c; ++k) mx = std::max(mx, x[k]);
      double sum = 0.0;
      for (size_t k = 0; k < c; ++k) {
        y[k] = std::exp(x[k] - mx);
        sum += y[k];
      }
      for (size_t k = 0; k < c; ++k) y[k] /= sum;
    }
    output_ = out;
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    const size_t n = output_.shape[0];
    const size_t c = output_.size() / n;
    Tensor grad_in(output_.shape);
    for (size_t i = 0; i < n; ++i) {
      const double* p = output_.v.data() + i * c;
      const double* g = grad_out.v.data() + i * c;
      double dot = 0.0;
      for (size_t k = 0; k < c; ++k) dot += g[k] * p[k];
      double* gi = grad_in.v.data() + i * c;
      for (size_t k = 0; k < c; ++k) gi[k] = p[k] * (g[k] - dot);
    }
    return grad_in;
  }

 private:
  Tensor output_;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::Dense: return std::make_unique<DenseLayer>(spec);
    case LayerKind::Conv2d: return std::make_unique<Conv2dLayer>(spec);
    case LayerKind::MaxPool2d: return std::make_unique<MaxPool2dLayer>(spec);
    case LayerKind::Relu: return std::make_unique<ReluLayer>(spec);
    case LayerKind::Flatten: return std::make_unique<FlattenLayer>(spec);
    case LayerKind::ResidualAdd: return std::make_unique<ResidualAddLayer>(spec);
    case LayerKind::Softmax: return std::make_unique<SoftmaxLayer>(spec);
  }
  throw ArgumentError("make_layer: bad kind");
}

}  // namespace

nlohmann::json LayerSpec::to_json() const {
  nlohmann::json j{{"kind", kind_name(kind)}};
  switch (kind) {
    case LayerKind::Dense: j["units"] = units; break;
    case LayerKind::Conv2d:
      j["out_channels"] = out_channels;
      j["kernel_h"] = kernel_h;
      j["kernel_w"] = kernel_w;
      j["stride"] = stride;
      j["padding"] = padding == Padding::Same ? "same" : "valid";
      break;
    case LayerKind::MaxPool2d: j["pool"] = pool; break;
    case LayerKind::ResidualAdd: j["skip_from"] = skip_from; break;
    default: break;
  }
  return j;
}

LayerSpec LayerSpec::from_json(const nlohmann::json& j) {
  LayerSpec s;
  s.kind = kind_from_name(j.at("kind").get<std::string>());
  switch (s.kind) {
    case LayerKind::Dense: s.units = j.at("units").get<size_t>(); break;
    case LayerKind::Conv2d:
      s.out_channels = j.at("out_channels").get<size_t>();
      s.kernel_h = j.at("kernel_h").get<size_t>();
      s.kernel_w = j.at("kernel_w").get<size_t>();
      s.stride = j.at("stride").get<size_t>();
      s.padding = j.at("padding").get<std::string>() == "same" ? Padding::Same
                                                               : Padding::Valid;
      break;
    case LayerKind::MaxPool2d: s.pool = j.at("pool").get<size_t>(); break;
    case LayerKind::ResidualAdd: s.skip_from = j.at("skip_from").get<int>(); break;
    default: break;
  }
  return s;
}

LayerSpec dense_spec(size_t units) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.units = units;
  return s;
}

LayerSpec conv2d_spec(size_t out_channels, size_t kernel, size_t stride, Padding padding) {
  LayerSpec s;
  s.kind = LayerKind::Conv2d;
  s.out_channels = out_channels;
  s.kernel_h = kernel;
  s.kernel_w = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec maxpool2d_spec(size_t pool) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool2d;
  s.pool = pool;
  return s;
}

LayerSpec relu_spec() {
  LayerSpec s;
  s.kind = LayerKind::Relu;
  return s;
}

LayerSpec flatten_spec() {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  return s;
}

LayerSpec residual_add_spec(int skip_from) {
  LayerSpec s;
  s.kind = LayerKind::ResidualAdd;
  s.skip_from = skip_from;
  return s;
}

LayerSpec softmax_spec() {
  LayerSpec s;
  s.kind = LayerKind::Softmax;
  return s;
}

Model::Model() = default;
Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

std::vector<Param*> Model::params() const {
  std::vector<Param*> out;
  for (const auto& layer : layers)
    for (Param* p : layer->params()) out.push_back(p);
  return out;
}

Model Model::clone() const {
  Model copy = build_layers(input_shape, specs, 0);
  restore_params(copy, snapshot_params(*this));
  return copy;
}

Model build_layers(Shape input_shape, std::vector<LayerSpec> specs, uint64_t seed) {
  Model model;
  model.input_shape = std::move(input_shape);
  model.specs = std::move(specs);
  model.act_shapes.push_back(model.input_shape);

  Rng rng(seed);
  for (size_t i = 0; i < model.specs.size(); ++i) {
    auto layer = make_layer(model.specs[i]);
    const Shape& in = model.act_shapes[i];
    Shape out;
    try {
      out = layer->infer_shape(in, model.act_shapes, i);
      layer->init(in, rng);
    } catch (const Error& e) {
      throw ConfigError("layer " + std::to_string(i) + " (" +
                        kind_name(model.specs[i].kind) + "): " + e.what());
    }
    model.act_shapes.push_back(std::move(out));
    model.layers.push_back(std::move(layer));
  }
  return model;
}

std::vector<Tensor> forward(Model& model, const Tensor& batch) {
  if (batch_item_shape(batch) != model.input_shape)
    throw ShapeError("model input: batch item shape " +
                     shape_str(batch_item_shape(batch)) + " does not match " +
                     shape_str(model.input_shape));

  std::vector<Tensor> acts;
  acts.reserve(model.layers.size() + 1);
  acts.push_back(batch);
  for (size_t i = 0; i < model.layers.size(); ++i) {
    if (model.specs[i].kind == LayerKind::ResidualAdd)
      static_cast<ResidualAddLayer*>(model.layers[i].get())
          ->set_skip(&acts[static_cast<size_t>(model.specs[i].skip_from)]);
    acts.push_back(model.layers[i]->forward(acts.back()));
  }
  return acts;
}

double cross_entropy(const Tensor& probabilities, std::span<const int> labels,
                     bool* clamped_out) {
  if (probabilities.shape.size() != 2)
    throw ShapeError("cross_entropy: probabilities must be [batch, classes]");
  const size_t n = probabilities.shape[0];
  const size_t c = probabilities.shape[1];
  if (labels.size() != n)
    throw ArgumentError("cross_entropy: " + std::to_string(labels.size()) +
                        " labels for a batch of " + std::to_string(n));

  bool clamped = false;
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double* row = probabilities.v.data() + i * c;
    double sum = 0.0;
    for (size_t k = 0; k < c; ++k) sum += row[k];
    if (std::abs(sum - 1.0) > 1e-6)
      throw ArgumentError("cross_entropy: row " + std::to_string(i) +
                          " is not a distribution (sum " + std::to_string(sum) + ")");
    const int label = labels[i];
    if (label < 0 || static_cast<size_t>(label) >= c)
      throw ArgumentError("cross_entropy: label " + std::to_string(label) +
                          " out of range for " + std::to_string(c) + " classes");
    double p = row[label];
    if (p < 1e-12) {
      p = 1e-12;
      clamped = true;
    }
    loss -= std::log(p);
  }
  if (clamped_out != nullptr) *clamped_out = clamped;
  return loss / static_cast<double>(n);
}

double mse_loss(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape != target.shape)
    throw ShapeError("mse_loss: prediction shape " + shape_str(prediction.shape) +
                     " vs target " + shape_str(target.shape));
  double acc = 0.0;
  for (size_t i = 0; i < prediction.size(); ++i) {
    const double d = prediction.v[i] - target.v[i];
    acc += d * d;
  }
  return acc / static_cast<double>(prediction.size());
}

namespace {

void zero_grads(Model& model) {
  for (Param* p : model.params()) std::fill(p->grad.v.begin(), p->grad.v.end(), 0.0);
}

// Shared reverse pass: walks layers from the back, accumulating gradients
// per activation index so residual skips receive their share.
void backprop(Model& model, const std::vector<Tensor>& activations, Tensor output_grad) {
  zero_grads(model);
  std::vector<Tensor> grads(activations.size());
  grads.back() = std::move(output_grad);
  for (size_t i = model.layers.size(); i-- > 0;) {
    Tensor gin = model.layers[i]->backward(grads[i + 1]);
    if (grads[i].size() == 0)
      grads[i] = std::move(gin);
    else
      for (size_t k = 0; k < gin.size(); ++k) grads[i].v[k] += gin.v[k];
    if (model.specs[i].kind == LayerKind::ResidualAdd) {
      const auto from = static_cast<size_t>(model.specs[i].skip_from);
      Tensor& sink = grads[from];
      const Tensor& src = grads[i + 1];
      if (sink.size() == 0)
        sink = src;
      else
        for (size_t k = 0; k < src.size(); ++k) sink.v[k] += src.v[k];
    }
  }
}

}  // namespace

void backward(Model& model, const std::vector<Tensor>& activations,
              std::span<const int> labels) {
  const Tensor& probs = activations.back();
  const size_t n = probs.shape[0];
  const size_t c = probs.shape[1];
  if (labels.size() != n)
    throw ArgumentError("backward: label count does not match the batch");

  Tensor grad(probs.shape);
  for (size_t i = 0; i < n; ++i) {
    const double p = std::max(probs.v[i * c + static_cast<size_t>(labels[i])], 1e-12);
    grad.v[i * c + static_cast<size_t>(labels[i])] = -1.0 / (static_cast<double>(n) * p);
  }
  backprop(model, activations, std::move(grad));
}

void backward_mse(Model& model, const std::vector<Tensor>& activations,
                  const Tensor& target) {
  const Tensor& pred = activations.back();
  if (pred.shape != target.shape)
    throw ShapeError("backward_mse: prediction shape " + shape_str(pred.shape) +
                     " vs target " + shape_str(target.shape));
  Tensor grad(pred.shape);
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (size_t i = 0; i < pred.size(); ++i)
    grad.v[i] = scale * (pred.v[i] - target.v[i]);
  backprop(model, activations, std::move(grad));
}

void sgd_step(std::span<Param* const> parameters, double learning_rate) {
  for (Param* p : parameters)
    for (double g : p->grad.v)
      if (!std::isfinite(g))
        throw DivergenceError("sgd_step: non-finite gradient");
  for (Param* p : parameters)
    for (size_t i = 0; i < p->value.size(); ++i)
      p->value.v[i] -= learning_rate * p->grad.v[i];
}

void sgd_step(Model& model, double learning_rate) {
  const auto params = model.params();
  sgd_step(std::span<Param* const>(params.data(), params.size()), learning_rate);
}

double grad_check(Model& model, const Tensor& batch, std::span<const int> labels,
                  double epsilon) {
  if (!(epsilon > 0.0)) throw ArgumentError("grad_check: epsilon must be positive");
  if (count_params(model) > 10000)
    throw ArgumentError("grad_check: too many parameters to enumerate");

  auto loss_at = [&]() {
    auto acts = forward(model, batch);
    return cross_entropy(acts.back(), labels);
  };

  backward(model, forward(model, batch), labels);
  std::vector<std::vector<double>> analytic;
  for (Param* p : model.params()) analytic.push_back(p->grad.v);

  double max_rel = 0.0;
  size_t pi = 0;
  for (Param* p : model.params()) {
    for (size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.v[i];
      p->value.v[i] = saved + epsilon;
      const double up = loss_at();
      p->value.v[i] = saved - epsilon;
      const double down = loss_at();
      p->value.v[i] = saved;
      const double fd = (up - down) / (2.0 * epsilon);
      const double bp = analytic[pi][i];
      const double rel =
          std::abs(bp - fd) / std::max({std::abs(bp), std::abs(fd), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
    ++pi;
  }
  return max_rel;
}

size_t count_params(const Model& model) {
  size_t n = 0;
  for (Param* p : model.params()) n += p->value.size();
  return n;
}

std::vector<double> snapshot_params(const Model& model) {
  std::vector<double> out;
  for (Param* p : model.params()) out.insert(out.end(), p->value.v.begin(), p->value.v.end());
  return out;
}

void restore_params(Model& model, const std::vector<double>& snapshot) {
  size_t pos = 0;
  for (Param* p : model.params()) {
    if (pos + p->value.size() > snapshot.size())
      throw ArgumentError("restore_params: snapshot too small");
    std::copy_n(snapshot.begin() + static_cast<std::ptrdiff_t>(pos), p->value.size(),
                p->value.v.begin());
    pos += p->value.size();
  }
  if (pos != snapshot.size())
    throw ArgumentError("restore_params: snapshot size mismatch");
}

std::vector<int> argmax_rows(const Tensor& t) {
  if (t.shape.size() != 2) throw ShapeError("argmax_rows: expected [batch, classes]");
  const size_t n = t.shape[0];
  const size_t c = t.shape[1];
  std::vector<int> out(n, 0);
  for (size_t i = 0; i < n; ++i) {
    const double* row = t.v.data() + i * c;
    int best = 0;
    for (size_t k = 1; k < c; ++k)
      if (row[k] > row[best]) best = static_cast<int>(k);
    out[i] = best;
  }
  return out;
}

}  // namespace asc
