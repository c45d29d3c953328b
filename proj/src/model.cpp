#include "greg/model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace greg {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

MlpModel::MlpModel(std::vector<DenseLayer> hidden, Tensor head_weight, Tensor head_bias)
    : hidden_(std::move(hidden)), head_weight_(std::move(head_weight)), head_bias_(std::move(head_bias)) {
  if (head_weight_.rank() != 2 || head_bias_.rank() != 1) {
    throw ShapeError("head weight must be rank 2 and head bias rank 1");
  }
  if (head_weight_.shape()[0] < 2) throw InvalidArgument("a classifier needs at least 2 classes");
  if (head_bias_.shape()[0] != head_weight_.shape()[0]) {
    throw ShapeError("head bias length " + std::to_string(head_bias_.shape()[0]) +
                     " does not match class count " + std::to_string(head_weight_.shape()[0]));
  }
  std::size_t width = hidden_.empty() ? head_weight_.shape()[1] : 0;
  for (std::size_t i = 0; i < hidden_.size(); ++i) {
    const DenseLayer& layer = hidden_[i];
    if (layer.weight.rank() != 2 || layer.bias.rank() != 1) {
      throw ShapeError("layer " + std::to_string(i) + ": weight must be rank 2, bias rank 1");
    }
    if (layer.bias.shape()[0] != layer.weight.shape()[0]) {
      throw ShapeError("layer " + std::to_string(i) + ": bias length does not match output width");
    }
    if (i == 0) {
      input_dim_ = layer.weight.shape()[1];
    } else if (layer.weight.shape()[1] != width) {
      throw ShapeError("layer " + std::to_string(i) + " expects input width " +
                       std::to_string(layer.weight.shape()[1]) + " but previous layer emits " +
                       std::to_string(width));
    }
    width = layer.weight.shape()[0];
  }
  if (hidden_.empty()) input_dim_ = width;
  if (head_weight_.shape()[1] != width) {
    throw ShapeError("head expects " + std::to_string(head_weight_.shape()[1]) +
                     " features, extractor emits " + std::to_string(width));
  }
  if (input_dim_ < 1) throw InvalidArgument("input dimension must be at least 1");
}

std::size_t MlpModel::feature_dim() const { return head_weight_.shape()[1]; }

std::vector<Tensor*> MlpModel::parameters() {
  std::vector<Tensor*> out;
  for (DenseLayer& layer : hidden_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  out.push_back(&head_weight_);
  out.push_back(&head_bias_);
  return out;
}

std::vector<const Tensor*> MlpModel::parameters() const {
  std::vector<const Tensor*> out;
  for (const DenseLayer& layer : hidden_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  out.push_back(&head_weight_);
  out.push_back(&head_bias_);
  return out;
}

bool operator==(const MlpModel& a, const MlpModel& b) {
  if (a.hidden_.size() != b.hidden_.size()) return false;
  for (std::size_t i = 0; i < a.hidden_.size(); ++i) {
    const auto& la = a.hidden_[i];
    const auto& lb = b.hidden_[i];
    if (la.activation.kind != lb.activation.kind) return false;
    if (la.activation.kind == ActivationKind::LeakyRelu && la.activation.slope != lb.activation.slope) {
      return false;
    }
  }
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!(*pa[i] == *pb[i])) return false;
  }
  return true;
}

double init_bound(std::size_t fan_in) {
  if (fan_in == 0) throw InvalidArgument("fan_in must be positive");
  return std::sqrt(6.0 / static_cast<double>(fan_in));
}

namespace {

Tensor uniform_weight(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor w({rows, cols});
  const double bound = init_bound(cols);
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  return w;
}

Matrix apply_activation(const Matrix& z, const Activation& act) {
  if (act.kind == ActivationKind::Relu) return z.cwiseMax(0.0);
  return (z.array() >= 0.0).select(z, act.slope * z);
}

}  // namespace

MlpModel init_model(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.hidden.empty()) throw InvalidArgument("layer spec must contain at least one hidden layer");
  if (spec.input_dim == 0) throw InvalidArgument("input dimension must be at least 1");
  for (std::size_t width : spec.hidden) {
    if (width == 0) throw InvalidArgument("hidden layer widths must be positive");
  }
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  std::size_t in = spec.input_dim;
  for (std::size_t width : spec.hidden) {
    layers.push_back(DenseLayer{uniform_weight(width, in, rng), Tensor({width}), spec.activation});
    in = width;
  }
  Tensor head = uniform_weight(spec.classes, in, rng);
  return MlpModel(std::move(layers), std::move(head), Tensor({spec.classes}));
}

BoundModel bind(const MlpModel& model, ad::Graph& graph, bool trainable) {
  BoundModel bound{&model, {}};
  for (const Tensor* p : model.parameters()) {
    bound.params.push_back(trainable ? ad::variable(graph, p->matrix()) : ad::constant(graph, p->matrix()));
  }
  return bound;
}

namespace {

ad::Var affine(ad::Var x, ad::Var weight, ad::Var bias) {
  return ad::matmul(x, ad::transpose(weight)) + ad::broadcast_rows(bias, x.rows());
}

void check_input(const MlpModel& model, Eigen::Index cols) {
  if (static_cast<std::size_t>(cols) != model.input_dim()) {
    throw ShapeError("input width " + std::to_string(cols) + " does not match model input dim " +
                     std::to_string(model.input_dim()));
  }
}

}  // namespace

ad::Var features(const BoundModel& bound, ad::Var x) {
  const MlpModel& model = *bound.model;
  check_input(model, x.cols());
  ad::Var h = x;
  const auto& layers = model.hidden_layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const ad::Var z = affine(h, bound.params[2 * i], bound.params[2 * i + 1]);
    h = layers[i].activation.kind == ActivationKind::Relu ? ad::relu(z)
                                                          : ad::leaky_relu(z, layers[i].activation.slope);
  }
  return h;
}

ad::Var forward(const BoundModel& bound, ad::Var x) {
  const std::size_t n = bound.params.size();
  return affine(features(bound, x), bound.params[n - 2], bound.params[n - 1]);
}

ad::Var features(const MlpModel& model, const Matrix& x, ad::Graph& graph) {
  return features(bind(model, graph, false), ad::constant(graph, x));
}

ad::Var forward(const MlpModel& model, const Matrix& x, ad::Graph& graph) {
  return forward(bind(model, graph, false), ad::constant(graph, x));
}

Matrix predict_features(const MlpModel& model, const Matrix& x) {
  check_input(model, x.cols());
  Matrix h = x;
  for (const DenseLayer& layer : model.hidden_layers()) {
    Matrix z = h * layer.weight.matrix().transpose();
    z.rowwise() += layer.bias.matrix().row(0);
    h = apply_activation(z, layer.activation);
  }
  return h;
}

Matrix predict_logits(const MlpModel& model, const Matrix& x) {
  Matrix logits = predict_features(model, x) * model.head_weight().matrix().transpose();
  logits.rowwise() += model.head_bias().matrix().row(0);
  return logits;
}

namespace {

std::vector<Vector> pre_activations(const MlpModel& model, const Vector& x) {
  check_input(model, x.size());
  std::vector<Vector> out;
  Vector h = x;
  for (const DenseLayer& layer : model.hidden_layers()) {
    Vector z = layer.weight.matrix() * h + layer.bias.matrix().row(0).transpose();
    out.push_back(z);
    h = apply_activation(z.transpose(), layer.activation).transpose();
  }
  return out;
}

}  // namespace

ActivationPattern activation_pattern(const MlpModel& model, const Vector& x) {
  ActivationPattern pattern;
  for (const Vector& z : pre_activations(model, x)) {
    for (Eigen::Index i = 0; i < z.size(); ++i) pattern.push_back(z(i) >= 0.0);
  }
  return pattern;
}

double boundary_margin(const MlpModel& model, const Vector& x) {
  double margin = std::numeric_limits<double>::infinity();
  for (const Vector& z : pre_activations(model, x)) margin = std::min(margin, z.cwiseAbs().minCoeff());
  return margin;
}

LocalAffine local_affine(const MlpModel& model, const ActivationPattern& pattern) {
  const std::size_t d = model.input_dim();
  Matrix A = Matrix::Identity(d, d);
  Vector c = Vector::Zero(d);
  std::size_t offset = 0;
  for (const DenseLayer& layer : model.hidden_layers()) {
    const Matrix& w = layer.weight.matrix();
    Matrix nextA = w * A;
    Vector nextc = w * c + layer.bias.matrix().row(0).transpose();
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      if (offset + i >= pattern.size()) throw ShapeError("activation pattern too short for model");
      const double gain = pattern[offset + i] ? 1.0 : layer.activation.negative_slope();
      nextA.row(i) *= gain;
      nextc(i) *= gain;
    }
    offset += static_cast<std::size_t>(w.rows());
    A = std::move(nextA);
    c = std::move(nextc);
  }
  const Matrix& head = model.head_weight().matrix();
  return LocalAffine{head * A, head * c + model.head_bias().matrix().row(0).transpose()};
}

double inscribed_radius(const MlpModel& model, const Vector& x) {
  const ActivationPattern pattern = activation_pattern(model, x);
  const std::size_t d = model.input_dim();
  Matrix A = Matrix::Identity(d, d);
  Vector c = Vector::Zero(d);
  std::size_t offset = 0;
  double radius = std::numeric_limits<double>::infinity();
  for (const DenseLayer& layer : model.hidden_layers()) {
    const Matrix& w = layer.weight.matrix();
    Matrix nextA = w * A;
    Vector nextc = w * c + layer.bias.matrix().row(0).transpose();
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      // Hyperplane nextA.row(i) x + nextc(i) = 0 bounds the region.
      const double normal = nextA.row(i).norm();
      if (normal > 0.0) radius = std::min(radius, std::abs(nextA.row(i).dot(x) + nextc(i)) / normal);
      const double gain = pattern[offset + static_cast<std::size_t>(i)] ? 1.0 : layer.activation.negative_slope();
      nextA.row(i) *= gain;
      nextc(i) *= gain;
    }
    offset += static_cast<std::size_t>(w.rows());
    A = std::move(nextA);
    c = std::move(nextc);
  }
  return radius;
}

double probe_linear_region(const MlpModel& model, const Vector& x, Rng& rng, double initial_radius,
                           std::size_t probes) {
  const ActivationPattern reference = activation_pattern(model, x);
  auto agrees = [&](double radius) {
    for (std::size_t i = 0; i < probes; ++i) {
      if (activation_pattern(model, uniform_in_ball(rng, x, radius)) != reference) return false;
    }
    return true;
  };
  double good = initial_radius;
  int halvings = 0;
  while (!agrees(good)) {
    if (++halvings > 60) return 0.0;
    good *= 0.5;
  }
  if (halvings == 0) return std::min(good, inscribed_radius(model, x));
  double bad = 2.0 * good;
  for (int step = 0; step < 20; ++step) {
    const double mid = 0.5 * (good + bad);
    if (agrees(mid)) {
      good = mid;
    } else {
      bad = mid;
    }
  }
  // Random probes can miss thin slivers of a neighbouring region.
  return std::min(good, inscribed_radius(model, x));
}

// ---------------------------------------------------------------------------
// Checkpoint: "GREGCKPT", u32 version, u32 tensor count, then per tensor
// u32 rank, u32 extents[rank], f64 values (all little-endian). Tensors are the
// parameters in declaration order followed by one L x 2 activation table
// (kind, slope) per hidden layer.

namespace {

constexpr char kMagic[8] = {'G', 'R', 'E', 'G', 'C', 'K', 'P', 'T'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

void put_f64(std::ostream& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw FormatError("checkpoint truncated");
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

double get_f64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw FormatError("checkpoint truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

void put_tensor(std::ostream& out, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t extent : t.shape()) put_u32(out, static_cast<std::uint32_t>(extent));
  for (double v : t.values()) put_f64(out, v);
}

Tensor get_tensor(std::istream& in) {
  const std::uint32_t rank = get_u32(in);
  if (rank > 8) throw FormatError("checkpoint tensor rank " + std::to_string(rank) + " is implausible");
  Shape shape(rank);
  for (auto& extent : shape) extent = get_u32(in);
  Tensor t(shape);
  for (double& v : t.values()) v = get_f64(in);
  return t;
}

}  // namespace

void save_checkpoint(const MlpModel& model, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, kCheckpointVersion);
  const auto params = model.parameters();
  put_u32(out, static_cast<std::uint32_t>(params.size() + 1));
  for (const Tensor* p : params) put_tensor(out, *p);
  const auto& layers = model.hidden_layers();
  Tensor activations({layers.size(), 2});
  for (std::size_t i = 0; i < layers.size(); ++i) {
    activations.matrix()(i, 0) = layers[i].activation.kind == ActivationKind::Relu ? 0.0 : 1.0;
    activations.matrix()(i, 1) = layers[i].activation.slope;
  }
  put_tensor(out, activations);
  if (!out) throw IoError("failed writing checkpoint");
}

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save_checkpoint(model, out);
}

MlpModel load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kMagic)) {
    throw FormatError("not a checkpoint: bad magic");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = get_u32(in);
  if (count < 3 || count % 2 == 0) {
    throw FormatError("checkpoint tensor count " + std::to_string(count) + " is not 2L + 3");
  }
  std::vector<Tensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) tensors.push_back(get_tensor(in));
  const std::size_t layer_count = (count - 3) / 2;
  const Tensor& table = tensors.back();
  if (table.rank() != 2 || table.shape()[0] != layer_count || table.shape()[1] != 2) {
    throw FormatError("checkpoint activation table has shape " + shape_string(table.shape()));
  }
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i < layer_count; ++i) {
    Activation act;
    act.kind = table.matrix()(i, 0) == 0.0 ? ActivationKind::Relu : ActivationKind::LeakyRelu;
    act.slope = table.matrix()(i, 1);
    layers.push_back(DenseLayer{std::move(tensors[2 * i]), std::move(tensors[2 * i + 1]), act});
  }
  return MlpModel(std::move(layers), std::move(tensors[2 * layer_count]),
                  std::move(tensors[2 * layer_count + 1]));
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace greg
