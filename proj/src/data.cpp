#include "greg/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>

#include "greg/rng.hpp"

namespace greg {

std::string_view role_name(SetRole role) {
  switch (role) {
    case SetRole::IdTrain: return "id_train";
    case SetRole::IdTest: return "id_test";
    case SetRole::Aux: return "aux";
    case SetRole::OodTest: return "ood_test";
  }
  return "unknown";
}

LabeledSet gen_gaussian_mixture(std::size_t classes, std::size_t n_per_class, const Matrix& means,
                                double sigma, std::uint64_t seed, SetRole role) {
  if (classes < 2) throw InvalidArgument("mixture needs at least 2 classes");
  if (static_cast<std::size_t>(means.rows()) != classes) {
    throw InvalidArgument("mixture: " + std::to_string(means.rows()) + " means for " +
                          std::to_string(classes) + " classes");
  }
  if (!(sigma > 0.0)) throw InvalidArgument("mixture: sigma must be positive");
  Rng rng(seed);
  LabeledSet set;
  set.role = role;
  set.inputs.resize(static_cast<Eigen::Index>(classes * n_per_class), means.cols());
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
      for (Eigen::Index j = 0; j < means.cols(); ++j) {
        set.inputs(row, j) = means(static_cast<Eigen::Index>(c), j) + sigma * rng.normal();
      }
      if (set.labeled()) set.labels.push_back(static_cast<int>(c));
    }
  }
  return set;
}

LabeledSet gen_ring(std::size_t n, double r_min, double r_max, std::uint64_t seed, SetRole role) {
  if (r_min < 0.0 || r_max < r_min) {
    throw InvalidArgument("ring: need 0 <= r_min <= r_max, got [" + std::to_string(r_min) + ", " +
                          std::to_string(r_max) + "]");
  }
  Rng rng(seed);
  LabeledSet set;
  set.role = role;
  set.inputs.resize(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < set.inputs.rows(); ++i) {
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double radius = rng.uniform(r_min, r_max);
    set.inputs(i, 0) = radius * std::cos(angle);
    set.inputs(i, 1) = radius * std::sin(angle);
  }
  if (set.labeled()) set.labels.assign(n, -1);
  return set;
}

namespace {

std::vector<std::size_t> part_sizes(std::size_t n, std::span<const double> fractions) {
  std::vector<std::size_t> sizes;
  double cumulative = 0.0;
  std::size_t taken = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    cumulative += fractions[i];
    const std::size_t end = i + 1 == fractions.size()
                                ? n
                                : std::min(n, static_cast<std::size_t>(std::llround(cumulative * n)));
    sizes.push_back(end - std::min(end, taken));
    taken = std::max(taken, end);
  }
  return sizes;
}

}  // namespace

std::vector<LabeledSet> split(const LabeledSet& set, std::span<const double> fractions, std::uint64_t seed) {
  if (fractions.empty()) throw InvalidArgument("split: no fractions given");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw InvalidArgument("split: fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument("split: fractions sum to " + std::to_string(total) + ", not 1");
  }

  // Groups of row indices partitioned independently: one per class, or one.
  std::vector<std::vector<std::size_t>> groups;
  if (set.labeled() && !set.labels.empty()) {
    int max_label = 0;
    for (int l : set.labels) max_label = std::max(max_label, l);
    groups.resize(static_cast<std::size_t>(max_label) + 1);
    for (std::size_t i = 0; i < set.size(); ++i) groups[static_cast<std::size_t>(set.labels[i])].push_back(i);
  } else {
    groups.emplace_back(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) groups[0][i] = i;
  }

  Rng rng(seed);
  std::vector<std::vector<std::size_t>> parts(fractions.size());
  for (auto& group : groups) {
    rng.shuffle(group);
    const auto sizes = part_sizes(group.size(), fractions);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < sizes.size(); ++p) {
      parts[p].insert(parts[p].end(), group.begin() + offset, group.begin() + offset + sizes[p]);
      offset += sizes[p];
    }
  }

  std::vector<LabeledSet> out;
  for (const auto& rows : parts) {
    LabeledSet part;
    part.role = set.role;
    part.inputs.resize(static_cast<Eigen::Index>(rows.size()), set.inputs.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      part.inputs.row(static_cast<Eigen::Index>(i)) = set.inputs.row(static_cast<Eigen::Index>(rows[i]));
      if (!set.labels.empty()) part.labels.push_back(set.labels[rows[i]]);
    }
    out.push_back(std::move(part));
  }
  return out;
}

Scenario make_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  const LabeledSet all =
      gen_gaussian_mixture(cfg.classes, cfg.n_per_class, cfg.means, cfg.sigma, Rng::derive(seed, 0));
  auto parts = split(all, cfg.split, Rng::derive(seed, 1));
  if (parts.size() != 2) throw InvalidArgument("scenario split needs exactly two fractions (train, test)");
  Scenario s;
  s.id_train = std::move(parts[0]);
  s.id_train.role = SetRole::IdTrain;
  s.id_test = std::move(parts[1]);
  s.id_test.role = SetRole::IdTest;
  s.aux = gen_ring(cfg.n_aux, cfg.aux_r_min, cfg.aux_r_max, Rng::derive(seed, 2), SetRole::Aux);
  s.ood_test = gen_ring(cfg.n_ood, cfg.ood_r_min, cfg.ood_r_max, Rng::derive(seed, 3), SetRole::OodTest);
  return s;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string format_double(double v) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, result.ptr);
}

double parse_double(std::string_view text, const std::filesystem::path& path, std::size_t line) {
  double v = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), v);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    throw FormatError(path.string() + ":" + std::to_string(line) + ": bad number '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace

void write_csv(const LabeledSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (Eigen::Index j = 0; j < set.inputs.cols(); ++j) out << "x" << j << ",";
  out << "label\n";
  for (Eigen::Index i = 0; i < set.inputs.rows(); ++i) {
    for (Eigen::Index j = 0; j < set.inputs.cols(); ++j) out << format_double(set.inputs(i, j)) << ",";
    out << (set.labels.empty() ? -1 : set.labels[static_cast<std::size_t>(i)]) << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

LabeledSet read_csv(const std::filesystem::path& path, SetRole role) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  const std::size_t width = split_commas(line).size();
  if (width < 2) throw FormatError(path.string() + ": header needs at least one input column and label");
  std::vector<double> values;
  LabeledSet set;
  set.role = role;
  std::size_t line_no = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != width) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(width) + " fields, got " + std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j + 1 < width; ++j) values.push_back(parse_double(fields[j], path, line_no));
    const int label = static_cast<int>(parse_double(fields.back(), path, line_no));
    if (set.labeled()) {
      if (label < 0) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": labeled set row without label");
      }
      set.labels.push_back(label);
    }
    ++rows;
  }
  set.inputs = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(rows),
                                  static_cast<Eigen::Index>(width - 1));
  return set;
}

// ---------------------------------------------------------------------------
// IDX

Tensor parse_idx(std::span<const unsigned char> bytes) {
  if (bytes.size() < 4 || bytes[0] != 0 || bytes[1] != 0 || bytes[2] != 0x08) {
    throw IdxError(IdxError::Kind::BadMagic, "IDX: bad magic (expected 00 00 08 <rank>)");
  }
  const std::size_t rank = bytes[3];
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header) {
    throw IdxError(IdxError::Kind::Truncated,
                   "IDX: truncated header, expected " + std::to_string(header) + " bytes, got " +
                       std::to_string(bytes.size()),
                   header, bytes.size());
  }
  Shape shape(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const auto* p = bytes.data() + 4 + 4 * i;
    shape[i] = (static_cast<std::size_t>(p[0]) << 24) | (static_cast<std::size_t>(p[1]) << 16) |
               (static_cast<std::size_t>(p[2]) << 8) | static_cast<std::size_t>(p[3]);
  }
  const std::size_t payload = shape_product(shape);
  const std::size_t actual = bytes.size() - header;
  if (actual < payload) {
    throw IdxError(IdxError::Kind::Truncated,
                   "IDX: truncated payload, expected " + std::to_string(payload) + " bytes, got " +
                       std::to_string(actual),
                   payload, actual);
  }
  Tensor t(shape);
  auto values = t.values();
  for (std::size_t i = 0; i < payload; ++i) values[i] = static_cast<double>(bytes[header + i]) / 255.0;
  return t;
}

Tensor load_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

std::vector<unsigned char> encode_idx(const Tensor& tensor) {
  if (tensor.rank() > 255) throw InvalidArgument("IDX: rank too large");
  std::vector<unsigned char> bytes = {0, 0, 0x08, static_cast<unsigned char>(tensor.rank())};
  for (std::size_t extent : tensor.shape()) {
    const auto e = static_cast<std::uint32_t>(extent);
    bytes.push_back(static_cast<unsigned char>(e >> 24));
    bytes.push_back(static_cast<unsigned char>((e >> 16) & 0xFF));
    bytes.push_back(static_cast<unsigned char>((e >> 8) & 0xFF));
    bytes.push_back(static_cast<unsigned char>(e & 0xFF));
  }
  for (double v : tensor.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("IDX: value " + std::to_string(v) + " outside [0, 1]");
    bytes.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  return bytes;
}

void write_idx(const Tensor& tensor, const std::filesystem::path& path) {
  const auto bytes = encode_idx(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace greg
