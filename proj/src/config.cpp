#include "greg/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace greg {

namespace {

enum class Kind { Count, PositiveCount, Real, NonNegative, Positive, Text, Choice, Counts, Reals, Fractions, Matrix };

struct KeySpec {
  std::string_view section;
  std::string_view key;
  Kind kind;
  std::string_view fallback;
  std::vector<std::string_view> choices = {};
};

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> keys = {
      {"run", "seed", Kind::Count, "0"},

      {"data", "dir", Kind::Text, ""},
      {"data", "classes", Kind::PositiveCount, "4"},
      {"data", "n_per_class", Kind::PositiveCount, "500"},
      {"data", "means", Kind::Matrix, "2 2; -2 2; -2 -2; 2 -2"},
      {"data", "sigma", Kind::Positive, "0.35"},
      {"data", "split", Kind::Fractions, "0.8, 0.2"},
      {"data", "n_aux", Kind::PositiveCount, "4000"},
      {"data", "aux_r_min", Kind::NonNegative, "4.5"},
      {"data", "aux_r_max", Kind::NonNegative, "7.5"},
      {"data", "n_ood", Kind::PositiveCount, "1000"},
      {"data", "ood_r_min", Kind::NonNegative, "5"},
      {"data", "ood_r_max", Kind::NonNegative, "7"},

      {"model", "hidden", Kind::Counts, "64, 64"},
      {"model", "activation", Kind::Choice, "relu", {"relu", "leaky_relu"}},
      {"model", "leaky_slope", Kind::NonNegative, "0.01"},
      {"model", "checkpoint", Kind::Text, ""},

      {"train", "mode", Kind::Choice, "greg", {"ce", "energy", "greg", "greg_plus", "energy_cluster"}},
      {"train", "epochs", Kind::PositiveCount, "50"},
      {"train", "id_batch_size", Kind::PositiveCount, "64"},
      {"train", "aux_pool_multiple", Kind::PositiveCount, "8"},
      {"train", "lr_max", Kind::NonNegative, "0.01"},
      {"train", "lr_min", Kind::NonNegative, "0.001"},
      {"train", "momentum", Kind::NonNegative, "0.9"},
      {"train", "weight_decay", Kind::NonNegative, "0.0001"},

      {"loss", "lambda_s", Kind::NonNegative, "0.1"},
      {"loss", "lambda_grad", Kind::NonNegative, "1"},
      {"loss", "m_in", Kind::Real, "-25"},
      {"loss", "m_aux", Kind::Real, "-7"},
      {"loss", "grad_norm_eps", Kind::Positive, "1e-12"},

      {"sampler", "clusters", Kind::Count, "0"},
      {"sampler", "kmeans_iters", Kind::PositiveCount, "20"},
      {"sampler", "kmeans_restarts", Kind::PositiveCount, "1"},

      {"eval", "score", Kind::Choice, "energy", {"energy", "msp"}},
      {"eval", "bins", Kind::PositiveCount, "50"},
      {"eval", "raster", Kind::PositiveCount, "80"},

      {"certify", "eps_cap", Kind::NonNegative, "0.5"},
      {"certify", "lipschitz_samples", Kind::Count, "256"},
      {"certify", "inflation", Kind::Positive, "1.05"},
      {"certify", "probes", Kind::Count, "1000"},
      {"certify", "max_samples", Kind::Count, "0"},
      {"certify", "radii", Kind::Reals, "0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5"},

      {"ablate", "k_list", Kind::Counts, "16, 32, 64"},
  };
  return keys;
}

std::string full_key(std::string_view section, std::string_view key) {
  std::string out(section);
  out += '.';
  out += key;
  return out;
}

const KeySpec* find_key(std::string_view section, std::string_view key) {
  for (const auto& k : schema()) {
    if (k.section == section && k.key == key) return &k;
  }
  return nullptr;
}

bool known_section(std::string_view section) {
  for (const auto& k : schema()) {
    if (k.section == section) return true;
  }
  return false;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_real(std::string_view text, const std::string& where, int line) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto res = std::from_chars(text.data(), end, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != end) {
    throw ConfigError(where + ": '" + std::string(text) + "' is not a number", line);
  }
  if (!std::isfinite(v)) throw ConfigError(where + ": value must be finite", line);
  return v;
}

std::uint64_t parse_count(std::string_view text, const std::string& where, int line) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != end) {
    throw ConfigError(where + ": '" + std::string(text) + "' is not a non-negative integer", line);
  }
  return v;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

std::string canonical(const KeySpec& spec, std::string_view value, int line) {
  const std::string where = full_key(spec.section, spec.key);
  value = trim(value);
  switch (spec.kind) {
    case Kind::Text:
      return std::string(value);
    case Kind::Choice:
      for (auto c : spec.choices) {
        if (c == value) return std::string(value);
      }
      {
        std::vector<std::string> names(spec.choices.begin(), spec.choices.end());
        throw ConfigError(where + ": '" + std::string(value) + "' is not one of " + join(names, ", "), line);
      }
    case Kind::Count:
    case Kind::PositiveCount: {
      const auto v = parse_count(value, where, line);
      if (spec.kind == Kind::PositiveCount && v == 0) throw ConfigError(where + ": must be at least 1", line);
      return std::to_string(v);
    }
    case Kind::Real:
    case Kind::NonNegative:
    case Kind::Positive: {
      const double v = parse_real(value, where, line);
      if (spec.kind == Kind::NonNegative && v < 0.0) throw ConfigError(where + ": must be >= 0", line);
      if (spec.kind == Kind::Positive && !(v > 0.0)) throw ConfigError(where + ": must be > 0", line);
      return format_real(v);
    }
    case Kind::Counts: {
      std::vector<std::string> parts;
      for (auto p : split_on(value, ',')) {
        const auto v = parse_count(p, where, line);
        if (v == 0) throw ConfigError(where + ": entries must be at least 1", line);
        parts.push_back(std::to_string(v));
      }
      return join(parts, ", ");
    }
    case Kind::Reals:
    case Kind::Fractions: {
      std::vector<std::string> parts;
      double sum = 0.0;
      for (auto p : split_on(value, ',')) {
        const double v = parse_real(p, where, line);
        if (v < 0.0) throw ConfigError(where + ": entries must be >= 0", line);
        sum += v;
        parts.push_back(format_real(v));
      }
      if (spec.kind == Kind::Fractions) {
        for (const auto& p : parts) {
          if (p == "0") throw ConfigError(where + ": fractions must be positive", line);
        }
        if (std::abs(sum - 1.0) > 1e-9) {
          throw ConfigError(where + ": fractions sum to " + format_real(sum) + ", expected 1", line);
        }
      }
      return join(parts, ", ");
    }
    case Kind::Matrix: {
      std::vector<std::string> rows;
      std::size_t width = 0;
      for (auto row : split_on(value, ';')) {
        std::vector<std::string> cells;
        std::istringstream in{std::string(row)};
        std::string cell;
        while (in >> cell) cells.push_back(format_real(parse_real(cell, where, line)));
        if (cells.empty()) throw ConfigError(where + ": empty matrix row", line);
        if (width != 0 && cells.size() != width) throw ConfigError(where + ": ragged matrix rows", line);
        width = cells.size();
        rows.push_back(join(cells, " "));
      }
      return join(rows, "; ");
    }
  }
  return std::string(value);
}

const KeySpec& require_key(std::string_view section, std::string_view key) {
  const KeySpec* spec = find_key(section, key);
  if (spec == nullptr) throw ConfigError("unknown key " + full_key(section, key));
  return *spec;
}

}  // namespace

Config Config::defaults() {
  Config cfg;
  for (const auto& k : schema()) cfg.values_[full_key(k.section, k.key)] = {canonical(k, k.fallback, 0), 0};
  return cfg;
}

Config Config::parse(std::string_view text) {
  Config cfg = defaults();
  std::map<std::string, int, std::less<>> seen;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view line =
        trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!known_section(section)) throw ConfigError("unknown section [" + section + "]", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
    const std::string key(trim(line.substr(0, eq)));
    if (section.empty()) throw ConfigError("key '" + key + "' appears before any [section]", line_no);
    if (find_key(section, key) == nullptr) throw ConfigError("unknown key " + full_key(section, key), line_no);
    const std::string name = full_key(section, key);
    if (auto it = seen.find(name); it != seen.end()) {
      throw ConfigError(name + " already set on line " + std::to_string(it->second), line_no);
    }
    seen[name] = line_no;
    cfg.set(section, key, line.substr(eq + 1), line_no);
  }

  // Cross-field checks, reported against the later of the lines involved.
  auto at = [&](std::string_view s, std::string_view k1, std::string_view k2) {
    return std::max(cfg.line_of(s, k1), cfg.line_of(s, k2));
  };
  if (!(cfg.real("loss", "m_in") < cfg.real("loss", "m_aux"))) {
    throw ConfigError("loss.m_in must be below loss.m_aux", at("loss", "m_in", "m_aux"));
  }
  if (cfg.real("train", "lr_min") > cfg.real("train", "lr_max")) {
    throw ConfigError("train.lr_min must not exceed train.lr_max", at("train", "lr_min", "lr_max"));
  }
  if (!(cfg.real("train", "momentum") < 1.0)) throw ConfigError("train.momentum must be below 1", cfg.line_of("train", "momentum"));
  if (cfg.real("data", "aux_r_min") > cfg.real("data", "aux_r_max")) {
    throw ConfigError("data.aux_r_min must not exceed data.aux_r_max", at("data", "aux_r_min", "aux_r_max"));
  }
  if (cfg.real("data", "ood_r_min") > cfg.real("data", "ood_r_max")) {
    throw ConfigError("data.ood_r_min must not exceed data.ood_r_max", at("data", "ood_r_min", "ood_r_max"));
  }
  if (cfg.count("data", "classes") < 2) throw ConfigError("data.classes must be at least 2", cfg.line_of("data", "classes"));
  if (cfg.reals("data", "split").size() != 2) {
    throw ConfigError("data.split needs two fractions (train, test)", cfg.line_of("data", "split"));
  }
  const Matrix means = cfg.matrix("data", "means");
  if (static_cast<std::uint64_t>(means.rows()) != cfg.count("data", "classes")) {
    throw ConfigError("data.means needs one row per class", at("data", "means", "classes"));
  }
  if (means.cols() != 2) throw ConfigError("data.means rows must be 2-D points", cfg.line_of("data", "means"));
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

std::string Config::serialize() const {
  std::string out;
  std::string_view section;
  for (const auto& k : schema()) {
    if (k.section != section) {
      if (!section.empty()) out += '\n';
      section = k.section;
      out += "[" + std::string(section) + "]\n";
    }
    out += std::string(k.key) + " = " + raw(k.section, k.key) + "\n";
  }
  return out;
}

void Config::set(std::string_view section, std::string_view key, std::string_view value, int line) {
  const KeySpec& spec = require_key(section, key);
  values_[full_key(section, key)] = {canonical(spec, value, line), line};
}

const std::string& Config::raw(std::string_view section, std::string_view key) const {
  const auto it = values_.find(full_key(section, key));
  if (it == values_.end()) throw ConfigError("unknown key " + full_key(section, key));
  return it->second.value;
}

int Config::line_of(std::string_view section, std::string_view key) const {
  const auto it = values_.find(full_key(section, key));
  return it == values_.end() ? 0 : it->second.line;
}

std::uint64_t Config::count(std::string_view section, std::string_view key) const {
  return parse_count(raw(section, key), full_key(section, key), line_of(section, key));
}

double Config::real(std::string_view section, std::string_view key) const {
  return parse_real(raw(section, key), full_key(section, key), line_of(section, key));
}

std::vector<double> Config::reals(std::string_view section, std::string_view key) const {
  std::vector<double> out;
  for (auto p : split_on(raw(section, key), ',')) out.push_back(parse_real(p, full_key(section, key), 0));
  return out;
}

std::vector<std::size_t> Config::counts(std::string_view section, std::string_view key) const {
  std::vector<std::size_t> out;
  for (auto p : split_on(raw(section, key), ',')) out.push_back(parse_count(p, full_key(section, key), 0));
  return out;
}

Matrix Config::matrix(std::string_view section, std::string_view key) const {
  std::vector<std::vector<double>> rows;
  for (auto row : split_on(raw(section, key), ';')) {
    std::istringstream in{std::string(row)};
    std::vector<double> cells;
    std::string cell;
    while (in >> cell) cells.push_back(parse_real(cell, full_key(section, key), 0));
    rows.push_back(std::move(cells));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

bool Config::operator==(const Config& other) const {
  if (values_.size() != other.values_.size()) return false;
  for (const auto& [name, entry] : values_) {
    const auto it = other.values_.find(name);
    if (it == other.values_.end() || it->second.value != entry.value) return false;
  }
  return true;
}

TrainMode parse_train_mode(std::string_view name) {
  if (name == "ce") return TrainMode::Ce;
  if (name == "energy") return TrainMode::Energy;
  if (name == "greg") return TrainMode::Greg;
  if (name == "greg_plus") return TrainMode::GregPlus;
  if (name == "energy_cluster") return TrainMode::EnergyCluster;
  throw ConfigError("unknown training mode '" + std::string(name) + "'");
}

std::string_view train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::Ce: return "ce";
    case TrainMode::Energy: return "energy";
    case TrainMode::Greg: return "greg";
    case TrainMode::GregPlus: return "greg_plus";
    case TrainMode::EnergyCluster: return "energy_cluster";
  }
  return "greg";
}

ScenarioConfig scenario_config(const Config& cfg) {
  ScenarioConfig s;
  s.classes = cfg.count("data", "classes");
  s.n_per_class = cfg.count("data", "n_per_class");
  s.means = cfg.matrix("data", "means");
  s.sigma = cfg.real("data", "sigma");
  s.split = cfg.reals("data", "split");
  s.n_aux = cfg.count("data", "n_aux");
  s.aux_r_min = cfg.real("data", "aux_r_min");
  s.aux_r_max = cfg.real("data", "aux_r_max");
  s.n_ood = cfg.count("data", "n_ood");
  s.ood_r_min = cfg.real("data", "ood_r_min");
  s.ood_r_max = cfg.real("data", "ood_r_max");
  return s;
}

ModelSpec model_spec(const Config& cfg, std::size_t input_dim) {
  ModelSpec spec;
  spec.input_dim = input_dim;
  spec.hidden = cfg.counts("model", "hidden");
  spec.classes = cfg.count("data", "classes");
  spec.activation.kind = cfg.raw("model", "activation") == "relu" ? ActivationKind::Relu : ActivationKind::LeakyRelu;
  spec.activation.slope = cfg.real("model", "leaky_slope");
  return spec;
}

TrainMode train_mode(const Config& cfg) { return parse_train_mode(cfg.raw("train", "mode")); }

TrainConfig train_config(const Config& cfg) { return train_config(cfg, train_mode(cfg)); }

TrainConfig train_config(const Config& cfg, TrainMode mode) {
  TrainConfig t;
  t.epochs = cfg.count("train", "epochs");
  t.id_batch_size = cfg.count("train", "id_batch_size");
  t.aux_pool_multiple = cfg.count("train", "aux_pool_multiple");
  t.lr_max = cfg.real("train", "lr_max");
  t.lr_min = cfg.real("train", "lr_min");
  t.momentum = cfg.real("train", "momentum");
  t.weight_decay = cfg.real("train", "weight_decay");
  t.seed = cfg.count("run", "seed");
  t.clusters = cfg.count("sampler", "clusters");
  t.kmeans.max_iters = cfg.count("sampler", "kmeans_iters");
  t.kmeans.restarts = cfg.count("sampler", "kmeans_restarts");
  t.loss.lambda_s = cfg.real("loss", "lambda_s");
  t.loss.lambda_grad = cfg.real("loss", "lambda_grad");
  t.loss.m_in = cfg.real("loss", "m_in");
  t.loss.m_aux = cfg.real("loss", "m_aux");
  t.loss.grad_norm_eps = cfg.real("loss", "grad_norm_eps");

  t.sampler_enabled = mode == TrainMode::GregPlus || mode == TrainMode::EnergyCluster;
  if (mode == TrainMode::Energy || mode == TrainMode::EnergyCluster || mode == TrainMode::Ce) t.loss.lambda_grad = 0.0;
  if (mode == TrainMode::Ce) t.loss.lambda_s = 0.0;
  try {
    t.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return t;
}

CertifyOptions certify_options(const Config& cfg) {
  CertifyOptions o;
  o.kind = eval_score_kind(cfg);
  o.eps_cap = cfg.real("certify", "eps_cap");
  o.lipschitz_samples = cfg.count("certify", "lipschitz_samples");
  o.inflation = cfg.real("certify", "inflation");
  o.probes = cfg.count("certify", "probes");
  return o;
}

ScoreKind eval_score_kind(const Config& cfg) { return parse_score_kind(cfg.raw("eval", "score")); }

}  // namespace greg
