#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "greg/certify.hpp"
#include "greg/data.hpp"
#include "greg/model.hpp"
#include "greg/scores.hpp"
#include "greg/trainer.hpp"

namespace greg {

/// Run configuration: `[section]` headers and `key = value` lines overlaid on
/// built-in defaults. Lines starting with '#' or ';' are comments. Unknown
/// sections or keys, duplicate keys and malformed values raise ConfigError
/// with the offending line number.
///
/// Every value is kept in a canonical spelling (shortest round-trip numbers,
/// ", " separated lists, "; " separated matrix rows), so serialize() followed
/// by parse() reproduces the same configuration.
class Config {
 public:
  static Config defaults();
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  /// Full resolved configuration, every section and key in schema order.
  std::string serialize() const;

  /// Validates and stores one value; `line` is reported in errors.
  void set(std::string_view section, std::string_view key, std::string_view value, int line = 0);

  const std::string& raw(std::string_view section, std::string_view key) const;
  /// Line the value was read from, 0 for defaults and programmatic sets.
  int line_of(std::string_view section, std::string_view key) const;

  std::uint64_t count(std::string_view section, std::string_view key) const;
  double real(std::string_view section, std::string_view key) const;
  std::vector<double> reals(std::string_view section, std::string_view key) const;
  std::vector<std::size_t> counts(std::string_view section, std::string_view key) const;
  Matrix matrix(std::string_view section, std::string_view key) const;

  bool operator==(const Config& other) const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::map<std::string, Entry, std::less<>> values_;
};

enum class TrainMode { Ce, Energy, Greg, GregPlus, EnergyCluster };

TrainMode parse_train_mode(std::string_view name);
std::string_view train_mode_name(TrainMode mode);

// Typed views. Cross-field problems (m_in >= m_aux, lr_min > lr_max, ...)
// surface as ConfigError.
ScenarioConfig scenario_config(const Config& cfg);
ModelSpec model_spec(const Config& cfg, std::size_t input_dim);
TrainMode train_mode(const Config& cfg);
/// TrainConfig with the mode applied: energy and energy_cluster zero the
/// gradient weight, ce zeroes both auxiliary weights, greg_plus and
/// energy_cluster switch the sampler on.
TrainConfig train_config(const Config& cfg);
TrainConfig train_config(const Config& cfg, TrainMode mode);
CertifyOptions certify_options(const Config& cfg);
ScoreKind eval_score_kind(const Config& cfg);

}  // namespace greg
