#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "greg/tensor.hpp"

namespace greg {

enum class SetRole { IdTrain, IdTest, Aux, OodTest };

std::string_view role_name(SetRole role);

/// Inputs plus class labels. Only id_* sets carry labels.
struct LabeledSet {
  Matrix inputs;            // n x d
  std::vector<int> labels;  // n entries for id_* roles, empty otherwise
  SetRole role = SetRole::IdTrain;

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
  bool labeled() const { return role == SetRole::IdTrain || role == SetRole::IdTest; }
};

/// Class c drawn from N(means.row(c), sigma^2 I), classes in order.
LabeledSet gen_gaussian_mixture(std::size_t classes, std::size_t n_per_class, const Matrix& means,
                                double sigma, std::uint64_t seed, SetRole role = SetRole::IdTrain);

/// 2-D points with uniform angle and radius uniform in [r_min, r_max].
LabeledSet gen_ring(std::size_t n, double r_min, double r_max, std::uint64_t seed,
                    SetRole role = SetRole::Aux);

/// Seeded shuffle then contiguous partition by `fractions` (sum 1 +- 1e-9).
/// Labeled sets are partitioned per class so each part keeps class ratios.
/// Parts inherit the role of the input.
std::vector<LabeledSet> split(const LabeledSet& set, std::span<const double> fractions, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Default 2-D scenario: Gaussian classes inside, rings of outliers outside.

struct ScenarioConfig {
  std::size_t classes = 4;
  Matrix means = (Matrix(4, 2) << 2, 2, -2, 2, -2, -2, 2, -2).finished();
  double sigma = 0.35;
  std::size_t n_per_class = 500;
  std::vector<double> split = {0.8, 0.2};
  std::size_t n_aux = 4000;
  double aux_r_min = 4.5;
  double aux_r_max = 7.5;
  std::size_t n_ood = 1000;
  double ood_r_min = 5.0;
  double ood_r_max = 7.0;
};

struct Scenario {
  LabeledSet id_train;
  LabeledSet id_test;
  LabeledSet aux;
  LabeledSet ood_test;
};

Scenario make_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// CSV: header x0,...,x{d-1},label; unlabeled rows carry label -1.

void write_csv(const LabeledSet& set, const std::filesystem::path& path);
LabeledSet read_csv(const std::filesystem::path& path, SetRole role);

// ---------------------------------------------------------------------------
// IDX (big-endian): 0x00 0x00 0x08 <rank>, rank u32 extents, unsigned bytes.

class IdxError : public FormatError {
 public:
  enum class Kind { BadMagic, Truncated };

  IdxError(Kind kind, const std::string& message, std::size_t expected = 0, std::size_t actual = 0)
      : FormatError(message), kind_(kind), expected_(expected), actual_(actual) {}

  Kind kind() const { return kind_; }
  std::size_t expected_bytes() const { return expected_; }
  std::size_t actual_bytes() const { return actual_; }

 private:
  Kind kind_;
  std::size_t expected_;
  std::size_t actual_;
};

/// Unsigned-byte IDX payload scaled to [0, 1] (value / 255).
Tensor load_idx(const std::filesystem::path& path);
Tensor parse_idx(std::span<const unsigned char> bytes);

/// Writes round(255 * v) for v in [0, 1]; throws on values outside [0, 1].
void write_idx(const Tensor& tensor, const std::filesystem::path& path);
std::vector<unsigned char> encode_idx(const Tensor& tensor);

}  // namespace greg
