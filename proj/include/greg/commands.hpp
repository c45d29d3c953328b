#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "greg/config.hpp"

namespace greg {

namespace fs = std::filesystem;

struct RunConfig {
  std::string subcommand;
  fs::path config_path;  // empty: built-in defaults
  fs::path out_dir;
  std::optional<std::uint64_t> seed;
};

/// Config file (or defaults) with the seed override applied.
Config resolve_config(const RunConfig& run);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

/// manifest_<subcommand>.json: resolved config text plus SHA-256 of every
/// input and output file, keyed by file name. Returns the manifest path.
fs::path write_manifest(const fs::path& out_dir, std::string_view subcommand, const Config& cfg,
                        const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs);

// Subcommands. Each creates `out` if needed, writes its artifacts plus a
// manifest there and returns the paths written (manifest last).

/// id_train.csv, id_test.csv, aux.csv, ood_test.csv, preview.svg
std::vector<fs::path> cmd_gen_data(const Config& cfg, const fs::path& out);

/// model.ckpt, trajectory.csv. Reads id_train.csv and aux.csv from
/// data.dir (default: `out`).
std::vector<fs::path> cmd_train(const Config& cfg, const fs::path& out);

/// eval.csv, scores_id.csv, scores_ood.csv, hist.csv, hist.svg and, for 2-D
/// data, boundary.svg. Reads the checkpoint (model.checkpoint, default
/// out/model.ckpt) plus id_test.csv and ood_test.csv.
std::vector<fs::path> cmd_eval(const Config& cfg, const fs::path& out);

/// certificates.csv and certify_summary.csv for id_test and ood_test, with
/// gamma at 95% ID test TPR.
std::vector<fs::path> cmd_certify(const Config& cfg, const fs::path& out);

/// ablation.csv: clusters,fpr95,auroc with one greg_plus row per entry of
/// ablate.k_list and a final "none" row trained without the sampler.
std::vector<fs::path> cmd_ablate_clusters(const Config& cfg, const fs::path& out);

/// Fresh model trained as cmd_train would, on the config's data files.
TrainResult train_from_config(const Config& cfg, const fs::path& out);

/// Runs one subcommand, reporting errors on `err`. Exit status:
/// 0 success, 2 config error, 3 numeric failure, 4 I/O error, 1 otherwise.
int run_command(const RunConfig& run, std::ostream& log, std::ostream& err);

}  // namespace greg
