#include "greg/commands.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <fstream>
#include <iostream>

#include "greg/certify.hpp"
#include "greg/eval.hpp"
#include "greg/plot.hpp"
#include "greg/rng.hpp"
#include "json.hpp"

namespace greg {

namespace {

constexpr std::uint64_t kInitStream = 100;
constexpr std::uint64_t kCertifyStream = 200;

const char* const kIdColor = "#1f77b4";
const char* const kOodColor = "#d62728";

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

fs::path data_dir(const Config& cfg, const fs::path& out) {
  const std::string& dir = cfg.raw("data", "dir");
  return dir.empty() ? out : fs::path(dir);
}

fs::path checkpoint_path(const Config& cfg, const fs::path& out) {
  const std::string& p = cfg.raw("model", "checkpoint");
  return p.empty() ? out / "model.ckpt" : fs::path(p);
}

LabeledSet read_set(const fs::path& path, SetRole role) {
  if (!fs::exists(path)) throw IoError("missing dataset file " + path.string());
  try {
    return read_csv(path, role);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

MlpModel read_model(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing checkpoint " + path.string());
  return load_checkpoint(path);
}

void require_width(const MlpModel& model, const LabeledSet& set, const fs::path& source) {
  if (static_cast<std::size_t>(set.inputs.cols()) != model.input_dim()) {
    throw ShapeError(source.string() + " has " + std::to_string(set.inputs.cols()) +
                     " features but the checkpoint expects " + std::to_string(model.input_dim()));
  }
}

}  // namespace

Config resolve_config(const RunConfig& run) {
  Config cfg = run.config_path.empty() ? Config::defaults() : Config::load(run.config_path);
  if (run.seed) cfg.set("run", "seed", std::to_string(*run.seed));
  return cfg;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256: digest initialisation failed");
  }
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof(buf));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

fs::path write_manifest(const fs::path& out_dir, std::string_view subcommand, const Config& cfg,
                        const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  nlohmann::json doc;
  doc["subcommand"] = std::string(subcommand);
  doc["config"] = cfg.serialize();
  doc["inputs"] = nlohmann::json::object();
  doc["artifacts"] = nlohmann::json::object();
  for (const auto& p : inputs) doc["inputs"][p.filename().string()] = sha256_file(p);
  for (const auto& p : outputs) doc["artifacts"][p.filename().string()] = sha256_file(p);
  const fs::path path = out_dir / ("manifest_" + std::string(subcommand) + ".json");
  write_text(path, doc.dump(2) + "\n");
  return path;
}

std::vector<fs::path> cmd_gen_data(const Config& cfg, const fs::path& out) {
  ensure_dir(out);
  const Scenario sc = make_scenario(scenario_config(cfg), cfg.count("run", "seed"));
  std::vector<fs::path> written;
  auto emit = [&](const LabeledSet& set, const char* name) {
    written.push_back(out / name);
    write_csv(set, written.back());
  };
  emit(sc.id_train, "id_train.csv");
  emit(sc.id_test, "id_test.csv");
  emit(sc.aux, "aux.csv");
  emit(sc.ood_test, "ood_test.csv");

  written.push_back(out / "preview.svg");
  write_text(written.back(), scatter_svg({{"id train", kIdColor, sc.id_train.inputs},
                                          {"auxiliary", "#ff7f0e", sc.aux.inputs},
                                          {"ood test", kOodColor, sc.ood_test.inputs}},
                                         "generated scenario"));
  written.push_back(write_manifest(out, "gen-data", cfg, {}, written));
  return written;
}

TrainResult train_from_config(const Config& cfg, const fs::path& out) {
  const fs::path dir = data_dir(cfg, out);
  const LabeledSet id = read_set(dir / "id_train.csv", SetRole::IdTrain);
  const LabeledSet aux = read_set(dir / "aux.csv", SetRole::Aux);
  const TrainConfig tc = train_config(cfg);
  if (tc.sampler_enabled && tc.cluster_count() > tc.aux_pool_multiple * tc.id_batch_size) {
    throw ConfigError("sampler.clusters exceeds the auxiliary pool size", cfg.line_of("sampler", "clusters"));
  }
  const ModelSpec spec = model_spec(cfg, static_cast<std::size_t>(id.inputs.cols()));
  for (int label : id.labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= spec.classes) {
      throw ConfigError("id_train.csv holds label " + std::to_string(label) + " but data.classes is " +
                        std::to_string(spec.classes));
    }
  }
  const MlpModel init = init_model(spec, Rng::derive(cfg.count("run", "seed"), kInitStream));
  return train(init, id, aux.inputs, tc);
}

std::vector<fs::path> cmd_train(const Config& cfg, const fs::path& out) {
  ensure_dir(out);
  const fs::path dir = data_dir(cfg, out);
  const TrainResult result = train_from_config(cfg, out);
  std::vector<fs::path> written{checkpoint_path(cfg, out), out / "trajectory.csv"};
  save_checkpoint(result.model, written[0]);
  write_trajectory_csv(result.log, written[1]);
  written.push_back(write_manifest(out, "train", cfg, {dir / "id_train.csv", dir / "aux.csv"}, written));
  return written;
}

std::vector<fs::path> cmd_eval(const Config& cfg, const fs::path& out) {
  ensure_dir(out);
  const fs::path dir = data_dir(cfg, out);
  const fs::path ckpt = checkpoint_path(cfg, out);
  const MlpModel model = read_model(ckpt);
  const LabeledSet id = read_set(dir / "id_test.csv", SetRole::IdTest);
  const LabeledSet ood = read_set(dir / "ood_test.csv", SetRole::OodTest);
  require_width(model, id, dir / "id_test.csv");
  require_width(model, ood, dir / "ood_test.csv");

  const ScoreKind kind = eval_score_kind(cfg);
  const EvalReport report =
      evaluate_scores(score_inputs(model, id.inputs, kind), score_inputs(model, ood.inputs, kind), cfg.count("eval", "bins"));
  write_report(report, out);
  std::vector<fs::path> written{out / "eval.csv", out / "scores_id.csv", out / "scores_ood.csv", out / "hist.csv",
                                out / "hist.svg"};
  write_text(written.back(),
             histogram_svg(report.edges, {{"ID test", kIdColor, report.id_counts}, {"OOD test", kOodColor, report.ood_counts}},
                           std::string(score_name(kind)) + " score histogram", "score (lower = in-distribution)"));
  if (model.input_dim() == 2) {
    written.push_back(out / "boundary.svg");
    write_text(written.back(),
               decision_raster_svg(model, kind, report.gamma, cfg.count("eval", "raster"),
                                   {{"ID test", kIdColor, id.inputs}, {"OOD test", kOodColor, ood.inputs}},
                                   "score raster split at the 95% TPR threshold"));
  }
  written.push_back(write_manifest(out, "eval", cfg, {ckpt, dir / "id_test.csv", dir / "ood_test.csv"}, written));
  return written;
}

std::vector<fs::path> cmd_certify(const Config& cfg, const fs::path& out) {
  ensure_dir(out);
  const fs::path dir = data_dir(cfg, out);
  const fs::path ckpt = checkpoint_path(cfg, out);
  const MlpModel model = read_model(ckpt);
  LabeledSet id = read_set(dir / "id_test.csv", SetRole::IdTest);
  LabeledSet ood = read_set(dir / "ood_test.csv", SetRole::OodTest);
  require_width(model, id, dir / "id_test.csv");
  require_width(model, ood, dir / "ood_test.csv");

  const CertifyOptions opts = certify_options(cfg);
  const double gamma = threshold_at_tpr(score_inputs(model, id.inputs, opts.kind), 0.95);
  const auto limit = cfg.count("certify", "max_samples");
  auto head = [&](const Matrix& x) -> Matrix {
    if (limit == 0 || static_cast<Eigen::Index>(limit) >= x.rows()) return x;
    return x.topRows(static_cast<Eigen::Index>(limit));
  };
  const std::uint64_t seed = Rng::derive(cfg.count("run", "seed"), kCertifyStream);
  const auto id_certs = certify_samples(model, head(id.inputs), Side::Id, gamma, opts, Rng::derive(seed, 0));
  const auto ood_certs = certify_samples(model, head(ood.inputs), Side::Ood, gamma, opts, Rng::derive(seed, 1));
  std::vector<Certificate> all = id_certs;
  all.insert(all.end(), ood_certs.begin(), ood_certs.end());

  std::vector<fs::path> written{out / "certificates.csv", out / "certify_summary.csv"};
  write_certificates(all, written[0]);
  const std::vector<double> radii = cfg.reals("certify", "radii");
  const auto f_id = certified_fraction(id_certs, radii);
  const auto f_ood = certified_fraction(ood_certs, radii);
  const auto f_all = certified_fraction(all, radii);
  std::string summary = "radius,id_fraction,ood_fraction,all_fraction\n";
  for (std::size_t i = 0; i < radii.size(); ++i) {
    summary += fmt(radii[i]) + "," + fmt(f_id[i]) + "," + fmt(f_ood[i]) + "," + fmt(f_all[i]) + "\n";
  }
  write_text(written[1], summary);
  written.push_back(write_manifest(out, "certify", cfg, {ckpt, dir / "id_test.csv", dir / "ood_test.csv"}, written));
  return written;
}

std::vector<fs::path> cmd_ablate_clusters(const Config& cfg, const fs::path& out) {
  ensure_dir(out);
  const fs::path dir = data_dir(cfg, out);
  const std::vector<std::size_t> ks = cfg.counts("ablate", "k_list");
  const TrainConfig base = train_config(cfg);
  const std::size_t pool = base.aux_pool_multiple * base.id_batch_size;
  for (std::size_t k : ks) {
    if (k > pool) {
      throw ConfigError("ablate.k_list entry " + std::to_string(k) + " exceeds the pool size " + std::to_string(pool),
                        cfg.line_of("ablate", "k_list"));
    }
  }
  const LabeledSet id = read_set(dir / "id_test.csv", SetRole::IdTest);
  const LabeledSet ood = read_set(dir / "ood_test.csv", SetRole::OodTest);
  const ScoreKind kind = eval_score_kind(cfg);

  std::string csv = "clusters,fpr95,auroc\n";
  auto row = [&](const Config& variant, const std::string& label) {
    const TrainResult r = train_from_config(variant, out);
    require_width(r.model, id, dir / "id_test.csv");
    const Vector s_id = score_inputs(r.model, id.inputs, kind);
    const Vector s_ood = score_inputs(r.model, ood.inputs, kind);
    csv += label + "," + fmt(fpr95(s_id, s_ood)) + "," + fmt(auroc(s_id, s_ood)) + "\n";
  };
  for (std::size_t k : ks) {
    Config variant = cfg;
    variant.set("train", "mode", "greg_plus");
    variant.set("sampler", "clusters", std::to_string(k));
    row(variant, std::to_string(k));
  }
  Config plain = cfg;
  plain.set("train", "mode", "greg");
  row(plain, "none");

  std::vector<fs::path> written{out / "ablation.csv"};
  write_text(written[0], csv);
  written.push_back(write_manifest(out, "ablate-clusters", cfg,
                                   {dir / "id_train.csv", dir / "aux.csv", dir / "id_test.csv", dir / "ood_test.csv"},
                                   written));
  return written;
}

int run_command(const RunConfig& run, std::ostream& log, std::ostream& err) {
  try {
    const Config cfg = resolve_config(run);
    std::vector<fs::path> written;
    if (run.subcommand == "gen-data") {
      written = cmd_gen_data(cfg, run.out_dir);
    } else if (run.subcommand == "train") {
      written = cmd_train(cfg, run.out_dir);
    } else if (run.subcommand == "eval") {
      written = cmd_eval(cfg, run.out_dir);
    } else if (run.subcommand == "certify") {
      written = cmd_certify(cfg, run.out_dir);
    } else if (run.subcommand == "ablate-clusters") {
      written = cmd_ablate_clusters(cfg, run.out_dir);
    } else {
      throw ConfigError("unknown subcommand '" + run.subcommand + "'");
    }
    for (const auto& p : written) log << p.string() << "\n";
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << (run.config_path.empty() ? "" : run.config_path.string() + ": ") << e.what() << "\n";
    return 2;
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace greg
