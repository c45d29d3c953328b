#include <string>

#include "doctest.h"
#include "greg/config.hpp"

using namespace greg;

namespace {

int error_line(const std::string& text) {
  try {
    Config::parse(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_CASE("defaults serialize and parse back") {
  const Config d = Config::defaults();
  const std::string text = d.serialize();
  CHECK(Config::parse(text) == d);
  CHECK(Config::parse(text).serialize() == text);
  CHECK(text.find("[train]") != std::string::npos);
  CHECK(d.raw("loss", "m_in") == "-25");
  CHECK(d.raw("train", "weight_decay") == "1e-04");
  CHECK(d.raw("data", "means") == "2 2; -2 2; -2 -2; 2 -2");
}

TEST_CASE("overrides are canonicalized") {
  const Config c = Config::parse(
      "# comment\n"
      "; another\n"
      "[train]\n"
      "lr_max =   0.0500\n"
      "epochs=3\n"
      "\n"
      "[model]\n"
      "hidden = 16,8\n"
      "[data]\n"
      "split = 0.5 , 0.5\n");
  CHECK(c.raw("train", "lr_max") == "0.05");
  CHECK(c.line_of("train", "lr_max") == 4);
  CHECK(c.line_of("train", "momentum") == 0);
  CHECK(c.count("train", "epochs") == 3);
  CHECK(c.counts("model", "hidden") == std::vector<std::size_t>{16, 8});
  CHECK(c.reals("data", "split") == std::vector<double>{0.5, 0.5});
  CHECK(c.matrix("data", "means").rows() == 4);
  CHECK(Config::parse(c.serialize()) == c);
}

TEST_CASE("parse errors carry line numbers") {
  CHECK(error_line("[train]\nepochs = 2\nepochz = 3\n") == 3);
  CHECK(error_line("[nosuch]\n") == 1);
  CHECK(error_line("epochs = 2\n") == 1);
  CHECK(error_line("[train]\nepochs = 2\nepochs = 3\n") == 3);
  CHECK(error_line("[train\n") == 1);
  CHECK(error_line("[train]\n\nepochs 3\n") == 3);
  CHECK(error_line("[train]\nepochs = -3\n") == 2);
  CHECK(error_line("[train]\nlr_max = fast\n") == 2);
  CHECK(error_line("[train]\nmode = turbo\n") == 2);
  CHECK(error_line("[data]\nsigma = 0\n") == 2);
  CHECK(error_line("[data]\n# fractions must sum to one\nsplit = 0.5, 0.4\n") == 3);
  CHECK(error_line("[data]\nsplit = 1.2, -0.2\n") == 2);
  try {
    Config::parse("[train]\nepochs = 2\nepochs = 3\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "line 3: train.epochs already set on line 2");
  }
}

TEST_CASE("cross-field checks report the later line") {
  CHECK(error_line("[loss]\nm_in = -5\nm_aux = -7\n") == 3);
  CHECK(error_line("[loss]\nm_aux = -30\n") == 2);
  CHECK(error_line("[train]\nlr_min = 0.5\n") == 2);
  CHECK(error_line("[train]\nmomentum = 1\n") == 2);
  CHECK(error_line("[data]\nclasses = 3\n") == 2);
  CHECK(error_line("[data]\nsplit = 0.5, 0.25, 0.25\n") == 2);
  CHECK(error_line("[data]\nouter = 1\n") == 2);
  CHECK(error_line("[data]\nood_r_min = 9\n") == 2);
}

TEST_CASE("typed views") {
  const Config c = Config::parse(
      "[run]\nseed = 7\n[model]\nhidden = 10, 6\nactivation = leaky_relu\nleaky_slope = 0.1\n"
      "[train]\nmode = energy\nepochs = 4\n[sampler]\nclusters = 12\n[eval]\nscore = msp\n"
      "[certify]\neps_cap = 0.25\nprobes = 10\n");
  const ModelSpec spec = model_spec(c, 2);
  CHECK(spec.hidden == std::vector<std::size_t>{10, 6});
  CHECK(spec.classes == 4);
  CHECK(spec.activation.kind == ActivationKind::LeakyRelu);
  CHECK(spec.activation.slope == 0.1);
  CHECK(train_mode(c) == TrainMode::Energy);
  CHECK(eval_score_kind(c) == ScoreKind::Msp);
  CHECK(certify_options(c).eps_cap == 0.25);
  CHECK(certify_options(c).probes == 10);
  CHECK(scenario_config(c).n_per_class == 500);

  const TrainConfig t = train_config(c);
  CHECK(t.epochs == 4);
  CHECK(t.seed == 7);
  CHECK(t.loss.lambda_grad == 0.0);
  CHECK(t.loss.lambda_s == 0.1);
  CHECK_FALSE(t.sampler_enabled);
  CHECK(t.cluster_count() == 12);
}

TEST_CASE("train modes map onto loss weights and the sampler") {
  Config c = Config::defaults();
  c.set("loss", "lambda_grad", "0");
  const TrainConfig greg_no_grad = train_config(c, TrainMode::Greg);
  const TrainConfig energy = train_config(Config::defaults(), TrainMode::Energy);
  CHECK(energy.loss.lambda_grad == greg_no_grad.loss.lambda_grad);
  CHECK(energy.loss.lambda_s == greg_no_grad.loss.lambda_s);
  CHECK(energy.sampler_enabled == greg_no_grad.sampler_enabled);

  const TrainConfig ce = train_config(Config::defaults(), TrainMode::Ce);
  CHECK(ce.loss.lambda_s == 0.0);
  CHECK(ce.loss.lambda_grad == 0.0);
  CHECK(train_config(Config::defaults(), TrainMode::GregPlus).sampler_enabled);
  CHECK(train_config(Config::defaults(), TrainMode::GregPlus).loss.lambda_grad == 1.0);
  const TrainConfig ec = train_config(Config::defaults(), TrainMode::EnergyCluster);
  CHECK(ec.sampler_enabled);
  CHECK(ec.loss.lambda_grad == 0.0);

  for (TrainMode m : {TrainMode::Ce, TrainMode::Energy, TrainMode::Greg, TrainMode::GregPlus, TrainMode::EnergyCluster}) {
    CHECK(parse_train_mode(train_mode_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_train_mode("odin"), ConfigError);
}

TEST_CASE("load reports missing files") {
  CHECK_THROWS_AS(Config::load("/nonexistent/run.ini"), IoError);
}
