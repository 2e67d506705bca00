#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cyin/binary_io.hpp"
#include "cyin/errors.hpp"
#include "cyin/trainer.hpp"
#include "grad_check.hpp"
#include "tiny_model.hpp"

using namespace cyin;
using namespace cyin::fixtures;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("cyin_trainer_" + name);
}

nn::ParamList snapshot_translators(const CyinModel& m) { return m.translator_parameters(); }

std::vector<Matrix> values(const nn::ParamList& ps) {
  std::vector<Matrix> out;
  for (const auto& p : ps) out.push_back(p.var.value());
  return out;
}

}  // namespace

class RecombinationTest : public ::testing::TestWithParam<Ablation> {};

TEST_P(RecombinationTest, TotalEqualsRecombinedComponents) {
  const Dataset data = generate(fixtures::tiny_spec(Task::Regression, 8));
  ExperimentConfig cfg = fixtures::tiny_config();
  cfg.ablation = GetParam();
  CyinModel model(cfg, DataShape::of(data.spec));
  const Batch batch = make_batch(data);
  for (double gamma : {0.0, 10.0}) {
    Rng rng(4);
    const LossResult r = total_loss(model, batch, random_mask(8, 3, 0.4, 2), gamma, rng);
    EXPECT_NEAR(r.bundle.total, r.bundle.recombined(), 1e-10);
    EXPECT_EQ(r.total.scalar(), r.bundle.total);
    if (gamma == 0.0) {
      EXPECT_FALSE(r.bundle.rec.has_value());
      EXPECT_FALSE(r.bundle.cyc.has_value());
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllAblations, RecombinationTest, ::testing::ValuesIn(all_ablations()),
                         [](const auto& info) { return to_string(info.param); });

TEST(TotalLoss, AblationsDropTheirComponents) {
  const Dataset data = generate(fixtures::tiny_spec(Task::Regression, 6));
  const Batch batch = make_batch(data);
  auto bundle = [&](Ablation a) {
    ExperimentConfig cfg = fixtures::tiny_config();
    cfg.ablation = a;
    CyinModel model(cfg, DataShape::of(data.spec));
    Rng rng(0);
    return total_loss(model, batch, PresenceMask(6, 3, true), 10.0, rng).bundle;
  };
  EXPECT_FALSE(bundle(Ablation::NoTib).tib.has_value());
  EXPECT_FALSE(bundle(Ablation::NoLib).lib.has_value());
  EXPECT_FALSE(bundle(Ablation::NoCyclicTranslation).cyc.has_value());
  const LossBundle raw = bundle(Ablation::NoInformativeSpace);
  EXPECT_FALSE(raw.tib.has_value());
  EXPECT_FALSE(raw.lib.has_value());
  EXPECT_TRUE(raw.rec.has_value());
  const LossBundle full = bundle(Ablation::Full);
  EXPECT_TRUE(full.tib && full.lib && full.rec && full.cyc);
  // complete mask: masked view is the complete view
  EXPECT_EQ(full.task_complete, full.task_masked);
}

TEST(TotalLoss, GradientMatchesFiniteDifferences) {
  DatasetSpec spec = fixtures::tiny_spec(Task::Regression, 2);
  spec.num_modalities = 2;
  spec.feat_dims = {3, 2};
  spec.seq_len = 2;
  const Dataset data = generate(spec);
  ExperimentConfig cfg = fixtures::tiny_config();
  cfg.ib = IBConfig{2, 4, 2.0};
  cfg.fusion.num_heads = 1;
  CyinModel model(cfg, DataShape::of(spec));
  const Batch batch = make_batch(data);
  const PresenceMask mask = fixed_mask(2, {0}, 2);
  // Smooth regime: a small random bias everywhere keeps ReLUs off their kinks.
  Rng perturb(17);
  for (auto p : model.parameters())
    if (p.var.rows() == 1) p.var.mutable_value() = perturb.normal_matrix(1, p.var.cols()) * 0.3;
  auto f = [&] {
    Rng rng(8);
    return total_loss(model, batch, mask, 10.0, rng).total;
  };
  nn::ParamList subset;
  for (const auto& p : model.parameters())
    if (p.name.find("fusion") == std::string::npos) subset.push_back(p);
  EXPECT_LT(cyin::testing::gradient_relative_error(cyin::testing::leaves_of(subset), f), 1e-4);
}

TEST(Train, StageOneLeavesTranslatorsBitIdentical) {
  const Dataset data = generate(fixtures::tiny_spec());
  ExperimentConfig cfg = fixtures::tiny_config();
  cfg.epochs = 4;
  cfg.stage_split = 0.5;
  CyinModel model(cfg, DataShape::of(data.spec));
  const auto init = values(snapshot_translators(model));
  const auto others_init = values(model.parameters());
  bool checked = false;
  bool changed_later = false;
  TrainOptions opt;
  opt.on_step = [&](const StepRecord& rec, const CyinModel& m) {
    const auto now = values(m.translator_parameters());
    if (rec.stage == 1) {
      EXPECT_EQ(now, init) << "step " << rec.step;
      EXPECT_FALSE(rec.losses.rec.has_value());
      EXPECT_EQ(rec.missing_rate, 0.0);
      checked = true;
    } else if (now != init) {
      changed_later = true;
    }
    EXPECT_NEAR(rec.losses.total, rec.losses.recombined(), 1e-9);
  };
  train(model, data, opt);
  EXPECT_TRUE(checked);
  EXPECT_TRUE(changed_later);
  EXPECT_NE(values(model.parameters()), others_init);
}

TEST(Train, SameSeedGivesIdenticalLogsAndParameters) {
  const Dataset data = generate(fixtures::tiny_spec());
  auto run = [&] {
    CyinModel model(fixtures::tiny_config(), DataShape::of(data.spec));
    std::ostringstream log;
    TrainOptions opt;
    opt.log = &log;
    train(model, data, opt);
    return std::make_pair(log.str(), values(model.parameters()));
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_FALSE(a.first.empty());
}

TEST(Train, LogOmitsInactiveComponents) {
  const Dataset data = generate(fixtures::tiny_spec(Task::Regression, 16));
  ExperimentConfig cfg = fixtures::tiny_config();
  cfg.ablation = Ablation::NoInformativeSpace;
  cfg.epochs = 2;
  CyinModel model(cfg, DataShape::of(data.spec));
  std::ostringstream log;
  TrainOptions opt;
  opt.log = &log;
  train(model, data, opt);
  std::istringstream in(log.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_FALSE(j.contains("tib"));
    EXPECT_FALSE(j.contains("lib"));
    EXPECT_TRUE(j.contains("total"));
    EXPECT_TRUE(j.contains("step"));
    ++lines;
  }
  EXPECT_EQ(lines, 2);
}

TEST(Train, NonFiniteInputAbortsWithStep) {
  Dataset data = generate(fixtures::tiny_spec(Task::Regression, 16));
  data.samples[0].modalities[0](0, 0) = std::nan("");
  CyinModel model(fixtures::tiny_config(), DataShape::of(data.spec));
  try {
    train(model, data);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 0);
    EXPECT_FALSE(e.component().empty());
  }
}

TEST(Train, RejectsMismatchedDataset) {
  const Dataset data = generate(fixtures::tiny_spec());
  CyinModel model(fixtures::tiny_config(), DataShape::of(data.spec));
  const Dataset cls = generate(fixtures::tiny_spec(Task::Classification));
  EXPECT_THROW(train(model, cls), TaskMismatchError);
}

TEST(Train, ClassificationRuns) {
  const Dataset data = generate(fixtures::tiny_spec(Task::Classification, 32));
  CyinModel model(fixtures::tiny_config(), DataShape::of(data.spec));
  const TrainResult r = train(model, data);
  EXPECT_EQ(r.epoch_loss.size(), 4u);
  const MetricReport rep = evaluate(model, data, Protocol::parse("fixed:0"));
  EXPECT_TRUE(rep.get("acc").has_value());
  EXPECT_TRUE(rep.get("wf1").has_value());
}

TEST(FitTranslators, ReducesReconstructionAndTouchesOnlyTranslators) {
  const Dataset data = generate(fixtures::tiny_spec(Task::Regression, 64));
  CyinModel model(fixtures::tiny_config(), DataShape::of(data.spec));
  nn::ParamList others;
  for (const auto& p : model.parameters())
    if (p.name.rfind("cra", 0) != 0) others.push_back(p);
  const auto before = values(others);
  const TranslatorFit fit = fit_translators(model, data, 100, 1e-2, 16, 0);
  EXPECT_EQ(fit.history.size(), 100u);
  EXPECT_LT(fit.final, fit.initial);
  EXPECT_EQ(values(others), before);
  EXPECT_NEAR(fit.final, translator_rec_loss(model, make_batch(data)), 1e-12);
}

TEST(Evaluate, RandomZeroEqualsComplete) {
  const Dataset data = generate(fixtures::tiny_spec());
  CyinModel model(fixtures::tiny_config(), DataShape::of(data.spec));
  train(model, data);
  const MetricReport a = evaluate(model, data, Protocol::parse("complete"), 4);
  const MetricReport b = evaluate(model, data, Protocol::parse("random:0"), 4);
  EXPECT_EQ(a.values, b.values);
}

TEST(Evaluate, SplitKeepsTailForTest) {
  const Dataset data = generate(fixtures::tiny_spec(Task::Regression, 10));
  const auto [tr, te] = train_test_split(data, 0.2);
  EXPECT_EQ(tr.samples.size(), 8u);
  EXPECT_EQ(te.samples.size(), 2u);
  EXPECT_EQ(te.samples[0].sample_id, data.samples[8].sample_id);
  EXPECT_THROW(train_test_split(data, 0.0), ValidationError);
}

TEST(Checkpoint, UntrainedRoundTripIsExact) {
  const Dataset data = generate(fixtures::tiny_spec());
  CyinModel model(fixtures::tiny_config(), DataShape::of(data.spec));
  const fs::path path = temp_file("untrained.cyck");
  save_checkpoint(model, data.spec, path);
  const LoadedModel back = load_checkpoint(path, model.config());
  EXPECT_EQ(back.config.to_text(), model.config().to_text());
  EXPECT_EQ(values(back.model->parameters()), values(model.parameters()));
  fs::remove(path);
}

TEST(Checkpoint, TrainedRoundTripEvaluatesIdentically) {
  const Dataset data = generate(fixtures::tiny_spec());
  CyinModel model(fixtures::tiny_config(), DataShape::of(data.spec));
  train(model, data);
  const fs::path path = temp_file("trained.cyck");
  save_checkpoint(model, data.spec, path);
  const LoadedModel back = load_checkpoint(path);
  for (const char* proto : {"complete", "fixed:1", "random:0.5"}) {
    const Protocol p = Protocol::parse(proto);
    EXPECT_EQ(evaluate(model, data, p, 3).to_json().dump(),
              evaluate(*back.model, data, p, 3).to_json().dump())
        << proto;
  }
  fs::remove(path);
}

TEST(Checkpoint, MismatchAndCorruptionAreReported) {
  const Dataset data = generate(fixtures::tiny_spec());
  CyinModel model(fixtures::tiny_config(), DataShape::of(data.spec));
  const fs::path path = temp_file("corrupt.cyck");
  save_checkpoint(model, data.spec, path);

  EXPECT_THROW(load_checkpoint(path, fixtures::tiny_config(4)), IncompatibleCheckpointError);

  std::vector<char> bytes = io::read_file(path.string());
  std::vector<char> bad = bytes;
  bad[0] = 'X';
  io::write_file(path.string(), bad);
  EXPECT_THROW(load_checkpoint(path), ParseError);

  bad = bytes;
  bad[4] = 9;  // version
  io::write_file(path.string(), bad);
  EXPECT_THROW(load_checkpoint(path), IncompatibleCheckpointError);

  bad = bytes;
  bad[6] ^= 1;  // config hash
  io::write_file(path.string(), bad);
  EXPECT_THROW(load_checkpoint(path), IncompatibleCheckpointError);

  bad.assign(bytes.begin(), bytes.end() - 3);
  io::write_file(path.string(), bad);
  try {
    load_checkpoint(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }
  fs::remove(path);
}
