#include "cyin/trainer.hpp"

#include <cmath>
#include <numeric>

#include "cyin/binary_io.hpp"
#include "cyin/errors.hpp"
#include "cyin/optimizer.hpp"

namespace cyin {

double LossBundle::recombined() const {
  const double ib = tib.value_or(0.0) + lib.value_or(0.0);
  const double tran = rec.value_or(0.0) + cyc.value_or(0.0);
  return task + ib / beta + gamma * tran;
}

nlohmann::json LossBundle::to_json() const {
  nlohmann::json j{{"task", task}, {"task_complete", task_complete}, {"task_masked", task_masked}};
  if (tib) j["tib"] = *tib;
  if (lib) j["lib"] = *lib;
  if (rec) j["rec"] = *rec;
  if (cyc) j["cyc"] = *cyc;
  j["total"] = total;
  return j;
}

nlohmann::json StepRecord::to_json() const {
  nlohmann::json j{{"step", step}, {"epoch", epoch}, {"stage", stage}, {"mr", missing_rate},
                   {"grad_norm", grad_norm}};
  j.update(losses.to_json());
  return j;
}

LossResult total_loss(const CyinModel& model, const Batch& batch, const PresenceMask& mask,
                      double gamma, Rng& rng) {
  const ExperimentConfig& cfg = model.config();
  const double beta = cfg.beta();
  const auto reprs = model.encode(batch);
  const auto latents = model.bottleneck(reprs, Mode::Train, rng);
  for (const auto& l : latents)
    if (!l.sample.value().allFinite() ||
        (l.sigma.defined() && !l.sigma.value().allFinite()))
      throw NumericalError("latent of modality " + std::to_string(l.modality_id));

  LossResult out;
  LossBundle& b = out.bundle;
  b.beta = beta;
  b.gamma = gamma;

  ag::Var ib_sum;
  auto add_to = [](ag::Var& acc, const ag::Var& v) { acc = acc.defined() ? ag::add(acc, v) : v; };
  if (model.uses_informative_space()) {
    if (cfg.ablation != Ablation::NoTib) {
      ag::Var tib = cyclic_token_ib(latents, reprs, model.ib_decoders(), beta,
                                    cfg.ablation != Ablation::NoCyclicInteraction)
                        .loss;
      b.tib = tib.scalar();
      add_to(ib_sum, tib);
    }
    if (cfg.ablation != Ablation::NoLib) {
      std::vector<PooledLatent> pooled;
      for (const auto& l : latents) pooled.push_back(pool_label_latent(l));
      ag::Var lib = label_ib_loss(pooled, batch.labels, model.label_predictors(), beta,
                                  Mode::Train, rng);
      b.lib = lib.scalar();
      add_to(ib_sum, lib);
    }
  }

  ag::Var tran;
  if (gamma > 0.0) {
    TranslationLoss tl = translation_loss(latents, model.translators());
    b.rec = tl.rec.scalar();
    tran = tl.rec;
    if (cfg.ablation != Ablation::NoCyclicTranslation) {
      b.cyc = tl.cyc.scalar();
      tran = tl.total;
    }
  }

  std::vector<ag::Var> complete;
  for (const auto& l : latents) complete.push_back(l.sample);
  ag::Var task_c = task_loss(model.fusion().forward(complete, batch.seq_len), batch.labels);
  ag::Var task = task_c;
  b.task_complete = b.task_masked = task_c.scalar();
  if (!mask.all_present()) {
    const auto masked = cfg.ablation == Ablation::NoTranslatedLatents
                            ? model.substitute_zero_input(latents, mask, Mode::Train, rng)
                            : model.substitute_translated(latents, mask);
    ag::Var task_m = task_loss(model.fusion().forward(masked, batch.seq_len), batch.labels);
    b.task_masked = task_m.scalar();
    task = ag::scale(ag::add(task_c, task_m), 0.5);
  }
  b.task = task.scalar();

  ag::Var total = task;
  if (ib_sum.defined()) total = ag::add(total, ag::scale(ib_sum, 1.0 / beta));
  if (tran.defined()) total = ag::add(total, ag::scale(tran, gamma));
  b.total = total.scalar();
  out.total = total;
  return out;
}

namespace {

void check_finite(const LossBundle& b, long step) {
  auto bad = [](double v) { return !std::isfinite(v); };
  if (bad(b.task)) throw DivergenceError(step, "task loss");
  if (b.tib && bad(*b.tib)) throw DivergenceError(step, "token IB loss");
  if (b.lib && bad(*b.lib)) throw DivergenceError(step, "label IB loss");
  if (b.rec && bad(*b.rec)) throw DivergenceError(step, "reconstruction loss");
  if (b.cyc && bad(*b.cyc)) throw DivergenceError(step, "cycle loss");
  if (bad(b.total)) throw DivergenceError(step, "total loss");
}

void check_data(const CyinModel& model, const Dataset& data) {
  const DataShape& s = model.shape();
  const DatasetSpec& d = data.spec;
  if (d.num_modalities != s.num_modalities || d.seq_len != s.seq_len || d.feat_dims != s.feat_dims)
    throw ValidationError("dataset shape does not match the model (modalities, L or widths)");
  if (d.task != s.task || (d.task == Task::Classification && d.num_classes != s.num_classes))
    throw TaskMismatchError("dataset task " + to_string(d.task) + " does not match the model's " +
                            to_string(s.task));
  if (data.samples.empty()) throw ValidationError("dataset has no samples");
  for (const auto& sample : data.samples)
    if (static_cast<int>(sample.modalities.size()) != d.num_modalities)
      throw ValidationError("sample " + std::to_string(sample.sample_id) +
                            " is incomplete in storage");
}

void round_parameters(const nn::ParamList& params) {
  for (auto p : params) p.var.mutable_value() = nn::round_to_float(p.var.value());
}

}  // namespace

TrainResult train(CyinModel& model, const Dataset& data, const TrainOptions& options) {
  check_data(model, data);
  const ExperimentConfig& cfg = model.config();
  const nn::ParamList params = model.parameters();
  AdamW opt(params, AdamWConfig{cfg.lr_encoder, cfg.lr_other, cfg.weight_decay});

  const std::size_t n = data.samples.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const int stage1 = cfg.stage1_epochs();
  TrainResult result;
  long step = 0;
  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const int stage = epoch < stage1 ? 1 : 2;
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = Rng::substream(cfg.seed, "train.shuffle", static_cast<std::uint64_t>(epoch));
    shuffle.shuffle(order);
    double epoch_sum = 0.0;
    int epoch_steps = 0;
    for (std::size_t begin = 0; begin < n; begin += bs, ++step) {
      const std::span<const std::size_t> idx(order.data() + begin, std::min(bs, n - begin));
      const Batch batch = make_batch(data, idx);
      Rng noise = Rng::substream(cfg.seed, "train.reparam", static_cast<std::uint64_t>(step));

      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.stage = stage;
      PresenceMask mask(idx.size(), model.num_modalities(), true);
      double gamma = 0.0;
      if (stage == 2) {
        gamma = cfg.gamma;
        Rng pick = Rng::substream(cfg.seed, "train.curriculum", static_cast<std::uint64_t>(step));
        const double mr = cfg.curriculum[pick.index(cfg.curriculum.size())];
        const std::uint64_t mask_seed = pick.engine()();
        mask = random_mask_clamped(idx.size(), model.num_modalities(), mr, mask_seed);
        rec.missing_rate = compute_mr(mask);
      }

      LossResult loss = [&] {
        try {
          return total_loss(model, batch, mask, gamma, noise);
        } catch (const NumericalError& e) {
          throw DivergenceError(step, e.what());
        }
      }();
      check_finite(loss.bundle, step);
      opt.zero_grad();
      ag::backward(loss.total);
      rec.grad_norm = clip_grad_norm(params, cfg.clip_norm);
      if (!std::isfinite(rec.grad_norm)) throw DivergenceError(step, "gradient");
      opt.step();

      rec.losses = loss.bundle;
      if (options.log) *options.log << rec.to_json().dump() << '\n';
      if (options.on_step) options.on_step(rec, model);
      epoch_sum += loss.bundle.total;
      ++epoch_steps;
      result.steps.push_back(std::move(rec));
    }
    result.epoch_loss.push_back(epoch_sum / epoch_steps);
  }
  round_parameters(params);
  return result;
}

namespace {

std::vector<ag::Matrix> mean_latents(const CyinModel& model, const Batch& batch) {
  ag::NoGradGuard guard;
  Rng unused(0);
  std::vector<ag::Matrix> out;
  for (const auto& l : model.bottleneck(model.encode(batch), Mode::Eval, unused))
    out.push_back(l.mu.value());
  return out;
}

ag::Var pair_rec_loss(const CyinModel& model, const std::vector<ag::Matrix>& latents) {
  const int u = model.num_modalities();
  ag::Var sum;
  int pairs = 0;
  for (int s = 0; s < u; ++s)
    for (int t = 0; t < u; ++t) {
      if (s == t) continue;
      BottleneckLatent target;
      target.sample = ag::constant(latents[t]);
      ag::Var l = forward_rec_loss(model.translators().at(s, t).translate(ag::constant(latents[s])),
                                   target);
      sum = sum.defined() ? ag::add(sum, l) : l;
      ++pairs;
    }
  return ag::scale(sum, 1.0 / pairs);
}

}  // namespace

double translator_rec_loss(const CyinModel& model, const Batch& batch) {
  const auto latents = mean_latents(model, batch);
  ag::NoGradGuard guard;
  return pair_rec_loss(model, latents).scalar();
}

TranslatorFit fit_translators(CyinModel& model, const Dataset& data, int steps, double lr,
                              int batch_size, std::uint64_t seed) {
  check_data(model, data);
  const Batch all = make_batch(data);
  const auto latents = mean_latents(model, all);
  const ag::Index l = data.spec.seq_len;

  TranslatorFit fit;
  fit.initial = [&] {
    ag::NoGradGuard g;
    return pair_rec_loss(model, latents).scalar();
  }();
  const nn::ParamList params = model.translator_parameters();
  AdamW opt(params, AdamWConfig{lr, lr, 0.0});
  const std::size_t n = data.samples.size();
  const auto bs = std::min(n, static_cast<std::size_t>(batch_size));
  std::vector<std::size_t> order(n);
  std::size_t cursor = n;
  int epoch = 0;
  for (int step = 0; step < steps; ++step) {
    if (cursor + bs > n) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng shuffle = Rng::substream(seed, "translators.shuffle", static_cast<std::uint64_t>(epoch++));
      shuffle.shuffle(order);
      cursor = 0;
    }
    std::vector<ag::Matrix> batch_latents;
    for (const auto& m : latents) {
      ag::Matrix sub(static_cast<ag::Index>(bs) * l, m.cols());
      for (std::size_t i = 0; i < bs; ++i)
        sub.middleRows(static_cast<ag::Index>(i) * l, l) =
            m.middleRows(static_cast<ag::Index>(order[cursor + i]) * l, l);
      batch_latents.push_back(std::move(sub));
    }
    cursor += bs;
    ag::Var loss = pair_rec_loss(model, batch_latents);
    fit.history.push_back(loss.scalar());
    opt.zero_grad();
    ag::backward(loss);
    opt.step();
  }
  round_parameters(params);
  ag::NoGradGuard g;
  fit.final = pair_rec_loss(model, latents).scalar();
  return fit;
}

std::vector<double> predict_protocol(const CyinModel& model, const Dataset& data,
                                     const Protocol& protocol, std::uint64_t mask_seed) {
  check_data(model, data);
  const std::size_t n = data.samples.size();
  const PresenceMask mask = protocol.make_mask(n, model.num_modalities(), mask_seed);
  std::vector<double> preds;
  preds.reserve(n);
  constexpr std::size_t chunk = 256;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = std::min(n, begin + chunk);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const Matrix out = model.predict(make_batch(data, idx), mask.rows(begin, end));
    for (ag::Index i = 0; i < out.rows(); ++i) {
      if (model.shape().task == Task::Regression) {
        preds.push_back(out(i, 0));
      } else {
        ag::Index arg = 0;
        out.row(i).maxCoeff(&arg);
        preds.push_back(static_cast<double>(arg));
      }
    }
  }
  return preds;
}

MetricReport evaluate(const CyinModel& model, const Dataset& data, const Protocol& protocol,
                      std::uint64_t mask_seed) {
  const std::vector<double> preds = predict_protocol(model, data, protocol, mask_seed);
  std::vector<double> labels;
  for (const auto& s : data.samples) labels.push_back(s.label);
  MetricReport r = compute_metrics(model.shape().task, preds, labels, model.shape().num_classes);
  r.protocol = protocol.to_string();
  r.seed = mask_seed;
  return r;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction) {
  const std::size_t n = data.samples.size();
  const auto test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (test == 0 || test >= n)
    throw ValidationError("test fraction leaves an empty train or test split for " +
                          std::to_string(n) + " samples");
  return {subset(data, 0, n - test), subset(data, n - test, n)};
}

namespace {

constexpr char kMagic[4] = {'C', 'Y', 'C', 'K'};

void put_string(io::ByteWriter& w, const std::string& s) {
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
  w.bytes(s);
}

std::string get_string(io::ByteReader& r, const char* field) {
  const auto len = r.uint<std::uint32_t>(field);
  return r.bytes(len, field);
}

}  // namespace

void save_checkpoint(const CyinModel& model, const DatasetSpec& data_spec,
                     const std::filesystem::path& path) {
  io::ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.uint<std::uint16_t>(kCheckpointVersion);
  w.uint<std::uint64_t>(model.config().hash());
  put_string(w, model.config().to_text());
  put_string(w, data_spec.to_metadata());
  const nn::ParamList params = model.parameters();
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.uint<std::uint16_t>(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name);
    const Matrix& v = p.var.value();
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(v.rows()));
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(v.cols()));
    for (ag::Index i = 0; i < v.rows(); ++i)
      for (ag::Index j = 0; j < v.cols(); ++j) w.f32(static_cast<float>(v(i, j)));
  }
  io::write_file(path.string(), w.data());
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  const std::vector<char> bytes = io::read_file(path.string());
  io::ByteReader r(bytes.data(), bytes.size(), "checkpoint " + path.string());
  if (r.bytes(4, "magic") != std::string_view(kMagic, 4))
    throw ParseError("checkpoint " + path.string() + ": bad magic bytes (expected CYCK)");
  const auto version = r.uint<std::uint16_t>("version");
  if (version != kCheckpointVersion)
    throw IncompatibleCheckpointError("checkpoint " + path.string() + " has format version " +
                                      std::to_string(version) + ", expected " +
                                      std::to_string(kCheckpointVersion));
  const auto stored_hash = r.uint<std::uint64_t>("config hash");
  LoadedModel out;
  out.config = ExperimentConfig::parse(get_string(r, "config text"));
  if (out.config.hash() != stored_hash)
    throw IncompatibleCheckpointError("checkpoint " + path.string() +
                                      ": embedded config does not match its hash");
  out.data_spec = DatasetSpec::from_metadata(get_string(r, "data spec"));
  out.model.emplace(out.config, DataShape::of(out.data_spec));

  const nn::ParamList params = out.model->parameters();
  const auto count = r.uint<std::uint32_t>("parameter count");
  if (count != params.size())
    throw IncompatibleCheckpointError("checkpoint holds " + std::to_string(count) +
                                      " tensors, the model has " + std::to_string(params.size()));
  for (auto p : params) {
    const auto name_len = r.uint<std::uint16_t>("tensor name length");
    const std::string name = r.bytes(name_len, "tensor name");
    if (name != p.name)
      throw IncompatibleCheckpointError("checkpoint tensor '" + name + "' where '" + p.name +
                                        "' was expected");
    const auto rows = r.uint<std::uint32_t>("tensor rows");
    const auto cols = r.uint<std::uint32_t>("tensor cols");
    Matrix& v = p.var.mutable_value();
    if (rows != v.rows() || cols != v.cols())
      throw IncompatibleCheckpointError("checkpoint tensor '" + name + "' has shape " +
                                        std::to_string(rows) + "x" + std::to_string(cols) +
                                        ", expected " + std::to_string(v.rows()) + "x" +
                                        std::to_string(v.cols()));
    r.need(static_cast<std::size_t>(rows) * cols * 4, name);
    for (ag::Index i = 0; i < v.rows(); ++i)
      for (ag::Index j = 0; j < v.cols(); ++j) v(i, j) = r.f32(name);
  }
  if (r.remaining() != 0)
    throw ParseError("checkpoint " + path.string() + ": " + std::to_string(r.remaining()) +
                     " trailing bytes");
  return out;
}

LoadedModel load_checkpoint(const std::filesystem::path& path, const ExperimentConfig& expected) {
  LoadedModel m = load_checkpoint(path);
  if (m.config.hash() != expected.hash())
    throw IncompatibleCheckpointError("checkpoint " + path.string() + " was trained with config hash " +
                                      std::to_string(m.config.hash()) + ", expected " +
                                      std::to_string(expected.hash()));
  return m;
}

}  // namespace cyin
