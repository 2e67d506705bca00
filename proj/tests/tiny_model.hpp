#pragma once

#include "cyin/config.hpp"
#include "cyin/data_synth.hpp"

namespace cyin::fixtures {

inline ExperimentConfig tiny_config(std::uint64_t seed = 3) {
  ExperimentConfig c;
  c.rep_dim = 6;
  c.mixing = MixingKind::Attention;
  c.ib = IBConfig{4, 8, 16.0};
  c.translation.num_blocks = 2;
  c.translation.widths = {4, 2};
  c.fusion.dim = 4;
  c.fusion.num_heads = 2;
  c.fusion.num_layers = 1;
  c.fusion.ff_hidden = 8;
  c.fusion.head_hidden = 6;
  c.epochs = 4;
  c.batch_size = 16;
  c.lr_encoder = 1e-3;
  c.stage_split = 0.5;
  c.seed = seed;
  return c;
}

inline DatasetSpec tiny_spec(Task task = Task::Regression, std::size_t n = 48) {
  DatasetSpec s;
  s.num_modalities = 3;
  s.seq_len = 3;
  s.feat_dims = {5, 4, 3};
  s.latent_dim = 3;
  s.task = task;
  s.num_classes = task == Task::Classification ? 3 : 0;
  s.num_samples = n;
  s.seed = 11;
  return s;
}

}  // namespace cyin::fixtures
