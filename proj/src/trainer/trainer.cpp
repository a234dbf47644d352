// SPDX-License-Identifier: Apache-2.0
#include "lenctl/trainer/trainer.hpp"

#include "lenctl/autodiff/optimizer.hpp"
#include "lenctl/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

namespace lenctl {

namespace {

struct Prepared {
  std::vector<TeacherForcingPair> pairs;
  std::vector<LengthCode> codes;
  std::vector<const ConditionVector*> conditions;
};

Prepared prepare(const Model& model, std::span<const Sample> samples) {
  Prepared out;
  std::size_t dropped = 0;
  const int max_seq = model.decoder.config().max_seq_len;
  for (const Sample& s : samples) {
    const int k = model.control == ControlMode::tokens ? s.length : discretize_duration(s.duration);
    if (s.tokens.empty() || static_cast<int>(s.tokens.size()) + 1 > max_seq || k < 1 ||
        k > model.max_length()) {
      ++dropped;
      continue;
    }
    out.pairs.push_back(make_teacher_forcing_pair(s.tokens));
    out.codes.push_back(sample_code(model, s));
    out.conditions.push_back(&s.condition);
  }
  if (dropped > 0) {
    warn(std::to_string(dropped) + " sample(s) dropped: empty, longer than max_seq_len, or "
         "outside the length code range");
  }
  return out;
}

/// Mean token cross-entropy of one packed forward over the listed samples.
ad::Tensor batch_loss(const Model& model, const Prepared& data, std::span<const std::size_t> order) {
  std::vector<SequenceInput> batch;
  std::vector<int> targets;
  for (std::size_t i : order) {
    const auto& pair = data.pairs[i];
    batch.push_back({pair.inputs, data.conditions[i], &data.codes[i]});
    targets.insert(targets.end(), pair.targets.begin(), pair.targets.end());
  }
  return ad::softmax_cross_entropy(model.decoder.forward_packed(batch), targets);
}

double prepared_loss(const Model& model, const Prepared& data, int batch_size) {
  double total = 0.0;
  std::size_t tokens = 0;
  std::vector<std::size_t> order(data.pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(batch_size)) {
    const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(batch_size));
    std::size_t n = 0;
    for (std::size_t i = b; i < e; ++i) n += data.pairs[i].targets.size();
    const auto slice = std::span<const std::size_t>(order).subspan(b, e - b);
    total += batch_loss(model, data, slice).item() * static_cast<double>(n);
    tokens += n;
  }
  return tokens == 0 ? std::numeric_limits<double>::quiet_NaN()
                     : total / static_cast<double>(tokens);
}

}  // namespace

void validate(const TrainConfig& c) {
  if (c.epochs < 0 || c.batch_size < 1 || c.accumulation_steps < 1) {
    throw ConfigError("epochs must be >= 0, batch size and accumulation steps >= 1");
  }
  if (c.learning_rate < 0.0 || c.weight_decay < 0.0 || c.clip_norm < 0.0) {
    throw ConfigError("learning rate, weight decay and clip norm must be non-negative");
  }
}

TrainLog train(Model& model, const Vocabulary& corpus_vocab, std::span<const Sample> train_set,
               std::span<const Sample> heldout, const TrainConfig& config) {
  validate(config);
  if (corpus_vocab.hash() != model.vocab.hash()) {
    throw ContractError("corpus vocabulary " + corpus_vocab.hash() +
                        " does not match the model vocabulary " + model.vocab.hash());
  }
  const Prepared data = prepare(model, train_set);
  if (data.pairs.empty()) throw ContractError("no trainable samples");
  const Prepared held = heldout.empty() ? Prepared{} : prepare(model, heldout);

  std::vector<ad::Tensor> params = ad::tensors_of(model.decoder.parameters());
  ad::OptimizerState opt;
  opt.learning_rate = config.learning_rate;
  opt.weight_decay = config.weight_decay;
  for (auto& p : params) p.zero_grad();

  TrainLog log;
  std::vector<std::size_t> order(data.pairs.size());
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    ad::Rng rng(config.seed * 1000003ULL + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0, group_loss = 0.0;
    int micro = 0, group = 0;
    const std::size_t micro_batches = (order.size() + batch - 1) / batch;
    for (std::size_t m = 0; m < micro_batches; ++m) {
      const std::size_t b = m * batch;
      const auto slice =
          std::span<const std::size_t>(order).subspan(b, std::min(batch, order.size() - b));
      ad::Tape tape;
      {
        ad::TapeScope scope(tape);
        const ad::Tensor loss = batch_loss(model, data, slice);
        const double value = loss.item();
        epoch_loss += value;
        group_loss += value;
        tape.backward(ad::scale(loss, 1.0 / config.accumulation_steps));
      }
      ++micro;
      ++group;
      if (group == config.accumulation_steps || m + 1 == micro_batches) {
        if (config.clip_norm > 0.0) ad::clip_grad_norm(params, config.clip_norm);
        ad::adamw_step(params, opt);
        for (auto& p : params) p.zero_grad();
        log.steps.push_back({opt.step, epoch, group_loss / group, opt.learning_rate});
        group_loss = 0.0;
        group = 0;
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / micro;
    rec.heldout_loss = held.pairs.empty() ? std::numeric_limits<double>::quiet_NaN()
                                          : prepared_loss(model, held, 16);
    log.epochs.push_back(rec);
  }
  return log;
}

double evaluate_loss(const Model& model, std::span<const Sample> samples, int batch_size) {
  return prepared_loss(model, prepare(model, samples), batch_size);
}

void write_metrics_csv(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "step,epoch,loss,lr\n" << std::setprecision(17);
  for (const auto& s : log.steps) {
    out << s.step << ',' << s.epoch << ',' << s.loss << ',' << s.learning_rate << '\n';
  }
}

void write_epochs_csv(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,train_loss,heldout_loss\n" << std::setprecision(17);
  for (const auto& e : log.epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.heldout_loss << '\n';
  }
}

}  // namespace lenctl
