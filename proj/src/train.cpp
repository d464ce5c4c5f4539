#include "pel/train.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <random>

#include "pel/errors.hpp"

namespace pel {

std::string EpochLog::csv_line() const {
  return fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}", epoch, loss, train_acc, val_acc, val_auc);
}

Dataset make_dataset(const NetworkConfig& cfg) {
  return build_dataset(cfg.train_samples, cfg.val_samples, cfg.test_samples, cfg.seed, cfg.input_size);
}

PelNetwork make_network(const NetworkConfig& cfg, const Dataset& data) {
  PelNetwork net(cfg);
  if (cfg.use_freq) {
    std::vector<RgbImage> images;
    images.reserve(data.train.size());
    for (const auto& s : data.train) images.push_back(s.image);
    net.set_freq_stats(compute_freq_stats(images, cfg.window_stride));
  }
  return net;
}

EvalReport evaluate(const PelNetwork& net, std::span<const ForgerySample> samples) {
  std::vector<const RgbImage*> images;
  images.reserve(samples.size());
  for (const auto& s : samples) images.push_back(&s.image);
  const auto logits = net.predict_logits(images);
  std::vector<ScoredSample> scored;
  scored.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    scored.push_back(ScoredSample{samples[i].id, samples[i].label, sigmoid_scalar(logits[i])});
  }
  return EvalReport::from_samples(std::move(scored));
}

Trainer::Trainer(PelNetwork& net, const Dataset& data)
    : net_(net),
      data_(data),
      adam_(net.parameters(), AdamConfig{.learning_rate = net.config().learning_rate,
                                         .weight_decay = net.config().weight_decay}) {
  if (data_.train.empty()) throw InputError("training set is empty");
}

EpochLog Trainer::run_epoch() {
  const NetworkConfig& cfg = net_.config();
  const std::size_t epoch = epoch_ + 1;
  std::vector<std::size_t> order(data_.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);

  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<const RgbImage*> images;
  std::vector<int> labels;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t count = std::min(cfg.batch_size, order.size() - start);
    images.clear();
    labels.clear();
    for (std::size_t i = start; i < start + count; ++i) {
      images.push_back(&data_.train[order[i]].image);
      labels.push_back(data_.train[order[i]].label);
    }
    Graph g;
    const Tensor logits = net_.forward(g, net_.make_batch(images));
    const Tensor loss = bce_loss(g, logits, labels);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw TrainingError(fmt::format("loss diverged to {} at epoch {}, step {}", value, epoch, adam_.steps() + 1));
    }
    loss_sum += value * static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
      if ((logits.data()[i] >= 0.0 ? 1 : 0) == labels[i]) ++correct;
    }
    adam_.zero_grad();
    g.backward(loss);
    adam_.step();
  }

  const EvalReport val = evaluate(net_, data_.val);
  epoch_ = epoch;
  return EpochLog{epoch, loss_sum / static_cast<double>(order.size()),
                  static_cast<double>(correct) / static_cast<double>(order.size()), val.acc, val.auc};
}

std::vector<EpochLog> Trainer::run(std::size_t last_epoch, const std::function<void(const EpochLog&)>& on_epoch) {
  std::vector<EpochLog> logs;
  while (epoch_ < last_epoch) {
    logs.push_back(run_epoch());
    if (on_epoch) on_epoch(logs.back());
  }
  return logs;
}

}  // namespace pel
