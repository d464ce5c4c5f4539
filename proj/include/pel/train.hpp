#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "pel/metrics.hpp"
#include "pel/network.hpp"
#include "pel/optim.hpp"
#include "pel/synth.hpp"

namespace pel {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double val_auc = 0.0;

  std::string csv_line() const;
  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

/// Header of the training-log CSV.
inline constexpr const char* kTrainLogHeader = "epoch,loss,train_acc,val_acc,val_auc";

/// Builds the synthetic dataset a config describes.
Dataset make_dataset(const NetworkConfig& cfg);

/// Constructs a network and fits its frequency statistics on the training
/// images.
PelNetwork make_network(const NetworkConfig& cfg, const Dataset& data);

/// Inference-mode scores sigmoid(logit) for every sample.
EvalReport evaluate(const PelNetwork& net, std::span<const ForgerySample> samples);

/// Minibatch Adam training. Epoch e shuffles with a generator seeded from
/// (config seed, e), so a run restored at an epoch boundary continues with
/// the same batches.
class Trainer {
 public:
  Trainer(PelNetwork& net, const Dataset& data);

  EpochLog run_epoch();
  /// Runs epochs until `epochs()` reaches `last_epoch`; calls `on_epoch`
  /// after each.
  std::vector<EpochLog> run(std::size_t last_epoch, const std::function<void(const EpochLog&)>& on_epoch = {});

  std::size_t epochs() const { return epoch_; }
  Adam& optimizer() { return adam_; }
  const Adam& optimizer() const { return adam_; }
  void restore_epoch(std::size_t epoch) { epoch_ = epoch; }

 private:
  PelNetwork& net_;
  const Dataset& data_;
  Adam adam_;
  std::size_t epoch_ = 0;
};

}  // namespace pel
