#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pel/config.hpp"
#include "pel/metrics.hpp"
#include "pel/network.hpp"
#include "pel/synth.hpp"

namespace pel {

/// Scores every sample after applying each perturbation and reports metrics
/// relative to the clean report. Sample i of perturbation p uses a seed
/// derived from (seed, p, sample seed).
std::vector<PerturbDelta> perturb_eval(const PelNetwork& net, std::span<const ForgerySample> samples,
                                       std::span<const PerturbSpec> specs, const EvalReport& clean,
                                       std::uint64_t seed);

/// `id,label,score` rows followed by `aggregate,<name>,<value>` footer rows
/// for acc, auc and eer.
void write_report_csv(const std::filesystem::path& path, const EvalReport& report);
EvalReport read_report_csv(const std::filesystem::path& path);

/// `kind,strength,acc,auc,delta_acc,delta_auc`
void write_perturb_csv(const std::filesystem::path& path, std::span<const PerturbDelta> rows);

struct AblationVariant {
  const char* name;
  bool rgb, freq, self, mutual;
};

/// The eight component combinations, in table order: rgb, freq,
/// rgb+modules, freq+modules, two-stream plain, +self, +mutual, full.
const std::array<AblationVariant, 8>& ablation_variants();
NetworkConfig apply_variant(NetworkConfig cfg, const AblationVariant& v);

struct AblationRow {
  AblationVariant variant;
  double acc = 0.0;
  double auc = 0.0;
};

/// Trains every variant from `base` with the given seed on one shared
/// dataset and evaluates it on the test split.
std::vector<AblationRow> run_ablation(const NetworkConfig& base, std::uint64_t seed,
                                      const std::function<void(const std::string&)>& progress = {});

/// `variant,rgb,freq,self,mutual,acc,auc`
void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows);

}  // namespace pel
