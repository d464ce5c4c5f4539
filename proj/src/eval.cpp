#include "pel/eval.hpp"

#include <fmt/format.h>
#include <fstream>
#include <sstream>

#include "pel/errors.hpp"
#include "pel/train.hpp"

namespace pel {
namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

}  // namespace

std::vector<PerturbDelta> perturb_eval(const PelNetwork& net, std::span<const ForgerySample> samples,
                                       std::span<const PerturbSpec> specs, const EvalReport& clean,
                                       std::uint64_t seed) {
  std::vector<PerturbDelta> rows;
  for (std::size_t p = 0; p < specs.size(); ++p) {
    std::vector<ForgerySample> perturbed(samples.begin(), samples.end());
    for (auto& s : perturbed) s.image = perturb(s.image, specs[p], mix(mix(seed, p), s.seed));
    const EvalReport r = evaluate(net, perturbed);
    rows.push_back(PerturbDelta{to_string(specs[p].kind), specs[p].strength, r.acc, r.auc, r.acc - clean.acc,
                                r.auc - clean.auc});
  }
  return rows;
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
  auto out = open_out(path);
  out << "id,label,score\n";
  for (const auto& s : report.samples) out << fmt::format("{},{},{:.17g}\n", s.id, s.label, s.score);
  out << fmt::format("aggregate,acc,{:.17g}\n", report.acc);
  out << fmt::format("aggregate,auc,{:.17g}\n", report.auc);
  out << fmt::format("aggregate,eer,{:.17g}\n", report.eer);
}

EvalReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open report " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "id,label,score") throw InputError("bad report header in " + path.string());
  EvalReport r;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
      throw InputError("malformed report row '" + line + "'");
    }
    try {
      if (a == "aggregate") {
        const double v = std::stod(c);
        if (b == "acc") r.acc = v;
        else if (b == "auc") r.auc = v;
        else if (b == "eer") r.eer = v;
        else throw InputError("unknown aggregate '" + b + "'");
      } else {
        r.samples.push_back(ScoredSample{a, std::stoi(b), std::stod(c)});
      }
    } catch (const std::logic_error&) {
      throw InputError("malformed report row '" + line + "'");
    }
  }
  return r;
}

void write_perturb_csv(const std::filesystem::path& path, std::span<const PerturbDelta> rows) {
  auto out = open_out(path);
  out << "kind,strength,acc,auc,delta_acc,delta_auc\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.kind, r.strength, r.acc, r.auc, r.delta_acc,
                       r.delta_auc);
  }
}

const std::array<AblationVariant, 8>& ablation_variants() {
  static const std::array<AblationVariant, 8> variants = {{
      {"rgb", true, false, false, false},
      {"freq", false, true, false, false},
      {"rgb_self_mutual", true, false, true, true},
      {"freq_self_mutual", false, true, true, true},
      {"two_stream", true, true, false, false},
      {"two_stream_self", true, true, true, false},
      {"two_stream_mutual", true, true, false, true},
      {"pel", true, true, true, true},
  }};
  return variants;
}

NetworkConfig apply_variant(NetworkConfig cfg, const AblationVariant& v) {
  cfg.use_rgb = v.rgb;
  cfg.use_freq = v.freq;
  cfg.use_self = v.self;
  cfg.use_mutual = v.mutual;
  cfg.validate();
  return cfg;
}

std::vector<AblationRow> run_ablation(const NetworkConfig& base, std::uint64_t seed,
                                      const std::function<void(const std::string&)>& progress) {
  NetworkConfig seeded = base;
  seeded.seed = seed;
  const Dataset data = make_dataset(seeded);
  std::vector<AblationRow> rows;
  for (const AblationVariant& v : ablation_variants()) {
    const NetworkConfig cfg = apply_variant(seeded, v);
    PelNetwork net = make_network(cfg, data);
    Trainer trainer(net, data);
    trainer.run(cfg.epochs);
    const EvalReport report = evaluate(net, data.test);
    rows.push_back(AblationRow{v, report.acc, report.auc});
    if (progress) progress(fmt::format("{}: acc {:.4f} auc {:.4f}", v.name, report.acc, report.auc));
  }
  return rows;
}

void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows) {
  auto out = open_out(path);
  out << "variant,rgb,freq,self,mutual,acc,auc\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{:.17g},{:.17g}\n", r.variant.name, int(r.variant.rgb), int(r.variant.freq),
                       int(r.variant.self), int(r.variant.mutual), r.acc, r.auc);
  }
}

}  // namespace pel
