#include "pel/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fmt/format.h>
#include <fstream>
#include <set>

#include "pel/errors.hpp"

namespace pel {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw InputError("cannot write checkpoint " + path.string());
  }
  template <typename T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void reals(std::span<const double> v) { bytes(v.data(), v.size() * sizeof(double)); }
  void record(const std::string& name, const Tensor& t) {
    put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    bytes(name.data(), name.size());
    const Dims& d = t.dims();
    for (std::uint64_t e : {d.n, d.c, d.h, d.w}) put<std::uint64_t>(e);
    reals(t.data());
  }
  void finish() {
    out_.flush();
    if (!out_) throw InputError("write failed for " + path_.string());
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint " + path.string());
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw LoadError("truncated checkpoint " + path_.string());
  }
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string string(std::size_t n) {
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> reals(std::size_t n) {
    if (n > buf_.size() / sizeof(double)) throw LoadError("truncated checkpoint " + path_.string());
    need(n * sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), buf_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  std::filesystem::path path_;
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

struct Record {
  std::string name;
  Dims dims;
  std::vector<double> values;
};

Record read_record(Reader& r) {
  Record rec;
  rec.name = r.string(r.get<std::uint32_t>());
  rec.dims.n = r.get<std::uint64_t>();
  rec.dims.c = r.get<std::uint64_t>();
  rec.dims.h = r.get<std::uint64_t>();
  rec.dims.w = r.get<std::uint64_t>();
  rec.values = r.reals(rec.dims.count());
  return rec;
}

struct Contents {
  std::string config_text;
  std::vector<Record> params;
  std::vector<Record> buffers;
  std::optional<TrainingState> state;
};

Contents read_contents(const std::filesystem::path& path) {
  Reader r(path);
  Contents c;
  const std::string magic = r.string(sizeof(kCheckpointMagic));
  if (std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw LoadError("bad checkpoint magic in " + path.string());
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw LoadError(fmt::format("unsupported checkpoint version {} in {}", version, path.string()));
  }
  c.config_text = r.string(r.get<std::uint32_t>());
  const auto n_params = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_params; ++i) c.params.push_back(read_record(r));
  const auto n_buffers = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_buffers; ++i) c.buffers.push_back(read_record(r));
  const auto has_state = r.get<std::uint8_t>();
  if (has_state > 1) throw LoadError("corrupt training-state flag in " + path.string());
  if (has_state == 1) {
    TrainingState s;
    s.epoch = r.get<std::uint64_t>();
    s.steps = r.get<std::uint64_t>();
    for (const Record& p : c.params) {
      s.first_moments.push_back(r.reals(p.values.size()));
      s.second_moments.push_back(r.reals(p.values.size()));
    }
    c.state = std::move(s);
  }
  if (!r.at_end()) throw LoadError("trailing bytes in checkpoint " + path.string());
  return c;
}

void apply(PelNetwork& net, const Contents& c) {
  auto& params = net.parameters().all();
  std::set<std::string> seen;
  for (const Record& rec : c.params) {
    auto it = std::find_if(params.begin(), params.end(), [&](const Parameter& p) { return p.name == rec.name; });
    if (it == params.end()) throw LoadError("unknown parameter '" + rec.name + "' in checkpoint");
    if (it->tensor.dims() != rec.dims) {
      throw LoadError(fmt::format("shape mismatch for parameter '{}': checkpoint {} vs network {}", rec.name,
                                  to_string(rec.dims), to_string(it->tensor.dims())));
    }
    if (!seen.insert(rec.name).second) throw LoadError("duplicate parameter '" + rec.name + "' in checkpoint");
    std::copy(rec.values.begin(), rec.values.end(), it->tensor.data().begin());
  }
  for (const Parameter& p : params) {
    if (!seen.contains(p.name)) throw LoadError("checkpoint lacks parameter '" + p.name + "'");
  }
  FreqStats stats;
  for (const Record& rec : c.buffers) {
    if (rec.values.size() != stats.mean.size()) throw LoadError("bad buffer size for '" + rec.name + "'");
    if (rec.name == "freq.stats.mean") stats.mean = rec.values;
    else if (rec.name == "freq.stats.std") stats.stddev = rec.values;
    else throw LoadError("unknown buffer '" + rec.name + "' in checkpoint");
  }
  net.set_freq_stats(std::move(stats));
}

}  // namespace

void save_checkpoint(const PelNetwork& net, const std::filesystem::path& path, const TrainingState* state) {
  Writer w(path);
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string cfg = net.config().to_text();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg.size()));
  w.bytes(cfg.data(), cfg.size());
  const auto& params = net.parameters().all();
  w.put<std::uint64_t>(params.size());
  for (const Parameter& p : params) w.record(p.name, p.tensor);
  const FreqStats& stats = net.freq_stats();
  w.put<std::uint64_t>(2);
  w.record("freq.stats.mean", Tensor(Dims{1, stats.mean.size(), 1, 1}, stats.mean));
  w.record("freq.stats.std", Tensor(Dims{1, stats.stddev.size(), 1, 1}, stats.stddev));
  w.put<std::uint8_t>(state != nullptr ? 1 : 0);
  if (state != nullptr) {
    if (state->first_moments.size() != params.size() || state->second_moments.size() != params.size()) {
      throw UsageError("training state does not match the network's parameters");
    }
    w.put<std::uint64_t>(state->epoch);
    w.put<std::uint64_t>(state->steps);
    for (std::size_t k = 0; k < params.size(); ++k) {
      w.reals(state->first_moments[k]);
      w.reals(state->second_moments[k]);
    }
  }
  w.finish();
}

PelNetwork load_checkpoint(const std::filesystem::path& path, std::optional<TrainingState>* state) {
  Contents c = read_contents(path);
  NetworkConfig cfg;
  try {
    cfg = NetworkConfig::parse(c.config_text);
  } catch (const ConfigError& e) {
    throw LoadError(fmt::format("invalid config in checkpoint {}: {}", path.string(), e.what()));
  }
  PelNetwork net(cfg);
  apply(net, c);
  if (state != nullptr) *state = std::move(c.state);
  return net;
}

void load_parameters(PelNetwork& net, const std::filesystem::path& path) { apply(net, read_contents(path)); }

}  // namespace pel
