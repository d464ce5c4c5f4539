#include "pel/config.hpp"

#include <charconv>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <fstream>
#include <map>
#include <sstream>

#include "pel/errors.hpp"
#include "pel/freq.hpp"

namespace pel {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t parse_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a non-negative integer", key, v));
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const std::string s(v);
    const double out = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, v));
  }
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_size(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError(fmt::format("{}: empty list", key));
  return out;
}

std::string join(const std::vector<std::size_t>& v) { return fmt::format("{}", fmt::join(v, ",")); }

std::size_t halve_up(std::size_t extent, std::size_t stride) { return (extent + stride - 1) / stride; }

}  // namespace

std::vector<std::size_t> rgb_extents(const NetworkConfig& cfg) {
  std::vector<std::size_t> out;
  std::size_t e = cfg.input_size;
  for (std::size_t b = 0; b < cfg.num_blocks; ++b) {
    e = halve_up(halve_up(e, b == 0 ? cfg.rgb_first_stride : 1), 2);
    out.push_back(e);
  }
  return out;
}

std::vector<std::size_t> freq_extents(const NetworkConfig& cfg) {
  std::vector<std::size_t> out;
  std::size_t e = window_steps(cfg.input_size, cfg.window_stride);
  for (std::size_t b = 0; b < cfg.num_blocks; ++b) {
    e = halve_up(halve_up(e, b == 0 ? cfg.freq_first_stride : 1), 2);
    out.push_back(e);
  }
  return out;
}

void NetworkConfig::validate() const {
  if (num_blocks < 3) throw ConfigError(fmt::format("num_blocks must be >= 3, got {}", num_blocks));
  if (widths.size() != num_blocks) {
    throw ConfigError(fmt::format("widths lists {} entries for {} blocks", widths.size(), num_blocks));
  }
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("widths must be positive");
  }
  if (input_size < 16 || input_size % 2 != 0) {
    throw ConfigError(fmt::format("input_size must be even and >= 16, got {}", input_size));
  }
  if (window_stride == 0) throw ConfigError("window_stride must be positive");
  for (std::size_t s : {rgb_first_stride, freq_first_stride}) {
    if (s != 1 && s != 2) throw ConfigError("first-conv strides must be 1 or 2");
  }
  if (filter_kernels.empty()) throw ConfigError("filter_kernels must not be empty");
  for (std::size_t k : filter_kernels) {
    if (k != 3 && k != 5 && k != 7) throw ConfigError(fmt::format("filter kernel must be 3, 5 or 7, got {}", k));
  }
  if (reduction_ratio == 0) throw ConfigError("reduction_ratio must be positive");
  if (!use_rgb && !use_freq) throw ConfigError("at least one of use_rgb / use_freq must be true");
  if (!(learning_rate >= 0.0) || !(weight_decay >= 0.0)) throw ConfigError("learning_rate and weight_decay must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  for (std::size_t n : {train_samples, val_samples, test_samples}) {
    if (n < 2 || n % 2 != 0) throw ConfigError(fmt::format("dataset split sizes must be even and >= 2, got {}", n));
  }
  if (use_rgb && use_freq && use_mutual) {
    const auto plan = placement_plan(num_blocks);
    const auto r = rgb_extents(*this);
    const auto f = freq_extents(*this);
    for (std::size_t b = 0; b < num_blocks; ++b) {
      if (plan[b].mutual && r[b] != f[b]) {
        throw ConfigError(fmt::format("streams misaligned at mutual site {}: rgb {} vs freq {}", b + 1, r[b], f[b]));
      }
    }
  }
}

std::string NetworkConfig::to_text() const {
  std::string out;
  auto line = [&out](std::string_view key, const std::string& value) { out += fmt::format("{} = {}\n", key, value); };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  line("num_blocks", std::to_string(num_blocks));
  line("widths", join(widths));
  line("input_size", std::to_string(input_size));
  line("window_stride", std::to_string(window_stride));
  line("rgb_first_stride", std::to_string(rgb_first_stride));
  line("freq_first_stride", std::to_string(freq_first_stride));
  line("filter_kind", filter_kind == FilterKind::median ? "median" : "mean");
  line("filter_kernels", join(filter_kernels));
  line("reduction_ratio", std::to_string(reduction_ratio));
  line("use_rgb", flag(use_rgb));
  line("use_freq", flag(use_freq));
  line("use_self", flag(use_self));
  line("use_mutual", flag(use_mutual));
  line("use_noise", flag(use_noise));
  line("learning_rate", fmt::format("{}", learning_rate));
  line("weight_decay", fmt::format("{}", weight_decay));
  line("batch_size", std::to_string(batch_size));
  line("epochs", std::to_string(epochs));
  line("seed", std::to_string(seed));
  line("train_samples", std::to_string(train_samples));
  line("val_samples", std::to_string(val_samples));
  line("test_samples", std::to_string(test_samples));
  return out;
}

NetworkConfig NetworkConfig::parse(std::string_view text) {
  NetworkConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("line {}: expected 'key = value'", line_no));
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view v = trim(line.substr(eq + 1));
    if (v.empty()) throw ConfigError(fmt::format("line {}: missing value for '{}'", line_no, key));

    if (key == "num_blocks") cfg.num_blocks = parse_size(key, v);
    else if (key == "widths") cfg.widths = parse_list(key, v);
    else if (key == "input_size") cfg.input_size = parse_size(key, v);
    else if (key == "window_stride") cfg.window_stride = parse_size(key, v);
    else if (key == "rgb_first_stride") cfg.rgb_first_stride = parse_size(key, v);
    else if (key == "freq_first_stride") cfg.freq_first_stride = parse_size(key, v);
    else if (key == "filter_kind") {
      if (v == "median") cfg.filter_kind = FilterKind::median;
      else if (v == "mean") cfg.filter_kind = FilterKind::mean;
      else throw ConfigError(fmt::format("filter_kind: unknown filter '{}'", v));
    }
    else if (key == "filter_kernels") cfg.filter_kernels = parse_list(key, v);
    else if (key == "reduction_ratio") cfg.reduction_ratio = parse_size(key, v);
    else if (key == "use_rgb") cfg.use_rgb = parse_bool(key, v);
    else if (key == "use_freq") cfg.use_freq = parse_bool(key, v);
    else if (key == "use_self") cfg.use_self = parse_bool(key, v);
    else if (key == "use_mutual") cfg.use_mutual = parse_bool(key, v);
    else if (key == "use_noise") cfg.use_noise = parse_bool(key, v);
    else if (key == "learning_rate") cfg.learning_rate = parse_real(key, v);
    else if (key == "weight_decay") cfg.weight_decay = parse_real(key, v);
    else if (key == "batch_size") cfg.batch_size = parse_size(key, v);
    else if (key == "epochs") cfg.epochs = parse_size(key, v);
    else if (key == "seed") cfg.seed = parse_size(key, v);
    else if (key == "train_samples") cfg.train_samples = parse_size(key, v);
    else if (key == "val_samples") cfg.val_samples = parse_size(key, v);
    else if (key == "test_samples") cfg.test_samples = parse_size(key, v);
    else throw ConfigError(fmt::format("line {}: unknown key '{}'", line_no, key));
  }
  cfg.validate();
  return cfg;
}

NetworkConfig NetworkConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void NetworkConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write config " + path.string());
  out << to_text();
}

}  // namespace pel
