#include "epxhop/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "epxhop/error.hpp"

namespace epxhop {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw Error(Errc::invalid_config,
              "config key '" + std::string(key) + "': '" + std::string(value) + "' is not " + std::string(expected));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, value, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  bad_value(key, value, "on/off");
}

std::vector<int> parse_ints(std::string_view key, std::string_view value) {
  std::vector<int> out;
  while (!value.empty()) {
    const auto comma = value.find(',');
    out.push_back(parse_number<int>(key, trim(value.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return out;
}

std::array<int, 4> parse_four(std::string_view key, std::string_view value) {
  const auto v = parse_ints(key, value);
  if (v.size() != 4) bad_value(key, value, "a list of four channel counts");
  return {v[0], v[1], v[2], v[3]};
}

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string join(std::span<const int> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;

void add_boost_keys(std::map<std::string, Setter, std::less<>>& keys, const std::string& prefix,
                    BoostParams RunConfig::*member) {
  keys[prefix + "_rounds"] = [member](RunConfig& c, auto k, auto v) { (c.*member).rounds = parse_number<int>(k, v); };
  keys[prefix + "_max_depth"] = [member](RunConfig& c, auto k, auto v) { (c.*member).max_depth = parse_number<int>(k, v); };
  keys[prefix + "_learning_rate"] = [member](RunConfig& c, auto k, auto v) { (c.*member).learning_rate = parse_number<double>(k, v); };
  keys[prefix + "_min_leaf"] = [member](RunConfig& c, auto k, auto v) { (c.*member).min_leaf_samples = parse_number<int>(k, v); };
  keys[prefix + "_subsample"] = [member](RunConfig& c, auto k, auto v) { (c.*member).subsample = parse_number<double>(k, v); };
  keys[prefix + "_colsample"] = [member](RunConfig& c, auto k, auto v) { (c.*member).colsample = parse_number<double>(k, v); };
  keys[prefix + "_lambda"] = [member](RunConfig& c, auto k, auto v) { (c.*member).lambda = parse_number<double>(k, v); };
  keys[prefix + "_max_bins"] = [member](RunConfig& c, auto k, auto v) { (c.*member).max_bins = parse_number<int>(k, v); };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const auto table = [] {
    std::map<std::string, Setter, std::less<>> k;
    k["data_dir"] = [](RunConfig& c, auto, auto v) { c.data_dir = std::string(v); };
    k["output_dir"] = [](RunConfig& c, auto, auto v) { c.output_dir = std::string(v); };
    k["seed"] = [](RunConfig& c, auto key, auto v) { c.seed = parse_number<std::uint64_t>(key, v); };
    k["mode"] = [](RunConfig& c, auto key, auto v) {
      if (v == "fixed_k") c.mode = SelectionMode::fixed_k;
      else if (v == "threshold") c.mode = SelectionMode::threshold;
      else bad_value(key, v, "threshold or fixed_k");
    };
    k["th1"] = [](RunConfig& c, auto key, auto v) { c.th1 = parse_number<double>(key, v); };
    k["th2"] = [](RunConfig& c, auto key, auto v) { c.th2 = parse_number<double>(key, v); };
    k["p_channels"] = [](RunConfig& c, auto key, auto v) { c.p_channels = parse_four(key, v); };
    k["q_channels"] = [](RunConfig& c, auto key, auto v) { c.q_channels = parse_four(key, v); };
    k["saab_bias"] = [](RunConfig& c, auto key, auto v) { c.saab_bias = parse_bool(key, v); };
    k["saab_fit_images"] = [](RunConfig& c, auto key, auto v) { c.saab_fit_images = parse_number<std::size_t>(key, v); };
    add_boost_keys(k, "pixel", &RunConfig::pixel_params);
    add_boost_keys(k, "meta", &RunConfig::meta_params);
    k["max_pixel_samples"] = [](RunConfig& c, auto key, auto v) { c.max_pixel_samples = parse_number<std::size_t>(key, v); };
    k["sls_mode"] = [](RunConfig& c, auto key, auto v) {
      if (v == "full") c.sls_mode = SlsMode::full;
      else if (v == "intra_hop") c.sls_mode = SlsMode::intra_hop;
      else bad_value(key, v, "full or intra_hop");
    };
    k["num_iter_stage1"] = [](RunConfig& c, auto key, auto v) { c.num_iter_stage1 = parse_number<int>(key, v); };
    k["num_iter_stage2"] = [](RunConfig& c, auto key, auto v) { c.num_iter_stage2 = parse_number<int>(key, v); };
    k["augment"] = [](RunConfig& c, auto key, auto v) { c.augment = parse_bool(key, v); };
    k["channel_ablation"] = [](RunConfig& c, auto key, auto v) { c.channel_ablation = parse_bool(key, v); };
    k["resolve_top_k"] = [](RunConfig& c, auto key, auto v) {
      c.resolve_top_k = v == "all" ? -1 : parse_number<int>(key, v);
    };
    k["classes"] = [](RunConfig& c, auto key, auto v) { c.classes = v == "all" ? std::vector<int>{} : parse_ints(key, v); };
    k["train_per_class"] = [](RunConfig& c, auto key, auto v) { c.train_per_class = parse_number<std::size_t>(key, v); };
    k["test_per_class"] = [](RunConfig& c, auto key, auto v) { c.test_per_class = parse_number<std::size_t>(key, v); };
    k["feature_cache_mb"] = [](RunConfig& c, auto key, auto v) { c.feature_cache_mb = parse_number<std::size_t>(key, v); };
    return k;
  }();
  return table;
}

void check(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(Errc::invalid_config, msg); };
  if (!(c.th2 > 0.0 && c.th2 <= c.th1 && c.th1 < 1.0)) fail("thresholds must satisfy 0 < th2 <= th1 < 1");
  for (const auto* counts : {&c.p_channels, &c.q_channels})
    for (int k : *counts)
      if (k <= 0) fail("channel counts must be positive");
  if (c.num_iter_stage1 < 1 || c.num_iter_stage2 < 1) fail("num_iter values must be at least 1");
  if (c.resolve_top_k < -1) fail("resolve_top_k must be -1 (all) or nonnegative");
  std::set<int> seen;
  for (int cls : c.classes) {
    if (cls < 0 || cls >= 10) fail("class " + std::to_string(cls) + " outside [0, 10)");
    if (!seen.insert(cls).second) fail("class " + std::to_string(cls) + " listed twice");
  }
  if (c.classes.size() == 1) fail("at least two classes are required");
  for (const auto* p : {&c.pixel_params, &c.meta_params}) {
    if (p->rounds < 0 || p->max_depth < 0 || p->learning_rate <= 0 || p->min_leaf_samples < 1 ||
        p->subsample <= 0 || p->subsample > 1 || p->colsample <= 0 || p->colsample > 1 || p->lambda < 0 ||
        p->max_bins < 2 || p->max_bins > 256) {
      fail("classifier parameters out of range");
    }
  }
}

}  // namespace

RunConfig parse_run_config(std::string_view text) {
  RunConfig config;
  std::set<std::string, std::less<>> seen;
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
    if (eq == std::string_view::npos) {
      throw Error(Errc::invalid_config, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw Error(Errc::unknown_config_key,
                  "config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
    if (!seen.insert(std::string(key)).second) {
      throw Error(Errc::invalid_config, "config key '" + std::string(key) + "' set twice");
    }
    it->second(config, key, value);
  }
  check(config);
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::invalid_config, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string format_run_config(const RunConfig& c) {
  std::ostringstream out;
  out << "data_dir = " << c.data_dir.string() << '\n'
      << "output_dir = " << c.output_dir.string() << '\n'
      << "seed = " << c.seed << '\n'
      << "mode = " << (c.mode == SelectionMode::fixed_k ? "fixed_k" : "threshold") << '\n'
      << "th1 = " << num(c.th1) << '\n'
      << "th2 = " << num(c.th2) << '\n'
      << "p_channels = " << join(c.p_channels) << '\n'
      << "q_channels = " << join(c.q_channels) << '\n'
      << "saab_bias = " << (c.saab_bias ? "on" : "off") << '\n'
      << "saab_fit_images = " << c.saab_fit_images << '\n';
  for (const auto& [prefix, p] : {std::pair{"pixel", &c.pixel_params}, std::pair{"meta", &c.meta_params}}) {
    out << prefix << "_rounds = " << p->rounds << '\n'
        << prefix << "_max_depth = " << p->max_depth << '\n'
        << prefix << "_learning_rate = " << num(p->learning_rate) << '\n'
        << prefix << "_min_leaf = " << p->min_leaf_samples << '\n'
        << prefix << "_subsample = " << num(p->subsample) << '\n'
        << prefix << "_colsample = " << num(p->colsample) << '\n'
        << prefix << "_lambda = " << num(p->lambda) << '\n'
        << prefix << "_max_bins = " << p->max_bins << '\n';
  }
  out << "max_pixel_samples = " << c.max_pixel_samples << '\n'
      << "sls_mode = " << (c.sls_mode == SlsMode::full ? "full" : "intra_hop") << '\n'
      << "num_iter_stage1 = " << c.num_iter_stage1 << '\n'
      << "num_iter_stage2 = " << c.num_iter_stage2 << '\n'
      << "augment = " << (c.augment ? "on" : "off") << '\n'
      << "channel_ablation = " << (c.channel_ablation ? "on" : "off") << '\n'
      << "resolve_top_k = " << (c.resolve_top_k < 0 ? std::string("all") : std::to_string(c.resolve_top_k)) << '\n'
      << "classes = " << (c.classes.empty() ? std::string("all") : join(c.classes)) << '\n'
      << "train_per_class = " << c.train_per_class << '\n'
      << "test_per_class = " << c.test_per_class << '\n'
      << "feature_cache_mb = " << c.feature_cache_mb << '\n';
  return out.str();
}

std::vector<HopConfig> hop_configs(const RunConfig& config, int channel) {
  return default_hop_configs(channel == 0 ? config.p_channels : config.q_channels, config.th1, config.th2);
}

}  // namespace epxhop
