// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace lmtune::cli {

namespace {

using Setter = std::function<void(RunConfig&, std::string_view)>;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_value(std::string_view key, std::string_view value) {
  T v{};
  const char* end = value.data() + value.size();
  auto res = std::from_chars(value.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ConfigError("bad value '" + std::string(value) + "' for " + std::string(key));
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw ConfigError("bad boolean '" + std::string(value) + "' for " + std::string(key));
}

std::vector<std::int64_t> parse_list(std::string_view key, std::string_view value) {
  std::vector<std::int64_t> out;
  while (!value.empty()) {
    const std::size_t comma = value.find(',');
    out.push_back(parse_value<std::int64_t>(key, trim(value.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError("empty list for " + std::string(key));
  return out;
}

void add_range(std::map<std::string, Setter>& t, const std::string& name,
               IntRange SamplingSpec::*member) {
  const std::string base = "sampling." + name;
  t[base + "_min"] = [member, key = base + "_min"](RunConfig& c, std::string_view v) {
    (c.sampling.*member).lo = parse_value<int>(key, v);
  };
  t[base + "_max"] = [member, key = base + "_max"](RunConfig& c, std::string_view v) {
    (c.sampling.*member).hi = parse_value<int>(key, v);
  };
  t[base + "_mean"] = [member, key = base + "_mean"](RunConfig& c, std::string_view v) {
    (c.sampling.*member).mean = parse_value<double>(key, v);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    for (std::string_view field : device_field_names()) {
      const std::string key = "device." + std::string(field);
      t[key] = [key, field](RunConfig& c, std::string_view v) {
        set_device_field(c.device, field, parse_value<std::int64_t>(key, v));
      };
    }

    auto i64 = [&t](const std::string& key, std::int64_t SamplingSpec::*m) {
      t[key] = [key, m](RunConfig& c, std::string_view v) {
        c.sampling.*m = parse_value<std::int64_t>(key, v);
      };
    };
    t["sampling.num_tuples"] = [](RunConfig& c, std::string_view v) {
      c.sampling.num_tuples = parse_value<int>("sampling.num_tuples", v);
    };
    i64("sampling.max_instances", &SamplingSpec::max_instances);
    i64("sampling.in_h", &SamplingSpec::in_h);
    i64("sampling.in_w", &SamplingSpec::in_w);
    i64("sampling.out_h", &SamplingSpec::out_h);
    i64("sampling.out_w", &SamplingSpec::out_w);
    i64("sampling.max_wg_size", &SamplingSpec::max_wg_size);
    i64("sampling.min_grid_size", &SamplingSpec::min_grid_size);
    t["sampling.seed"] = [](RunConfig& c, std::string_view v) {
      c.sampling.seed = parse_value<std::uint64_t>("sampling.seed", v);
    };
    t["sampling.mode"] = [](RunConfig& c, std::string_view v) {
      if (v == "uniform") {
        c.sampling.mode = SamplingMode::kUniform;
      } else if (v == "matched-mean") {
        c.sampling.mode = SamplingMode::kMatchedMean;
      } else {
        throw ConfigError("bad value '" + std::string(v) +
                          "' for sampling.mode (uniform or matched-mean)");
      }
    };
    t["sampling.large_trip_counts"] = [](RunConfig& c, std::string_view v) {
      c.sampling.large_trip_counts = parse_list("sampling.large_trip_counts", v);
    };
    t["sampling.small_trip_counts"] = [](RunConfig& c, std::string_view v) {
      c.sampling.small_trip_counts = parse_list("sampling.small_trip_counts", v);
    };
    add_range(t, "radius", &SamplingSpec::radius);
    add_range(t, "comp_ilb", &SamplingSpec::comp_ilb);
    add_range(t, "comp_ep", &SamplingSpec::comp_ep);
    add_range(t, "coal_ilb", &SamplingSpec::coal_ilb);
    add_range(t, "coal_ep", &SamplingSpec::coal_ep);
    add_range(t, "uncoal_ilb", &SamplingSpec::uncoal_ilb);
    add_range(t, "uncoal_ep", &SamplingSpec::uncoal_ep);

    auto hp_int = [&t](const std::string& key, int Hyperparams::*m) {
      t[key] = [key, m](RunConfig& c, std::string_view v) {
        c.forest.*m = parse_value<int>(key, v);
      };
    };
    hp_int("forest.num_trees", &Hyperparams::num_trees);
    hp_int("forest.features_per_node", &Hyperparams::features_per_node);
    hp_int("forest.max_depth", &Hyperparams::max_depth);
    hp_int("forest.min_samples_leaf", &Hyperparams::min_samples_leaf);
    t["forest.bootstrap"] = [](RunConfig& c, std::string_view v) {
      c.forest.bootstrap = parse_bool("forest.bootstrap", v);
    };
    t["forest.seed"] = [](RunConfig& c, std::string_view v) {
      c.forest.seed = parse_value<std::uint64_t>("forest.seed", v);
    };
    t["forest.train_fraction"] = [](RunConfig& c, std::string_view v) {
      c.train_fraction = parse_value<double>("forest.train_fraction", v);
    };

    auto path = [&t](const std::string& key, std::filesystem::path Paths::*m) {
      t[key] = [m](RunConfig& c, std::string_view v) { c.paths.*m = std::string(v); };
    };
    path("paths.dataset", &Paths::dataset);
    path("paths.skip_log", &Paths::skip_log);
    path("paths.model", &Paths::model);
    path("paths.report", &Paths::report);
    path("paths.histogram", &Paths::histogram);
    path("paths.kernels", &Paths::kernels);

    t["run.threads"] = [](RunConfig& c, std::string_view v) {
      c.threads = parse_value<int>("run.threads", v);
    };
    return t;
  }();
  return table;
}

}  // namespace

std::filesystem::path Paths::effective_skip_log() const {
  if (!skip_log.empty()) return skip_log;
  return std::filesystem::path(dataset.string() + ".skipped");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  const auto& t = setters();
  auto it = t.find(std::string(key));
  if (it == t.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  it->second(config, trim(value));
}

void apply_config_text(RunConfig& config, const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    try {
      apply_setting(config, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    apply_config_text(config, buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string env_name(std::string_view key) {
  std::string out = "LMT_";
  for (char c : key) {
    out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

void apply_environment(RunConfig& config, const EnvLookup& lookup) {
  for (const auto& [key, setter] : setters()) {
    if (auto v = lookup(env_name(key))) {
      try {
        setter(config, trim(*v));
      } catch (const ConfigError& e) {
        throw ConfigError(env_name(key) + ": " + e.what());
      }
    }
  }
}

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

std::vector<std::string> validate_config(const RunConfig& config) {
  std::vector<std::string> out = validate_device(config.device);
  for (auto& v : validate_sampling(config.sampling)) out.push_back(std::move(v));
  for (auto& v : validate_hyperparams(config.forest)) out.push_back(std::move(v));
  if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0)) {
    out.push_back("train_fraction must be in (0, 1)");
  }
  if (config.threads < 0) out.push_back("run.threads must be >= 0");
  return out;
}

}  // namespace lmtune::cli
