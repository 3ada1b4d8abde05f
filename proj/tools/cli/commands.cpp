// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "lmtune/access_analysis.hpp"
#include "lmtune/codegen.hpp"
#include "lmtune/dataset.hpp"
#include "lmtune/eval.hpp"
#include "lmtune/forest.hpp"

namespace lmtune::cli {

namespace {

// Separate stream for the train/held-out shuffle so it does not correlate
// with tree bootstraps drawn from the same seed.
constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write to " + path.string() + " failed");
}

void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

std::string kernel_key(const TemplateParams& p) { return instance_key(KernelInstance{p, {}}); }

void emit_kernels(const RunConfig& config, const std::vector<LabeledInstance>& rows,
                  std::ostream& out, std::ostream& err) {
  std::map<std::string, KernelInstance> first;
  for (const LabeledInstance& r : rows) first.try_emplace(kernel_key(r.instance.params), r.instance);

  std::set<std::string> done;
  std::size_t files = 0;
  std::size_t infeasible = 0;
  const auto tuples = sample_compile_tuples(config.sampling);
  for (std::size_t t = 0; t < tuples.size(); ++t) {
    char dir_name[32];
    std::snprintf(dir_name, sizeof(dir_name), "tuple_%03zu", t);
    const auto dir = config.paths.kernels / dir_name;
    for (const TemplateParams& p : expand_patterns(tuples[t], config.sampling)) {
      const std::string key = kernel_key(p);
      auto it = first.find(key);
      if (it == first.end() || !done.insert(key).second) continue;
      const KernelInstance& inst = it->second;
      write_kernel_source(dir, p, emit_baseline(inst, config.device));
      ++files;
      try {
        write_kernel_source(dir, p,
                            emit_optimized(inst, footprint(inst, config.device), config.device));
        ++files;
      } catch (const OptimizationInfeasible& e) {
        ++infeasible;
        err << "note: " << kernel_file_stem(p, Variant::kOptimized) << " in " << dir_name
            << " not emitted: " << e.what() << '\n';
      }
    }
  }
  out << "kernel sources:   " << files << " files under " << config.paths.kernels.string();
  if (infeasible > 0) out << " (" << infeasible << " optimized variants infeasible)";
  out << '\n';
}

double beneficial_fraction(const std::vector<LabeledInstance>& rows) {
  if (rows.empty()) return 0.0;
  std::size_t b = 0;
  for (const LabeledInstance& r : rows) b += r.beneficial ? 1 : 0;
  return static_cast<double>(b) / static_cast<double>(rows.size());
}

template <typename T>
T instance_number(const std::string& key, const std::string& value) {
  T v{};
  auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ParseError("bad value '" + value + "' for instance key '" + key + "'");
  }
  return v;
}

}  // namespace

KernelInstance parse_instance_text(const std::string& text) {
  KernelInstance inst;
  TemplateParams& p = inst.params;
  LaunchConfig& l = inst.launch;
  std::set<std::string> seen;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    for (std::string tok; words >> tok;) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw ParseError("expected key=value, got '" + tok + "'", line_no);
      }
      const std::string key = tok.substr(0, eq);
      const std::string value = tok.substr(eq + 1);
      if (!seen.insert(key).second) throw ParseError("duplicate instance key '" + key + "'", line_no);
      if (key == "pattern") {
        auto v = parse_pattern(value);
        if (!v) throw ParseError("bad value '" + value + "' for instance key 'pattern'", line_no);
        p.pattern = *v;
      } else if (key == "stencil") {
        auto v = parse_shape(value);
        if (!v) throw ParseError("bad value '" + value + "' for instance key 'stencil'", line_no);
        p.stencil.shape = *v;
      } else if (key == "radius") {
        p.stencil.radius = instance_number<int>(key, value);
      } else {
        static const std::map<std::string, std::int64_t TemplateParams::*> wide = {
            {"n", &TemplateParams::n},         {"m", &TemplateParams::m},
            {"in_h", &TemplateParams::in_h},   {"in_w", &TemplateParams::in_w},
            {"out_h", &TemplateParams::out_h}, {"out_w", &TemplateParams::out_w},
        };
        static const std::map<std::string, int TemplateParams::*> counts = {
            {"comp_ilb", &TemplateParams::num_comp_ilb},
            {"comp_ep", &TemplateParams::num_comp_ep},
            {"coal_ilb", &TemplateParams::num_coal_ilb},
            {"coal_ep", &TemplateParams::num_coal_ep},
            {"uncoal_ilb", &TemplateParams::num_uncoal_ilb},
            {"uncoal_ep", &TemplateParams::num_uncoal_ep},
        };
        static const std::map<std::string, std::int64_t LaunchConfig::*> launch = {
            {"grid_x", &LaunchConfig::grid_x},
            {"grid_y", &LaunchConfig::grid_y},
            {"wg_x", &LaunchConfig::wg_x},
            {"wg_y", &LaunchConfig::wg_y},
        };
        if (auto it = wide.find(key); it != wide.end()) {
          p.*(it->second) = instance_number<std::int64_t>(key, value);
        } else if (auto ic = counts.find(key); ic != counts.end()) {
          p.*(ic->second) = instance_number<int>(key, value);
        } else if (auto il = launch.find(key); il != launch.end()) {
          l.*(il->second) = instance_number<std::int64_t>(key, value);
        } else {
          throw ParseError("unknown instance key '" + key + "'", line_no);
        }
      }
    }
  }
  for (const char* required : {"grid_x", "grid_y", "wg_x", "wg_y"}) {
    if (!seen.count(required)) {
      throw ParseError(std::string("missing instance key '") + required + "'");
    }
  }
  return inst;
}

void cmd_gen(const RunConfig& config, bool emit, std::ostream& out, std::ostream& err) {
  const Dataset ds = build_dataset(config.sampling, config.device, config.threads);
  ensure_parent(config.paths.dataset);
  write_rows(config.paths.dataset, ds.rows);
  const auto skip_path = config.paths.effective_skip_log();
  ensure_parent(skip_path);
  write_skip_log(skip_path, ds.skipped);
  out << "kernels:          " << ds.num_kernels << '\n'
      << "instances:        " << ds.rows.size() << '\n'
      << "skipped:          " << ds.skipped.size() << " (" << skip_path.string() << ")\n"
      << "beneficial share: " << beneficial_fraction(ds.rows) << '\n'
      << "dataset:          " << config.paths.dataset.string() << '\n';
  if (emit) emit_kernels(config, ds.rows, out, err);
}

void cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const std::vector<LabeledInstance> rows = read_rows(config.paths.dataset);
  if (rows.size() < 3) throw TrainingError("dataset has fewer than three rows");
  const Split split =
      split_rows(rows.size(), config.train_fraction, mix_seed(config.forest.seed, kSplitStream));
  std::vector<LabeledInstance> train_rows;
  std::vector<LabeledInstance> test_rows;
  for (std::size_t i : split.train) train_rows.push_back(rows[i]);
  for (std::size_t i : split.test) test_rows.push_back(rows[i]);

  const double share = beneficial_fraction(train_rows);
  if (share == 0.0 || share == 1.0) {
    err << "warning: training rows contain a single class (beneficial share " << share << ")\n";
  }
  const Forest forest = train(train_rows, config.forest, config.threads);
  ensure_parent(config.paths.model);
  save_forest(forest, config.paths.model);

  const EvalReport report = evaluate(forest, test_rows);
  write_file(config.paths.report, format_report_kv(report));
  out << "train rows:       " << train_rows.size() << '\n'
      << "held-out rows:    " << test_rows.size() << '\n'
      << "model:            " << config.paths.model.string() << '\n'
      << "report:           " << config.paths.report.string() << '\n'
      << format_report_text(report);
}

void cmd_predict(const RunConfig& config, const std::string& instance_text, std::ostream& out) {
  const KernelInstance inst = parse_instance_text(instance_text);
  require_valid(inst);
  const Forest forest = load_forest(config.paths.model);
  const FeatureVector f = extract_features(inst, config.device);
  const double predicted = forest.predict(f);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", predicted);
  out << "predicted_speedup=" << buf << '\n';
  const auto bytes = static_cast<std::int64_t>(f[Feature::kLmemBytes]);
  if (bytes > config.device.lmem_capacity_bytes) {
    out << "decision=DO-NOT-OPTIMIZE\n"
        << "reason=infeasible: local memory footprint " << bytes << " bytes exceeds capacity "
        << config.device.lmem_capacity_bytes << " bytes\n";
    return;
  }
  out << "decision=" << (predicted > 1.0 ? "OPTIMIZE" : "DO-NOT-OPTIMIZE") << '\n';
}

void cmd_report(const RunConfig& config, std::ostream& out) {
  const Forest forest = load_forest(config.paths.model);
  const std::vector<LabeledInstance> rows = read_rows(config.paths.dataset);
  const EvalReport report = evaluate(forest, rows);
  std::vector<double> speedups;
  speedups.reserve(rows.size());
  for (const LabeledInstance& r : rows) speedups.push_back(r.speedup);
  const auto histogram = speedup_histogram(speedups, default_histogram_edges());
  write_file(config.paths.report, format_report_kv(report));
  write_file(config.paths.histogram, format_histogram_csv(histogram));
  out << format_report_text(report) << "report:           " << config.paths.report.string()
      << '\n'
      << "histogram:        " << config.paths.histogram.string() << '\n';
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const EnvLookup& env) {
  CLI::App app{"Predict whether local-memory caching pays off for a GPU kernel", "lmtune"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> max_instances;
  std::optional<double> train_fraction;
  std::optional<int> threads;
  std::string out_path;
  bool emit = false;
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--seed", seed, "seed for sampling and forest training");
  app.add_option("--max-instances", max_instances, "cap on generated instances");
  app.add_option("--train-fraction", train_fraction, "share of rows used for training");
  app.add_option("--threads", threads, "worker threads (0 = all cores)");
  app.add_option("--out", out_path, "primary output path of the subcommand");
  app.add_flag("--emit-kernels", emit, "gen: also write OpenCL sources for each kernel");

  std::string dataset_path;
  std::string model_path;
  std::string instance_path;
  std::vector<std::string> instance_pairs;
  auto* gen = app.add_subcommand("gen", "sample, label and write a dataset");
  auto* train_cmd = app.add_subcommand("train", "train a forest and report held-out accuracy");
  train_cmd->add_option("--dataset", dataset_path, "dataset CSV");
  auto* predict = app.add_subcommand("predict", "predict the speedup of one kernel instance");
  predict->add_option("--model", model_path, "model file");
  predict->add_option("--instance", instance_path, "file with key=value instance description");
  predict->add_option("pairs", instance_pairs, "key=value instance description");
  auto* report = app.add_subcommand("report", "evaluate a model on a dataset");
  report->add_option("--dataset", dataset_path, "dataset CSV");
  report->add_option("--model", model_path, "model file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  RunConfig config;
  try {
    if (!config_path.empty()) apply_config_file(config, config_path);
    apply_environment(config, env);
    if (seed) {
      config.sampling.seed = *seed;
      config.forest.seed = *seed;
    }
    if (max_instances) config.sampling.max_instances = *max_instances;
    if (train_fraction) config.train_fraction = *train_fraction;
    if (threads) config.threads = *threads;
    if (!dataset_path.empty()) config.paths.dataset = dataset_path;
    if (!model_path.empty()) config.paths.model = model_path;
    if (!out_path.empty()) {
      if (gen->parsed()) config.paths.dataset = out_path;
      if (train_cmd->parsed()) config.paths.model = out_path;
      if (report->parsed()) config.paths.report = out_path;
    }
    if (auto v = validate_config(config); !v.empty()) {
      std::string msg = "invalid configuration: " + v.front();
      for (std::size_t k = 1; k < v.size(); ++k) msg += "; " + v[k];
      throw ConfigError(msg);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      cmd_gen(config, emit, out, err);
    } else if (train_cmd->parsed()) {
      cmd_train(config, out, err);
    } else if (predict->parsed()) {
      std::string text;
      if (!instance_path.empty()) text = read_file(instance_path) + '\n';
      for (const std::string& pair : instance_pairs) text += pair + ' ';
      cmd_predict(config, text, out);
    } else if (report->parsed()) {
      cmd_report(config, out);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace lmtune::cli
