// Copyright 2026 The lmtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmtune/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "lmtune/cost_model.hpp"
#include "lmtune/errors.hpp"

namespace lmtune {

namespace {

double mean_of(const IntRange& range, const std::vector<double>& probs) {
  double mean = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    mean += (range.lo + static_cast<double>(k)) * probs[k];
  }
  return mean;
}

// value = lo + floor(width * u^a), u ~ U[0,1).
std::vector<double> power_law(int width, double a) {
  std::vector<double> p(static_cast<std::size_t>(width));
  const double inv = 1.0 / a;
  for (int k = 0; k < width; ++k) {
    p[static_cast<std::size_t>(k)] =
        std::pow((k + 1.0) / width, inv) - std::pow(static_cast<double>(k) / width, inv);
  }
  return p;
}

int draw(std::mt19937_64& rng, const IntRange& range, const std::vector<double>& probs) {
  std::discrete_distribution<int> dist(probs.begin(), probs.end());
  return range.lo + dist(rng);
}

bool uses_large_n(HomeAccessPattern p) {
  return p == HomeAccessPattern::kXYReuse || p == HomeAccessPattern::kXReuseRow ||
         p == HomeAccessPattern::kYReuseRow;
}

bool uses_large_m(HomeAccessPattern p) {
  return p == HomeAccessPattern::kXYReuse || p == HomeAccessPattern::kXReuseCol ||
         p == HomeAccessPattern::kYReuseCol;
}

std::vector<std::int64_t> powers_of_two_dividing(std::int64_t n) {
  std::vector<std::int64_t> out;
  for (std::int64_t v = 1; v <= n; v *= 2) {
    if (n % v == 0) out.push_back(v);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::string> validate_sampling(const SamplingSpec& spec) {
  std::vector<std::string> out;
  if (spec.num_tuples < 1) out.push_back("num_tuples must be >= 1");
  if (spec.max_instances < 1) out.push_back("max_instances must be >= 1");
  if (spec.large_trip_counts.empty() || spec.small_trip_counts.empty()) {
    out.push_back("trip count value sets must be non-empty");
  }
  for (std::int64_t v : spec.large_trip_counts) {
    if (v < 1) out.push_back("trip counts must be >= 1");
  }
  for (std::int64_t v : spec.small_trip_counts) {
    if (v < 1) out.push_back("trip counts must be >= 1");
  }
  const std::pair<const char*, const IntRange*> ranges[] = {
      {"radius", &spec.radius},         {"comp_ilb", &spec.comp_ilb},
      {"comp_ep", &spec.comp_ep},       {"coal_ilb", &spec.coal_ilb},
      {"coal_ep", &spec.coal_ep},       {"uncoal_ilb", &spec.uncoal_ilb},
      {"uncoal_ep", &spec.uncoal_ep},
  };
  for (const auto& [name, r] : ranges) {
    if (r->lo < 0 || r->hi < r->lo) {
      out.push_back(std::string(name) + " range [" + std::to_string(r->lo) + ", " +
                    std::to_string(r->hi) + "] is empty or negative");
    }
  }
  if (spec.in_h < 1 || spec.in_w < 1 || spec.out_h < 1 || spec.out_w < 1) {
    out.push_back("array dimensions must be >= 1");
  }
  return out;
}

std::vector<double> value_distribution(const IntRange& range, SamplingMode mode) {
  const int width = range.hi - range.lo + 1;
  if (width <= 1) return {1.0};
  if (mode == SamplingMode::kUniform) {
    return std::vector<double>(static_cast<std::size_t>(width), 1.0 / width);
  }
  // The mean falls monotonically as the exponent grows; bisect on log(a).
  double lo = -8.0;
  double hi = 8.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mean_of(range, power_law(width, std::exp(mid))) > range.mean) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return power_law(width, std::exp(0.5 * (lo + hi)));
}

std::vector<TemplateParams> sample_compile_tuples(const SamplingSpec& spec) {
  std::mt19937_64 rng(mix_seed(spec.seed, 0));
  const auto d_radius = value_distribution(spec.radius, spec.mode);
  const auto d_comp_ilb = value_distribution(spec.comp_ilb, spec.mode);
  const auto d_comp_ep = value_distribution(spec.comp_ep, spec.mode);
  const auto d_coal_ilb = value_distribution(spec.coal_ilb, spec.mode);
  const auto d_coal_ep = value_distribution(spec.coal_ep, spec.mode);
  const auto d_uncoal_ilb = value_distribution(spec.uncoal_ilb, spec.mode);
  const auto d_uncoal_ep = value_distribution(spec.uncoal_ep, spec.mode);

  std::vector<TemplateParams> out;
  out.reserve(static_cast<std::size_t>(spec.num_tuples));
  for (int t = 0; t < spec.num_tuples; ++t) {
    TemplateParams p;
    p.in_h = spec.in_h;
    p.in_w = spec.in_w;
    p.out_h = spec.out_h;
    p.out_w = spec.out_w;
    std::uniform_int_distribution<std::size_t> shape(0, kAllShapes.size() - 1);
    p.stencil.shape = kAllShapes[shape(rng)];
    p.stencil.radius = draw(rng, spec.radius, d_radius);
    p.num_comp_ilb = draw(rng, spec.comp_ilb, d_comp_ilb);
    p.num_comp_ep = draw(rng, spec.comp_ep, d_comp_ep);
    p.num_coal_ilb = draw(rng, spec.coal_ilb, d_coal_ilb);
    p.num_coal_ep = draw(rng, spec.coal_ep, d_coal_ep);
    p.num_uncoal_ilb = draw(rng, spec.uncoal_ilb, d_uncoal_ilb);
    p.num_uncoal_ep = draw(rng, spec.uncoal_ep, d_uncoal_ep);
    out.push_back(p);
  }
  return out;
}

std::vector<TemplateParams> expand_patterns(const TemplateParams& tuple, const SamplingSpec& spec) {
  std::vector<TemplateParams> out;
  for (HomeAccessPattern pattern : kAllPatterns) {
    const auto& ns = uses_large_n(pattern) ? spec.large_trip_counts : spec.small_trip_counts;
    const auto& ms = uses_large_m(pattern) ? spec.large_trip_counts : spec.small_trip_counts;
    for (std::int64_t n : ns) {
      for (std::int64_t m : ms) {
        TemplateParams p = tuple;
        p.pattern = pattern;
        p.n = n;
        p.m = m;
        p.in_h = spec.in_h;
        p.in_w = spec.in_w;
        out.push_back(p);
      }
    }
  }
  return out;
}

std::vector<LaunchConfig> enumerate_launch_configs(const TemplateParams& params,
                                                   const SamplingSpec& spec) {
  const auto gxs = powers_of_two_dividing(params.out_w);
  const auto gys = powers_of_two_dividing(params.out_h);
  std::vector<LaunchConfig> out;
  for (std::int64_t gy : gys) {
    for (std::int64_t gx : gxs) {
      if (gx * gy < spec.min_grid_size) continue;
      for (std::int64_t wy = 1; wy <= gy; wy *= 2) {
        for (std::int64_t wx = 1; wx <= gx && wx * wy <= spec.max_wg_size; wx *= 2) {
          out.push_back(LaunchConfig{gx, gy, wx, wy});
        }
      }
    }
  }
  return out;
}

std::vector<TemplateParams> enumerate_kernels(const SamplingSpec& spec) {
  std::vector<TemplateParams> out;
  std::set<std::string> seen;
  for (const TemplateParams& tuple : sample_compile_tuples(spec)) {
    for (const TemplateParams& p : expand_patterns(tuple, spec)) {
      if (seen.insert(instance_key(KernelInstance{p, LaunchConfig{}})).second) out.push_back(p);
    }
  }
  return out;
}

std::vector<KernelInstance> select_instances(const std::vector<TemplateParams>& kernels,
                                             const SamplingSpec& spec) {
  if (kernels.empty()) return {};
  const auto total = static_cast<std::int64_t>(kernels.size());
  std::vector<std::int64_t> quota(kernels.size(), spec.max_instances / total);
  std::int64_t remainder = spec.max_instances % total;

  // Remainder goes round-robin over patterns so every pattern gets a share
  // even when max_instances is below the kernel count.
  std::map<HomeAccessPattern, std::vector<std::size_t>> by_pattern;
  for (std::size_t k = 0; k < kernels.size(); ++k) by_pattern[kernels[k].pattern].push_back(k);
  for (std::size_t pos = 0; remainder > 0; ++pos) {
    bool any = false;
    for (HomeAccessPattern p : kAllPatterns) {
      const auto& list = by_pattern[p];
      if (pos >= list.size() || remainder == 0) continue;
      ++quota[list[pos]];
      --remainder;
      any = true;
    }
    if (!any) break;
  }

  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<LaunchConfig>> configs_by_out;
  std::vector<KernelInstance> out;
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    if (quota[k] == 0) continue;
    const TemplateParams& p = kernels[k];
    auto [it, inserted] = configs_by_out.try_emplace({p.out_h, p.out_w});
    if (inserted) it->second = enumerate_launch_configs(p, spec);
    const std::vector<LaunchConfig>& all = it->second;
    std::vector<LaunchConfig> chosen;
    if (static_cast<std::int64_t>(all.size()) <= quota[k]) {
      chosen = all;
    } else {
      std::mt19937_64 rng(mix_seed(spec.seed, 1 + k));
      std::sample(all.begin(), all.end(), std::back_inserter(chosen),
                  static_cast<std::ptrdiff_t>(quota[k]), rng);
    }
    for (const LaunchConfig& l : chosen) out.push_back(KernelInstance{p, l});
  }
  return out;
}

LabeledInstance label_instance(const KernelInstance& instance, const DeviceDescriptor& dev) {
  LabeledInstance row;
  row.instance = instance;
  row.features = extract_features(instance, dev);
  row.speedup = label_speedup(instance, dev);
  row.beneficial = row.speedup > 1.0;
  return row;
}

Dataset label_instances(const std::vector<KernelInstance>& instances, const DeviceDescriptor& dev,
                        int threads) {
  const std::size_t n = instances.size();
  std::vector<std::optional<LabeledInstance>> results(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    constexpr std::size_t kChunk = 256;
    while (true) {
      const std::size_t begin = next.fetch_add(kChunk);
      if (begin >= n) return;
      for (std::size_t i = begin; i < std::min(n, begin + kChunk); ++i) {
        try {
          results[i] = label_instance(instances[i], dev);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    }
  };
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads)
                                 : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  Dataset ds;
  std::vector<std::pair<std::string, std::size_t>> keyed;
  for (std::size_t i = 0; i < n; ++i) {
    if (results[i]) {
      keyed.emplace_back(instance_key(instances[i]), i);
    } else {
      ds.skipped.push_back(SkipRecord{instance_key(instances[i]), errors[i]});
    }
  }
  std::sort(keyed.begin(), keyed.end());
  ds.rows.reserve(keyed.size());
  for (const auto& [key, i] : keyed) ds.rows.push_back(std::move(*results[i]));
  return ds;
}

Dataset build_dataset(const SamplingSpec& spec, const DeviceDescriptor& dev, int threads) {
  if (auto v = validate_sampling(spec); !v.empty()) throw ValidationError(v);
  if (auto v = validate_device(dev); !v.empty()) throw ValidationError(v);
  const std::vector<TemplateParams> kernels = enumerate_kernels(spec);
  Dataset ds = label_instances(select_instances(kernels, spec), dev, threads);
  ds.num_kernels = kernels.size();
  return ds;
}

// ---------------------------------------------------------------- CSV

namespace {

constexpr std::size_t kKeyColumns = 19;

std::vector<std::string> make_header() {
  std::vector<std::string> h = {
      "pattern",        "n",         "m",           "stencil",        "radius",
      "num_comp_ilb",   "num_comp_ep", "num_coal_ilb", "num_coal_ep", "num_uncoal_ilb",
      "num_uncoal_ep",  "in_h",      "in_w",        "out_h",          "out_w",
      "grid_x",         "grid_y",    "wg_x",        "wg_y",
  };
  for (std::string_view f : kFeatureNames) h.emplace_back(f);
  h.emplace_back("speedup");
  h.emplace_back("beneficial");
  return h;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line, const std::string& column) {
  T v{};
  const char* end = field.data() + field.size();
  auto res = std::from_chars(field.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ParseError("bad value '" + std::string(field) + "' in column " + column, line);
  }
  return v;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

const std::vector<std::string>& csv_header() {
  static const std::vector<std::string> header = make_header();
  return header;
}

std::string format_rows(const std::vector<LabeledInstance>& rows) {
  std::string out;
  const auto& header = csv_header();
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (k > 0) out += ',';
    out += header[k];
  }
  out += '\n';
  for (const LabeledInstance& r : rows) {
    const TemplateParams& p = r.instance.params;
    const LaunchConfig& l = r.instance.launch;
    std::ostringstream os;
    os << to_string(p.pattern) << ',' << p.n << ',' << p.m << ',' << to_string(p.stencil.shape)
       << ',' << p.stencil.radius << ',' << p.num_comp_ilb << ',' << p.num_comp_ep << ','
       << p.num_coal_ilb << ',' << p.num_coal_ep << ',' << p.num_uncoal_ilb << ','
       << p.num_uncoal_ep << ',' << p.in_h << ',' << p.in_w << ',' << p.out_h << ',' << p.out_w
       << ',' << l.grid_x << ',' << l.grid_y << ',' << l.wg_x << ',' << l.wg_y;
    out += os.str();
    for (double v : r.features.values) {
      out += ',';
      out += format_double(v);
    }
    out += ',';
    out += format_double(r.speedup);
    out += r.beneficial ? ",1\n" : ",0\n";
  }
  return out;
}

std::vector<LabeledInstance> parse_rows(const std::string& text) {
  const auto& header = csv_header();
  std::vector<LabeledInstance> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line_no > 1 && line.empty()) continue;
    const auto fields = split_fields(line);
    if (line_no == 1) {
      if (fields.size() != header.size() ||
          !std::equal(fields.begin(), fields.end(), header.begin())) {
        throw ParseError("unexpected header", line_no);
      }
      continue;
    }
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    LabeledInstance r;
    TemplateParams& p = r.instance.params;
    LaunchConfig& l = r.instance.launch;
    auto pattern = parse_pattern(fields[0]);
    if (!pattern) throw ParseError("unknown pattern '" + std::string(fields[0]) + "'", line_no);
    p.pattern = *pattern;
    auto shape = parse_shape(fields[3]);
    if (!shape) throw ParseError("unknown stencil '" + std::string(fields[3]) + "'", line_no);
    p.stencil.shape = *shape;
    auto i64 = [&](std::size_t k) { return parse_number<std::int64_t>(fields[k], line_no, header[k]); };
    auto i32 = [&](std::size_t k) { return parse_number<int>(fields[k], line_no, header[k]); };
    p.n = i64(1);
    p.m = i64(2);
    p.stencil.radius = i32(4);
    p.num_comp_ilb = i32(5);
    p.num_comp_ep = i32(6);
    p.num_coal_ilb = i32(7);
    p.num_coal_ep = i32(8);
    p.num_uncoal_ilb = i32(9);
    p.num_uncoal_ep = i32(10);
    p.in_h = i64(11);
    p.in_w = i64(12);
    p.out_h = i64(13);
    p.out_w = i64(14);
    l.grid_x = i64(15);
    l.grid_y = i64(16);
    l.wg_x = i64(17);
    l.wg_y = i64(18);
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
      r.features.values[k] = parse_number<double>(fields[kKeyColumns + k], line_no,
                                                  header[kKeyColumns + k]);
    }
    const std::size_t s = kKeyColumns + kNumFeatures;
    r.speedup = parse_number<double>(fields[s], line_no, header[s]);
    const int b = parse_number<int>(fields[s + 1], line_no, header[s + 1]);
    if (b != 0 && b != 1) throw ParseError("beneficial must be 0 or 1", line_no);
    r.beneficial = b == 1;
    if (r.beneficial != (r.speedup > 1.0)) {
      throw ParseError("beneficial flag disagrees with speedup", line_no);
    }
    if (auto v = validate_instance(r.instance); !v.empty()) {
      throw ParseError("invalid instance: " + v.front(), line_no);
    }
    rows.push_back(std::move(r));
  }
  if (line_no == 0) throw ParseError("missing header", 1);
  return rows;
}

void write_rows(const std::filesystem::path& path, const std::vector<LabeledInstance>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << format_rows(rows);
  if (!out) throw Error("write to " + path.string() + " failed");
}

std::vector<LabeledInstance> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_rows(buf.str());
}

void write_skip_log(const std::filesystem::path& path, const std::vector<SkipRecord>& skipped) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const SkipRecord& s : skipped) out << s.key << '\t' << s.reason << '\n';
}

Split split_rows(std::size_t n, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n >= 2) n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, n)));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, n)), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace lmtune
