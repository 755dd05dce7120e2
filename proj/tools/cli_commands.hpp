#pragma once

// Subcommand implementations for the sketchstream tool. Each command writes
// its primary output to `out` and diagnostics to `err`.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "sketchstream/sketchstream.hpp"

namespace sketchstream::cli {

using nlohmann::json;

/// Either a Matrix Market file or the synthetic generator.
struct InputSpec {
  std::string path;
  std::optional<SynthConfig> synth;

  std::string name() const {
    if (synth) return "synth";
    return std::filesystem::path(path).stem().string();
  }
};

using AnyStream = std::variant<MatrixMarketStream, SynthStream>;

inline AnyStream open_input(const InputSpec& in) {
  if (in.synth) return SynthStream(*in.synth);
  if (in.path.empty()) throw Error("an input file or a synthetic configuration is required");
  return MatrixMarketStream(in.path);
}

template <class F>
void for_each_entry(const AnyStream& s, F&& f) {
  std::visit([&](const auto& st) { st.for_each(f); }, s);
}

inline MatrixDims dims_of(const AnyStream& s) {
  return std::visit([](const auto& st) { return st.dims(); }, s);
}

inline std::vector<EntryTriplet> load_entries(const AnyStream& s) {
  std::vector<EntryTriplet> out;
  for_each_entry(s, [&](const EntryTriplet& e) { out.push_back(e); });
  return out;
}

/// Writes through a temporary sibling and renames on commit; the temporary
/// is removed if the guard dies uncommitted.
class AtomicFile {
 public:
  explicit AtomicFile(std::filesystem::path target)
      : target_(std::move(target)), tmp_(target_.string() + ".partial") {}
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;
  ~AtomicFile() {
    if (!committed_) {
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  const std::filesystem::path& temp_path() const noexcept { return tmp_; }

  void write(const std::string& bytes) const {
    std::ofstream f(tmp_, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot create " + tmp_.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("write failed for " + tmp_.string());
  }

  void commit() {
    std::filesystem::rename(tmp_, target_);
    committed_ = true;
  }

 private:
  std::filesystem::path target_;
  std::filesystem::path tmp_;
  bool committed_ = false;
};

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline json stats_to_json(const MatrixStats& st) {
  return {{"l1", st.l1},   {"frob", st.frob}, {"spec", st.spec},
          {"sr", st.sr},   {"nd", st.nd},     {"nrd", st.nrd},
          {"sum_row_l1_sq", st.sum_row_l1_sq}};
}

inline json report_to_json(const DataMatrixReport& r) {
  json j = {{"is_data_matrix", r.is_data_matrix()},
            {"row_dominance", to_string(r.row_dominance)},
            {"l1_spectral_ratio", to_string(r.l1_spectral_ratio)},
            {"enough_rows", to_string(r.enough_rows)},
            {"min_row_l1", r.min_row_l1},
            {"l1_spectral_value", r.l1_spectral_value},
            {"failing", r.failing()}};
  j["max_col_l1"] = r.max_col_l1 ? json(*r.max_col_l1) : json(nullptr);
  return j;
}

// ---------------------------------------------------------------- stats

struct StatsConfig {
  InputSpec input;
  bool track_columns = true;
};

inline json cmd_stats(const StatsConfig& cfg) {
  const AnyStream st = open_input(cfg.input);
  const MatrixDims dims = dims_of(st);
  ProfileAccumulator acc(dims, cfg.track_columns);
  std::vector<EntryTriplet> entries;
  for_each_entry(st, [&](const EntryTriplet& e) {
    acc.add(e);
    entries.push_back(e);
  });
  const RowProfile prof = acc.profile();
  if (prof.total_l1 == 0.0) throw Error("matrix statistics are undefined for the zero matrix");
  const CsrMatrix A(dims.m, dims.n, entries);
  const SpectralEstimate spec = spectral_norm(A, {1e-12, 20000, 0});
  const MatrixStats stats = compute_matrix_stats(prof, spec.value);
  const DataMatrixReport rep = check_data_matrix(prof, stats, acc.max_column_l1(), dims, !cfg.track_columns);
  json j = {{"matrix", cfg.input.name()},
            {"m", dims.m},
            {"n", dims.n},
            {"nnz", prof.nnz},
            {"stats", stats_to_json(stats)},
            {"spectral_converged", spec.converged},
            {"data_matrix", report_to_json(rep)}};
  if (const auto* mm = std::get_if<MatrixMarketStream>(&st)) j["zeros_dropped"] = mm->zeros_dropped();
  return j;
}

// ---------------------------------------------------------------- sketch

struct SketchConfig {
  InputSpec input;
  SketchOptions options;
  std::string out;
  bool memory_spill = false;
};

inline json run_summary(const SketchRun& run, const EncodedSketch& enc, const SketchConfig& cfg) {
  json j = {{"matrix", cfg.input.name()},
            {"scheme", std::string(to_string(run.plan.scheme))},
            {"s", run.plan.s},
            {"seed", cfg.options.seed},
            {"delta", run.plan.delta},
            {"m", run.sketch.dims.m},
            {"n", run.sketch.dims.n},
            {"assume_uniform_z", cfg.options.assume_uniform_z},
            {"entries", run.sketch.entries.size()},
            {"header_bytes", enc.header_bytes},
            {"payload_bytes", enc.payload_bytes},
            {"file_bytes", enc.bytes.size()},
            {"bits_per_sample", enc.bits_per_sample()},
            {"spill_records", run.spill_records},
            {"profile_seconds", run.profile_seconds},
            {"sample_seconds", run.sample_seconds}};
  j["zeta"] = run.plan.zeta ? json(*run.plan.zeta) : json(nullptr);
  json rho = json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(10, run.plan.rho.size()); ++i) rho.push_back(run.plan.rho[i]);
  j["rho_head"] = rho;
  if (run.plan.scheme == Scheme::l2_trim) j["trim_cutoff"] = run.plan.trim_cutoff;
  return j;
}

/// Writes `<out>` (SKB1) and `<out>.json` (summary); returns the summary.
inline json cmd_sketch(const SketchConfig& cfg) {
  if (cfg.out.empty()) throw Error("--out is required");
  const AnyStream st = open_input(cfg.input);
  SketchRun run = std::visit(
      [&](const auto& s) {
        if (cfg.memory_spill) {
          MemorySpillStore store;
          return sketch_stream(s, cfg.options, store);
        }
        FileSpillStore store;
        return sketch_stream(s, cfg.options, store);
      },
      st);
  const EncodedSketch enc = encode_sketch(run.sketch);
  const json summary = run_summary(run, enc, cfg);
  AtomicFile skb(cfg.out), meta(cfg.out + ".json");
  skb.write(std::string(enc.bytes.begin(), enc.bytes.end()));
  meta.write(summary.dump(2) + "\n");
  skb.commit();
  meta.commit();
  return summary;
}

// ---------------------------------------------------------------- evaluate

inline constexpr const char* kCsvHeader = "matrix,scheme,s,seed,k,left_ratio,right_ratio,spec_err,bits_per_sample,zeta";

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct CsvRow {
  std::string matrix;
  Scheme scheme = Scheme::bernstein;
  std::uint64_t s = 0;
  std::optional<std::uint64_t> seed;
  std::size_t k = 0;
  EvaluationResult eval;
  double bits_per_sample = 0.0;
  std::optional<double> zeta;

  std::string str() const {
    std::ostringstream o;
    o << matrix << ',' << to_string(scheme) << ',' << s << ',' << (seed ? std::to_string(*seed) : "") << ',' << k
      << ',' << fmt(eval.quality.left_ratio) << ',' << fmt(eval.quality.right_ratio) << ',' << fmt(eval.spec_err)
      << ',' << fmt(bits_per_sample) << ',' << (zeta ? fmt(*zeta) : "");
    return o.str();
  }
};

struct EvaluateConfig {
  InputSpec input;
  std::string sketch;
  std::size_t k = 20;
  bool header = false;
};

/// Scores a stored sketch against its matrix. Seed and zeta come from the
/// sketch's summary file when present.
inline std::string cmd_evaluate(const EvaluateConfig& cfg) {
  const auto bytes = read_bytes(cfg.sketch);
  const SketchMatrix B = decode_sketch(bytes);
  const AnyStream st = open_input(cfg.input);
  const MatrixDims dims = dims_of(st);
  if (dims.m != B.dims.m || dims.n != B.dims.n) {
    throw Error("sketch is " + std::to_string(B.dims.m) + "x" + std::to_string(B.dims.n) + " but the matrix is " +
                std::to_string(dims.m) + "x" + std::to_string(dims.n));
  }
  const auto entries = load_entries(st);
  const GramEvaluator ev(CsrMatrix(dims.m, dims.n, entries), cfg.k);
  CsvRow row;
  row.matrix = cfg.input.name();
  row.scheme = B.scheme;
  row.s = B.s;
  row.k = cfg.k;
  row.eval = ev.evaluate(B);
  const std::size_t header_bytes = 4 + 3 * 8 + 1 + 8 * B.row_scale.size();
  row.bits_per_sample = 8.0 * static_cast<double>(bytes.size() - header_bytes - 8) / static_cast<double>(B.s);
  const std::filesystem::path meta = cfg.sketch + ".json";
  if (std::filesystem::exists(meta)) {
    const auto raw = read_bytes(meta);
    const json j = json::parse(std::string(raw.begin(), raw.end()));
    if (j.contains("seed")) row.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("zeta") && !j["zeta"].is_null()) row.zeta = j["zeta"].get<double>();
    if (j.contains("matrix")) row.matrix = j["matrix"].get<std::string>();
  }
  return (cfg.header ? std::string(kCsvHeader) + "\n" : std::string()) + row.str() + "\n";
}

// ---------------------------------------------------------------- synth

inline json cmd_synth(const SynthConfig& cfg, const std::string& out) {
  if (out.empty()) throw Error("--out is required");
  const SynthStream st(cfg);
  AtomicFile f(out);
  write_matrix_market(f.temp_path(), st);
  f.commit();
  return {{"out", out}, {"m", cfg.m}, {"n", cfg.n}, {"d", cfg.d}, {"noise", cfg.noise_sd}, {"seed", cfg.seed}};
}

// ---------------------------------------------------------------- analyze

struct AnalyzeConfig {
  InputSpec input;
  PlanOptions plan;
  std::uint64_t s = 1000;
  double delta = kDefaultDelta;
  std::optional<double> eps;
  bool optimality = false;
};

/// Oracle-scale diagnostics: the epsilon tower of the chosen plan, the
/// data-matrix report, the zeta bound and optional sample complexity.
inline json cmd_analyze(const AnalyzeConfig& cfg) {
  const AnyStream st = open_input(cfg.input);
  const MatrixDims dims = dims_of(st);
  const auto entries = load_entries(st);
  const DenseMatrix A = DenseMatrix::from_triplets(dims.m, dims.n, entries);
  const VectorStream vs(dims, A.nonzeros());
  const RowProfile prof = accumulate_row_profile(vs);
  const SamplingPlan plan = make_plan(cfg.plan, prof, vs, cfg.s, cfg.delta);
  const DenseMatrix P = plan_probabilities(A, plan);
  const BernsteinParams bp = params_for(A, cfg.s, cfg.delta);
  const EpsilonReport rep = eps_chain_report(A, P, bp);
  const MatrixStats stats = compute_matrix_stats(A);
  json j = {{"matrix", cfg.input.name()},
            {"scheme", std::string(to_string(plan.scheme))},
            {"s", cfg.s},
            {"delta", cfg.delta},
            {"epsilon", to_json(rep)},
            {"unconditional_chain_holds", rep.unconditional_chain_holds()},
            {"stats", stats_to_json(stats)},
            {"data_matrix", report_to_json(check_data_matrix(prof, stats, max_column_l1(A), dims))},
            {"zeta_upper_bound", zeta_upper_bound(prof, bp)}};
  j["zeta"] = plan.zeta ? json(*plan.zeta) : json(nullptr);
  if (cfg.eps) {
    const auto sc = sample_complexity_bound(stats, dims, *cfg.eps, cfg.delta);
    j["sample_complexity"] = {{"eps", *cfg.eps}, {"theta_form", sc.theta_form}, {"explicit_form", sc.explicit_form}};
  }
  if (cfg.optimality) {
    const auto r = near_optimality_check(A, P, bp);
    j["optimality"] = {{"ratio", r.ratio}, {"eps_alg", r.eps_alg}, {"eps_opt", r.eps_opt},
                       {"p_alg", r.p_alg}, {"p_opt", r.p_opt},     {"flagged", r.flagged}};
  }
  return j;
}

// ---------------------------------------------------------------- experiment

/// Manifest fields: input | synth{m,n,d,noise,seed}, name, schemes, samples,
/// seeds, k, delta, trim_theta, trim_domain, assume_uniform_z.
struct Manifest {
  InputSpec input;
  std::string name;
  std::vector<Scheme> schemes;
  std::vector<std::uint64_t> samples;
  std::vector<std::uint64_t> seeds;
  std::size_t k = 20;
  double delta = kDefaultDelta;
  double trim_theta = 0.1;
  TrimDomain trim_domain = TrimDomain::nonzeros;
  bool assume_uniform_z = false;
};

inline TrimDomain parse_trim_domain(const std::string& s) {
  if (s == "nonzeros") return TrimDomain::nonzeros;
  if (s == "all-cells") return TrimDomain::all_cells;
  throw Error("unknown trim domain '" + s + "' (expected nonzeros or all-cells)");
}

inline Manifest parse_manifest(const json& j, const std::filesystem::path& base) {
  try {
    Manifest m;
    if (j.contains("synth")) {
      const auto& s = j["synth"];
      SynthConfig c;
      c.m = s.value("m", c.m);
      c.n = s.value("n", c.n);
      c.d = s.value("d", c.d);
      c.noise_sd = s.value("noise", c.noise_sd);
      c.seed = s.value("seed", c.seed);
      c.validate();
      m.input.synth = c;
    } else if (j.contains("input")) {
      const std::filesystem::path p = j["input"].get<std::string>();
      m.input.path = (p.is_absolute() ? p : base / p).string();
    } else {
      throw Error("manifest needs 'input' or 'synth'");
    }
    m.name = j.value("name", m.input.name());
    for (const auto& s : j.at("schemes")) m.schemes.push_back(parse_scheme(s.get<std::string>()));
    m.samples = j.at("samples").get<std::vector<std::uint64_t>>();
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.k = j.value("k", m.k);
    m.delta = j.value("delta", m.delta);
    m.trim_theta = j.value("trim_theta", m.trim_theta);
    m.trim_domain = parse_trim_domain(j.value("trim_domain", std::string("nonzeros")));
    m.assume_uniform_z = j.value("assume_uniform_z", false);
    if (m.schemes.empty() || m.samples.empty() || m.seeds.empty()) throw Error("manifest grid is empty");
    for (auto s : m.samples)
      if (s < 1) throw Error("sample budgets must be at least 1");
    return m;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed manifest: ") + e.what());
  }
}

struct ExperimentOutcome {
  std::size_t cells = 0;
  std::size_t reused = 0;
  std::size_t failed = 0;
};

/// Runs every (scheme, s, seed) cell. Finished cells leave a marker under
/// `<out>.cells/` holding their CSV row, so an interrupted sweep resumes
/// where it stopped. Failed cells are logged to `<out>.failures` and skipped.
inline ExperimentOutcome cmd_experiment(const std::filesystem::path& manifest_path, const std::string& out,
                                        std::ostream& err) {
  if (out.empty()) throw Error("--out is required");
  const auto raw = read_bytes(manifest_path);
  json mj;
  try {
    mj = json::parse(std::string(raw.begin(), raw.end()));
  } catch (const json::exception& e) {
    throw Error(std::string("malformed manifest: ") + e.what());
  }
  const Manifest man = parse_manifest(mj, manifest_path.parent_path());
  const AnyStream st = open_input(man.input);
  const MatrixDims dims = dims_of(st);
  const auto entries = load_entries(st);
  const VectorStream vs(dims, entries);
  const GramEvaluator ev(CsrMatrix(dims.m, dims.n, entries), man.k);

  const std::filesystem::path cells = out + ".cells";
  std::filesystem::create_directories(cells);
  ExperimentOutcome res;
  std::vector<std::string> rows, failures;
  for (Scheme scheme : man.schemes)
    for (std::uint64_t s : man.samples)
      for (std::uint64_t seed : man.seeds) {
        ++res.cells;
        const std::string key = std::string(to_string(scheme)) + "_s" + std::to_string(s) + "_seed" + std::to_string(seed);
        const auto marker = cells / (key + ".csv");
        if (std::filesystem::exists(marker)) {
          const auto b = read_bytes(marker);
          std::string row(b.begin(), b.end());
          while (!row.empty() && (row.back() == '\n' || row.back() == '\r')) row.pop_back();
          rows.push_back(row);
          ++res.reused;
          continue;
        }
        try {
          SketchOptions o;
          o.plan.scheme = scheme;
          o.plan.trim_theta = man.trim_theta;
          o.plan.trim_domain = man.trim_domain;
          o.s = s;
          o.delta = man.delta;
          o.seed = seed;
          o.assume_uniform_z = man.assume_uniform_z && is_row_based(scheme);
          MemorySpillStore store;
          const SketchRun run = sketch_stream(vs, o, store);
          CsvRow row;
          row.matrix = man.name;
          row.scheme = scheme;
          row.s = s;
          row.seed = seed;
          row.k = man.k;
          row.eval = ev.evaluate(run.sketch);
          row.bits_per_sample = encode_sketch(run.sketch).bits_per_sample();
          row.zeta = run.plan.zeta;
          const std::string line = row.str();
          AtomicFile mk(marker);
          mk.write(line + "\n");
          mk.commit();
          rows.push_back(line);
        } catch (const std::exception& e) {
          ++res.failed;
          failures.push_back(key + ": " + e.what());
          err << "cell " << key << " failed: " << e.what() << "\n";
        }
      }

  std::string csv = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) csv += r + "\n";
  AtomicFile table(out);
  table.write(csv);
  table.commit();
  const std::filesystem::path fail_log = out + ".failures";
  if (failures.empty()) {
    std::filesystem::remove(fail_log);
  } else {
    std::string log;
    for (const auto& f : failures) log += f + "\n";
    AtomicFile fl(fail_log);
    fl.write(log);
    fl.commit();
  }
  return res;
}

}  // namespace sketchstream::cli
