#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cli_commands.hpp"

namespace ss = sketchstream;
namespace cli = sketchstream::cli;

namespace {

struct InputFlags {
  std::string path;
  bool use_synth = false;
  ss::SynthConfig synth;

  void attach(CLI::App* app) {
    app->add_option("--input,-i", path, "Matrix Market coordinate file");
    attach_synth(app);
    app->add_flag("--synth", use_synth, "use the synthetic generator instead of --input");
  }

  void attach_synth(CLI::App* app) {
    app->add_option("--synth-m", synth.m, "synthetic rows")->capture_default_str();
    app->add_option("--synth-n", synth.n, "synthetic columns")->capture_default_str();
    app->add_option("--synth-d", synth.d, "latent dimension")->capture_default_str();
    app->add_option("--synth-noise", synth.noise_sd, "noise standard deviation")->capture_default_str();
    app->add_option("--synth-seed", synth.seed, "generator seed")->capture_default_str();
  }

  cli::InputSpec spec() const {
    cli::InputSpec in;
    if (use_synth) {
      if (!path.empty()) throw ss::Error("--input and --synth are mutually exclusive");
      synth.validate();
      in.synth = synth;
    } else {
      in.path = path;
    }
    return in;
  }
};

struct PlanFlags {
  std::string scheme = "bernstein";
  double trim_theta = 0.1;
  std::string trim_domain = "nonzeros";

  void attach(CLI::App* app) {
    app->add_option("--scheme", scheme, "bernstein | row-l1 | l1 | l2 | l2-trim")->capture_default_str();
    app->add_option("--trim-theta", trim_theta, "trim threshold multiplier")->capture_default_str();
    app->add_option("--trim-mean-domain", trim_domain, "nonzeros | all-cells")->capture_default_str();
  }

  ss::PlanOptions options() const {
    ss::PlanOptions o;
    o.scheme = ss::parse_scheme(scheme);
    o.trim_theta = trim_theta;
    o.trim_domain = cli::parse_trim_domain(trim_domain);
    return o;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming matrix sparsification"};
  app.require_subcommand(1);

  InputFlags stats_in;
  bool no_columns = false;
  auto* stats = app.add_subcommand("stats", "matrix statistics and data-matrix conditions");
  stats_in.attach(stats);
  stats->add_flag("--no-columns", no_columns, "skip the O(n) column maxima");

  InputFlags sk_in;
  PlanFlags sk_plan;
  cli::SketchConfig sk;
  std::string spill = "file";
  auto* sketch = app.add_subcommand("sketch", "sample a sketch and write it in SKB1 format");
  sk_in.attach(sketch);
  sk_plan.attach(sketch);
  sketch->add_option("--samples,-s", sk.options.s, "sample budget")->capture_default_str();
  sketch->add_option("--delta", sk.options.delta, "failure probability")->capture_default_str();
  sketch->add_option("--seed", sk.options.seed, "sampling seed")->capture_default_str();
  sketch->add_flag("--assume-uniform-z", sk.options.assume_uniform_z, "skip the profile pass");
  sketch->add_option("--spill", spill, "file | memory")->capture_default_str();
  sketch->add_option("--out,-o", sk.out, "output path")->required();

  InputFlags ev_in;
  cli::EvaluateConfig ev;
  auto* evaluate = app.add_subcommand("evaluate", "score a sketch against its matrix (one CSV row)");
  ev_in.attach(evaluate);
  evaluate->add_option("--sketch", ev.sketch, "SKB1 file")->required();
  evaluate->add_option("--k", ev.k, "subspace dimension")->capture_default_str();
  evaluate->add_flag("--header", ev.header, "print the CSV header first");

  InputFlags sy_in;
  std::string sy_out;
  auto* synth = app.add_subcommand("synth", "write a synthetic matrix in Matrix Market format");
  sy_in.attach_synth(synth);
  synth->add_option("--out,-o", sy_out, "output path")->required();

  std::string manifest, ex_out;
  auto* experiment = app.add_subcommand("experiment", "run a manifest sweep into a CSV table");
  experiment->add_option("manifest", manifest, "JSON manifest")->required();
  experiment->add_option("--out,-o", ex_out, "CSV output path")->required();

  InputFlags an_in;
  PlanFlags an_plan;
  cli::AnalyzeConfig an;
  double an_eps = 0.0;
  auto* analyze = app.add_subcommand("analyze", "epsilon diagnostics on a small matrix");
  an_in.attach(analyze);
  an_plan.attach(analyze);
  analyze->add_option("--samples,-s", an.s, "sample budget")->capture_default_str();
  analyze->add_option("--delta", an.delta, "failure probability")->capture_default_str();
  analyze->add_option("--eps", an_eps, "report the sample complexity for this relative error");
  analyze->add_flag("--optimality", an.optimality, "search for a better distribution (nnz <= 8)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*stats) {
      cli::StatsConfig c{stats_in.spec(), !no_columns};
      std::cout << cli::cmd_stats(c).dump(2) << "\n";
    } else if (*sketch) {
      sk.input = sk_in.spec();
      sk.options.plan = sk_plan.options();
      if (spill != "file" && spill != "memory") throw ss::Error("--spill must be file or memory");
      sk.memory_spill = spill == "memory";
      std::cout << cli::cmd_sketch(sk).dump(2) << "\n";
    } else if (*evaluate) {
      ev.input = ev_in.spec();
      std::cout << cli::cmd_evaluate(ev);
    } else if (*synth) {
      sy_in.synth.validate();
      std::cout << cli::cmd_synth(sy_in.synth, sy_out).dump(2) << "\n";
    } else if (*experiment) {
      const auto r = cli::cmd_experiment(manifest, ex_out, std::cerr);
      std::cout << nlohmann::json{{"cells", r.cells}, {"reused", r.reused}, {"failed", r.failed}, {"out", ex_out}}.dump(2)
                << "\n";
      return r.failed == 0 ? 0 : 2;
    } else if (*analyze) {
      an.input = an_in.spec();
      an.plan = an_plan.options();
      if (analyze->count("--eps")) an.eps = an_eps;
      std::cout << cli::cmd_analyze(an).dump(2) << "\n";
    }
  } catch (const ss::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
