#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "d2epm/geweke.hpp"
#include "d2epm/gibbs.hpp"
#include "d2epm/io.hpp"
#include "d2epm/metrics.hpp"
#include "d2epm/model.hpp"
#include "d2epm/sgmcmc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace d2epm;

namespace {

std::string iso_now() {
  std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

struct HyperFlags {
  std::uint32_t communities = 50;
  double g_k = 0.1, c0 = 1.0, alpha = 0.0, a0 = 0.01, b0 = 0.01;

  void add_to(CLI::App* cmd) {
    cmd->add_option("-k,--communities", communities, "number of latent communities");
    cmd->add_option("--g-k", g_k, "per-community weight shape");
    cmd->add_option("--c0", c0, "weight probability concentration");
    cmd->add_option("--alpha", alpha, "weight probability mean (0 means 1/K)");
    cmd->add_option("--a0", a0, "membership concentration shape");
    cmd->add_option("--b0", b0, "membership concentration rate");
  }

  Hyperparams build() const {
    Hyperparams h;
    h.k_init = communities;
    h.g_k = g_k;
    h.c0 = c0;
    h.alpha = alpha;
    h.a0 = a0;
    h.b0 = b0;
    h.validate();
    return h;
  }
};

// config file keys fill in values the user did not pass as flags
struct ConfigBinder {
  CLI::App* cmd;
  std::vector<std::tuple<std::string, std::string, std::function<void(const std::string&)>>> keys;

  static double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    if (!detail::parse_double(v, out)) {
      throw std::runtime_error("config key " + key + ": bad number '" + v + "'");
    }
    return out;
  }

  static bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::runtime_error("config key " + key + ": bad boolean '" + v + "'");
  }

  void number(const std::string& key, const std::string& flag, double& ref) {
    keys.emplace_back(key, flag, [key, &ref](const std::string& v) { ref = to_double(key, v); });
  }

  template <class Int>
  void integer(const std::string& key, const std::string& flag, Int& ref) {
    keys.emplace_back(key, flag, [key, &ref](const std::string& v) {
      double d = to_double(key, v);
      if (d < 0 || d != std::floor(d)) {
        throw std::runtime_error("config key " + key + ": expected a nonnegative integer");
      }
      ref = static_cast<Int>(d);
    });
  }

  void boolean(const std::string& key, const std::string& flag, bool& ref) {
    keys.emplace_back(key, flag, [key, &ref](const std::string& v) { ref = to_bool(key, v); });
  }

  void text(const std::string& key, const std::string& flag, std::string& ref) {
    keys.emplace_back(key, flag, [&ref](const std::string& v) { ref = v; });
  }

  void apply_file(const std::string& path) const {
    for (const auto& [key, value] : parse_kv_file(path)) {
      bool known = false;
      for (const auto& [name, flag, set] : keys) {
        if (name != key) continue;
        known = true;
        if (cmd->count(flag) == 0) set(value);
        break;
      }
      if (!known) throw std::runtime_error(path + ": unknown config key '" + key + "'");
    }
  }
};

struct TrainArtifacts {
  double auroc = std::numeric_limits<double>::quiet_NaN();
  std::size_t train_edges = 0;
  std::size_t heldout_entries = 0;
  double elapsed_seconds = 0.0;
};

int cmd_simulate(const HyperFlags& hf, std::uint32_t n, std::uint32_t t, std::uint64_t seed,
                 const std::string& out_path, const std::string& state_path) {
  Hyperparams hyper = hf.build();
  RngStream rng(seed, 0);
  auto [state, graph] = simulate(hyper, n, t, rng);

  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot open " + out_path + " for writing");
  os << "# src dst time\n";
  for (std::uint32_t step = 0; step < graph.num_steps; ++step) {
    for (auto [i, j] : graph.snapshots[step]) {
      os << i << ' ' << j << ' ' << step << '\n';
    }
  }
  if (!os) throw std::runtime_error("failed writing " + out_path);

  if (!state_path.empty()) save_state_file(state_path, state);

  std::cout << "simulated " << graph.num_vertices << " vertices, " << graph.num_steps
            << " snapshots, " << graph.edge_count() << " edges -> " << out_path << "\n";
  if (graph.edge_count() == 0) {
    std::cerr << "warning: simulated graph has no edges; try a different seed or larger --g-k\n";
  }
  return 0;
}

TrainArtifacts train_once(const TemporalGraph& graph, const Hyperparams& hyper,
                          const std::string& algorithm, double heldout, std::uint64_t seed,
                          std::int64_t iterations, std::int64_t burn_in,
                          std::int64_t collect_every, double minibatch_fraction, double step_a,
                          double step_b, double step_c, double scale_ema_decay, bool no_lint,
                          bool trace_auroc, const fs::path& dir) {
  RngStream split_rng(seed, 1);
  HeldOutMask mask = heldout_split(graph, heldout, split_rng);

  auto started = std::chrono::steady_clock::now();
  RngStream rng(seed, 2);
  InferenceResult result;
  if (algorithm == "gibbs") {
    GibbsConfig cfg;
    if (iterations >= 0) cfg.iterations = static_cast<std::uint64_t>(iterations);
    if (burn_in >= 0) cfg.burn_in = static_cast<std::uint64_t>(burn_in);
    if (collect_every >= 0) cfg.collect_every = static_cast<std::uint64_t>(collect_every);
    cfg.seed = seed;
    cfg.trace_auroc = trace_auroc;
    result = run_gibbs(graph, mask, hyper, cfg, rng);
  } else {
    SgmcmcConfig cfg;
    cfg.variant = algorithm == "em-sgrld" ? SgmcmcVariant::expanded_mean
                                          : SgmcmcVariant::reduced_mean;
    if (iterations >= 0) cfg.iterations = static_cast<std::uint64_t>(iterations);
    if (burn_in >= 0) cfg.burn_in = static_cast<std::uint64_t>(burn_in);
    if (collect_every >= 0) cfg.collect_every = static_cast<std::uint64_t>(collect_every);
    cfg.minibatch_fraction = minibatch_fraction;
    cfg.step_a = step_a;
    cfg.step_b = step_b;
    cfg.step_c = step_c;
    cfg.scale_ema_decay = scale_ema_decay;
    cfg.lint_stepsize = !no_lint;
    cfg.seed = seed;
    cfg.trace_auroc = trace_auroc;
    result = run_sgmcmc(graph, mask, hyper, cfg, rng);
  }
  std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;

  fs::create_directories(dir);
  {
    std::ofstream os(dir / "trace.csv");
    write_trace_csv(os, result.trace);
  }
  if (!mask.entries.empty()) {
    std::ofstream os(dir / "predictions.csv");
    write_predictions_csv(os, mask, result.summary.heldout_score);
  }
  {
    ModelState mean;
    mean.N = result.summary.N;
    mean.T = result.summary.T;
    mean.K = result.summary.K;
    mean.eta = result.summary.eta_mean;
    mean.lambda = result.summary.lambda_mean;
    mean.p = result.summary.p_mean;
    mean.phi = result.summary.phi_mean;
    save_state_file((dir / "state.bin").string(), mean);
  }

  TrainArtifacts art;
  art.train_edges = training_view(graph, mask).edge_count();
  art.heldout_entries = mask.entries.size();
  art.elapsed_seconds = elapsed.count();
  try {
    std::vector<bool> labels;
    for (const auto& e : mask.entries) labels.push_back(e.label != 0);
    if (!mask.entries.empty()) {
      art.auroc = auroc(result.summary.heldout_score, labels);
    }
  } catch (const std::invalid_argument&) {
    // single-class held-out set: leave auroc undefined
  }
  return art;
}

int cmd_eval(const std::string& predictions_path) {
  std::ifstream is(predictions_path);
  if (!is) throw std::runtime_error("cannot open " + predictions_path);
  auto entries = read_predictions_csv(is);
  double a = auroc(entries);
  std::cout << "auroc = " << fixed4(a) << " over " << entries.size() << " pairs\n";
  return 0;
}

int cmd_geweke(std::uint64_t samples, std::uint64_t seed, const std::string& mutation_name,
               std::uint32_t n, std::uint32_t t, std::uint32_t k, double z_threshold) {
  GewekeMutation mutation = GewekeMutation::none;
  if (mutation_name == "weight-scale") {
    mutation = GewekeMutation::weight_scale;
  } else if (mutation_name == "membership-prior-shift") {
    mutation = GewekeMutation::membership_prior_shift;
  } else if (mutation_name == "stick-swap") {
    mutation = GewekeMutation::stick_swap;
  } else if (mutation_name != "none") {
    throw std::runtime_error("unknown mutation '" + mutation_name + "'");
  }

  // tempered hyperparameters keep every prior moment finite in the harness
  Hyperparams hyper;
  hyper.k_init = k;
  hyper.g_k = 2.0;
  hyper.c0 = 8.0;
  hyper.alpha = 0.25;
  hyper.a0 = 1.0;
  hyper.b0 = 1.0;

  GewekeDims dims{n, t, k};
  GewekeReport report = geweke_test(hyper, dims, samples, seed, mutation);

  std::printf("%-16s %12s %12s %8s\n", "stat", "prior chain", "gibbs chain", "z");
  for (const auto& s : report.stats) {
    std::printf("%-16s %12.5f %12.5f %8.2f\n", s.name.c_str(), s.mean_forward, s.mean_sampler,
                s.z);
  }
  double worst = report.max_abs_z();
  std::printf("max |z| = %.2f (threshold %.1f)\n", worst, z_threshold);
  return worst < z_threshold ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic edge partition model: simulation, inference, evaluation"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "draw a model instance and write its edge list");
  HyperFlags sim_hyper;
  std::uint32_t sim_n = 50, sim_t = 10;
  std::uint64_t sim_seed = 0;
  std::string sim_out = "graph.txt", sim_state;
  sim_hyper.add_to(sim);
  sim->add_option("-n,--vertices", sim_n, "number of vertices")->required();
  sim->add_option("-t,--steps", sim_t, "number of snapshots")->required();
  sim->add_option("--seed", sim_seed, "random seed");
  sim->add_option("-o,--out", sim_out, "output edge list path");
  sim->add_option("--out-state", sim_state, "also save the generating state");

  // train
  auto* train = app.add_subcommand("train", "fit the model and score held-out pairs");
  HyperFlags train_hyper;
  std::string data_path, algorithm = "gibbs", out_dir = "run", config_path;
  double window = 1.0, heldout = 0.1;
  std::uint64_t train_seed = 0, repeats = 1;
  std::int64_t iterations = -1, burn_in = -1, collect_every = -1;
  double minibatch_fraction = 0.1, step_a = 10.0, step_b = 1000.0, step_c = 0.6;
  double scale_ema_decay = 0.9;
  bool no_lint = false, trace_auroc = false;
  train_hyper.add_to(train);
  train->add_option("-d,--data", data_path, "event list (src dst time)")->required();
  train->add_option("-w,--window", window, "snapshot width in time units");
  train->add_option("-a,--algorithm", algorithm, "gibbs, em-sgrld, or rm-sgrld")
      ->check(CLI::IsMember({"gibbs", "em-sgrld", "rm-sgrld"}));
  train->add_option("-o,--out", out_dir, "output directory");
  train->add_option("--heldout", heldout, "fraction of the pair grid to hold out");
  train->add_option("--seed", train_seed, "random seed");
  train->add_option("--repeats", repeats, "independent runs with consecutive seeds");
  train->add_option("--iterations", iterations, "sampler iterations (-1 keeps the default)");
  train->add_option("--burn-in", burn_in, "burn-in iterations (-1 keeps the default)");
  train->add_option("--collect-every", collect_every, "collection stride (-1 keeps the default)");
  train->add_option("--minibatch-fraction", minibatch_fraction, "edges per stochastic step");
  train->add_option("--step-a", step_a, "stepsize scale");
  train->add_option("--step-b", step_b, "stepsize offset");
  train->add_option("--step-c", step_c, "stepsize decay exponent");
  train->add_option("--scale-ema-decay", scale_ema_decay, "decay of the minibatch scale average");
  train->add_flag("--no-stepsize-lint", no_lint, "allow decay exponents outside (0.5, 1]");
  train->add_flag("--trace-auroc", trace_auroc, "record running held-out auroc in the trace");
  train->add_option("-c,--config", config_path, "key = value file for any of these settings");

  ConfigBinder binder{train, {}};
  binder.integer("communities", "--communities", train_hyper.communities);
  binder.number("g_k", "--g-k", train_hyper.g_k);
  binder.number("c0", "--c0", train_hyper.c0);
  binder.number("alpha", "--alpha", train_hyper.alpha);
  binder.number("a0", "--a0", train_hyper.a0);
  binder.number("b0", "--b0", train_hyper.b0);
  binder.text("algorithm", "--algorithm", algorithm);
  binder.number("window", "--window", window);
  binder.number("heldout", "--heldout", heldout);
  binder.integer("seed", "--seed", train_seed);
  binder.integer("repeats", "--repeats", repeats);
  binder.integer("iterations", "--iterations", iterations);
  binder.integer("burn_in", "--burn-in", burn_in);
  binder.integer("collect_every", "--collect-every", collect_every);
  binder.number("minibatch_fraction", "--minibatch-fraction", minibatch_fraction);
  binder.number("step_a", "--step-a", step_a);
  binder.number("step_b", "--step-b", step_b);
  binder.number("step_c", "--step-c", step_c);
  binder.number("scale_ema_decay", "--scale-ema-decay", scale_ema_decay);
  binder.boolean("trace_auroc", "--trace-auroc", trace_auroc);

  // predict
  auto* predict = app.add_subcommand("predict", "score held-out pairs with a saved state");
  std::string pred_state, pred_data, pred_out = "predictions.csv";
  double pred_window = 1.0, pred_heldout = 0.1;
  std::uint64_t pred_seed = 0;
  predict->add_option("-s,--state", pred_state, "state file from train or simulate")->required();
  predict->add_option("-d,--data", pred_data, "event list (src dst time)")->required();
  predict->add_option("-w,--window", pred_window, "snapshot width in time units");
  predict->add_option("--heldout", pred_heldout, "fraction of the pair grid to score");
  predict->add_option("--seed", pred_seed, "seed; matches the split of train with the same seed");
  predict->add_option("-o,--out", pred_out, "output predictions path");

  // eval
  auto* eval = app.add_subcommand("eval", "area under the ROC curve of a predictions file");
  std::string eval_path;
  eval->add_option("-p,--predictions", eval_path, "predictions csv")->required();

  // geweke
  auto* geweke = app.add_subcommand("geweke", "joint-distribution self-check of the sampler");
  std::uint64_t gw_samples = 50000, gw_seed = 0;
  std::string gw_mutation = "none";
  std::uint32_t gw_n = 4, gw_t = 3, gw_k = 2;
  double gw_threshold = 4.0;
  geweke->add_option("--samples", gw_samples, "samples per chain");
  geweke->add_option("--seed", gw_seed, "random seed");
  geweke
      ->add_option("--mutation", gw_mutation,
                   "inject a known bug: none, weight-scale, membership-prior-shift, stick-swap")
      ->check(CLI::IsMember({"none", "weight-scale", "membership-prior-shift", "stick-swap"}));
  geweke->add_option("-n,--vertices", gw_n, "vertices");
  geweke->add_option("-t,--steps", gw_t, "snapshots");
  geweke->add_option("-k,--communities", gw_k, "communities");
  geweke->add_option("--z-threshold", gw_threshold, "exit nonzero if any |z| reaches this");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(sim_hyper, sim_n, sim_t, sim_seed, sim_out, sim_state);
    }

    if (train->parsed()) {
      if (!config_path.empty()) binder.apply_file(config_path);
      if (repeats < 1) throw std::runtime_error("--repeats must be at least 1");
      Hyperparams hyper = train_hyper.build();
      EventList events = load_events_file(data_path);
      if (events.dropped_self_loops > 0) {
        std::cerr << "warning: dropped " << events.dropped_self_loops << " self-loop events\n";
      }
      TemporalGraph graph = aggregate_events(events, window);
      std::cout << "loaded " << graph.num_vertices << " vertices, " << graph.num_steps
                << " snapshots, " << graph.edge_count() << " edges\n";

      std::vector<double> aurocs;
      json runs = json::array();
      for (std::uint64_t r = 0; r < repeats; ++r) {
        std::uint64_t seed = train_seed + r;
        fs::path dir = repeats == 1 ? fs::path(out_dir)
                                    : fs::path(out_dir) / ("run-" + std::to_string(r));
        TrainArtifacts art = train_once(graph, hyper, algorithm, heldout, seed, iterations,
                                        burn_in, collect_every, minibatch_fraction, step_a,
                                        step_b, step_c, scale_ema_decay, no_lint, trace_auroc,
                                        dir);
        std::cout << "run " << r << ": ";
        if (std::isfinite(art.auroc)) {
          std::cout << "held-out auroc = " << fixed4(art.auroc);
          aurocs.push_back(art.auroc);
        } else {
          std::cout << "held-out auroc = n/a";
        }
        std::cout << " (" << art.train_edges << " training edges, " << art.heldout_entries
                  << " held-out pairs, " << fixed4(art.elapsed_seconds) << "s)\n";

        json run;
        run["seed"] = seed;
        run["directory"] = dir.string();
        run["auroc"] = std::isfinite(art.auroc) ? json(art.auroc) : json(nullptr);
        run["train_edges"] = art.train_edges;
        run["heldout_entries"] = art.heldout_entries;
        run["elapsed_seconds"] = art.elapsed_seconds;
        runs.push_back(run);
      }

      json manifest;
      manifest["command"] = "train";
      manifest["created"] = iso_now();
      manifest["data"] = data_path;
      manifest["window"] = window;
      manifest["algorithm"] = algorithm;
      manifest["vertices"] = graph.num_vertices;
      manifest["snapshots"] = graph.num_steps;
      manifest["edges"] = graph.edge_count();
      manifest["heldout_fraction"] = heldout;
      manifest["communities"] = hyper.k_init;
      manifest["repeats"] = repeats;
      manifest["runs"] = runs;
      if (!aurocs.empty()) {
        double mean = 0.0;
        for (double a : aurocs) mean += a;
        mean /= static_cast<double>(aurocs.size());
        double var = 0.0;
        for (double a : aurocs) var += (a - mean) * (a - mean);
        var = aurocs.size() > 1 ? var / static_cast<double>(aurocs.size() - 1) : 0.0;
        manifest["auroc_mean"] = mean;
        manifest["auroc_sd"] = std::sqrt(var);
        if (repeats > 1) {
          std::cout << "mean held-out auroc = " << fixed4(mean) << " +/- "
                    << fixed4(std::sqrt(var)) << " over " << aurocs.size() << " runs\n";
        }
      }
      fs::create_directories(out_dir);
      std::ofstream os(fs::path(out_dir) / "manifest.json");
      os << manifest.dump(2) << "\n";
      if (!os) throw std::runtime_error("failed writing manifest");
      return 0;
    }

    if (predict->parsed()) {
      ModelState state = load_state_file(pred_state);
      EventList events = load_events_file(pred_data);
      TemporalGraph graph = aggregate_events(events, pred_window);
      if (graph.num_vertices != state.N || graph.num_steps > state.T) {
        throw std::runtime_error(
            "state covers " + std::to_string(state.N) + " vertices x " +
            std::to_string(state.T) + " snapshots but the data needs " +
            std::to_string(graph.num_vertices) + " x " + std::to_string(graph.num_steps));
      }
      RngStream split_rng(pred_seed, 1);
      HeldOutMask mask = heldout_split(graph, pred_heldout, split_rng);
      if (mask.entries.empty()) throw std::runtime_error("held-out set is empty");

      std::vector<double> scores;
      scores.reserve(mask.entries.size());
      for (const auto& e : mask.entries) {
        scores.push_back(link_probability(state, e.t, e.i, e.j));
      }
      std::ofstream os(pred_out);
      if (!os) throw std::runtime_error("cannot open " + pred_out + " for writing");
      write_predictions_csv(os, mask, scores);
      std::cout << "scored " << scores.size() << " pairs -> " << pred_out << "\n";
      try {
        std::vector<bool> labels;
        for (const auto& e : mask.entries) labels.push_back(e.label != 0);
        std::cout << "auroc = " << fixed4(auroc(scores, labels)) << "\n";
      } catch (const std::invalid_argument&) {
        std::cout << "auroc = n/a (single-class held-out set)\n";
      }
      return 0;
    }

    if (eval->parsed()) return cmd_eval(eval_path);

    if (geweke->parsed()) {
      return cmd_geweke(gw_samples, gw_seed, gw_mutation, gw_n, gw_t, gw_k, gw_threshold);
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
