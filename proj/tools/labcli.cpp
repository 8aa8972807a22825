// labcli: sampling, finders, experiments and plots from the command line.
//
// Exit codes: 0 success, 2 invalid config or arguments, 3 experiment failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "latinbox/lab.hpp"

namespace fs = std::filesystem;
using namespace latinbox;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  int trials = 100;
  int threads = 1;
  std::string out = "out";
  std::string config;
};

/// Config file first, then any flag given on the command line.
ExperimentConfig load_config(const std::string& kind, const Globals& g, const CLI::App& app) {
  ExperimentConfig cfg;
  if (!g.config.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(g.config));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
    cfg = config_from_json(j);
  }
  cfg.kind = kind;
  if (app.count("--seed")) cfg.seed = g.seed;
  if (app.count("--trials")) cfg.trials = g.trials;
  if (app.count("--threads")) cfg.threads = g.threads;
  if (app.count("--out")) cfg.out = g.out;
  return cfg;
}

Array3D read_array(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  char head[4] = {};
  is.read(head, 4);
  is.seekg(0);
  if (std::string(head, 4) == std::string(kArrayMagic, 4)) return read_binary(is);
  try {
    return array_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": not an array file (" + e.what() + ")");
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latinbox lab: random Latin boxes in 0-1 arrays"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--trials", g.trials, "trials per grid point");
  app.add_option("--threads", g.threads, "worker threads");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--config", g.config, "JSON config; flags override file values");

  // sample
  auto* sample = app.add_subcommand("sample", "sample a binomial or green/blue array");
  int s_rows = 0, s_cols = 4, s_syms = 0;
  double s_p = 0.5;
  bool s_green_blue = false, s_binary = false;
  sample->add_option("--rows", s_rows, "rows (default: cols)");
  sample->add_option("--cols", s_cols, "columns");
  sample->add_option("--symbols", s_syms, "symbols (default: cols)");
  sample->add_option("--p", s_p, "density")->check(CLI::Range(0.0, 1.0));
  sample->add_flag("--green-blue", s_green_blue, "add one blue 1 to each empty shaft");
  sample->add_flag("--binary", s_binary, "also write array.bin");

  // find
  auto* find = app.add_subcommand("find", "run a finder on an array file");
  std::string f_input, f_finder = "exact";
  std::uint64_t f_node_cap = 5'000'000;
  int f_n0 = 2;
  bool f_count = false;
  find->add_option("input", f_input, "array file (JSON or binary)")->required();
  find->add_option("--finder", f_finder, "exact | block | plane | staged");
  find->add_option("--node-cap", f_node_cap, "exact search node cap (0 = none)");
  find->add_option("--n0", f_n0, "block order for the block finder");
  find->add_flag("--count", f_count, "count all Latin boxes (exact finder)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "threshold sweep over a p grid");
  int w_n = 12;
  double w_eps = 0.5;
  std::string w_shape = "rows", w_finder = "exact";
  std::vector<double> w_p;
  std::uint64_t w_node_cap = 5'000'000;
  bool w_wall = false;
  sweep->add_option("--n", w_n, "n");
  sweep->add_option("--eps", w_eps, "epsilon");
  sweep->add_option("--shape", w_shape, "rows | symbols | cube");
  sweep->add_option("--p", w_p, "p grid")->delimiter(',');
  sweep->add_option("--finder", w_finder, "exact | block | plane | staged");
  sweep->add_option("--node-cap", w_node_cap, "exact search node cap");
  sweep->add_flag("--wall-time", w_wall, "record wall time in the trial log");

  // hitting
  auto* hitting = app.add_subcommand("hitting", "hitting-time trials on the array process");
  int h_n = 12;
  double h_eps = 0.5;
  std::uint64_t h_node_cap = 5'000'000;
  bool h_wall = false;
  hitting->add_option("--n", h_n, "n");
  hitting->add_option("--eps", h_eps, "epsilon; m = ceil((1+eps)n)");
  hitting->add_option("--node-cap", h_node_cap, "exact search node cap");
  hitting->add_flag("--wall-time", h_wall, "record wall time in the trial log");

  // qval
  auto* qval = app.add_subcommand("qval", "containment polynomial vs Monte Carlo");
  int q_n0 = 2;
  std::vector<double> q_p;
  qval->add_option("--n0", q_n0, "block order (<= 3)");
  qval->add_option("--p", q_p, "p list")->delimiter(',')->required();

  // pack
  auto* pack = app.add_subcommand("pack", "random greedy packing trajectories");
  std::vector<int> k_n;
  int k_seeds = 10;
  double k_horizon = 1.0;
  pack->add_option("--n", k_n, "n list")->delimiter(',');
  pack->add_option("--seeds", k_seeds, "seeds per n");
  pack->add_option("--horizon", k_horizon, "steps = horizon * n^2");

  // count
  auto* count = app.add_subcommand("count", "exact Latin box / rectangle counts");
  int c_m = 2, c_n = 2, c_k = 0;
  bool c_rect = false;
  count->add_option("--m", c_m, "rows");
  count->add_option("--n", c_n, "columns");
  count->add_option("--k", c_k, "symbols (default: n)");
  count->add_flag("--rectangles", c_rect, "count m x n Latin rectangles");

  // plot
  auto* plot = app.add_subcommand("plot", "SVG from a curve or trajectory CSV");
  std::string p_csv, p_kind = "curve", p_output;
  plot->add_option("csv", p_csv, "input CSV")->required();
  plot->add_option("--kind", p_kind, "curve | trajectory");
  plot->add_option("--output", p_output, "SVG path (default: csv with .svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const fs::path out_dir = g.out;
    if (*sample) {
      const int cols = s_cols, rows = s_rows ? s_rows : cols, syms = s_syms ? s_syms : cols;
      Array3D a;
      nlohmann::json meta{{"seed", g.seed}, {"p", s_p}};
      if (s_green_blue) {
        if (rows != cols) throw ConfigError("sample: green/blue arrays are square in rows and columns");
        const ColoredArray ca = sample_green_blue(cols, syms, s_p, g.seed);
        a = ca.combined();
        meta["blue"] = to_json(ca.blue);
      } else {
        a = sample_binomial(Dims{rows, cols, syms}, s_p, g.seed);
      }
      meta["array"] = to_json(a);
      meta["empty_shafts"] = empty_shafts(a).size();
      write_json(out_dir / "array.json", meta["array"]);
      write_json(out_dir / "sample.json", meta);
      if (s_binary) {
        std::ofstream os(out_dir / "array.bin", std::ios::binary);
        write_binary(os, a);
      }
      std::cout << "wrote " << (out_dir / "array.json").string() << " (" << a.ones() << " ones, "
                << meta["empty_shafts"] << " empty shafts)\n";
    } else if (*find) {
      const Array3D a = read_array(f_input);
      FinderOutcome o;
      if (f_finder == "exact") {
        ExactOptions opt;
        opt.node_cap = f_node_cap;
        if (f_count) opt.mode = ExactMode::CountAll;
        o = find_exact(a, opt);
      } else if (f_finder == "block") {
        o = find_block_recursive(a, f_n0);
      } else if (f_finder == "plane") {
        o = find_plane_matching(a, PlaneMatchingParams{}, g.seed);
      } else if (f_finder == "staged") {
        const ColoredArray ca{a, Array3D(a.dims())};
        const double eps = std::max(1e-9, static_cast<double>(a.symbols()) / a.cols() - 1);
        o = find_staged(ca, StagedParams::defaults(a.cols(), eps), g.seed);
      } else {
        throw ConfigError("unknown finder: " + f_finder);
      }
      nlohmann::json j = to_json(o);
      j["seed"] = g.seed;
      j["finder"] = f_finder;
      if (o.result) j["valid"] = validate_latin_box(*o.result, a).valid;
      std::cout << j.dump(2) << "\n";
      if (app.count("--out")) write_json(out_dir / "find.json", j);
    } else if (*sweep) {
      ExperimentConfig cfg = load_config("sweep", g, app);
      if (sweep->count("--n")) cfg.n = w_n;
      if (sweep->count("--eps")) cfg.eps = w_eps;
      if (sweep->count("--shape")) cfg.shape = w_shape;
      if (sweep->count("--p")) cfg.p_grid = w_p;
      if (sweep->count("--finder")) cfg.finder = w_finder;
      if (sweep->count("--node-cap")) cfg.node_cap = w_node_cap;
      if (w_wall) cfg.record_wall_time = true;
      const SweepResult r = run_threshold_sweep(cfg);
      std::uint64_t valid = 0;
      for (const auto& row : r.rows) valid += row.trials;
      const fs::path dir = cfg.out;
      write_file(dir / "sweep.csv", sweep_csv(r));
      write_file(dir / "trials.jsonl", sweep_jsonl(r, cfg.record_wall_time));
      write_json(dir / "summary.json", sweep_summary(cfg, r));
      write_file(dir / "sweep.svg", emit_plot(sweep_csv(r), PlotKind::Curve));
      std::cout << sweep_csv(r);
      if (!r.fit.warning.empty()) std::cerr << "warning: " << r.fit.warning << "\n";
      if (valid == 0) throw ExperimentFailure("sweep: every trial was indeterminate");
    } else if (*hitting) {
      ExperimentConfig cfg = load_config("hitting", g, app);
      if (hitting->count("--n")) cfg.n = h_n;
      if (hitting->count("--eps")) cfg.eps = h_eps;
      if (hitting->count("--node-cap")) cfg.node_cap = h_node_cap;
      if (h_wall) cfg.record_wall_time = true;
      const HittingResult r = run_hitting_time(cfg);
      const fs::path dir = cfg.out;
      write_file(dir / "hitting.jsonl", hitting_jsonl(r, cfg.record_wall_time));
      const nlohmann::json summary = hitting_summary(cfg, r);
      write_json(dir / "summary.json", summary);
      std::cout << summary.dump(2) << "\n";
      if (r.valid == 0) throw ExperimentFailure("hitting: every trial was indeterminate");
    } else if (*qval) {
      ExperimentConfig cfg = load_config("qval", g, app);
      if (qval->count("--n0")) cfg.n0 = q_n0;
      cfg.p_grid = q_p;
      cfg.validate();
      const auto rows = run_q_validation(cfg.n0, cfg.p_grid, cfg.trials, cfg.seed, cfg.threads);
      const fs::path dir = cfg.out;
      write_file(dir / "qval.csv", q_validation_csv(rows));
      write_json(dir / "summary.json", nlohmann::json{{"config", to_json(cfg)}, {"seed", cfg.seed}});
      std::cout << q_validation_csv(rows);
    } else if (*pack) {
      ExperimentConfig cfg = load_config("pack", g, app);
      if (pack->count("--n")) cfg.pack_n = k_n;
      if (pack->count("--seeds")) cfg.pack_seeds = k_seeds;
      if (pack->count("--horizon")) cfg.horizon = k_horizon;
      if (cfg.pack_n.empty()) cfg.pack_n = {cfg.n};
      cfg.validate();
      const auto runs = run_packing_campaign(cfg.pack_n, cfg.pack_seeds, cfg.horizon, cfg.seed, cfg.threads);
      const fs::path dir = cfg.out;
      for (const auto& r : runs) {
        std::ostringstream os;
        write_trajectory_csv(os, r.trajectory);
        const std::string stem = "traj_n" + std::to_string(r.n) + "_s" + std::to_string(r.seed_index);
        write_file(dir / (stem + ".csv"), os.str());
        write_file(dir / (stem + ".svg"), emit_plot(os.str(), PlotKind::Trajectory));
      }
      write_file(dir / "pack_summary.csv", packing_summary_csv(runs));
      write_json(dir / "summary.json", nlohmann::json{{"config", to_json(cfg)}, {"seed", cfg.seed}});
      std::cout << packing_summary_csv(runs);
    } else if (*count) {
      const int k = c_k ? c_k : c_n;
      const BigInt v = c_rect ? count_rectangles_exact(c_m, c_n) : count_latin_boxes(c_m, c_n, k);
      std::cout << to_decimal(v) << "\n";
    } else if (*plot) {
      PlotKind kind;
      if (p_kind == "curve") kind = PlotKind::Curve;
      else if (p_kind == "trajectory") kind = PlotKind::Trajectory;
      else throw ConfigError("unknown plot kind: " + p_kind);
      const fs::path target = p_output.empty() ? fs::path(p_csv).replace_extension(".svg") : fs::path(p_output);
      write_file(target, emit_plot(read_file(p_csv), kind));
      std::cout << "wrote " << target.string() << "\n";
    }
  } catch (const ExperimentFailure& e) {
    std::cerr << "experiment failure: " << e.what() << "\n";
    return 3;
  } catch (const SizeError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
