#include "psim/cli.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "psim/config.hpp"
#include "psim/experiments.hpp"
#include "psim/gradcheck.hpp"
#include "psim/image_io.hpp"
#include "psim/metrics.hpp"
#include "psim/tensor.hpp"

namespace psim {

namespace fs = std::filesystem;

namespace {

// Raw flag values; typed validation happens in Config/resolve_experiment so
// CLI overrides fail with the same messages as the equivalent file entry.
struct Flags {
  std::string config_path;
  std::string seed, out, scale, iters;
  bool has_seed = false, has_out = false, has_scale = false, has_iters = false;
};

void add_run_flags(CLI::App* cmd, Flags& f, bool with_iters) {
  cmd->add_option("--config", f.config_path, "key = value configuration file")
      ->required();
  cmd->add_option("--seed", f.seed, "override run.seed");
  cmd->add_option("--out", f.out, "override run.out");
  cmd->add_option("--scale", f.scale, "override model.scale");
  if (with_iters) cmd->add_option("--iters", f.iters, "override run.iters");
}

void read_presence(const CLI::App* cmd, Flags& f) {
  auto present = [cmd](const std::string& name) {
    const CLI::Option* o = cmd->get_option_no_throw(name);
    return o != nullptr && o->count() > 0;
  };
  f.has_seed = present("--seed");
  f.has_out = present("--out");
  f.has_scale = present("--scale");
  f.has_iters = present("--iters");
}

Config load_config(const Flags& f) {
  Config cfg = Config::parse_file(f.config_path);
  if (f.has_seed) cfg.set("run.seed", f.seed);
  if (f.has_out) cfg.set("run.out", f.out);
  if (f.has_scale) cfg.set("model.scale", f.scale);
  if (f.has_iters) cfg.set("run.iters", f.iters);
  return cfg;
}

void print_table(const MetricTable& table) {
  std::string out = "label,img_err_pct,feat_err_pct,iteration\n";
  char buf[64];
  for (const MetricRow& r : table.rows) {
    out += r.label;
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,", r.img_err_pct, r.feat_err_pct);
    out += buf;
    out += std::to_string(r.iteration) + "\n";
  }
  std::fwrite(out.data(), 1, out.size(), stdout);
  std::fflush(stdout);
}

// Restored-checkpoint commands: no training happens, so the iteration budget
// is forced to zero and a checkpoint is mandatory.
ExperimentConfig resolve_restored(const Flags& f, const char* cmd) {
  Config cfg = load_config(f);
  cfg.set_int("run.iters", 0);
  ExperimentConfig ec = resolve_experiment(cfg);
  if (ec.resume.empty())
    throw ConfigError(std::string(cmd) + ": run.resume must name a checkpoint to restore");
  return ec;
}

void write_row_grid(const std::vector<Tensor>& rows, int max_cols, const std::string& path) {
  std::vector<ImageRecord> cells;
  int cols = 0;
  for (const Tensor& row : rows) {
    std::vector<ImageRecord> imgs = split_batch(row);
    cols = std::min<int>(max_cols, (int)imgs.size());
    for (int i = 0; i < cols; ++i) cells.push_back(imgs[(size_t)i]);
  }
  write_grid(cells, cols, path);
}

int run_train(const Flags& f, bool require_inversion) {
  ExperimentConfig ec = resolve_experiment(load_config(f));
  if (require_inversion && ec.task != "inversion")
    throw ConfigError("invert: task must be \"inversion\", got \"" + ec.task + "\"");
  print_table(run_experiment(ec));
  return 0;
}

int run_eval(const Flags& f) {
  ExperimentConfig ec = resolve_restored(f, "eval");
  print_table(run_experiment(ec));
  return 0;
}

int run_sample(const Flags& f) {
  ExperimentConfig ec = resolve_restored(f, "sample");
  if (ec.task != "vae")
    throw ConfigError("sample: task must be \"vae\", got \"" + ec.task + "\"");
  print_table(run_experiment(ec));
  return 0;
}

int run_reencode(const Flags& f) {
  ExperimentConfig ec = resolve_restored(f, "reencode");
  Session s = make_session(ec);
  RunArtifacts art;
  MetricTable table = run_session(s, &art);

  std::vector<Tensor> iterates = iterative_reencode(
      [&](const Tensor& x) { return session_generate(s, x); },
      [&](const Tensor& imgs) { return session_input(s, imgs); }, art.targets,
      ec.reencode_iters);

  const std::vector<Tensor> tgt_imgs = split_samples(art.targets);
  const std::vector<Tensor> tgt_feats =
      split_samples(phi_features(s.comparator, art.targets, s.metric_tap));
  for (size_t k = 0; k < iterates.size(); ++k) {
    MetricRow row;
    row.label = ec.label + "_reencode_" + std::to_string(k + 1);
    row.iteration = (int64_t)k + 1;
    row.img_err_pct = normalized_error(split_samples(iterates[k]), tgt_imgs);
    row.feat_err_pct = normalized_error(
        split_samples(phi_features(s.comparator, iterates[k], s.metric_tap)), tgt_feats);
    table.rows.push_back(row);
  }

  if (!ec.out_dir.empty()) {
    fs::path out(ec.out_dir);
    write_metrics_csv((out / "metrics.csv").string(), table);
    std::vector<Tensor> rows;
    rows.push_back(art.targets);
    rows.insert(rows.end(), iterates.begin(), iterates.end());
    write_row_grid(rows, 8, (out / "reencode.ppm").string());
  }
  print_table(table);
  return 0;
}

int run_interpolate(const Flags& f) {
  ExperimentConfig ec = resolve_restored(f, "interpolate");
  Session s = make_session(ec);
  RunArtifacts art;
  MetricTable table = run_session(s, &art);

  std::vector<Tensor> targets = split_samples(art.targets);
  Tensor codes = session_input(s, stack_samples({targets[0], targets[1]}));
  std::vector<Tensor> code_rows = split_samples(codes);
  std::vector<Tensor> path = interpolate_features(code_rows[0], code_rows[1], ec.interp_steps);
  Tensor images = session_generate(s, stack_samples(path));

  if (!ec.out_dir.empty())
    write_grid(split_batch(images), ec.interp_steps, (fs::path(ec.out_dir) / "interp.ppm").string());
  print_table(table);
  return 0;
}

int run_ablate(const Flags& f) {
  ExperimentConfig ec = resolve_experiment(load_config(f));
  print_table(ablation_matrix(ec));
  return 0;
}

uint64_t parse_seed(const std::string& text) {
  try {
    size_t used = 0;
    const uint64_t v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("gradcheck: --seed expects an unsigned integer, got \"" + text + "\"");
  }
}

int run_gradcheck(const Flags& f) {
  const uint64_t seed = f.has_seed ? parse_seed(f.seed) : 1;
  const GradcheckSummary sum = run_gradcheck_suite(seed);
  for (const GradcheckEntry& e : sum.entries)
    std::printf("%-16s shapes=%d  max_rel_err=%.3e  tol=%.0e  %s\n", e.op.c_str(), e.shapes,
                e.max_rel_err, e.tolerance, e.pass ? "pass" : "FAIL");
  std::printf("gradcheck %s: %zu ops, max_rel_err=%.3e\n", sum.all_pass ? "passed" : "FAILED",
              sum.entries.size(), sum.max_rel_err);
  std::fflush(stdout);

  if (f.has_out && !f.out.empty()) {
    MetricTable table;
    for (const GradcheckEntry& e : sum.entries) {
      MetricRow row;
      row.label = e.op;
      row.img_err_pct = e.max_rel_err;
      row.feat_err_pct = e.tolerance;
      row.iteration = e.shapes;
      table.rows.push_back(row);
    }
    fs::create_directories(f.out);
    write_metrics_csv((fs::path(f.out) / "metrics.csv").string(), table);
  }
  return sum.all_pass ? 0 : 1;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"texture autoencoder / VAE / feature-inversion workbench", "psim"};
  app.require_subcommand(1);

  struct Command {
    CLI::App* cmd = nullptr;
    Flags flags;
    std::function<int(const Flags&)> run;
  };
  std::vector<Command> commands(8);

  auto define = [&](size_t i, const char* name, const char* help, bool with_iters,
                    std::function<int(const Flags&)> run) {
    commands[i].cmd = app.add_subcommand(name, help);
    add_run_flags(commands[i].cmd, commands[i].flags, with_iters);
    commands[i].run = std::move(run);
  };
  define(0, "train", "train a model from a config", true,
         [](const Flags& f) { return run_train(f, false); });
  define(1, "invert", "train a feature-inversion generator", true,
         [](const Flags& f) { return run_train(f, true); });
  define(2, "eval", "evaluate a checkpointed model on the test split", false, run_eval);
  define(3, "sample", "decode prior draws from a checkpointed vae", false, run_sample);
  define(4, "reencode", "iterated reconstruct-and-encode from a checkpoint", false, run_reencode);
  define(5, "interpolate", "decode the path between two test codes", false, run_interpolate);
  define(6, "ablate", "rerun a config under the five loss-weight masks", true, run_ablate);

  Command& gradcheck = commands[7];
  gradcheck.cmd = app.add_subcommand("gradcheck", "finite-difference audit of every operator");
  gradcheck.cmd->add_option("--seed", gradcheck.flags.seed, "shape-draw seed");
  gradcheck.cmd->add_option("--out", gradcheck.flags.out, "write per-op results as metrics.csv");
  gradcheck.run = run_gradcheck;

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    for (Command& c : commands) {
      if (c.cmd->parsed()) {
        read_presence(c.cmd, c.flags);
        return c.run(c.flags);
      }
    }
    return 2;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

int cli_main(int argc, const char* const* argv) {
  std::vector<std::string> args;
  args.reserve(argc > 0 ? (size_t)argc - 1 : 0);
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_main(args);
}

}  // namespace psim
