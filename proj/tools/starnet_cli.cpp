#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "starnet/data.hpp"
#include "starnet/error.hpp"
#include "starnet/eval.hpp"
#include "starnet/json_io.hpp"
#include "starnet/kernels.hpp"
#include "starnet/rng.hpp"
#include "starnet/selftest.hpp"
#include "starnet/training.hpp"

namespace fs = std::filesystem;
using namespace starnet;

namespace {

// Raised for problems the user can fix by changing the command line.
struct UsageError : Error {
  using Error::Error;
};

struct DataFlags {
  std::string root;
  std::string held_out;
  std::string columns = "0,1,2,3";
  std::size_t stride = 1;
};

struct Options {
  DataFlags data;
  std::optional<std::size_t> t_obs, t_pred;
  std::size_t k = 20;
  double lr = 1e-4;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  bool rotate_augment = true;
  std::string model = "starnet";
  std::optional<double> grad_clip;
  std::string mode = "all_steps";
  std::string sizes = "8,16,32,64";
  std::size_t repeat = eval::kMinBenchRepeats;
  std::size_t warmup = eval::kMinBenchWarmup;
  int threads = 0;
  std::string out;
  std::string log;
  std::string ckpt;
  std::string input;
  std::string per_window;
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << text;
  if (!f) throw Error("write failed for " + path);
}

void log_config(const std::string& command, const ojson& config) {
  std::cerr << "starnet " << command << ": " << config.dump() << "\n";
}

void apply_threads(int threads) {
  if (threads < 0) throw UsageError("--threads must be positive");
  if (threads > 0) kernels::set_threads(threads);
}

data::LoadOptions load_options(const Options& o, std::size_t t_obs, std::size_t t_pred, data::Presence presence) {
  data::LoadOptions lo;
  lo.t_obs = t_obs;
  lo.t_pred = t_pred;
  lo.stride = o.data.stride;
  lo.presence = presence;
  try {
    lo.columns = data::ColumnMap::parse(o.data.columns);
  } catch (const Error& e) {
    throw UsageError(std::string("--columns: ") + e.what());
  }
  if (lo.stride == 0) throw UsageError("--stride must be at least 1");
  return lo;
}

void require_data(const Options& o) {
  if (o.data.root.empty()) throw UsageError("--data is required");
  if (o.data.held_out.empty()) throw UsageError("--held-out is required");
  if (!fs::is_directory(o.data.root)) throw Error("data directory not found: " + o.data.root);
}

ojson data_json(const Options& o) {
  ojson j;
  j["root"] = o.data.root;
  j["held_out"] = o.data.held_out;
  j["columns"] = o.data.columns;
  j["window_stride"] = o.data.stride;
  return j;
}

int run_train(const Options& o) {
  require_data(o);
  if (o.out.empty()) throw UsageError("--out is required");
  training::TrainConfig cfg;
  cfg.kind = model::parse_kind(o.model);
  cfg.epochs = o.epochs;
  cfg.k = o.k;
  cfg.lr = o.lr;
  cfg.seed = o.seed;
  cfg.t_obs = o.t_obs.value_or(8);
  cfg.t_pred = o.t_pred.value_or(12);
  cfg.rotate_augment = o.rotate_augment;
  cfg.grad_clip = o.grad_clip;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  apply_threads(o.threads);

  ojson provenance;
  provenance["train"] = to_json(cfg);
  provenance["data"] = data_json(o);
  log_config("train", provenance);

  const auto plan = data::leave_one_out_split(o.data.held_out);
  const auto lo = load_options(o, cfg.t_obs, cfg.t_pred, data::Presence::full);
  std::vector<data::Window> windows;
  for (const auto& label : plan.train_sets) {
    auto part = data::load_set(o.data.root, label, lo);
    std::cerr << "starnet train: " << label << " " << part.size() << " windows\n";
    windows.insert(windows.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  if (windows.empty()) throw Error("no training windows under " + o.data.root);

  const std::string log_path = o.log.empty() ? o.out + ".log" : o.log;
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw Error("cannot write " + log_path);
  ojson header;
  header["config"] = provenance;
  log << header.dump() << "\n";
  const auto ck = training::train(windows, cfg, [&](const training::EpochLog& e) {
    const std::string line = training::format_epoch_log(e);
    log << line << "\n" << std::flush;
    std::cerr << line << "\n";
  });
  training::save_checkpoint(ck, o.out);
  std::cerr << "starnet train: wrote " << o.out << "\n";
  return 0;
}

training::Checkpoint load_ckpt(const Options& o) {
  if (o.ckpt.empty()) throw UsageError("--ckpt is required");
  if (!fs::exists(o.ckpt)) throw Error("checkpoint not found: " + o.ckpt);
  return training::load_checkpoint(o.ckpt);
}

// The horizon comes from the checkpoint; explicit flags must agree with it.
std::pair<std::size_t, std::size_t> horizon(const Options& o, const training::Checkpoint& ck) {
  const std::size_t t_obs = o.t_obs.value_or(ck.config.t_obs), t_pred = o.t_pred.value_or(ck.config.t_pred);
  if (t_obs != ck.config.t_obs || t_pred != ck.config.t_pred) {
    throw Error("config/checkpoint mismatch: checkpoint uses t_obs=" + std::to_string(ck.config.t_obs) +
                " t_pred=" + std::to_string(ck.config.t_pred) + ", flags ask for t_obs=" + std::to_string(t_obs) +
                " t_pred=" + std::to_string(t_pred));
  }
  return {t_obs, t_pred};
}

int run_eval(const Options& o) {
  require_data(o);
  const auto mode = eval::parse_mode(o.mode);
  if (o.k == 0) throw UsageError("--k must be at least 1");
  apply_threads(o.threads);
  const auto ck = load_ckpt(o);
  const auto [t_obs, t_pred] = horizon(o, ck);

  ojson provenance;
  provenance["checkpoint"] = o.ckpt;
  provenance["train"] = to_json(ck.config);
  provenance["data"] = data_json(o);
  provenance["k"] = o.k;
  provenance["metric_mode"] = o.mode;
  provenance["seed"] = o.seed;
  provenance["t_obs"] = t_obs;
  provenance["t_pred"] = t_pred;
  log_config("eval", provenance);

  const auto windows = data::load_set(o.data.root, o.data.held_out, load_options(o, t_obs, t_pred, data::Presence::full));
  if (windows.empty()) throw Error("no test windows for " + o.data.held_out);
  const auto report = eval::evaluate(ck, windows, o.k, mode, o.seed, o.data.held_out);
  write_text(o.out, eval::report_json(report, provenance.dump()));
  if (!o.per_window.empty()) write_text(o.per_window, "# " + provenance.dump() + "\n" + eval::report_csv(report));
  std::cerr << "starnet eval: ADE " << report.ade << " FDE " << report.fde << " over " << report.pedestrians
            << " pedestrians\n";
  return 0;
}

int run_predict(const Options& o) {
  if (o.k == 0) throw UsageError("--k must be at least 1");
  if (o.input.empty() && (o.data.root.empty() || o.data.held_out.empty())) {
    throw UsageError("predict needs --input FILE or --data DIR --held-out LABEL");
  }
  apply_threads(o.threads);
  const auto ck = load_ckpt(o);
  const auto [t_obs, t_pred] = horizon(o, ck);

  ojson provenance;
  provenance["checkpoint"] = o.ckpt;
  provenance["train"] = to_json(ck.config);
  if (o.input.empty()) {
    provenance["data"] = data_json(o);
  } else {
    provenance["input"] = o.input;
  }
  provenance["k"] = o.k;
  provenance["seed"] = o.seed;
  provenance["t_obs"] = t_obs;
  provenance["t_pred"] = t_pred;
  log_config("predict", provenance);

  // Windows only need the observed part; ground truth is written wherever
  // the recording still has the pedestrian.
  const auto lo = load_options(o, t_obs, t_pred, data::Presence::observed_only);
  std::vector<fs::path> files;
  if (!o.input.empty()) {
    if (!fs::exists(o.input)) throw Error("input file not found: " + o.input);
    files.push_back(o.input);
  } else {
    require_data(o);
    const fs::path dir = fs::path(o.data.root) / o.data.held_out;
    if (!fs::is_directory(dir)) throw Error("data set directory not found: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  }

  std::ostringstream csv;
  csv << "# " << provenance.dump() << "\n";
  csv << "window_id,ped_id,step,x,y,kind,sample_k\n";
  auto num = [](double v) { return ojson(v).dump(); };
  std::size_t wi = 0;
  for (const auto& file : files) {
    const auto records = data::parse_dataset_file(file, lo.columns);
    const auto windows = data::build_windows(records, t_obs, t_pred, lo.stride, data::Presence::observed_only,
                                             file.filename().string());
    for (const auto& w : windows) {
      const auto r = model::rollout(w, ck.params, o.k, mix_seed(o.seed, wi));
      const Tensor world = r.world_predictions();
      const std::size_t n = w.num_peds();
      std::map<std::int64_t, std::size_t> row;
      for (std::size_t i = 0; i < n; ++i) row[w.ped_ids[i]] = i;
      std::vector<std::vector<std::optional<std::array<double, 2>>>> gt(n, std::vector<std::optional<std::array<double, 2>>>(t_pred));
      for (const auto& rec : records) {
        const std::int64_t rel = rec.step - w.start_step - static_cast<std::int64_t>(t_obs);
        const auto it = row.find(rec.ped_id);
        if (rel < 0 || rel >= static_cast<std::int64_t>(t_pred) || it == row.end()) continue;
        gt[it->second][static_cast<std::size_t>(rel)] = std::array<double, 2>{rec.x, rec.y};
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto id = w.ped_ids[i];
        for (std::size_t t = 0; t < t_obs; ++t) {
          csv << wi << ',' << id << ',' << t << ',' << num(w.x(i, t)) << ',' << num(w.y(i, t)) << ",obs,\n";
        }
        for (std::size_t t = 0; t < t_pred; ++t) {
          if (!gt[i][t]) continue;
          csv << wi << ',' << id << ',' << t_obs + t << ',' << num((*gt[i][t])[0]) << ',' << num((*gt[i][t])[1])
              << ",gt,\n";
        }
        for (std::size_t s = 0; s < o.k; ++s) {
          for (std::size_t t = 0; t < t_pred; ++t) {
            const std::size_t off = ((s * n + i) * t_pred + t) * 2;
            csv << wi << ',' << id << ',' << t_obs + t << ',' << num(world[off]) << ',' << num(world[off + 1])
                << ",pred," << s << '\n';
          }
        }
      }
      ++wi;
    }
  }
  if (wi == 0) throw Error("no windows with " + std::to_string(t_obs) + " observed steps");
  write_text(o.out, csv.str());
  return 0;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError("--n: '" + item + "' is not a positive integer");
    }
  }
  return out;
}

int run_bench(const Options& o) {
  const auto sizes = parse_sizes(o.sizes);
  if (sizes.size() < 2) throw UsageError("--n needs at least two pedestrian counts");
  // Scaling ratios are only meaningful on one thread unless asked otherwise.
  kernels::set_threads(o.threads > 0 ? o.threads : 1);
  const std::size_t t_obs = o.t_obs.value_or(8), t_pred = o.t_pred.value_or(12);

  model::ParamSet params;
  ojson provenance;
  if (!o.ckpt.empty()) {
    const auto ck = load_ckpt(o);
    params = ck.params;
    provenance["checkpoint"] = o.ckpt;
  } else {
    params = model::ParamSet::init(model::parse_kind(o.model), model::ModelConfig{}, o.seed);
    provenance["model"] = o.model;
  }
  provenance["n"] = sizes;
  provenance["repeat"] = o.repeat;
  provenance["warmup"] = o.warmup;
  provenance["seed"] = o.seed;
  provenance["threads"] = o.threads > 0 ? o.threads : 1;
  provenance["t_obs"] = t_obs;
  provenance["t_pred"] = t_pred;
  log_config("bench", provenance);

  const auto report = eval::bench_scaling(params, sizes, o.repeat, t_obs, t_pred, o.seed, o.warmup);
  write_text(o.out, eval::scaling_json(report, provenance.dump()));
  std::cerr << "starnet bench: growth ratio " << report.growth_ratio
            << (report.op_count_affine ? ", op count affine in N\n" : ", op count NOT affine in N\n");
  return 0;
}

int run_selftest() {
  bool ok = true;
  for (const auto& r : selftest::run_all()) {
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"StarNet pedestrian trajectory prediction"};
  app.require_subcommand(1);
  Options o;

  auto add_data = [&](CLI::App* c) {
    c->add_option("--data", o.data.root, "dataset root: one subdirectory per set label");
    c->add_option("--held-out", o.data.held_out, "set label held out for testing")
        ->check(CLI::IsMember({"ETH", "HOTEL", "UNIV", "ZARA-1", "ZARA-2"}));
    c->add_option("--columns", o.data.columns, "column indices of frame,ped_id,x,y")->capture_default_str();
    c->add_option("--stride", o.data.stride, "window start stride in steps")->capture_default_str();
  };
  auto add_horizon = [&](CLI::App* c) {
    c->add_option("--t-obs", o.t_obs, "observed steps (default 8, or the checkpoint's)");
    c->add_option("--t-pred", o.t_pred, "predicted steps (default 12, or the checkpoint's)");
  };
  auto add_common = [&](CLI::App* c) {
    c->add_option("--seed", o.seed, "random seed")->capture_default_str();
    c->add_option("--threads", o.threads, "worker thread cap");
    c->add_option("--out", o.out, "output path");
  };

  auto* train = app.add_subcommand("train", "train on every set except the held-out one");
  add_data(train);
  add_horizon(train);
  add_common(train);
  train->add_option("--k", o.k, "samples per window for the variety loss")->capture_default_str();
  train->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--epochs", o.epochs, "passes over the training windows")->capture_default_str();
  train->add_flag("--rotate-augment,!--no-rotate-augment", o.rotate_augment, "random rotation per window (on)");
  train->add_option("--model", o.model, "starnet or baseline")->check(CLI::IsMember({"starnet", "baseline"}));
  train->add_option("--grad-clip", o.grad_clip, "clip the global gradient norm");
  train->add_option("--log", o.log, "JSONL training log (default <out>.log)");

  auto* ev = app.add_subcommand("eval", "best-of-K ADE/FDE on the held-out set");
  add_data(ev);
  add_horizon(ev);
  add_common(ev);
  ev->add_option("--ckpt", o.ckpt, "checkpoint file");
  ev->add_option("--k", o.k, "samples per pedestrian")->capture_default_str();
  ev->add_option("--mode", o.mode, "all_steps or sample8")->check(CLI::IsMember({"all_steps", "sample8"}));
  ev->add_option("--per-window", o.per_window, "per-pedestrian CSV path");

  auto* pred = app.add_subcommand("predict", "write observed, true and predicted tracks as CSV");
  add_data(pred);
  add_horizon(pred);
  add_common(pred);
  pred->add_option("--ckpt", o.ckpt, "checkpoint file");
  pred->add_option("--input", o.input, "single trajectory file instead of --data/--held-out");
  pred->add_option("--k", o.k, "samples per pedestrian")->capture_default_str();

  auto* bench = app.add_subcommand("bench", "time rollouts against the pedestrian count");
  add_horizon(bench);
  add_common(bench);
  bench->add_option("--n", o.sizes, "comma-separated pedestrian counts")->capture_default_str();
  bench->add_option("--repeat", o.repeat, "timed repetitions per size")->capture_default_str();
  bench->add_option("--warmup", o.warmup, "untimed runs per size")->capture_default_str();
  bench->add_option("--ckpt", o.ckpt, "checkpoint (random weights when omitted)");
  bench->add_option("--model", o.model, "starnet or baseline")->check(CLI::IsMember({"starnet", "baseline"}));

  auto* self = app.add_subcommand("selftest", "gradient check and invariant suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) return run_train(o);
    if (ev->parsed()) return run_eval(o);
    if (pred->parsed()) return run_predict(o);
    if (bench->parsed()) return run_bench(o);
    if (self->parsed()) return run_selftest();
  } catch (const UsageError& e) {
    std::cerr << "starnet: usage error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "starnet: parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "starnet: error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
