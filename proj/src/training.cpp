#include "starnet/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "starnet/error.hpp"
#include "starnet/json_io.hpp"
#include "starnet/rng.hpp"

namespace starnet {

ojson to_json(const model::ModelConfig& c) {
  ojson j;
  j["hub_embed"] = c.hub_embed;
  j["hub_input"] = c.hub_input;
  j["hub_hidden"] = c.hub_hidden;
  j["host_embed"] = c.host_embed;
  j["host_hidden"] = c.host_hidden;
  j["noise_dim"] = c.noise_dim;
  return j;
}

model::ModelConfig model_config_from_json(const ojson& j) {
  model::ModelConfig c;
  c.hub_embed = j.at("hub_embed").get<std::size_t>();
  c.hub_input = j.at("hub_input").get<std::size_t>();
  c.hub_hidden = j.at("hub_hidden").get<std::size_t>();
  c.host_embed = j.at("host_embed").get<std::size_t>();
  c.host_hidden = j.at("host_hidden").get<std::size_t>();
  c.noise_dim = j.at("noise_dim").get<std::size_t>();
  return c;
}

ojson to_json(const training::TrainConfig& c) {
  ojson j;
  j["model_kind"] = std::string(model::kind_name(c.kind));
  j["model"] = to_json(c.model);
  j["epochs"] = c.epochs;
  j["k"] = c.k;
  j["lr"] = c.lr;
  j["seed"] = c.seed;
  j["t_obs"] = c.t_obs;
  j["t_pred"] = c.t_pred;
  j["rotate_augment"] = c.rotate_augment;
  j["grad_clip"] = c.grad_clip ? ojson(*c.grad_clip) : ojson(nullptr);
  return j;
}

training::TrainConfig train_config_from_json(const ojson& j) {
  training::TrainConfig c;
  c.kind = model::parse_kind(j.at("model_kind").get<std::string>());
  c.model = model_config_from_json(j.at("model"));
  c.epochs = j.at("epochs").get<std::size_t>();
  c.k = j.at("k").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.t_obs = j.at("t_obs").get<std::size_t>();
  c.t_pred = j.at("t_pred").get<std::size_t>();
  c.rotate_augment = j.at("rotate_augment").get<bool>();
  if (!j.at("grad_clip").is_null()) c.grad_clip = j.at("grad_clip").get<double>();
  return c;
}

ojson values_json(const Tensor& t) {
  ojson arr = ojson::array();
  for (double v : t.data()) arr.push_back(v);
  return arr;
}

Tensor tensor_from_json(const ojson& shape_j, const ojson& data_j, const std::string& name) {
  Shape shape = shape_j.get<Shape>();
  if (!data_j.is_array()) throw FormatError("tensor " + name + ": data is not an array");
  std::vector<double> data;
  data.reserve(data_j.size());
  for (const auto& v : data_j) {
    if (!v.is_number()) throw FormatError("tensor " + name + ": non-numeric value");
    data.push_back(v.get<double>());
  }
  if (shape_size(shape) != data.size()) {
    throw FormatError("tensor " + name + ": shape " + shape_string(shape) + " does not match " +
                      std::to_string(data.size()) + " values");
  }
  return Tensor(std::move(shape), std::move(data));
}

namespace training {

void TrainConfig::validate() const {
  if (k < 1) throw Error("K must be at least 1");
  if (!(lr > 0.0)) throw Error("learning rate must be positive");
  if (t_obs < 2) throw Error("t_obs must be at least 2");
  if (t_pred < 1) throw Error("t_pred must be at least 1");
  if (grad_clip && !(*grad_clip > 0.0)) throw Error("grad clip threshold must be positive");
  model.validate();
}

Var variety_loss(std::span<const Var> samples, const Tensor& truth) {
  if (samples.empty()) throw Error("variety_loss: K must be at least 1");
  if (truth.rank() != 3 || truth.dim(2) != 2) {
    throw DimensionError("variety_loss: truth must be [N x T x 2], got " + shape_string(truth.shape()));
  }
  const std::size_t n = truth.dim(0), t = truth.dim(1);
  Graph& g = *samples.front().graph;
  Var target = g.constant(truth.reshaped({n, 2 * t}));
  const double norm = 1.0 / static_cast<double>(n * t);
  std::vector<Var> per_k;
  for (const Var& s : samples) {
    if (s.shape() != Shape{n, 2 * t}) {
      throw DimensionError("variety_loss: sample " + shape_string(s.shape()) + " does not match truth " +
                           shape_string(truth.shape()));
    }
    per_k.push_back(scale(sum_squares(sub(s, target)), norm));
  }
  return min_of(per_k);
}

std::vector<double> per_sample_losses(const Tensor& predictions, const Tensor& truth) {
  if (predictions.rank() != 4 || truth.rank() != 3 ||
      Shape(predictions.shape().begin() + 1, predictions.shape().end()) != truth.shape()) {
    throw DimensionError("variety_loss: predictions " + shape_string(predictions.shape()) + " vs truth " +
                         shape_string(truth.shape()));
  }
  const std::size_t k = predictions.dim(0), block = truth.size();
  const double norm = 1.0 / static_cast<double>(truth.dim(0) * truth.dim(1));
  std::vector<double> out(k);
  for (std::size_t s = 0; s < k; ++s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < block; ++i) {
      const double d = predictions[s * block + i] - truth[i];
      acc += d * d;
    }
    out[s] = acc * norm;
  }
  return out;
}

double variety_loss(const Tensor& predictions, const Tensor& truth) {
  if (predictions.rank() != 4) throw DimensionError("variety_loss: predictions must be [K x N x T x 2]");
  const std::size_t k = predictions.dim(0), n = predictions.dim(1), t = predictions.dim(2);
  Graph g;
  std::vector<Var> samples;
  const std::size_t block = n * t * 2;
  for (std::size_t s = 0; s < k; ++s) {
    std::vector<double> d(predictions.data().begin() + static_cast<std::ptrdiff_t>(s * block),
                          predictions.data().begin() + static_cast<std::ptrdiff_t>((s + 1) * block));
    samples.push_back(g.constant(Tensor({n, 2 * t}, std::move(d))));
  }
  return variety_loss(samples, truth).value()[0];
}

Trainer::Trainer(TrainConfig config)
    : Trainer(config, model::ParamSet::init(config.kind, config.model, mix_seed(config.seed, 0x1417))) {}

Trainer::Trainer(TrainConfig config, model::ParamSet initial)
    : config_(std::move(config)), params_(std::move(initial)), rng_(config_.seed) {
  config_.validate();
  params_.validate();
  if (params_.kind != config_.kind || !(params_.config == config_.model)) {
    throw FormatError("initial parameters do not match the training config");
  }
  adam_ = AdamState::for_params(std::as_const(params_).refs(), config_.lr);
}

double Trainer::step(const data::Window& centered, std::span<const std::uint64_t> seeds) {
  Graph g;
  const model::BoundParams bound = model::bind(g, params_);
  const model::RolloutVars out = model::forward(g, bound, centered, seeds);
  Var loss = variety_loss(out.samples, centered.future());
  const double value = loss.value()[0];
  if (!std::isfinite(value)) throw NonFiniteError("non-finite loss");
  g.backward(loss);
  std::vector<Tensor> grads;
  grads.reserve(bound.vars.size());
  for (const Var& v : bound.vars) grads.push_back(v.grad());
  if (config_.grad_clip) clip_global_norm(grads, *config_.grad_clip);
  const auto refs = params_.refs();
  adam_step(refs, grads, adam_);
  ++run_.iterations;
  return value;
}

EpochLog Trainer::run_epoch(const std::vector<data::Window>& windows) {
  if (windows.empty()) throw Error("training needs at least one window");
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng_);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  double total = 0.0;
  for (std::size_t idx : order) {
    const data::Window& w = windows[idx];
    if (w.t_obs != config_.t_obs || w.t_pred != config_.t_pred) {
      throw FormatError("window " + w.label + "@" + std::to_string(w.start_frame) + " has t_obs/t_pred " +
                        std::to_string(w.t_obs) + "/" + std::to_string(w.t_pred) + ", config expects " +
                        std::to_string(config_.t_obs) + "/" + std::to_string(config_.t_pred));
    }
    // Draw both values regardless of the augmentation flag so the stream
    // does not depend on it.
    const double theta = angle(rng_);
    const std::uint64_t sample_seed = rng_();
    const data::Window input = config_.rotate_augment ? data::rotate_window(w, theta) : w;
    const auto seeds = model::sample_seeds(sample_seed, config_.k);
    try {
      total += step(input, seeds);
    } catch (const NonFiniteError& e) {
      throw NonFiniteError(std::string(e.what()) + " at epoch " + std::to_string(run_.epochs_completed + 1) +
                           ", window " + std::to_string(idx) + " (" + w.label + "@" +
                           std::to_string(w.start_frame) + ")");
    }
  }
  ++run_.epochs_completed;
  EpochLog log;
  log.epoch = run_.epochs_completed;
  log.mean_loss = total / static_cast<double>(windows.size());
  log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  run_.final_loss = log.mean_loss;
  return log;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck;
  ck.config = config_;
  ck.params = params_;
  ck.optimizer = adam_;
  ck.run = run_;
  return ck;
}

Checkpoint train(const std::vector<data::Window>& windows, const TrainConfig& config,
                 const std::function<void(const EpochLog&)>& on_epoch) {
  Trainer trainer(config);
  if (config.epochs > 0) {
    if (windows.empty()) throw Error("training needs at least one window");
    std::vector<data::Window> centered;
    centered.reserve(windows.size());
    for (const auto& w : windows) centered.push_back(data::center_window(w));
    for (std::size_t e = 0; e < config.epochs; ++e) {
      const EpochLog log = trainer.run_epoch(centered);
      if (on_epoch) on_epoch(log);
    }
  }
  return trainer.checkpoint();
}

std::string format_epoch_log(const EpochLog& log) {
  ojson j;
  j["epoch"] = log.epoch;
  j["mean_loss"] = log.mean_loss;
  j["wall_seconds"] = log.wall_seconds;
  return j.dump();
}

// ---- checkpoint file ------------------------------------------------------
//
// A JSON document laid out one entry per line so that diffs stay readable:
//   {
//   "format": "starnet-checkpoint",
//   "version": 1,
//   "config": {...},
//   "run": {...},
//   "params": [
//   {"name":"hub.w1","shape":[64,2],"data":[...]},
//   ...
//   ],
//   "optimizer": null | {"lr":...,"beta1":...,"beta2":...,"epsilon":...,"step_count":...,
//                        "first_moment":[...], "second_moment":[...]}   (one tensor per line)
//   }

namespace {

constexpr std::string_view kFormatName = "starnet-checkpoint";

void write_tensor_list(std::ostringstream& out, const std::vector<ConstParamRef>& refs,
                       const std::vector<Tensor>* values) {
  out << "[\n";
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const Tensor& t = values ? (*values)[i] : *refs[i].tensor;
    ojson j;
    j["name"] = refs[i].name;
    j["shape"] = t.shape();
    j["data"] = values_json(t);
    out << j.dump() << (i + 1 < refs.size() ? ",\n" : "\n");
  }
  out << "]";
}

std::vector<Tensor> read_tensor_list(const ojson& arr, const std::vector<ConstParamRef>& expected,
                                     const char* section) {
  if (!arr.is_array() || arr.size() != expected.size()) {
    throw FormatError(std::string(section) + ": expected " + std::to_string(expected.size()) + " tensors");
  }
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const ojson& e = arr[i];
    const std::string name = e.at("name").get<std::string>();
    if (name != expected[i].name) {
      throw FormatError(std::string(section) + ": tensor " + std::to_string(i) + " is '" + name + "', expected '" +
                        expected[i].name + "'");
    }
    Tensor t = tensor_from_json(e.at("shape"), e.at("data"), name);
    if (t.shape() != expected[i].tensor->shape()) {
      throw DimensionError(std::string(section) + ": tensor " + name + " has shape " + shape_string(t.shape()) +
                           " but the declared config needs " + shape_string(expected[i].tensor->shape()));
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  std::ostringstream out;
  ojson run;
  run["epochs_completed"] = ck.run.epochs_completed;
  run["iterations"] = ck.run.iterations;
  run["final_loss"] = ck.run.final_loss ? ojson(*ck.run.final_loss) : ojson(nullptr);
  const auto refs = ck.params.refs();

  out << "{\n";
  out << "\"format\": " << ojson(kFormatName).dump() << ",\n";
  out << "\"version\": " << Checkpoint::kVersion << ",\n";
  out << "\"config\": " << to_json(ck.config).dump() << ",\n";
  out << "\"run\": " << run.dump() << ",\n";
  out << "\"params\": ";
  write_tensor_list(out, refs, nullptr);
  out << ",\n\"optimizer\": ";
  if (!ck.optimizer) {
    out << "null\n";
  } else {
    const AdamState& a = *ck.optimizer;
    ojson h;
    h["lr"] = a.lr;
    h["beta1"] = a.beta1;
    h["beta2"] = a.beta2;
    h["epsilon"] = a.epsilon;
    h["step_count"] = a.step_count;
    std::string header = h.dump();
    header.pop_back();  // reopen the object to append the moment lists
    out << header << ",\n\"first_moment\": ";
    write_tensor_list(out, refs, &a.first_moment);
    out << ",\n\"second_moment\": ";
    write_tensor_list(out, refs, &a.second_moment);
    out << "}\n";
  }
  out << "}\n";
  return out.str();
}

Checkpoint parse_checkpoint(std::string_view text) {
  ojson j;
  try {
    j = ojson::parse(text.begin(), text.end());
  } catch (const ojson::parse_error& e) {
    throw ParseError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", std::string()) != kFormatName) {
      throw FormatError("not a starnet checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != Checkpoint::kVersion) {
      throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (this build reads " +
                        std::to_string(Checkpoint::kVersion) + ")");
    }
    Checkpoint ck;
    ck.config = train_config_from_json(j.at("config"));
    ck.config.validate();
    const ojson& run = j.at("run");
    ck.run.epochs_completed = run.at("epochs_completed").get<std::size_t>();
    ck.run.iterations = run.at("iterations").get<std::size_t>();
    if (!run.at("final_loss").is_null()) ck.run.final_loss = run.at("final_loss").get<double>();

    // The declared config fixes every expected name and shape.
    ck.params = model::ParamSet::zeros(ck.config.kind, ck.config.model);
    const auto expected = std::as_const(ck.params).refs();
    std::vector<Tensor> values = read_tensor_list(j.at("params"), expected, "params");
    auto refs = ck.params.refs();
    for (std::size_t i = 0; i < refs.size(); ++i) *refs[i].tensor = std::move(values[i]);

    const ojson& opt = j.at("optimizer");
    if (!opt.is_null()) {
      AdamState a;
      a.lr = opt.at("lr").get<double>();
      a.beta1 = opt.at("beta1").get<double>();
      a.beta2 = opt.at("beta2").get<double>();
      a.epsilon = opt.at("epsilon").get<double>();
      a.step_count = opt.at("step_count").get<std::int64_t>();
      if (a.step_count < 0) throw FormatError("optimizer step_count is negative");
      a.first_moment = read_tensor_list(opt.at("first_moment"), expected, "optimizer.first_moment");
      a.second_moment = read_tensor_list(opt.at("second_moment"), expected, "optimizer.second_moment");
      ck.optimizer = std::move(a);
    }
    return ck;
  } catch (const ojson::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const std::string text = serialize_checkpoint(ck);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << text;
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace training
}  // namespace starnet
