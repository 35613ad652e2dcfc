#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "dgmm/dataset.hpp"
#include "dgmm/errors.hpp"
#include "dgmm/optimizer.hpp"
#include "dgmm/synthetic.hpp"
#include "dgmm/trainer.hpp"

namespace dgmm {

// Flat key=value run configuration with section-prefixed keys. Unknown keys
// are hard errors; a tolerated typo would silently change the run.
struct RunConfig {
  std::string dataset_path;
  std::string model_path;
  std::string reconstruction_path;
  std::string output_dir = "run_out";
  bool zscore = false;
  bool screen_voxels = false;
  int screen_folds = 10;
  double screen_ridge = 1.0;

  Index model_k = 10;
  Index model_kbar = 0;  // 0 -> k
  std::vector<Index> recog_hidden;
  std::vector<Index> gen_hidden;

  int train_epochs = 500;
  Index train_batch_size = 32;
  double train_lr = 1e-3;
  int train_mc_samples = 1;
  std::uint64_t seed = 0;
  double train_tol = 1e-5;
  int train_tol_window = 5;
  std::string train_optimizer = "rmsprop";
  std::string train_sweep_order = "zbar,b,h,precisions";

  Index predict_k = 10;
  std::string predict_t = "median";  // or a positive number
  std::string predict_rho = "cv";    // or a nonnegative number
  int predict_mc_samples = 64;
  int predict_cv_folds = 5;

  SyntheticConfig generate;

  TrainConfig to_train_config() const {
    TrainConfig t;
    t.k = model_k;
    t.kbar = model_kbar;
    t.recog_hidden = recog_hidden;
    t.gen_hidden = gen_hidden;
    t.epochs = train_epochs;
    t.batch_size = train_batch_size;
    t.learning_rate = train_lr;
    t.mc_samples = train_mc_samples;
    t.seed = seed;
    t.tol = train_tol;
    t.tol_window = train_tol_window;
    if (train_optimizer == "rmsprop") {
      t.optimizer = OptimizerKind::rmsprop;
    } else if (train_optimizer == "sgd") {
      t.optimizer = OptimizerKind::sgd;
    } else {
      throw ConfigError("train.optimizer must be rmsprop or sgd");
    }
    t.sweep_order.clear();
    std::size_t start = 0;
    const std::string& order = train_sweep_order;
    while (start < order.size()) {
      const auto comma = order.find(',', start);
      const std::string step = order.substr(
          start, (comma == std::string::npos ? order.size() : comma) - start);
      if (step == "zbar") t.sweep_order.push_back(SweepStep::zbar);
      else if (step == "b") t.sweep_order.push_back(SweepStep::b);
      else if (step == "h") t.sweep_order.push_back(SweepStep::h);
      else if (step == "precisions")
        t.sweep_order.push_back(SweepStep::precisions);
      else
        throw ConfigError("train.sweep_order: unknown step '" + step + "'");
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (t.sweep_order.empty()) {
      throw ConfigError("train.sweep_order must name at least one step");
    }
    return t;
  }

  KeyValueMap to_kv() const {
    KeyValueMap kv;
    kv["dataset.path"] = dataset_path;
    kv["model.path"] = model_path;
    kv["reconstruction.path"] = reconstruction_path;
    kv["output.dir"] = output_dir;
    kv["data.zscore"] = zscore ? "true" : "false";
    kv["data.screen_voxels"] = screen_voxels ? "true" : "false";
    kv["data.screen_folds"] = std::to_string(screen_folds);
    kv["data.screen_ridge"] = format_double(screen_ridge);
    kv["model.k"] = std::to_string(model_k);
    kv["model.kbar"] = std::to_string(model_kbar);
    kv["model.recog_hidden"] = detail::join_indices(recog_hidden);
    kv["model.gen_hidden"] = detail::join_indices(gen_hidden);
    kv["train.epochs"] = std::to_string(train_epochs);
    kv["train.batch_size"] = std::to_string(train_batch_size);
    kv["train.lr"] = format_double(train_lr);
    kv["train.mc_samples"] = std::to_string(train_mc_samples);
    kv["train.seed"] = std::to_string(seed);
    kv["train.tol"] = format_double(train_tol);
    kv["train.tol_window"] = std::to_string(train_tol_window);
    kv["train.optimizer"] = train_optimizer;
    kv["train.sweep_order"] = train_sweep_order;
    kv["predict.k"] = std::to_string(predict_k);
    kv["predict.t"] = predict_t;
    kv["predict.rho"] = predict_rho;
    kv["predict.mc_samples"] = std::to_string(predict_mc_samples);
    kv["predict.cv_folds"] = std::to_string(predict_cv_folds);
    kv["generate.n_train"] = std::to_string(generate.n_train);
    kv["generate.n_test"] = std::to_string(generate.n_test);
    kv["generate.d1"] = std::to_string(generate.d1);
    kv["generate.d2"] = std::to_string(generate.d2);
    kv["generate.k"] = std::to_string(generate.k);
    kv["generate.kbar"] = std::to_string(generate.kbar);
    kv["generate.image_width"] = std::to_string(generate.image_width);
    kv["generate.image_height"] = std::to_string(generate.image_height);
    kv["generate.gamma"] = format_double(generate.voxel_noise_precision);
    kv["generate.pixel_precision"] =
        format_double(generate.pixel_noise_precision);
    kv["generate.map"] = generate.map_kind;
    kv["generate.seed"] = std::to_string(generate.seed);
    return kv;
  }
};

namespace detail {

inline long long config_int(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected integer, got '" + value +
                      "'");
  }
}

inline double config_double(const std::string& value, const std::string& key) {
  try {
    return parse_double(value, "config key " + key);
  } catch (const IoError&) {
    throw ConfigError("key '" + key + "': expected number, got '" + value +
                      "'");
  }
}

inline bool config_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + value +
                    "'");
}

inline std::vector<Index> config_sizes(const std::string& value,
                                       const std::string& key) {
  std::vector<Index> out;
  std::size_t start = 0;
  while (start < value.size()) {
    const auto comma = value.find(',', start);
    const auto len =
        (comma == std::string::npos ? value.size() : comma) - start;
    if (len > 0) {
      out.push_back(config_int(value.substr(start, len), key));
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline RunConfig parse_run_config(const std::filesystem::path& path) {
  KeyValueMap kv;
  try {
    kv = read_key_value_file(path);
  } catch (const MissingFile& e) {
    throw ConfigError(std::string("config file not found: ") + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  RunConfig c;
  for (const auto& [key, value] : kv) {
    if (key == "dataset.path") c.dataset_path = value;
    else if (key == "model.path") c.model_path = value;
    else if (key == "reconstruction.path") c.reconstruction_path = value;
    else if (key == "output.dir") c.output_dir = value;
    else if (key == "data.zscore") c.zscore = detail::config_bool(value, key);
    else if (key == "data.screen_voxels")
      c.screen_voxels = detail::config_bool(value, key);
    else if (key == "data.screen_folds")
      c.screen_folds = static_cast<int>(detail::config_int(value, key));
    else if (key == "data.screen_ridge")
      c.screen_ridge = detail::config_double(value, key);
    else if (key == "model.k") c.model_k = detail::config_int(value, key);
    else if (key == "model.kbar") c.model_kbar = detail::config_int(value, key);
    else if (key == "model.recog_hidden")
      c.recog_hidden = detail::config_sizes(value, key);
    else if (key == "model.gen_hidden")
      c.gen_hidden = detail::config_sizes(value, key);
    else if (key == "train.epochs")
      c.train_epochs = static_cast<int>(detail::config_int(value, key));
    else if (key == "train.batch_size")
      c.train_batch_size = detail::config_int(value, key);
    else if (key == "train.lr") c.train_lr = detail::config_double(value, key);
    else if (key == "train.mc_samples")
      c.train_mc_samples = static_cast<int>(detail::config_int(value, key));
    else if (key == "train.seed")
      c.seed = static_cast<std::uint64_t>(detail::config_int(value, key));
    else if (key == "train.tol") c.train_tol = detail::config_double(value, key);
    else if (key == "train.tol_window")
      c.train_tol_window = static_cast<int>(detail::config_int(value, key));
    else if (key == "train.optimizer") c.train_optimizer = value;
    else if (key == "train.sweep_order") c.train_sweep_order = value;
    else if (key == "predict.k") c.predict_k = detail::config_int(value, key);
    else if (key == "predict.t") c.predict_t = value;
    else if (key == "predict.rho") c.predict_rho = value;
    else if (key == "predict.mc_samples")
      c.predict_mc_samples = static_cast<int>(detail::config_int(value, key));
    else if (key == "predict.cv_folds")
      c.predict_cv_folds = static_cast<int>(detail::config_int(value, key));
    else if (key == "generate.n_train")
      c.generate.n_train = detail::config_int(value, key);
    else if (key == "generate.n_test")
      c.generate.n_test = detail::config_int(value, key);
    else if (key == "generate.d1") c.generate.d1 = detail::config_int(value, key);
    else if (key == "generate.d2") c.generate.d2 = detail::config_int(value, key);
    else if (key == "generate.k") c.generate.k = detail::config_int(value, key);
    else if (key == "generate.kbar")
      c.generate.kbar = detail::config_int(value, key);
    else if (key == "generate.image_width")
      c.generate.image_width = detail::config_int(value, key);
    else if (key == "generate.image_height")
      c.generate.image_height = detail::config_int(value, key);
    else if (key == "generate.gamma")
      c.generate.voxel_noise_precision = detail::config_double(value, key);
    else if (key == "generate.pixel_precision")
      c.generate.pixel_noise_precision = detail::config_double(value, key);
    else if (key == "generate.map") c.generate.map_kind = value;
    else if (key == "generate.seed")
      c.generate.seed =
          static_cast<std::uint64_t>(detail::config_int(value, key));
    else
      throw ConfigError("unknown config key '" + key + "'");
  }
  return c;
}

// Bandwidth spec: "median" selects the heuristic (signalled as 0 to the
// predictor), anything else must be a positive number.
inline double resolve_bandwidth(const std::string& spec) {
  if (spec == "median") return 0.0;
  const double t = detail::config_double(spec, "predict.t");
  if (!(t > 0.0)) throw ConfigError("predict.t must be positive or 'median'");
  return t;
}

}  // namespace dgmm
