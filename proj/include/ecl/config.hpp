#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecl/paradigm.hpp"
#include "ecl/simdata.hpp"

namespace ecl::cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat dotted-key experiment configuration. Unknown keys are a hard error;
// the canonical text form round-trips losslessly.
struct Config {
  // task.*
  std::string task_kind = "gaussian";  // gaussian | uniform
  int n_per_domain = 400;
  int dimension = 2;
  int classes = 2;
  std::string boundary = "sin-logistic";
  double boundary_scale = 2.0;
  std::vector<double> source_mean{0.0, 0.0};
  std::vector<double> target_mean{2.0, 2.0};
  std::vector<double> cov_diag{5.0, 5.0};
  std::vector<double> source_box{-2.5, 2.5};  // lo,hi per axis (square support)
  std::vector<double> target_box{-1.5, 3.5};

  // model.*
  int hidden = 64;

  // train.*
  int epochs = 100;
  int batch_size = 100;
  double learning_rate = 1e-3;
  std::uint64_t seed = 7;
  int calib_epochs = -1;  // -1: same as epochs
  int ecl_epochs = -1;    // -1: same as epochs
  bool aux_holdout = false;
  double holdout_fraction = 0.2;
  int head_steps = 8;
  int ecl_warmup_epochs = -1;  // -1: half of train.epochs

  // loss.*
  std::string paradigm = "top-label";
  int bins = 15;
  int simplex_resolution = 14;
  double tau = 0.0;  // 0: auto (half min inter-anchor squared distance)
  double epsilon = 1e-8;
  double alpha_ema = 0.1;
  int n_prox = 3;
  double gamma = 1.0;
  double lambda_cap = 3e-3;

  // metrics.*
  int metric_bins = 15;

  // run.*
  std::string arms = "uncal,softece,ecl";
  int n_seeds = 5;

  // output.*
  std::string out_dir = "out";

  int effective_calib_epochs() const { return calib_epochs < 0 ? epochs : calib_epochs; }
  int effective_ecl_epochs() const { return ecl_epochs < 0 ? epochs : ecl_epochs; }
  int effective_warmup_epochs() const {
    return ecl_warmup_epochs < 0 ? epochs / 2 : ecl_warmup_epochs;
  }

  sim::CovariateShiftTask make_task(std::uint64_t task_seed) const;
  Paradigm loss_paradigm() const { return paradigm_from_string(paradigm); }

  void validate() const;
};

Config parse_config(const std::string& text);
Config load_config(const std::string& path);
std::string config_text(const Config& config);  // canonical form
void save_config(const std::string& path, const Config& config);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace ecl::cli
