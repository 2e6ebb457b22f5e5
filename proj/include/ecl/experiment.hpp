#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ecl/checkpoint.hpp"
#include "ecl/config.hpp"
#include "ecl/metrics.hpp"
#include "ecl/minibatch.hpp"
#include "ecl/model.hpp"
#include "ecl/simdata.hpp"

namespace ecl::cli {

struct LossCurveRow {
  long iteration = 0;
  double ce = 0.0;
  double ecl = 0.0;
  double lambda = 0.0;
};

struct ArmOutput {
  std::string arm;
  model::MlpParameters params;
  std::vector<LossCurveRow> curve;
  std::vector<std::pair<std::string, Matrix>> ledger_tensors;
};

struct DomainData {
  Matrix source_x;
  std::vector<int> source_labels;
  Matrix target_x;
  std::vector<int> target_labels;  // evaluation only; training never reads them
};

DomainData split_domains(const std::vector<sim::LabeledSample>& samples, int classes);

// All arms train for the same epoch count from bit-identical initial
// parameters (seeded init), so they differ only in the loss terms.

// Cross-entropy only (the head trains alongside on frozen features but the
// classifier never sees it).
ArmOutput train_uncal(const Config& config, const DomainData& data, std::uint64_t seed);

// Cross-entropy plus adaptively weighted Soft-ECE on the classifier's own
// source confidence.
ArmOutput train_softece(const Config& config, const DomainData& data, std::uint64_t seed);

// Cross-entropy plus the expectation-consistency loss, with the posterior
// head trained and Soft-ECE-calibrated end-to-end on the source domain.
// trainable = auxiliary-variable mini-batch scheme; otherwise the direct
// per-batch differentiable loss (the non-trainable baseline).
ArmOutput train_ecl(const Config& config, const DomainData& data, std::uint64_t seed,
                    bool trainable, std::optional<double> gamma_override = {});

metrics::CalibrationReport evaluate_arm(const Config& config, const std::string& arm,
                                        const model::MlpParameters& params,
                                        const DomainData& data, std::uint64_t seed,
                                        double baseline_accuracy);

void write_loss_csv(const std::string& path, const std::vector<LossCurveRow>& curve);

// Subcommand drivers; return process exit codes (0 ok, 2 config, 3 divergence).
int run_experiment(const Config& config, const std::string& out_dir);
int run_ablation(const Config& config, const std::string& which, const std::string& out_dir);
int run_verification(const Config& config, const std::string& which,
                     const std::string& out_dir);
int run_simulate(const Config& config, const std::string& out_dir);
int run_report(const std::string& checkpoint_path, const std::string& out_dir);

}  // namespace ecl::cli
