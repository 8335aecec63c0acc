#pragma once

#include <string>

#include "salvo/backend.hpp"
#include "salvo/frontend.hpp"
#include "salvo/photometric.hpp"
#include "salvo/select.hpp"

namespace salvo {

/// Flat `key = value` run configuration. Unknown keys are rejected; every
/// value must satisfy the owning module's preconditions.
struct RunConfig {
  // dataset-level parameters
  int nKeyframes = 7;                  // n_keyframes
  int nPoints = 2000;                  // n_points
  double gradientConstant = 7.0;       // gradient_constant
  int patchGrid = 8;                   // patch_grid
  bool photometricCorrection = false;  // photometric_correction

  // selection
  std::string selectionMode = "saliency";  // selection_mode: saliency | uniform
  int blockSize = 4;                       // block_size
  double sSmooth = 0.05;                   // s_smooth
  double decayPass2 = 0.75;                // decay_pass2
  double decayPass3 = 0.5;                 // decay_pass3
  int drawBudgetFactor = 10;               // draw_budget_factor

  // photometric error model
  double huberGamma = 9.0;       // huber_gamma
  double gradientWeightC = 50.0; // gradient_weight_c
  double outlierEnergy = 12.0;   // outlier_energy, per pattern pixel

  // tracking
  int pyramidLevels = 4;          // pyramid_levels
  int trackerIters = 12;          // tracker_iters
  double lostEnergy = 20.0;       // lost_energy
  double minValidFraction = 0.25; // min_valid_fraction
  double rotationDeltaDeg = 3.0;  // rotation_delta_deg

  // keyframe decision
  double kfWeightF = 1.0;         // kf_weight_f
  double kfWeightFt = 1.0;        // kf_weight_ft
  double kfWeightA = 1.0;         // kf_weight_a
  double kfThreshold = 1.0;       // kf_threshold
  double flowNormFactor = 0.04;   // flow_norm_factor, of (width + height)
  double brightnessNorm = 0.7;    // brightness_norm
  double bootstrapSeconds = 2.0;  // bootstrap_seconds
  double bootstrapFactor = 0.5;   // bootstrap_factor

  // candidate tracing and activation
  double traceOutlierSsd = 150.0;     // trace_outlier_ssd, per pattern pixel
  double traceAmbiguityRatio = 1.1;   // trace_ambiguity_ratio
  double traceNoiseSigma = 1.5;       // trace_noise_sigma
  int activationMinTraces = 2;        // activation_min_traces
  double activationMaxRelWidth = 0.75;  // activation_max_rel_width
  double idepthMinInit = 0.05;        // idepth_min_init
  double idepthMaxInit = 5.0;         // idepth_max_init

  // marginalization
  double margMinVisibility = 0.05;  // marg_min_visibility
  double margDistEpsilon = 1e-3;    // marg_dist_epsilon

  // window solver
  int solverMaxIters = 6;             // solver_max_iters
  double solverInitialLambda = 1e-4;  // solver_initial_lambda

  // general
  uint64_t seed = 0;         // seed
  double plainDirFps = 30.0; // plain_dir_fps

  void validate() const;

  PhotoConfig photo() const;
  SelectionConfig selection() const;
  TrackerConfig tracker() const;
  TraceConfig trace() const;
  ActivationConfig activation() const;
  MarginalizationPolicy margPolicy() const;
  BackendConfig backend() const;
  KeyframeWeights kfWeights() const;
};

/// Parses a `key = value` file with `#` comments. Unknown keys throw.
RunConfig parseRunConfig(const std::string& path);

/// Applies `key = value` assignments from a string (used for CLI overrides).
void applyConfigLine(RunConfig& cfg, const std::string& line);

/// Serialization; parse(serialize(cfg)) == cfg modulo comments and ordering.
std::string serializeRunConfig(const RunConfig& cfg);
void writeRunConfig(const RunConfig& cfg, const std::string& path);

}  // namespace salvo
