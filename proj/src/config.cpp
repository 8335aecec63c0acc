#include "salvo/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace salvo {

namespace {

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

double toDouble(const std::string& s) {
  size_t pos = 0;
  const double v = std::stod(s, &pos);
  while (pos < s.size() && std::isspace(s[size_t(pos)])) ++pos;
  if (pos != s.size()) throw ConfigError("malformed numeric value: " + s);
  return v;
}

int toInt(const std::string& s) {
  const double v = toDouble(s);
  if (v != std::floor(v)) throw ConfigError("expected integer value: " + s);
  return int(v);
}

bool toBool(const std::string& s) {
  if (s == "true" || s == "on" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "off" || s == "no" || s == "0") return false;
  throw ConfigError("expected boolean value: " + s);
}

#define FIELD_NUM(key, member, conv, tostr)                                      \
  {key, Field{[](RunConfig& c, const std::string& v) { c.member = conv(v); },    \
              [](const RunConfig& c) { return tostr; }}}

const std::map<std::string, Field>& fieldTable() {
  static const std::map<std::string, Field> table = {
      FIELD_NUM("n_keyframes", nKeyframes, toInt, std::to_string(c.nKeyframes)),
      FIELD_NUM("n_points", nPoints, toInt, std::to_string(c.nPoints)),
      FIELD_NUM("gradient_constant", gradientConstant, toDouble, fmt(c.gradientConstant)),
      FIELD_NUM("patch_grid", patchGrid, toInt, std::to_string(c.patchGrid)),
      FIELD_NUM("photometric_correction", photometricCorrection, toBool,
                c.photometricCorrection ? "true" : "false"),
      {"selection_mode",
       Field{[](RunConfig& c, const std::string& v) { c.selectionMode = v; },
             [](const RunConfig& c) { return c.selectionMode; }}},
      FIELD_NUM("block_size", blockSize, toInt, std::to_string(c.blockSize)),
      FIELD_NUM("s_smooth", sSmooth, toDouble, fmt(c.sSmooth)),
      FIELD_NUM("decay_pass2", decayPass2, toDouble, fmt(c.decayPass2)),
      FIELD_NUM("decay_pass3", decayPass3, toDouble, fmt(c.decayPass3)),
      FIELD_NUM("draw_budget_factor", drawBudgetFactor, toInt,
                std::to_string(c.drawBudgetFactor)),
      FIELD_NUM("huber_gamma", huberGamma, toDouble, fmt(c.huberGamma)),
      FIELD_NUM("gradient_weight_c", gradientWeightC, toDouble, fmt(c.gradientWeightC)),
      FIELD_NUM("outlier_energy", outlierEnergy, toDouble, fmt(c.outlierEnergy)),
      FIELD_NUM("pyramid_levels", pyramidLevels, toInt, std::to_string(c.pyramidLevels)),
      FIELD_NUM("tracker_iters", trackerIters, toInt, std::to_string(c.trackerIters)),
      FIELD_NUM("lost_energy", lostEnergy, toDouble, fmt(c.lostEnergy)),
      FIELD_NUM("min_valid_fraction", minValidFraction, toDouble, fmt(c.minValidFraction)),
      FIELD_NUM("rotation_delta_deg", rotationDeltaDeg, toDouble, fmt(c.rotationDeltaDeg)),
      FIELD_NUM("kf_weight_f", kfWeightF, toDouble, fmt(c.kfWeightF)),
      FIELD_NUM("kf_weight_ft", kfWeightFt, toDouble, fmt(c.kfWeightFt)),
      FIELD_NUM("kf_weight_a", kfWeightA, toDouble, fmt(c.kfWeightA)),
      FIELD_NUM("kf_threshold", kfThreshold, toDouble, fmt(c.kfThreshold)),
      FIELD_NUM("flow_norm_factor", flowNormFactor, toDouble, fmt(c.flowNormFactor)),
      FIELD_NUM("brightness_norm", brightnessNorm, toDouble, fmt(c.brightnessNorm)),
      FIELD_NUM("bootstrap_seconds", bootstrapSeconds, toDouble, fmt(c.bootstrapSeconds)),
      FIELD_NUM("bootstrap_factor", bootstrapFactor, toDouble, fmt(c.bootstrapFactor)),
      FIELD_NUM("trace_outlier_ssd", traceOutlierSsd, toDouble, fmt(c.traceOutlierSsd)),
      FIELD_NUM("trace_ambiguity_ratio", traceAmbiguityRatio, toDouble,
                fmt(c.traceAmbiguityRatio)),
      FIELD_NUM("trace_noise_sigma", traceNoiseSigma, toDouble, fmt(c.traceNoiseSigma)),
      FIELD_NUM("activation_min_traces", activationMinTraces, toInt,
                std::to_string(c.activationMinTraces)),
      FIELD_NUM("activation_max_rel_width", activationMaxRelWidth, toDouble,
                fmt(c.activationMaxRelWidth)),
      FIELD_NUM("idepth_min_init", idepthMinInit, toDouble, fmt(c.idepthMinInit)),
      FIELD_NUM("idepth_max_init", idepthMaxInit, toDouble, fmt(c.idepthMaxInit)),
      FIELD_NUM("marg_min_visibility", margMinVisibility, toDouble, fmt(c.margMinVisibility)),
      FIELD_NUM("marg_dist_epsilon", margDistEpsilon, toDouble, fmt(c.margDistEpsilon)),
      FIELD_NUM("solver_max_iters", solverMaxIters, toInt, std::to_string(c.solverMaxIters)),
      FIELD_NUM("solver_initial_lambda", solverInitialLambda, toDouble,
                fmt(c.solverInitialLambda)),
      {"seed", Field{[](RunConfig& c, const std::string& v) { c.seed = std::stoull(v); },
                     [](const RunConfig& c) { return std::to_string(c.seed); }}},
      FIELD_NUM("plain_dir_fps", plainDirFps, toDouble, fmt(c.plainDirFps)),
  };
  return table;
}

#undef FIELD_NUM

// Serialization order; keeps files stable and readable.
const std::vector<std::string>& fieldOrder() {
  static const std::vector<std::string> order = {
      "n_keyframes", "n_points", "gradient_constant", "patch_grid", "photometric_correction",
      "selection_mode", "block_size", "s_smooth", "decay_pass2", "decay_pass3",
      "draw_budget_factor", "huber_gamma", "gradient_weight_c", "outlier_energy",
      "pyramid_levels", "tracker_iters", "lost_energy", "min_valid_fraction",
      "rotation_delta_deg", "kf_weight_f", "kf_weight_ft", "kf_weight_a", "kf_threshold",
      "flow_norm_factor", "brightness_norm", "bootstrap_seconds", "bootstrap_factor",
      "trace_outlier_ssd", "trace_ambiguity_ratio", "trace_noise_sigma",
      "activation_min_traces", "activation_max_rel_width", "idepth_min_init",
      "idepth_max_init", "marg_min_visibility", "marg_dist_epsilon", "solver_max_iters",
      "solver_initial_lambda", "seed", "plain_dir_fps"};
  return order;
}

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(nKeyframes >= 2, "n_keyframes must be >= 2");
  require(nPoints >= 1, "n_points must be >= 1");
  require(gradientConstant >= 0, "gradient_constant must be >= 0");
  require(patchGrid >= 1, "patch_grid must be >= 1");
  require(selectionMode == "saliency" || selectionMode == "uniform",
          "selection_mode must be saliency or uniform");
  require(blockSize >= 1, "block_size must be >= 1");
  require(sSmooth > 0, "s_smooth must be > 0");
  require(decayPass2 > 0 && decayPass2 < 1, "decay_pass2 must be in (0,1)");
  require(decayPass3 > 0 && decayPass3 < 1, "decay_pass3 must be in (0,1)");
  require(drawBudgetFactor >= 1, "draw_budget_factor must be >= 1");
  require(huberGamma > 0, "huber_gamma must be > 0");
  require(gradientWeightC > 0, "gradient_weight_c must be > 0");
  require(outlierEnergy > 0, "outlier_energy must be > 0");
  require(pyramidLevels >= 1, "pyramid_levels must be >= 1");
  require(trackerIters >= 1, "tracker_iters must be >= 1");
  require(lostEnergy > 0, "lost_energy must be > 0");
  require(minValidFraction >= 0 && minValidFraction <= 1, "min_valid_fraction in [0,1]");
  require(kfWeightF >= 0 && kfWeightFt >= 0 && kfWeightA >= 0,
          "keyframe weights must be >= 0");
  require(kfThreshold > 0, "kf_threshold must be > 0");
  require(flowNormFactor > 0, "flow_norm_factor must be > 0");
  require(brightnessNorm > 0, "brightness_norm must be > 0");
  require(bootstrapFactor > 0 && bootstrapFactor <= 1, "bootstrap_factor in (0,1]");
  require(traceAmbiguityRatio >= 1, "trace_ambiguity_ratio must be >= 1");
  require(activationMinTraces >= 1, "activation_min_traces must be >= 1");
  require(activationMaxRelWidth > 0, "activation_max_rel_width must be > 0");
  require(idepthMinInit > 0 && idepthMaxInit > idepthMinInit,
          "idepth init interval must satisfy 0 < min < max");
  require(margMinVisibility >= 0 && margMinVisibility <= 1, "marg_min_visibility in [0,1]");
  require(margDistEpsilon > 0, "marg_dist_epsilon must be > 0");
  require(solverMaxIters >= 1, "solver_max_iters must be >= 1");
  require(solverInitialLambda > 0, "solver_initial_lambda must be > 0");
  require(plainDirFps > 0, "plain_dir_fps must be > 0");
}

PhotoConfig RunConfig::photo() const {
  return PhotoConfig{huberGamma, gradientWeightC, outlierEnergy};
}

SelectionConfig RunConfig::selection() const {
  SelectionConfig s;
  s.nDesired = nPoints;
  s.gridK = patchGrid;
  s.blockD = blockSize;
  s.sSmooth = sSmooth;
  s.gTh = gradientConstant;
  s.decayPass2 = decayPass2;
  s.decayPass3 = decayPass3;
  s.drawBudgetFactor = drawBudgetFactor;
  s.mode = selectionMode == "uniform" ? SelectionMode::Uniform : SelectionMode::Saliency;
  return s;
}

TrackerConfig RunConfig::tracker() const {
  TrackerConfig t;
  t.levels = pyramidLevels;
  t.maxItersPerLevel = trackerIters;
  t.lostMeanEnergy = lostEnergy;
  t.minValidFraction = minValidFraction;
  t.rotationDeltaDeg = rotationDeltaDeg;
  return t;
}

TraceConfig RunConfig::trace() const {
  TraceConfig t;
  t.ssdOutlierPerPixel = traceOutlierSsd;
  t.ambiguityRatio = traceAmbiguityRatio;
  t.noiseSigma = traceNoiseSigma;
  return t;
}

ActivationConfig RunConfig::activation() const {
  return ActivationConfig{activationMinTraces, activationMaxRelWidth};
}

MarginalizationPolicy RunConfig::margPolicy() const {
  return MarginalizationPolicy{nKeyframes, margMinVisibility, margDistEpsilon};
}

BackendConfig RunConfig::backend() const {
  BackendConfig b;
  b.maxIters = solverMaxIters;
  b.initialLambda = solverInitialLambda;
  return b;
}

KeyframeWeights RunConfig::kfWeights() const {
  return KeyframeWeights{kfWeightF, kfWeightFt, kfWeightA};
}

void applyConfigLine(RunConfig& cfg, const std::string& raw) {
  std::string line = raw;
  const auto hash = line.find('#');
  if (hash != std::string::npos) line = line.substr(0, hash);
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    const auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  if (trim(line).empty()) return;
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw ConfigError("expected `key = value`: " + raw);
  const std::string key = trim(line.substr(0, eq));
  const std::string value = trim(line.substr(eq + 1));
  const auto& table = fieldTable();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key: " + key);
  it->second.set(cfg, value);
}

RunConfig parseRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  RunConfig cfg;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    try {
      applyConfigLine(cfg, line);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(lineNo) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

std::string serializeRunConfig(const RunConfig& cfg) {
  std::ostringstream out;
  const auto& table = fieldTable();
  for (const auto& key : fieldOrder()) out << key << " = " << table.at(key).get(cfg) << "\n";
  return out.str();
}

void writeRunConfig(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config: " + path);
  out << serializeRunConfig(cfg);
}

}  // namespace salvo
