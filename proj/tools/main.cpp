#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "salvo/harness.hpp"
#include "salvo/pipeline.hpp"
#include "salvo/scene.hpp"

namespace fs = std::filesystem;
using namespace salvo;

namespace {

struct CommonArgs {
  std::string dataset;
  std::string format = "synthetic";
  std::string config;
  std::string saliencyDir;
  std::string segmentationDir;
  std::string classWeightsFile;
  std::string mode;
  std::string direction = "forward";
  std::string outDir = "out";
  int64_t seed = -1;
};

RunConfig makeConfig(const CommonArgs& args) {
  RunConfig cfg = args.config.empty() ? RunConfig{} : parseRunConfig(args.config);
  if (!args.mode.empty()) cfg.selectionMode = args.mode;
  if (args.seed >= 0) cfg.seed = uint64_t(args.seed);
  cfg.validate();
  return cfg;
}

DatasetSource makeDataset(const CommonArgs& args, const RunConfig& cfg, bool reverse) {
  DatasetOptions opts;
  opts.saliencyDir = args.saliencyDir;
  opts.segmentationDir = args.segmentationDir;
  opts.requireSaliency = cfg.selectionMode == "saliency";
  opts.requirePhotometricCalibration = cfg.photometricCorrection;
  opts.reverse = reverse;
  opts.plainDirFps = cfg.plainDirFps;
  return loadDataset(args.dataset, parseDatasetFormat(args.format), opts);
}

ClassWeights makeWeights(const CommonArgs& args) {
  if (args.classWeightsFile.empty()) return {};
  return loadClassWeights(args.classWeightsFile);
}

void addCommonOptions(CLI::App* cmd, CommonArgs& args, bool needsDataset = true) {
  auto* d = cmd->add_option("--dataset", args.dataset, "dataset directory");
  if (needsDataset) d->required();
  cmd->add_option("--format", args.format,
                  "dataset layout: tum-mono|icl-nuim|plain-dir|synthetic");
  cmd->add_option("--config", args.config, "run configuration file");
  cmd->add_option("--saliency-dir", args.saliencyDir, "per-frame saliency maps");
  cmd->add_option("--segmentation-dir", args.segmentationDir, "per-frame semantic maps");
  cmd->add_option("--class-weights", args.classWeightsFile, "class weights file");
  cmd->add_option("--mode", args.mode, "selection mode: saliency|uniform");
  cmd->add_option("--seed", args.seed, "RNG seed override");
  cmd->add_option("--out-dir", args.outDir, "output directory");
  cmd->add_option("--direction", args.direction, "playback direction: forward|backward");
}

int cmdRun(const CommonArgs& args) {
  const RunConfig cfg = makeConfig(args);
  const DatasetSource ds = makeDataset(args, cfg, args.direction == "backward");
  const RunOutput out = runOdometry(ds, cfg, makeWeights(args));

  fs::create_directories(args.outDir);
  writeTrajectory(out.trajectory, (fs::path(args.outDir) / "trajectory.txt").string());
  exportPointCloud(out.pointCloud, (fs::path(args.outDir) / "pointcloud.ply").string());
  {
    std::ofstream rep(fs::path(args.outDir) / "report.txt");
    rep << out.report.summary() << "\n";
  }
  std::cout << out.report.summary() << "\n";
  return out.report.success ? 0 : 1;
}

int cmdGen(const std::string& sceneName, const std::string& outDir, int frames, int64_t seed,
           double noiseSigma, double exposureAmp) {
  SceneSpec spec = presetScene(sceneName);
  if (frames > 0) spec.frames = frames;
  if (seed >= 0) spec.textureSeed = uint64_t(seed);
  if (noiseSigma >= 0) spec.noiseSigma = noiseSigma;
  if (exposureAmp >= 0) spec.exposureAmplitude = exposureAmp;
  const SyntheticScene scene = generateScene(spec);
  writeSceneDataset(scene, outDir);
  std::cout << "wrote " << spec.frames << " frames to " << outDir << "\n";
  return 0;
}

int cmdEval(const std::string& estimatePath, const std::string& gtPath,
            const std::string& metric, double segmentSeconds) {
  const Trajectory est = readTrajectory(estimatePath);
  const Trajectory gt = readTrajectory(gtPath);
  if (metric == "ate") {
    std::cout << "rmse_ate " << rmseAte(est, gt) << "\n";
    return 0;
  }
  if (metric == "align") {
    Trajectory start, end;
    const double t0 = gt.poses.front().timestamp;
    const double t1 = gt.poses.back().timestamp;
    for (const auto& sp : gt.poses) {
      if (sp.timestamp <= t0 + segmentSeconds) start.append(sp.timestamp, sp.pose);
      if (sp.timestamp >= t1 - segmentSeconds) end.append(sp.timestamp, sp.pose);
    }
    std::cout << "e_align " << alignError(est, start, end) << "\n";
    return 0;
  }
  std::cerr << "unknown metric: " << metric << "\n";
  return 2;
}

int cmdBench(const CommonArgs& args, int runs, int threads, bool bothModes) {
  const RunConfig cfg = makeConfig(args);
  const ClassWeights weights = makeWeights(args);

  const bool forward = args.direction == "forward" || args.direction == "both";
  const bool backward = args.direction == "backward" || args.direction == "both";
  DatasetSource fwd = makeDataset(args, cfg, !forward && backward);
  std::optional<DatasetSource> bwd;
  if (forward && backward) bwd = makeDataset(args, cfg, true);

  fs::create_directories(args.outDir);
  auto runMode = [&](const std::string& mode) {
    RunConfig modeCfg = cfg;
    modeCfg.selectionMode = mode;
    const HarnessResult result =
        successRateHarness(fwd, bwd ? &*bwd : nullptr, modeCfg, runs, weights, threads);
    const std::string csv = harnessCsv(result);
    std::ofstream out(fs::path(args.outDir) / ("bench_" + mode + ".csv"));
    out << csv;
    for (const auto& s : result.summaries)
      std::cout << mode << " " << s.direction << ": " << s.successes << "/" << s.runs << " = "
                << 100.0 * s.fraction() << "%\n";
  };

  if (bothModes) {
    runMode("saliency");
    runMode("uniform");
  } else {
    runMode(cfg.selectionMode);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saliency-guided direct sparse visual odometry"};
  app.require_subcommand(1);

  CommonArgs runArgs;
  auto* run = app.add_subcommand("run", "run odometry on a dataset");
  addCommonOptions(run, runArgs);

  std::string sceneName = "loop", genOut = "scene";
  int genFrames = -1;
  int64_t genSeed = -1;
  double genNoise = -1, genExposure = -1;
  auto* gen = app.add_subcommand("gen", "generate a synthetic scene dataset");
  gen->add_option("--scene", sceneName, "preset: loop|cluttered|line|stationary");
  gen->add_option("--out-dir", genOut, "output dataset directory")->required();
  gen->add_option("--frames", genFrames, "frame count override");
  gen->add_option("--seed", genSeed, "texture seed override");
  gen->add_option("--noise-sigma", genNoise, "image noise sigma override");
  gen->add_option("--exposure-amplitude", genExposure, "exposure variation override");

  std::string estimatePath, gtPath, metric = "ate";
  double segmentSeconds = 1.0;
  auto* eval = app.add_subcommand("eval", "trajectory metrics");
  eval->add_option("--estimate", estimatePath, "estimated trajectory")->required();
  eval->add_option("--groundtruth", gtPath, "ground-truth trajectory")->required();
  eval->add_option("--metric", metric, "ate|align");
  eval->add_option("--segment-seconds", segmentSeconds,
                   "start/end segment length for e_align");

  CommonArgs benchArgs;
  int benchRuns = 100, benchThreads = 1;
  bool benchBoth = false;
  auto* bench = app.add_subcommand("bench", "success-rate harness");
  addCommonOptions(bench, benchArgs);
  bench->add_option("--runs", benchRuns, "runs per direction");
  bench->add_option("--threads", benchThreads, "worker threads");
  bench->add_flag("--both-modes", benchBoth, "run saliency and uniform modes");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmdRun(runArgs);
    if (gen->parsed())
      return cmdGen(sceneName, genOut, genFrames, genSeed, genNoise, genExposure);
    if (eval->parsed()) return cmdEval(estimatePath, gtPath, metric, segmentSeconds);
    if (bench->parsed()) return cmdBench(benchArgs, benchRuns, benchThreads, benchBoth);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
