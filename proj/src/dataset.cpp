#include "salvo/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "salvo/pnm.hpp"

namespace fs = std::filesystem;

namespace salvo {

namespace {

CameraIntrinsics readCameraFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open camera calibration: " + path);
  double fx, fy, cx, cy;
  if (!(in >> fx >> fy >> cx >> cy)) throw InputError(path + ": expected `fx fy cx cy`");
  std::string rest;
  std::getline(in, rest);  // tolerate a trailing distortion value of 0
  {
    std::istringstream rs(rest);
    double extra;
    if (rs >> extra && extra != 0)
      throw InputError(path + ": nonzero distortion unsupported; rectify input first");
  }
  int w, h;
  if (!(in >> w >> h)) throw InputError(path + ": expected image size line `width height`");
  // Normalized-convention files store fx/width etc in (0, ~2].
  if (fx <= 2.0 && fy <= 2.0 && cx <= 1.0 && cy <= 1.0) {
    fx *= w;
    fy *= h;
    cx = cx * w - 0.5;
    cy = cy * h - 0.5;
  }
  return CameraIntrinsics(fx, fy, cx, cy, w, h);
}

std::vector<std::string> listImages(const std::string& dir) {
  std::vector<std::string> files;
  if (!fs::is_directory(dir)) return files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string ext = e.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

struct TimesEntry {
  std::string id;
  double timestamp;
  double exposure;
};

std::vector<TimesEntry> readTimesFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open times file: " + path);
  std::vector<TimesEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    TimesEntry e;
    e.exposure = 1.0;
    if (!(ls >> e.id >> e.timestamp)) throw InputError(path + ": malformed times line: " + line);
    ls >> e.exposure;
    if (e.exposure <= 0) e.exposure = 1.0;
    entries.push_back(e);
  }
  return entries;
}

void attachSidecars(DatasetSource& ds, const std::string& datasetPath,
                    const DatasetOptions& opts) {
  const std::string salDir =
      !opts.saliencyDir.empty() ? opts.saliencyDir : (fs::path(datasetPath) / "saliency").string();
  const std::string semDir = !opts.segmentationDir.empty()
                                 ? opts.segmentationDir
                                 : (fs::path(datasetPath) / "semantic").string();

  auto resolve = [&](const std::string& dir, int i) -> std::string {
    const std::string stem = fs::path(ds.imagePaths[size_t(i)]).stem().string();
    for (const char* ext : {".pgm", ".pnm", ".ppm"}) {
      const fs::path p = fs::path(dir) / (stem + ext);
      if (fs::exists(p)) return p.string();
    }
    return {};
  };

  if (fs::is_directory(salDir)) {
    for (int i = 0; i < ds.frameCount(); ++i) {
      const std::string p = resolve(salDir, i);
      if (p.empty()) {
        if (opts.requireSaliency)
          throw ConfigError("saliency mode: missing saliency map for frame " +
                            fs::path(ds.imagePaths[size_t(i)]).filename().string());
        ds.saliencyPaths.clear();
        break;
      }
      ds.saliencyPaths.push_back(p);
    }
  } else if (opts.requireSaliency) {
    throw ConfigError("saliency mode: saliency directory not found: " + salDir);
  }

  if (fs::is_directory(semDir)) {
    for (int i = 0; i < ds.frameCount(); ++i) {
      const std::string p = resolve(semDir, i);
      if (p.empty()) {
        if (!opts.segmentationDir.empty())
          throw ConfigError("missing semantic map for frame " +
                            fs::path(ds.imagePaths[size_t(i)]).filename().string());
        ds.semanticPaths.clear();
        break;
      }
      ds.semanticPaths.push_back(p);
    }
  }
}

void reverseDataset(DatasetSource& ds) {
  std::reverse(ds.imagePaths.begin(), ds.imagePaths.end());
  std::reverse(ds.exposures.begin(), ds.exposures.end());
  if (!ds.saliencyPaths.empty())
    std::reverse(ds.saliencyPaths.begin(), ds.saliencyPaths.end());
  if (!ds.semanticPaths.empty())
    std::reverse(ds.semanticPaths.begin(), ds.semanticPaths.end());
  // Re-stamp so timestamps stay increasing while inter-frame gaps persist.
  const double tEnd = ds.timestamps.back();
  std::vector<double> stamps(ds.timestamps.size());
  for (size_t i = 0; i < ds.timestamps.size(); ++i)
    stamps[i] = tEnd - ds.timestamps[ds.timestamps.size() - 1 - i];
  ds.timestamps = stamps;
  ds.groundTruth.reset();  // ground truth is not remapped for backward runs
}

}  // namespace

DatasetFormat parseDatasetFormat(const std::string& name) {
  if (name == "tum-mono") return DatasetFormat::TumMono;
  if (name == "icl-nuim") return DatasetFormat::IclNuim;
  if (name == "plain-dir") return DatasetFormat::PlainDir;
  if (name == "synthetic") return DatasetFormat::Synthetic;
  throw ConfigError("unknown dataset format: " + name);
}

Image DatasetSource::loadFrame(int i) const { return readImage(imagePaths[size_t(i)]); }

SaliencyMap DatasetSource::loadSaliency(int i) const {
  SaliencyMap sal;
  sal.values = readRaw(saliencyPaths[size_t(i)]) / 255.0;
  return sal;
}

SemanticMap DatasetSource::loadSemantic(int i) const {
  const Image raw = readRaw(semanticPaths[size_t(i)]);
  SemanticMap sem;
  sem.labels.resize(raw.rows(), raw.cols());
  int maxLabel = 0;
  for (int y = 0; y < raw.rows(); ++y)
    for (int x = 0; x < raw.cols(); ++x) {
      sem.labels(y, x) = int32_t(raw(y, x));
      maxLabel = std::max(maxLabel, int(sem.labels(y, x)));
    }
  sem.classCount = std::max(semanticClassCount, maxLabel + 1);
  return sem;
}

DatasetSource loadDataset(const std::string& path, DatasetFormat format,
                          const DatasetOptions& opts) {
  if (!fs::exists(path)) throw IoError("dataset path does not exist: " + path);
  DatasetSource ds;

  const std::string imageDir =
      fs::is_directory(fs::path(path) / "images") ? (fs::path(path) / "images").string() : path;
  ds.imagePaths = listImages(imageDir);
  if (int(ds.imagePaths.size()) < 2)
    throw InputError("dataset has fewer than 2 frames: " + path);

  const std::string timesPath = (fs::path(path) / "times.txt").string();
  if (fs::exists(timesPath)) {
    const auto entries = readTimesFile(timesPath);
    if (entries.size() != ds.imagePaths.size())
      throw InputError("times.txt entry count does not match image count");
    for (const auto& e : entries) {
      ds.timestamps.push_back(e.timestamp);
      ds.exposures.push_back(e.exposure);
    }
  } else {
    if (format == DatasetFormat::TumMono)
      throw ConfigError("tum-mono layout requires times.txt");
    const double fps = opts.plainDirFps;
    for (size_t i = 0; i < ds.imagePaths.size(); ++i) {
      ds.timestamps.push_back(double(i) / fps);
      ds.exposures.push_back(1.0);
    }
  }

  const std::string cameraPath = (fs::path(path) / "camera.txt").string();
  if (fs::exists(cameraPath)) {
    ds.intrinsics = readCameraFile(cameraPath);
  } else {
    // Plain directories may omit calibration; assume a generic pinhole.
    const Image probe = readImage(ds.imagePaths[0]);
    const int w = int(probe.cols()), h = int(probe.rows());
    ds.intrinsics =
        CameraIntrinsics(0.9 * w, 0.9 * w, (w - 1) / 2.0, (h - 1) / 2.0, w, h);
    if (format != DatasetFormat::PlainDir)
      throw ConfigError("missing camera.txt in dataset: " + path);
  }

  if (format == DatasetFormat::TumMono) {
    const std::string pcalib = (fs::path(path) / "pcalib.txt").string();
    const std::string vignette = (fs::path(path) / "vignette.pgm").string();
    if (fs::exists(pcalib) && fs::exists(vignette)) {
      ds.calibration.inverseResponse = loadResponseCalibration(pcalib);
      Image v = readRaw(vignette);
      const float vmax = v.maxCoeff();
      if (vmax <= 0) throw InputError(vignette + ": vignette must have positive values");
      ds.calibration.vignette = v / vmax;
      ds.hasCalibration = true;
    }
  } else if (format == DatasetFormat::IclNuim || format == DatasetFormat::Synthetic) {
    // Photometric correction "not required": identity calibration.
    ds.calibration =
        PhotometricCalibration::identity(ds.intrinsics.width, ds.intrinsics.height);
    ds.hasCalibration = true;
  }
  if (opts.requirePhotometricCalibration && format == DatasetFormat::TumMono &&
      !ds.hasCalibration)
    throw ConfigError("photometric correction enabled but pcalib.txt/vignette.pgm missing");

  const std::string gtPath = (fs::path(path) / "groundtruth.txt").string();
  if (fs::exists(gtPath)) ds.groundTruth = readTrajectory(gtPath);

  attachSidecars(ds, path, opts);
  if (opts.requireSaliency && !ds.hasSaliency())
    throw ConfigError("saliency mode requires per-frame saliency maps");

  if (opts.reverse) reverseDataset(ds);
  return ds;
}

}  // namespace salvo
