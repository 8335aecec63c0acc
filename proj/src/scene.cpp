#include "salvo/scene.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "salvo/pnm.hpp"

namespace salvo {

namespace {

Mat3 lookRotation(const Vec3& forward, const Vec3& worldUp = Vec3(0, 0, 1)) {
  const Vec3 f = forward.normalized();
  Vec3 right = f.cross(worldUp);
  if (right.norm() < 1e-9) right = f.cross(Vec3(0, 1, 0));
  right.normalize();
  const Vec3 down = f.cross(right).normalized() * -1.0;
  Mat3 R;
  R.col(0) = right;
  R.col(1) = -down;  // camera y points down
  R.col(2) = f;
  return R;
}

struct RayHit {
  double t = 0;
  int entity = -1;   // 0..5 room faces, 6+k box k
  int classId = -1;  // semantic class
};

int roomFaceClass(int axis, int sign) {
  if (axis == 2) return sign < 0 ? kClassFloor : kClassCeiling;
  return kClassWall;
}

int roomFaceEntity(int axis, int sign) { return axis * 2 + (sign > 0 ? 1 : 0); }

}  // namespace

SE3 SyntheticScene::poseAt(int frame) const {
  const SceneSpec& s = spec;
  const double u = s.frames > 1 ? double(frame) / double(s.frames) : 0.0;
  switch (s.shape) {
    case PathShape::Stationary: {
      const Vec3 p = s.lineStart;
      return SE3(lookRotation(s.lookTarget - p), p);
    }
    case PathShape::Line: {
      const Vec3 p = s.lineStart + u * (s.lineEnd - s.lineStart);
      const Vec3 f = s.lookAtTarget ? (s.lookTarget - p) : (s.lineEnd - s.lineStart);
      return SE3(lookRotation(f), p);
    }
    case PathShape::Circle:
    default: {
      // phi' >= 0 for amplitude < 1, so the path stays C1.
      const double phi = 2.0 * M_PI * s.pathLoops *
                         (u + s.speedModAmplitude / (2.0 * M_PI) * (1.0 - std::cos(2.0 * M_PI * u)));
      const Vec3 p = s.pathCenter + s.pathRadius * Vec3(std::cos(phi), std::sin(phi), 0);
      const Vec3 tangent(-std::sin(phi), std::cos(phi), 0);
      const Vec3 outward(std::cos(phi), std::sin(phi), 0);
      const double yaw = s.lookYawDeg * M_PI / 180.0;
      const Vec3 f = std::cos(yaw) * tangent + std::sin(yaw) * outward;
      return SE3(lookRotation(f), p);
    }
  }
}

double SyntheticScene::exposureAt(int frame) const {
  if (spec.exposureAmplitude == 0) return 1.0;
  return 1.0 +
         spec.exposureAmplitude * std::sin(2.0 * M_PI * double(frame) / spec.exposurePeriodFrames);
}

double SyntheticScene::textureValue(int entity, const Vec3& p) const {
  const TextureSpec& ts = entity >= 6 ? spec.objectTexture : spec.surfaceTexture;
  double v = ts.base;
  for (const Wave& w : waves_[size_t(entity)]) v += w.amp * std::sin(w.k.dot(p) + w.phase);
  return v;
}

double SyntheticScene::distanceToSurface(const Vec3& p) const {
  double d = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    d = std::min(d, std::abs(p[axis] - spec.roomMin[axis]));
    d = std::min(d, std::abs(p[axis] - spec.roomMax[axis]));
  }
  for (const Box& b : spec.boxes) {
    Vec3 outside = Vec3::Zero();
    double inside = -std::numeric_limits<double>::infinity();
    for (int axis = 0; axis < 3; ++axis) {
      outside[axis] = std::max({b.min[axis] - p[axis], p[axis] - b.max[axis], 0.0});
      inside = std::max(inside, std::max(b.min[axis] - p[axis], p[axis] - b.max[axis]));
    }
    const double dist = outside.norm() > 0 ? outside.norm() : std::abs(inside);
    d = std::min(d, dist);
  }
  return d;
}

FrameRender SyntheticScene::renderFrame(int frame) const {
  const SceneSpec& s = spec;
  const CameraIntrinsics& K = s.camera;
  const SE3 T = poseAt(frame);
  const double exposure = exposureAt(frame);
  Rng noise(hashSeed(s.noiseSeed ^ hashSeed(uint64_t(frame) + 1)));

  FrameRender out;
  out.exposure = exposure;
  out.image.resize(K.height, K.width);
  out.depth.resize(K.height, K.width);
  out.saliency.values.resize(K.height, K.width);
  out.semantic.labels.resize(K.height, K.width);
  out.semantic.classCount = classCount();

  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const Vec3 dir = T.R * K.backproject(double(x), double(y));
      const Vec3& o = T.t;

      RayHit hit;
      hit.t = std::numeric_limits<double>::infinity();
      for (int axis = 0; axis < 3; ++axis) {
        if (std::abs(dir[axis]) < 1e-12) continue;
        const int sign = dir[axis] > 0 ? 1 : -1;
        const double bound = sign > 0 ? s.roomMax[axis] : s.roomMin[axis];
        const double t = (bound - o[axis]) / dir[axis];
        if (t > 0 && t < hit.t) {
          hit.t = t;
          hit.entity = roomFaceEntity(axis, sign);
          hit.classId = roomFaceClass(axis, sign);
        }
      }
      for (size_t bi = 0; bi < s.boxes.size(); ++bi) {
        const Box& b = s.boxes[bi];
        double tEnter = -std::numeric_limits<double>::infinity();
        double tExit = std::numeric_limits<double>::infinity();
        bool miss = false;
        for (int axis = 0; axis < 3 && !miss; ++axis) {
          if (std::abs(dir[axis]) < 1e-12) {
            if (o[axis] < b.min[axis] || o[axis] > b.max[axis]) miss = true;
            continue;
          }
          double t0 = (b.min[axis] - o[axis]) / dir[axis];
          double t1 = (b.max[axis] - o[axis]) / dir[axis];
          if (t0 > t1) std::swap(t0, t1);
          tEnter = std::max(tEnter, t0);
          tExit = std::min(tExit, t1);
          if (tEnter > tExit) miss = true;
        }
        if (!miss && tEnter > 1e-9 && tEnter < hit.t) {
          hit.t = tEnter;
          hit.entity = 6 + int(bi);
          hit.classId = kClassObjectBase + int(bi);
        }
      }

      const Vec3 p = o + hit.t * dir;
      double value = textureValue(hit.entity, p) * exposure;
      if (s.noiseSigma > 0) value += s.noiseSigma * noise.normal();
      out.image(y, x) = std::clamp(std::round(value), 0.0, 255.0);
      out.depth(y, x) = hit.t;  // backprojected dir has unit z in camera frame
      out.saliency.values(y, x) = hit.classId >= kClassObjectBase ? 1.0 : 0.0;
      out.semantic.labels(y, x) = hit.classId;
    }
  }
  return out;
}

SyntheticScene generateScene(const SceneSpec& spec) {
  SyntheticScene scene;
  scene.spec = spec;

  const int numEntities = 6 + int(spec.boxes.size());
  scene.waves_.resize(size_t(numEntities));
  for (int e = 0; e < numEntities; ++e) {
    const TextureSpec& ts = e >= 6 ? spec.objectTexture : spec.surfaceTexture;
    Rng rng(hashSeed(spec.textureSeed + 0x51ce * uint64_t(e + 1)));
    for (int c = 0; c < ts.components; ++c) {
      SyntheticScene::Wave w;
      const double freq = rng.uniform(ts.minFreq, ts.maxFreq);
      Vec3 dir(rng.normal(), rng.normal(), rng.normal());
      if (dir.norm() < 1e-9) dir = Vec3(1, 0, 0);
      w.k = freq * dir.normalized();
      w.phase = rng.uniform(0, 2.0 * M_PI);
      w.amp = ts.amplitude / std::sqrt(double(ts.components));
      scene.waves_[size_t(e)].push_back(w);
    }
  }

  const double wallMargin = 0.05;
  for (int i = 0; i < spec.frames; ++i) {
    const SE3 T = scene.poseAt(i);
    for (int axis = 0; axis < 3; ++axis)
      if (T.t[axis] < spec.roomMin[axis] + wallMargin ||
          T.t[axis] > spec.roomMax[axis] - wallMargin)
        throw ConfigError("generateScene: trajectory exits room at frame " + std::to_string(i));
    for (const Box& b : spec.boxes) {
      bool inside = true;
      for (int axis = 0; axis < 3; ++axis)
        inside = inside && T.t[axis] > b.min[axis] - 0.02 && T.t[axis] < b.max[axis] + 0.02;
      if (inside)
        throw ConfigError("generateScene: trajectory intersects an object at frame " +
                          std::to_string(i));
    }
    scene.trueTrajectory.append(double(i) / spec.fps, T);
  }
  return scene;
}

void writeSceneDataset(const SyntheticScene& scene, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const char* sub : {"images", "saliency", "semantic", "depth"})
    fs::create_directories(fs::path(dir) / sub);

  const CameraIntrinsics& K = scene.spec.camera;
  {
    std::ofstream cam(fs::path(dir) / "camera.txt");
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%.9f %.9f %.9f %.9f\n%d %d\n", K.fx, K.fy, K.cx, K.cy,
                  K.width, K.height);
    cam << buf;
  }

  std::ofstream times(fs::path(dir) / "times.txt");
  for (int i = 0; i < scene.spec.frames; ++i) {
    const FrameRender fr = scene.renderFrame(i);
    char name[32];
    std::snprintf(name, sizeof(name), "%05d", i);
    writePgm((fs::path(dir) / "images" / (std::string(name) + ".pgm")).string(), fr.image);
    Image sal8 = fr.saliency.values * 255.0;
    writePgm((fs::path(dir) / "saliency" / (std::string(name) + ".pgm")).string(), sal8);
    Image sem(fr.semantic.labels.rows(), fr.semantic.labels.cols());
    for (int y = 0; y < sem.rows(); ++y)
      for (int x = 0; x < sem.cols(); ++x) sem(y, x) = double(fr.semantic.labels(y, x));
    writePgm((fs::path(dir) / "semantic" / (std::string(name) + ".pgm")).string(), sem);
    writePfm((fs::path(dir) / "depth" / (std::string(name) + ".pfm")).string(), fr.depth);

    char line[96];
    std::snprintf(line, sizeof(line), "%05d %.9f %.9f\n", i, double(i) / scene.spec.fps,
                  fr.exposure);
    times << line;
  }
  writeTrajectory(scene.trueTrajectory, (fs::path(dir) / "groundtruth.txt").string());
}

SceneSpec presetScene(const std::string& name) {
  SceneSpec s;
  if (name == "loop") {
    // Richly textured room, closed circular path of ~4 m.
    s.surfaceTexture = {120, 52, 6, 18, 55};
    s.objectTexture = {130, 60, 8, 25, 75};
    s.pathRadius = 4.0 / (2.0 * M_PI);
    s.frames = 96;
    s.pathLoops = 1.0;
    s.lookYawDeg = 28;
    s.boxes = {
        {{0.4, 0.4, 0.0}, {1.0, 1.0, 0.9}},
        {{3.0, 0.5, 0.0}, {3.6, 1.2, 1.3}},
        {{3.0, 3.0, 0.4}, {3.7, 3.7, 1.1}},
        {{0.5, 2.9, 0.0}, {1.2, 3.6, 0.8}},
        {{1.7, 0.2, 1.6}, {2.4, 0.8, 2.2}},
    };
  } else if (name == "cluttered") {
    // Repetitive low-contrast surfaces, strongly textured boxes, mild noise
    // and exposure changes; the low-point-density stress scene.
    s.surfaceTexture = {120, 28, 2, 55, 90};
    s.objectTexture = {125, 60, 9, 25, 85};
    s.pathRadius = 0.55;
    s.frames = 64;
    s.pathLoops = 0.6;
    s.lookYawDeg = 30;
    s.speedModAmplitude = 0.35;
    s.noiseSigma = 2.5;
    s.exposureAmplitude = 0.12;
    s.exposurePeriodFrames = 28;
    s.boxes = {
        {{0.3, 0.6, 0.0}, {1.1, 1.4, 1.0}},  {{2.9, 0.4, 0.0}, {3.7, 1.1, 1.4}},
        {{3.1, 2.8, 0.0}, {3.8, 3.6, 0.9}},  {{0.4, 2.8, 0.3}, {1.0, 3.5, 1.2}},
        {{1.6, 3.3, 0.0}, {2.4, 3.9, 0.7}},  {{0.2, 1.8, 1.5}, {0.8, 2.4, 2.1}},
        {{3.4, 1.7, 1.4}, {3.9, 2.3, 2.0}},
    };
  } else if (name == "line") {
    s.shape = PathShape::Line;
    s.surfaceTexture = {120, 52, 6, 18, 55};
    s.objectTexture = {130, 60, 8, 25, 75};
    s.lineStart = Vec3(2, 2, 1.25);
    s.lineEnd = Vec3(2, 3, 1.25);
    s.frames = 48;
  } else if (name == "stationary") {
    s.shape = PathShape::Stationary;
    s.lineStart = Vec3(2, 2, 1.25);
    s.lookTarget = Vec3(2, 4, 1.25);
    s.frames = 8;
  } else {
    throw ConfigError("unknown scene preset: " + name);
  }
  return s;
}

}  // namespace salvo
