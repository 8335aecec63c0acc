#pragma once

#include <string>
#include <vector>

#include "salvo/rng.hpp"
#include "salvo/saliency.hpp"
#include "salvo/trajectory.hpp"
#include "salvo/types.hpp"

namespace salvo {

/// Semantic classes of the synthetic scenes; object k maps to kClassObjectBase + k.
inline constexpr int kClassWall = 0;
inline constexpr int kClassFloor = 1;
inline constexpr int kClassCeiling = 2;
inline constexpr int kClassObjectBase = 3;

struct Box {
  Vec3 min, max;
};

/// Band-limited procedural texture: base + sum of 3-D sinusoids.
struct TextureSpec {
  double base = 128;
  double amplitude = 40;
  int components = 6;
  double minFreq = 4;   // rad/m
  double maxFreq = 35;  // rad/m
};

enum class PathShape { Stationary, Line, Circle };

struct SceneSpec {
  Vec3 roomMin{0, 0, 0};
  Vec3 roomMax{4, 4, 2.5};
  std::vector<Box> boxes;
  TextureSpec surfaceTexture;  // walls, floor, ceiling
  TextureSpec objectTexture;
  uint64_t textureSeed = 1;

  PathShape shape = PathShape::Circle;
  Vec3 pathCenter{2, 2, 1.25};
  double pathRadius = 0.65;
  double pathLoops = 1.0;
  double lookYawDeg = 25;        // view direction off the tangent, toward the walls
  double speedModAmplitude = 0;  // C1 angular speed modulation, fraction of nominal
  Vec3 lineStart{1, 2, 1.25}, lineEnd{2, 2, 1.25};
  Vec3 lookTarget{2, 2, 1.25};
  bool lookAtTarget = false;

  int frames = 80;
  double fps = 30;
  CameraIntrinsics camera{300, 300, 159.5, 119.5, 320, 240};

  double exposureAmplitude = 0;  // relative sinusoidal exposure variation
  double exposurePeriodFrames = 40;
  double noiseSigma = 0;
  uint64_t noiseSeed = 7;
};

struct FrameRender {
  Image image;  // 8-bit-quantized intensities as floats
  Image depth;  // z-depth in meters
  SaliencyMap saliency;
  SemanticMap semantic;
  double exposure = 1;
};

/// Deterministic analytic renderer for a textured axis-aligned room with
/// textured boxes; renders, ground truth and sidecar maps are pixel-aligned.
class SyntheticScene {
 public:
  SceneSpec spec;
  Trajectory trueTrajectory;

  SE3 poseAt(int frame) const;
  double exposureAt(int frame) const;
  FrameRender renderFrame(int frame) const;

  /// Analytic texture value at a world point on the given entity
  /// (entity 0..5 = room faces, 6+k = box k).
  double textureValue(int entity, const Vec3& p) const;

  /// Distance from a world point to the nearest scene surface.
  double distanceToSurface(const Vec3& p) const;

  int classCount() const { return kClassObjectBase + int(spec.boxes.size()); }

 private:
  friend SyntheticScene generateScene(const SceneSpec& spec);
  struct Wave {
    Vec3 k;
    double phase;
    double amp;
  };
  std::vector<std::vector<Wave>> waves_;  // per entity
};

/// Validates the trajectory (camera inside the room, outside all boxes) and
/// precomputes textures. Throws ConfigError on an invalid path.
SyntheticScene generateScene(const SceneSpec& spec);

/// Writes the dataset layout consumed by the `synthetic` loader: camera.txt,
/// times.txt, groundtruth.txt, images/, saliency/, semantic/, depth/.
void writeSceneDataset(const SyntheticScene& scene, const std::string& dir);

/// Built-in scenes: "loop" (easy textured loop), "cluttered" (low-texture
/// walls, textured boxes, mild noise), "line", "stationary".
SceneSpec presetScene(const std::string& name);

}  // namespace salvo
