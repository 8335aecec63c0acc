#include "salvo/trajectory.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace salvo {

void Trajectory::append(double t, const SE3& pose) {
  if (!poses.empty() && t <= poses.back().timestamp)
    throw InputError("trajectory timestamps must be strictly increasing");
  poses.push_back({t, pose});
}

Sim3 alignSimilarity(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  if (from.size() != to.size() || from.size() < 3)
    throw InputError("alignment requires >= 3 associated positions");
  MatX src(3, long(from.size())), dst(3, long(to.size()));
  for (size_t i = 0; i < from.size(); ++i) {
    src.col(long(i)) = from[i];
    dst.col(long(i)) = to[i];
  }
  const Eigen::Matrix4d T = Eigen::umeyama(src, dst, true);
  Sim3 out;
  const Mat3 sR = T.topLeftCorner<3, 3>();
  out.scale = std::cbrt(sR.determinant());
  out.R = sR / out.scale;
  out.t = T.topRightCorner<3, 1>();
  return out;
}

std::vector<std::pair<size_t, size_t>> associate(const Trajectory& a, const Trajectory& b,
                                                 double maxDt) {
  std::vector<std::pair<size_t, size_t>> pairs;
  size_t j = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double t = a.poses[i].timestamp;
    while (j + 1 < b.size() &&
           std::abs(b.poses[j + 1].timestamp - t) <= std::abs(b.poses[j].timestamp - t))
      ++j;
    if (j < b.size() && std::abs(b.poses[j].timestamp - t) <= maxDt) pairs.emplace_back(i, j);
  }
  return pairs;
}

double rmseAte(const Trajectory& estimate, const Trajectory& groundTruth) {
  const auto pairs = associate(estimate, groundTruth);
  if (pairs.size() < 3) throw InputError("rmseAte: fewer than 3 associated pose pairs");

  std::vector<Vec3> est, gt;
  est.reserve(pairs.size());
  gt.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    est.push_back(estimate.poses[i].pose.t);
    gt.push_back(groundTruth.poses[j].pose.t);
  }
  const Sim3 T = alignSimilarity(est, gt);
  double sq = 0;
  for (size_t k = 0; k < est.size(); ++k) sq += (T * est[k] - gt[k]).squaredNorm();
  return std::sqrt(sq / double(est.size()));
}

double alignError(const Trajectory& estimate, const Trajectory& loopStartSegment,
                  const Trajectory& loopEndSegment) {
  const auto startPairs = associate(estimate, loopStartSegment);
  const auto endPairs = associate(estimate, loopEndSegment);
  if (startPairs.size() < 3 || endPairs.size() < 3)
    throw InputError("alignError: segments must associate with >= 3 poses");

  auto fit = [&](const std::vector<std::pair<size_t, size_t>>& pairs, const Trajectory& seg) {
    std::vector<Vec3> est, gt;
    for (const auto& [i, j] : pairs) {
      est.push_back(estimate.poses[i].pose.t);
      gt.push_back(seg.poses[j].pose.t);
    }
    return alignSimilarity(est, gt);
  };
  const Sim3 Ts = fit(startPairs, loopStartSegment);
  const Sim3 Te = fit(endPairs, loopEndSegment);

  double sq = 0;
  for (const auto& sp : estimate.poses) sq += (Ts * sp.pose.t - Te * sp.pose.t).squaredNorm();
  return std::sqrt(sq / double(estimate.size()));
}

void writeTrajectory(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trajectory: " + path);
  char line[256];
  for (const auto& sp : traj.poses) {
    Eigen::Quaterniond q(sp.pose.R);
    q.normalize();
    std::snprintf(line, sizeof(line), "%.9f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", sp.timestamp,
                  sp.pose.t.x(), sp.pose.t.y(), sp.pose.t.z(), q.x(), q.y(), q.z(), q.w());
    out << line;
  }
}

Trajectory readTrajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read trajectory: " + path);
  Trajectory traj;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ls >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
      throw InputError(path + ":" + std::to_string(lineNo) + ": malformed pose line");
    Eigen::Quaterniond q(qw, qx, qy, qz);
    q.normalize();
    traj.append(t, SE3(q.toRotationMatrix(), Vec3(tx, ty, tz)));
  }
  return traj;
}

}  // namespace salvo
