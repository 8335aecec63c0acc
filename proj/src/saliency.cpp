#include "salvo/saliency.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

namespace salvo {

namespace {

void requireSameSize(int w1, int h1, int w2, int h2) {
  if (w1 != w2 || h1 != h2)
    throw InputError("saliency/semantic dimension mismatch: " + std::to_string(w1) + "x" +
                     std::to_string(h1) + " vs " + std::to_string(w2) + "x" +
                     std::to_string(h2));
}

}  // namespace

double medianOf(std::vector<double> values) {
  const size_t n = values.size();
  if (n == 0) return 0.0;
  const size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + long(mid), values.end());
  double hi = values[mid];
  if (n % 2 == 1) return hi;
  double lo = *std::max_element(values.begin(), values.begin() + long(mid));
  return 0.5 * (lo + hi);
}

SaliencyMap weightSaliency(const SaliencyMap& sal, const SemanticMap& sem,
                           const ClassWeights& w) {
  requireSameSize(sal.width(), sal.height(), sem.width(), sem.height());
  SaliencyMap out;
  out.values.resize(sal.values.rows(), sal.values.cols());
  for (int y = 0; y < sal.height(); ++y)
    for (int x = 0; x < sal.width(); ++x) {
      double v = w.at(sem.labels(y, x)) * double(sal.values(y, x));
      out.values(y, x) = std::clamp(v, 0.0, 1.0);
    }
  return out;
}

SaliencyMap classMedianSmooth(const SaliencyMap& weighted, const SemanticMap& sem) {
  requireSameSize(weighted.width(), weighted.height(), sem.width(), sem.height());

  std::map<int, std::vector<double>> perClass;
  for (int y = 0; y < weighted.height(); ++y)
    for (int x = 0; x < weighted.width(); ++x)
      perClass[sem.labels(y, x)].push_back(double(weighted.values(y, x)));

  std::map<int, double> medians;
  for (auto& [cls, vals] : perClass) medians[cls] = medianOf(std::move(vals));

  SaliencyMap out;
  out.values.resize(weighted.values.rows(), weighted.values.cols());
  for (int y = 0; y < weighted.height(); ++y)
    for (int x = 0; x < weighted.width(); ++x)
      out.values(y, x) = medians[sem.labels(y, x)];
  return out;
}

SaliencyMap filterSaliency(const SaliencyMap& sal, const SemanticMap& sem,
                           const ClassWeights& w) {
  return classMedianSmooth(weightSaliency(sal, sem, w), sem);
}

ClassWeights loadClassWeights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open class-weights file: " + path);
  ClassWeights cw;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    int classId;
    double weight;
    if (!(ls >> classId)) continue;  // blank or comment-only line
    if (!(ls >> weight) || weight < 0)
      throw InputError(path + ":" + std::to_string(lineNo) + ": expected `classId weight`");
    cw.weights[classId] = weight;
  }
  return cw;
}

}  // namespace salvo
