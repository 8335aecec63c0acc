#pragma once

#include <map>
#include <string>

#include "salvo/types.hpp"

namespace salvo {

/// Per-pixel fixation probability in [0, 1].
struct SaliencyMap {
  Image values;

  int width() const { return int(values.cols()); }
  int height() const { return int(values.rows()); }
};

/// Per-pixel class labels.
struct SemanticMap {
  LabelGrid labels;
  int classCount = 0;

  int width() const { return int(labels.cols()); }
  int height() const { return int(labels.rows()); }
};

/// Per-class multipliers for the semantic weighting stage. Classes without an
/// entry resolve to `defaultWeight`.
struct ClassWeights {
  std::map<int, double> weights;
  double defaultWeight = 1.0;

  double at(int classId) const {
    auto it = weights.find(classId);
    return it == weights.end() ? defaultWeight : it->second;
  }
};

/// Semantic weighting stage: out_j = w(C_j) * sal_j, clamped to [0, 1].
SaliencyMap weightSaliency(const SaliencyMap& sal, const SemanticMap& sem,
                           const ClassWeights& w);

/// Replaces every pixel by the median of the weighted saliency over all pixels
/// of its class (whole image; even-count median = mean of the two middle values).
SaliencyMap classMedianSmooth(const SaliencyMap& weighted, const SemanticMap& sem);

/// Both filtering stages; the result is constant across each class.
SaliencyMap filterSaliency(const SaliencyMap& sal, const SemanticMap& sem,
                           const ClassWeights& w);

/// Plain-text weights file: one `classId weight` pair per line, `#` comments.
ClassWeights loadClassWeights(const std::string& path);

double medianOf(std::vector<double> values);

}  // namespace salvo
