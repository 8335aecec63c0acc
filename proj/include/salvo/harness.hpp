#pragma once

#include <string>
#include <vector>

#include "salvo/pipeline.hpp"

namespace salvo {

struct RunRecord {
  std::string direction;
  int run = 0;
  uint64_t seed = 0;
  bool success = false;
  std::string reason;
  int framesProcessed = 0;
  int keyframes = 0;
};

struct DirectionSummary {
  std::string direction;
  int runs = 0;
  int successes = 0;

  double fraction() const { return runs > 0 ? double(successes) / double(runs) : 1.0; }
};

struct HarnessResult {
  std::vector<DirectionSummary> summaries;
  std::vector<RunRecord> records;
};

/// Runs the full pipeline `runs` times per direction with per-run seeds
/// derived from cfg.seed. A run succeeds iff it reaches the last frame with
/// neither tracking loss nor a solver failure. Runs are independent and may
/// execute on multiple threads; results do not depend on scheduling.
HarnessResult successRateHarness(const DatasetSource& forward, const DatasetSource* backward,
                                 const RunConfig& cfg, int runs,
                                 const ClassWeights& weights = {}, int threads = 1);

/// Character-separated summary plus one line per run.
std::string harnessCsv(const HarnessResult& result);

}  // namespace salvo
