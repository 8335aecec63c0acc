#include "salvo/harness.hpp"

#include <future>
#include <sstream>

#include "salvo/rng.hpp"

namespace salvo {

namespace {

std::vector<RunRecord> runDirection(const DatasetSource& ds, const RunConfig& cfg,
                                    const std::string& direction, int runs,
                                    const ClassWeights& weights, int threads) {
  std::vector<RunRecord> records(static_cast<size_t>(runs));
  auto worker = [&](int r) {
    RunConfig runCfg = cfg;
    runCfg.seed = hashSeed(cfg.seed ^ hashSeed(uint64_t(r) + 0x5eedULL));
    RunRecord rec;
    rec.direction = direction;
    rec.run = r;
    rec.seed = runCfg.seed;
    const RunOutput out = runOdometry(ds, runCfg, weights);
    rec.success = out.report.success;
    rec.reason = out.report.failureReason;
    rec.framesProcessed = out.report.framesProcessed;
    rec.keyframes = out.report.keyframes;
    records[size_t(r)] = rec;
  };

  if (threads <= 1) {
    for (int r = 0; r < runs; ++r) worker(r);
    return records;
  }
  std::vector<std::future<void>> futures;
  std::atomic<int> next{0};
  for (int t = 0; t < threads; ++t)
    futures.push_back(std::async(std::launch::async, [&] {
      for (int r = next.fetch_add(1); r < runs; r = next.fetch_add(1)) worker(r);
    }));
  for (auto& f : futures) f.get();
  return records;
}

}  // namespace

HarnessResult successRateHarness(const DatasetSource& forward, const DatasetSource* backward,
                                 const RunConfig& cfg, int runs, const ClassWeights& weights,
                                 int threads) {
  if (runs < 1) throw ConfigError("successRateHarness: runs must be >= 1");
  HarnessResult result;

  auto addDirection = [&](const DatasetSource& ds, const std::string& name) {
    const auto records = runDirection(ds, cfg, name, runs, weights, threads);
    DirectionSummary summary;
    summary.direction = name;
    summary.runs = runs;
    for (const auto& r : records)
      if (r.success) ++summary.successes;
    result.summaries.push_back(summary);
    result.records.insert(result.records.end(), records.begin(), records.end());
  };

  addDirection(forward, "forward");
  if (backward) addDirection(*backward, "backward");
  return result;
}

std::string harnessCsv(const HarnessResult& result) {
  std::ostringstream out;
  out << "direction,runs,successes,fraction\n";
  for (const auto& s : result.summaries)
    out << s.direction << "," << s.runs << "," << s.successes << "," << s.fraction() << "\n";
  out << "\ndirection,run,seed,success,frames,keyframes,reason\n";
  for (const auto& r : result.records)
    out << r.direction << "," << r.run << "," << r.seed << "," << (r.success ? 1 : 0) << ","
        << r.framesProcessed << "," << r.keyframes << ",\"" << r.reason << "\"\n";
  return out.str();
}

}  // namespace salvo
