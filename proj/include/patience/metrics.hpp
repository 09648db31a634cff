#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "patience/prob.hpp"
#include "patience/sim.hpp"

namespace patience::metrics {

struct EntropyCurve {
  std::string policy;
  std::vector<double> mean_entropy;  // iterations 0..T
  std::vector<std::size_t> active;   // cases whose own trace reaches each iteration
  std::size_t cases = 0;
  bool carried_forward = false;      // some case stopped before T
};

// Mean entropy per iteration and policy. Cases that stopped early keep
// their final value; failed cases are left out.
std::vector<EntropyCurve> entropy_curves(const sim::BenchmarkRun& run);

struct ConfidencePoint {
  int iteration = 0;
  double top1 = 0;
  double top2 = 0;
  double gap = 0;
};

ConfidencePoint confidence_of(const prob::DiseaseDistribution& d);

struct ConfidenceEvolution {
  std::string case_id;  // "<policy>:<case id>"
  std::vector<ConfidencePoint> points;
};

std::vector<ConfidenceEvolution> confidence_evolution(const sim::BenchmarkRun& run);

std::string entropy_curves_csv(const std::vector<EntropyCurve>& curves);
std::string confidence_csv(const std::vector<ConfidenceEvolution>& evolutions);
std::string summary_text(const sim::BenchmarkRun& run, const std::vector<EntropyCurve>& curves);

// Writes entropy_curves.csv, confidence.csv and summary.txt into `dir`.
void emit_report(const sim::BenchmarkRun& run, const std::filesystem::path& dir);

}  // namespace patience::metrics
