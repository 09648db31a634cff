#include "patience/metrics.hpp"

#include <fstream>

#include "patience/error.hpp"
#include "patience/text.hpp"

namespace patience::metrics {

std::vector<EntropyCurve> entropy_curves(const sim::BenchmarkRun& run) {
  const auto len = static_cast<std::size_t>(run.horizon) + 1;
  std::vector<EntropyCurve> out;
  for (const auto& policy : run.policies) {
    EntropyCurve c;
    c.policy = policy;
    c.mean_entropy.assign(len, 0.0);
    c.active.assign(len, 0);
    for (const auto& o : run.outcomes) {
      if (o.policy != policy || o.failed || o.entropy_trace.empty()) continue;
      ++c.cases;
      if (o.entropy_trace.size() < len) c.carried_forward = true;
      for (std::size_t t = 0; t < len; ++t) {
        if (t < o.entropy_trace.size()) {
          c.mean_entropy[t] += o.entropy_trace[t];
          ++c.active[t];
        } else {
          c.mean_entropy[t] += o.entropy_trace.back();
        }
      }
    }
    if (c.cases > 0) {
      for (double& v : c.mean_entropy) v /= static_cast<double>(c.cases);
    }
    out.push_back(std::move(c));
  }
  return out;
}

ConfidencePoint confidence_of(const prob::DiseaseDistribution& d) {
  ConfidencePoint p;
  p.iteration = d.iteration();
  const auto& e = d.entries();
  if (!e.empty()) p.top1 = e[0].p;
  if (e.size() > 1) p.top2 = e[1].p;
  p.gap = p.top1 - p.top2;
  return p;
}

std::vector<ConfidenceEvolution> confidence_evolution(const sim::BenchmarkRun& run) {
  std::vector<ConfidenceEvolution> out;
  for (const auto& o : run.outcomes) {
    if (o.failed || o.distributions.empty()) continue;
    ConfidenceEvolution ev;
    ev.case_id = o.policy + ":" + o.case_id;
    for (const auto& d : o.distributions) ev.points.push_back(confidence_of(d));
    out.push_back(std::move(ev));
  }
  return out;
}

std::string entropy_curves_csv(const std::vector<EntropyCurve>& curves) {
  std::string out = "policy,iteration,mean_entropy,n,active,carried_forward\n";
  for (const auto& c : curves) {
    if (c.cases == 0) continue;
    for (std::size_t t = 0; t < c.mean_entropy.size(); ++t) {
      out += c.policy + "," + std::to_string(t) + "," + text::fixed(c.mean_entropy[t]) + "," +
             std::to_string(c.cases) + "," + std::to_string(c.active[t]) + "," +
             (c.active[t] < c.cases ? "1" : "0") + "\n";
    }
  }
  return out;
}

std::string confidence_csv(const std::vector<ConfidenceEvolution>& evolutions) {
  std::string out = "case,iteration,top1,top2,gap\n";
  for (const auto& ev : evolutions) {
    for (const auto& p : ev.points) {
      out += ev.case_id + "," + std::to_string(p.iteration) + "," + text::fixed(p.top1) + "," +
             text::fixed(p.top2) + "," + text::fixed(p.gap) + "\n";
    }
  }
  return out;
}

std::string summary_text(const sim::BenchmarkRun& run, const std::vector<EntropyCurve>& curves) {
  bool any = false;
  for (const auto& c : curves) any = any || c.cases > 0;
  if (!any) return "no data\n";

  std::string out = "seed " + std::to_string(run.seed) + ", " + std::to_string(run.cases.size()) +
                    " cases, horizon " + std::to_string(run.horizon) + "\n\n";
  out += "policy    cases  failed  hit_rate  mean_turns  H[0]      H[T]\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    std::size_t failed = 0, hits = 0;
    double turns = 0;
    for (const auto& o : run.outcomes) {
      if (o.policy != c.policy) continue;
      if (o.failed) {
        ++failed;
        continue;
      }
      hits += o.hit ? 1 : 0;
      turns += o.turns;
    }
    std::string line = c.policy;
    line.resize(10, ' ');
    auto col = [&line](const std::string& s, std::size_t width) {
      line += s;
      line.resize(line.size() + (s.size() < width ? width - s.size() : 1), ' ');
    };
    col(std::to_string(c.cases), 7);
    col(std::to_string(failed), 8);
    if (c.cases == 0) {
      line += "no data";
    } else {
      const double n = static_cast<double>(c.cases);
      col(text::fixed(static_cast<double>(hits) / n), 10);
      col(text::fixed(turns / n), 12);
      col(text::fixed(c.mean_entropy.front()), 10);
      line += text::fixed(c.mean_entropy.back());
      if (c.carried_forward) line += "  (early stops carried forward)";
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace

void emit_report(const sim::BenchmarkRun& run, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create report directory '" + dir.string() + "': " + ec.message());
  auto curves = entropy_curves(run);
  write_file(dir / "entropy_curves.csv", entropy_curves_csv(curves));
  write_file(dir / "confidence.csv", confidence_csv(confidence_evolution(run)));
  write_file(dir / "summary.txt", summary_text(run, curves));
}

}  // namespace patience::metrics
