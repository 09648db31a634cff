#include "patience/prob.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "patience/error.hpp"
#include "patience/text.hpp"

namespace patience::prob {

namespace {

double xlogx(double p) { return p > 0 ? p * std::log(p) : 0.0; }

void sort_entries(std::vector<DiseaseProb>& e) {
  std::sort(e.begin(), e.end(), [](const DiseaseProb& a, const DiseaseProb& b) {
    if (a.p != b.p) return a.p > b.p;
    return a.id < b.id;
  });
}

}  // namespace

DiseaseDistribution::DiseaseDistribution(std::vector<DiseaseProb> entries, double other_mass,
                                         int iteration)
    : entries_(std::move(entries)), other_mass_(other_mass), iteration_(iteration) {
  if (iteration < 0) throw ProbError("negative iteration");
  if (!(other_mass >= 0 && other_mass <= 1)) throw ProbError("other_mass outside [0,1]");
  std::set<std::string> ids;
  double sum = other_mass;
  for (const auto& e : entries_) {
    if (e.id.empty()) throw ProbError("empty disease id in distribution");
    if (!ids.insert(e.id).second) throw ProbError("duplicate disease id '" + e.id + "'");
    if (!(e.p >= 0 && e.p <= 1)) {
      throw ProbError("probability of '" + e.id + "' outside [0,1]");
    }
    sum += e.p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw ProbError("distribution sums to " + text::fixed(sum, 12) + ", not 1");
  }
  sort_entries(entries_);
}

double DiseaseDistribution::probability(std::string_view id) const {
  for (const auto& e : entries_) {
    if (e.id == id) return e.p;
  }
  return 0.0;
}

bool DiseaseDistribution::contains(std::string_view id) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const DiseaseProb& e) { return e.id == id; });
}

DiseaseDistribution DiseaseDistribution::with_iteration(int t) const {
  auto copy = *this;
  if (t < 0) throw ProbError("negative iteration");
  copy.iteration_ = t;
  return copy;
}

std::string_view to_string(SelectionMode m) {
  return m == SelectionMode::literal ? "literal" : "eig";
}

SelectionMode selection_mode_from_string(std::string_view s) {
  if (s == "literal") return SelectionMode::literal;
  if (s == "eig") return SelectionMode::eig;
  throw ProbError("unknown selection mode '" + std::string(s) + "'");
}

double entropy(const DiseaseDistribution& dist) {
  double h = -xlogx(dist.other_mass());
  for (const auto& e : dist.entries()) h -= xlogx(e.p);
  return h > 0 ? h : 0.0;  // -0.0 from a point mass
}

PreparedTable prepare_table(const DiseaseDistribution& prior, const LookaheadTable& table,
                            const UpdateOptions& opts) {
  const std::size_t L = table.responses.size();
  if (L < kMinResponses || L > opts.l_max) {
    throw ProbError("question " + std::to_string(table.question.id) + " has " +
                    std::to_string(L) + " responses; need between " +
                    std::to_string(kMinResponses) + " and " + std::to_string(opts.l_max));
  }
  PreparedTable out;
  out.rows.reserve(prior.size());
  for (const auto& e : prior.entries()) {
    auto it = table.likelihoods.find(e.id);
    if (it == table.likelihoods.end() || it->second.size() < L) {
      std::size_t l = it == table.likelihoods.end() ? 0 : it->second.size();
      throw ProbError("lookahead table for question " + std::to_string(table.question.id) +
                      " is missing cell (" + e.id + ", \"" + table.responses[l] + "\")");
    }
    if (it->second.size() > L) {
      throw ProbError("likelihood row for '" + e.id + "' has more values than responses");
    }
    std::vector<double> row = it->second;
    for (std::size_t l = 0; l < L; ++l) {
      if (!(row[l] >= 0 && row[l] <= 1)) {
        throw ProbError("likelihood (" + e.id + ", \"" + table.responses[l] +
                        "\") outside [0,1]");
      }
      if (row[l] == 0 && opts.floor > 0) {
        row[l] = opts.floor;
        out.notes.push_back("floored P(\"" + table.responses[l] + "\" | " + e.id + ") from 0 to " +
                            text::fixed(opts.floor, 6));
      }
    }
    if (opts.row_normalize) {
      double s = 0;
      for (double v : row) s += v;
      if (s > 0) {
        for (double& v : row) v /= s;
      }
    }
    out.rows.push_back(std::move(row));
  }

  double mass = 0;
  for (const auto& e : prior.entries()) mass += e.p;
  out.other_row.assign(L, 1.0 / static_cast<double>(L));
  if (mass > 0) {
    for (std::size_t l = 0; l < L; ++l) {
      double acc = 0;
      for (std::size_t i = 0; i < out.rows.size(); ++i) acc += prior.entries()[i].p * out.rows[i][l];
      out.other_row[l] = acc / mass;
    }
  }
  return out;
}

DiseaseDistribution posterior_given_question(const DiseaseDistribution& prior,
                                             const LookaheadTable& table,
                                             const UpdateOptions& opts) {
  const auto prepared = prepare_table(prior, table, opts);
  const auto& entries = prior.entries();

  // Joint probabilities summed over responses, then one global normaliser.
  std::vector<double> marg(entries.size(), 0.0);
  double denom = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    double s = 0;
    for (double v : prepared.rows[i]) s += v * entries[i].p;
    marg[i] = s;
    denom += s;
  }
  double other = 0;
  for (double v : prepared.other_row) other += v * prior.other_mass();
  denom += other;
  if (!(denom > 0)) {
    throw ProbError("uninformative lookahead table for question " +
                    std::to_string(table.question.id) + ": joint probabilities sum to zero");
  }

  std::vector<DiseaseProb> post;
  post.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) post.push_back({entries[i].id, marg[i] / denom});
  return DiseaseDistribution(std::move(post), other / denom, prior.iteration());
}

double expected_entropy(const DiseaseDistribution& prior, const LookaheadTable& table,
                        SelectionMode mode, const UpdateOptions& opts) {
  if (mode == SelectionMode::literal) {
    return entropy(posterior_given_question(prior, table, opts));
  }

  const auto prepared = prepare_table(prior, table, opts);
  const auto& entries = prior.entries();
  const std::size_t L = table.responses.size();
  std::vector<double> per_response(L, 0.0);
  std::vector<double> h_given(L, 0.0);
  double total = 0;
  for (std::size_t l = 0; l < L; ++l) {
    double z = prior.other_mass() * prepared.other_row[l];
    for (std::size_t i = 0; i < entries.size(); ++i) z += entries[i].p * prepared.rows[i][l];
    per_response[l] = z;
    total += z;
    if (z <= 0) continue;
    double h = -xlogx(prior.other_mass() * prepared.other_row[l] / z);
    for (std::size_t i = 0; i < entries.size(); ++i) h -= xlogx(entries[i].p * prepared.rows[i][l] / z);
    h_given[l] = h;
  }
  if (!(total > 0)) {
    throw ProbError("uninformative lookahead table for question " +
                    std::to_string(table.question.id) + ": joint probabilities sum to zero");
  }
  double h = 0;
  for (std::size_t l = 0; l < L; ++l) h += per_response[l] / total * h_given[l];
  return h > 0 ? h : 0.0;
}

SelectionResult select_question(const DiseaseDistribution& prior,
                                std::span<const LookaheadTable> tables, SelectionMode mode,
                                const UpdateOptions& opts) {
  if (tables.empty()) throw ProbError("empty question pool");
  SelectionResult out;
  out.prior_entropy = entropy(prior);
  std::set<int> ids;
  std::size_t best = 0;
  bool all_flat = true;
  for (std::size_t k = 0; k < tables.size(); ++k) {
    const auto& t = tables[k];
    if (!ids.insert(t.question.id).second) {
      throw ProbError("duplicate question id " + std::to_string(t.question.id) + " in pool");
    }
    auto notes = prepare_table(prior, t, opts).notes;
    for (auto& n : notes) out.notes.push_back("q" + std::to_string(t.question.id) + ": " + n);
    double h = expected_entropy(prior, t, mode, opts);
    out.scores.push_back({t.question.id, h});
    if (std::abs(h - out.prior_entropy) > kSumTolerance) all_flat = false;
    const auto& cur = out.scores[best];
    if (k > 0 && (h < cur.expected_entropy ||
                  (h == cur.expected_entropy && t.question.id < cur.question_id))) {
      best = k;
    }
  }
  out.selected = tables[best].question;
  out.uninformative = all_flat;
  return out;
}

NormalizeResult normalize(const std::vector<DiseaseProb>& raw, double other_weight,
                          int iteration) {
  NormalizeResult out;
  std::vector<DiseaseProb> w;
  w.reserve(raw.size());
  double total = 0;
  for (const auto& e : raw) {
    double v = e.p;
    if (!(v >= 0)) {  // negative or NaN
      out.repairs.push_back("clamped weight of '" + e.id + "' from " + text::fixed(v, 6) + " to 0");
      v = 0;
    }
    w.push_back({e.id, v});
    total += v;
  }
  if (!(other_weight >= 0)) {
    out.repairs.push_back("clamped other weight from " + text::fixed(other_weight, 6) + " to 0");
    other_weight = 0;
  }
  total += other_weight;
  if (!(total > 0) || !std::isfinite(total)) {
    throw ProbError("cannot normalize: all weights are zero");
  }
  // Vectors that already sum to 1 pass through bit-for-bit.
  double other = other_weight;
  if (std::abs(total - 1.0) > 1e-12) {
    for (auto& e : w) e.p /= total;
    other /= total;
  }
  out.dist = DiseaseDistribution(std::move(w), other, iteration);
  return out;
}

}  // namespace patience::prob
