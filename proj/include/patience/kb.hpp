#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace patience::kb {

struct SymptomEntry {
  std::string id;
  std::string name_prof;
  std::string name_cons;
  std::string description;
  std::string context_gamma;    // causes, pathophysiology, etiology
  std::string context_upsilon;  // diagnosis, what a doctor does
  std::vector<std::string> linked_diseases;

  bool operator==(const SymptomEntry&) const = default;
};

struct DiseaseEntry {
  std::string id;
  std::string name;
  std::string context;
  std::string specialty;

  bool operator==(const DiseaseEntry&) const = default;
};

struct KbMeta {
  std::string source;
  std::string version;

  bool operator==(const KbMeta&) const = default;
};

// Immutable after construction. Iteration over symptoms()/diseases() is in
// id order.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;

  // Validates ids, non-empty contexts and referential integrity.
  KnowledgeBase(std::vector<SymptomEntry> symptoms, std::vector<DiseaseEntry> diseases,
                KbMeta meta = {});

  const std::map<std::string, SymptomEntry>& symptoms() const { return symptoms_; }
  const std::map<std::string, DiseaseEntry>& diseases() const { return diseases_; }
  const KbMeta& meta() const { return meta_; }

  const SymptomEntry* find_symptom(std::string_view id) const;
  const DiseaseEntry* find_disease(std::string_view id) const;
  const DiseaseEntry& disease(std::string_view id) const;  // throws KbError

  bool operator==(const KnowledgeBase&) const = default;

 private:
  std::map<std::string, SymptomEntry> symptoms_;
  std::map<std::string, DiseaseEntry> diseases_;
  KbMeta meta_;
};

// Reads the line-delimited JSON record format. Errors carry "<path>:<line>".
KnowledgeBase ingest(const std::filesystem::path& path);
KnowledgeBase ingest_text(std::string_view content, std::string_view source_name = "<memory>");

struct ScoredSymptom {
  const SymptomEntry* symptom;
  double score;
};

// Relevance of each register document to a query. Implementations must be
// deterministic and return non-negative scores.
class SymptomScorer {
 public:
  virtual ~SymptomScorer() = default;
  // One score per symptom in kb.symptoms() iteration order.
  virtual std::vector<double> score(const KnowledgeBase& kb, std::string_view query) const = 0;
};

// Okapi BM25 over two documents per symptom (professional name + description,
// consumer name + description). A symptom's score is the max over its two
// documents.
class Bm25Scorer : public SymptomScorer {
 public:
  explicit Bm25Scorer(double k1 = 1.2, double b = 0.75) : k1_(k1), b_(b) {}
  std::vector<double> score(const KnowledgeBase& kb, std::string_view query) const override;

 private:
  double k1_;
  double b_;
};

using Embedder = std::function<std::vector<float>(std::string_view)>;

// Cosine similarity between embedded query and embedded register documents,
// clamped at 0. No vector store: documents are embedded on every call.
class EmbeddingScorer : public SymptomScorer {
 public:
  explicit EmbeddingScorer(Embedder embed) : embed_(std::move(embed)) {}
  std::vector<double> score(const KnowledgeBase& kb, std::string_view query) const override;

 private:
  Embedder embed_;
};

inline constexpr std::size_t kDefaultTopN = 3;

// Ranked by descending score, ties by symptom id. Zero-score symptoms are
// included when top_n allows.
std::vector<ScoredSymptom> map_to_symptoms(const KnowledgeBase& kb, std::string_view dialogue_text,
                                           std::size_t top_n = kDefaultTopN,
                                           const SymptomScorer& scorer = Bm25Scorer{});

struct GatheredContext {
  std::string gamma_text;
  std::string upsilon_text;
  std::vector<std::string> candidate_disease_ids;
};

// Header written before each passage, e.g. "[symptom: rhinorrhea | Runny nose]".
std::string passage_header(const SymptomEntry& s);
inline constexpr std::string_view kPassageSeparator = "\n\n";

GatheredContext gather_context(const KnowledgeBase& kb,
                               const std::vector<const SymptomEntry*>& symptoms);

}  // namespace patience::kb
