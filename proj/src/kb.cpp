#include "patience/kb.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "patience/error.hpp"
#include "patience/text.hpp"

namespace patience::kb {

using nlohmann::json;

KnowledgeBase::KnowledgeBase(std::vector<SymptomEntry> symptoms,
                             std::vector<DiseaseEntry> diseases, KbMeta meta)
    : meta_(std::move(meta)) {
  for (auto& d : diseases) {
    if (d.id.empty()) throw KbError("disease with empty id");
    if (d.context.empty()) throw KbError("disease '" + d.id + "' has empty context");
    auto id = d.id;
    if (!diseases_.emplace(id, std::move(d)).second) {
      throw KbError("duplicate disease id '" + id + "'");
    }
  }
  for (auto& s : symptoms) {
    if (s.id.empty()) throw KbError("symptom with empty id");
    if (s.context_gamma.empty() || s.context_upsilon.empty()) {
      throw KbError("symptom '" + s.id + "' has empty context_gamma or context_upsilon");
    }
    for (const auto& d : s.linked_diseases) {
      if (!diseases_.contains(d)) {
        throw KbError("symptom '" + s.id + "' links unknown disease '" + d + "'");
      }
    }
    auto id = s.id;
    if (!symptoms_.emplace(id, std::move(s)).second) {
      throw KbError("duplicate symptom id '" + id + "'");
    }
  }
}

const SymptomEntry* KnowledgeBase::find_symptom(std::string_view id) const {
  auto it = symptoms_.find(std::string(id));
  return it == symptoms_.end() ? nullptr : &it->second;
}

const DiseaseEntry* KnowledgeBase::find_disease(std::string_view id) const {
  auto it = diseases_.find(std::string(id));
  return it == diseases_.end() ? nullptr : &it->second;
}

const DiseaseEntry& KnowledgeBase::disease(std::string_view id) const {
  const auto* d = find_disease(id);
  if (!d) throw KbError("unknown disease '" + std::string(id) + "'");
  return *d;
}

namespace {

std::string required_string(const json& rec, const char* key, const std::string& where) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) {
    throw KbError(where + ": missing or non-string field '" + key + "'");
  }
  return it->get<std::string>();
}

std::string optional_string(const json& rec, const char* key, const std::string& where) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) return {};
  if (!it->is_string()) throw KbError(where + ": field '" + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

KnowledgeBase ingest_text(std::string_view content, std::string_view source_name) {
  std::vector<SymptomEntry> symptoms;
  std::vector<DiseaseEntry> diseases;
  KbMeta meta{std::string(source_name), ""};
  std::set<std::string> symptom_ids, disease_ids;

  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const std::string where = std::string(source_name) + ":" + std::to_string(lineno);

    json rec;
    try {
      rec = json::parse(t);
    } catch (const json::parse_error& e) {
      throw KbError(where + ": malformed record: " + e.what());
    }
    if (!rec.is_object()) throw KbError(where + ": record is not an object");

    auto kind = required_string(rec, "kind", where);
    if (kind == "symptom") {
      SymptomEntry s;
      s.id = required_string(rec, "id", where);
      s.name_prof = required_string(rec, "name_prof", where);
      s.name_cons = required_string(rec, "name_cons", where);
      s.description = required_string(rec, "description", where);
      s.context_gamma = required_string(rec, "context_gamma", where);
      s.context_upsilon = required_string(rec, "context_upsilon", where);
      auto links = rec.find("linked_diseases");
      if (links == rec.end() || !links->is_array()) {
        throw KbError(where + ": missing array field 'linked_diseases'");
      }
      for (const auto& l : *links) {
        if (!l.is_string()) throw KbError(where + ": linked_diseases must hold strings");
        s.linked_diseases.push_back(l.get<std::string>());
      }
      if (s.id.empty()) throw KbError(where + ": empty symptom id");
      if (!symptom_ids.insert(s.id).second) {
        throw KbError(where + ": duplicate symptom id '" + s.id + "'");
      }
      symptoms.push_back(std::move(s));
    } else if (kind == "disease") {
      DiseaseEntry d;
      d.id = required_string(rec, "id", where);
      d.name = required_string(rec, "name", where);
      d.context = required_string(rec, "context", where);
      d.specialty = optional_string(rec, "specialty", where);
      if (d.id.empty()) throw KbError(where + ": empty disease id");
      if (!disease_ids.insert(d.id).second) {
        throw KbError(where + ": duplicate disease id '" + d.id + "'");
      }
      diseases.push_back(std::move(d));
    } else if (kind == "meta") {
      meta.source = optional_string(rec, "source", where);
      meta.version = optional_string(rec, "version", where);
    } else {
      throw KbError(where + ": unknown record kind '" + kind + "'");
    }
  }

  if (symptoms.empty() && diseases.empty()) {
    throw KbError(std::string(source_name) + ": no records");
  }
  for (const auto& s : symptoms) {
    for (const auto& d : s.linked_diseases) {
      if (!disease_ids.contains(d)) {
        throw KbError(std::string(source_name) + ": dangling reference: symptom '" + s.id +
                      "' links disease '" + d + "' which is not defined");
      }
    }
  }
  return KnowledgeBase(std::move(symptoms), std::move(diseases), std::move(meta));
}

KnowledgeBase ingest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw KbError("cannot open knowledge base file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ingest_text(ss.str(), path.string());
}

// ---- retrieval -------------------------------------------------------------

namespace {

std::array<std::string, 2> register_documents(const SymptomEntry& s) {
  return {s.name_prof + " " + s.description, s.name_cons + " " + s.description};
}

}  // namespace

std::vector<double> Bm25Scorer::score(const KnowledgeBase& kb, std::string_view query) const {
  struct Doc {
    std::unordered_map<std::string, int> tf;
    double length = 0;
  };
  std::vector<Doc> docs;
  docs.reserve(kb.symptoms().size() * 2);
  for (const auto& [id, s] : kb.symptoms()) {
    for (const auto& doc_text : register_documents(s)) {
      Doc d;
      for (auto& tok : text::tokenize(doc_text)) ++d.tf[tok];
      for (const auto& [tok, n] : d.tf) d.length += n;
      docs.push_back(std::move(d));
    }
  }
  const double n_docs = static_cast<double>(docs.size());
  double avg_len = 0;
  for (const auto& d : docs) avg_len += d.length;
  avg_len = docs.empty() ? 0 : avg_len / n_docs;

  std::unordered_map<std::string, double> idf;
  auto idf_of = [&](const std::string& tok) {
    auto it = idf.find(tok);
    if (it != idf.end()) return it->second;
    double df = 0;
    for (const auto& d : docs) df += d.tf.contains(tok) ? 1 : 0;
    double v = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
    idf.emplace(tok, v);
    return v;
  };

  // Repeated query tokens contribute repeatedly, so extending a query never
  // lowers any document's score.
  const auto q = text::tokenize(query);
  std::vector<double> doc_scores(docs.size(), 0.0);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto& d = docs[i];
    double sum = 0;
    for (const auto& tok : q) {
      auto it = d.tf.find(tok);
      if (it == d.tf.end()) continue;
      double f = it->second;
      double norm = avg_len > 0 ? d.length / avg_len : 1.0;
      sum += idf_of(tok) * f * (k1_ + 1) / (f + k1_ * (1 - b_ + b_ * norm));
    }
    doc_scores[i] = sum;
  }
  std::vector<double> out;
  out.reserve(kb.symptoms().size());
  for (std::size_t i = 0; i + 1 < doc_scores.size(); i += 2) {
    out.push_back(std::max(doc_scores[i], doc_scores[i + 1]));
  }
  return out;
}

std::vector<double> EmbeddingScorer::score(const KnowledgeBase& kb,
                                           std::string_view query) const {
  auto cosine = [](const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size()) throw KbError("embedder returned vectors of different sizes");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += double(a[i]) * b[i];
      na += double(a[i]) * a[i];
      nb += double(b[i]) * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return std::max(0.0, dot / std::sqrt(na * nb));
  };
  const auto qv = embed_(query);
  std::vector<double> out;
  for (const auto& [id, s] : kb.symptoms()) {
    double best = 0;
    for (const auto& doc : register_documents(s)) best = std::max(best, cosine(qv, embed_(doc)));
    out.push_back(best);
  }
  return out;
}

std::vector<ScoredSymptom> map_to_symptoms(const KnowledgeBase& kb,
                                           std::string_view dialogue_text, std::size_t top_n,
                                           const SymptomScorer& scorer) {
  if (top_n == 0) throw KbError("top_n must be at least 1");
  if (text::trim(dialogue_text).empty()) throw KbError("empty dialogue text");
  if (kb.symptoms().empty()) throw KbError("knowledge base has no symptoms");

  const auto scores = scorer.score(kb, dialogue_text);
  std::vector<ScoredSymptom> ranked;
  ranked.reserve(scores.size());
  std::size_t i = 0;
  for (const auto& [id, s] : kb.symptoms()) ranked.push_back({&s, scores.at(i++)});
  // Stable sort over id-ordered input gives the id tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const ScoredSymptom& a, const ScoredSymptom& b) { return a.score > b.score; });
  if (ranked.size() > top_n) ranked.resize(top_n);
  return ranked;
}

std::string passage_header(const SymptomEntry& s) {
  return "[symptom: " + s.id + " | " + s.name_prof + " / " + s.name_cons + "]\n";
}

GatheredContext gather_context(const KnowledgeBase& kb,
                               const std::vector<const SymptomEntry*>& symptoms) {
  if (symptoms.empty()) throw KbError("gather_context needs at least one symptom");
  GatheredContext out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < symptoms.size(); ++i) {
    const auto* s = symptoms[i];
    if (!s || kb.find_symptom(s->id) != s) {
      throw KbError("gather_context: symptom is not from this knowledge base");
    }
    if (i) {
      out.gamma_text += kPassageSeparator;
      out.upsilon_text += kPassageSeparator;
    }
    const auto header = passage_header(*s);
    out.gamma_text += header + s->context_gamma;
    out.upsilon_text += header + s->context_upsilon;
    for (const auto& d : s->linked_diseases) {
      if (seen.insert(d).second) out.candidate_disease_ids.push_back(d);
    }
  }
  return out;
}

}  // namespace patience::kb
