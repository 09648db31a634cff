#include <gtest/gtest.h>

#include "patience/error.hpp"
#include "patience/prompts.hpp"
#include "patience/scripted_backend.hpp"
#include "support.hpp"

namespace patience::backend {
namespace {

constexpr const char* kScript = R"({
  "script": "toy",
  "opening": "My chest hurts.",
  "extract": "chest pain",
  "prior": {"angina": 0.5, "reflux": 0.3},
  "prior_order": ["angina", "reflux"],
  "other": 0.2,
  "questions": [
    {"text": "Does it come on with exertion?", "rationale": "exertional",
     "humanized": "Does it start when you walk uphill?",
     "responses": ["Yes", "No"],
     "likelihoods": {"angina": [0.8, 0.2], "reflux": [0.1, 0.9]}},
    {"text": "Is it worse after meals?", "rationale": "postprandial",
     "responses": ["Yes", "No"],
     "likelihoods": {"angina": [0.2, 0.8], "reflux": [0.7, 0.3]}}
  ],
  "evidence": {"yes": {"angina": 2.0, "reflux": 0.5}}
})";

kb::DiseaseEntry disease(const std::string& id) { return {id, id, "ctx " + id, ""}; }

ScriptedBackend toy_backend(bool strict) {
  BackendConfig c;
  c.script_bundle = "unused";
  c.strict = strict;
  return ScriptedBackend(ScriptBundle({ScriptBundle::parse_script(kScript, "toy.json")}), c);
}

const Dialogue kOpening{{"What brings you in?", "  my CHEST hurts "}};

TEST(ScriptBundle, LoadsSampleBundle) {
  const auto& b = test::sample_backend().bundle();
  EXPECT_EQ(b.scripts().size(), 12u);
  ASSERT_NE(b.find_by_opening("i keep feeling DIZZY"), nullptr);
  EXPECT_EQ(b.find_by_opening("i keep feeling dizzy")->name, "dizz-01");
  EXPECT_NE(b.find_by_name("rhin-01"), nullptr);
  EXPECT_EQ(b.find_by_name("nope"), nullptr);
}

TEST(ScriptBundle, RejectsMalformedScripts) {
  EXPECT_THROW(ScriptBundle::parse_script("{", "x.json"), BackendError);
  EXPECT_THROW(ScriptBundle::parse_script("[]", "x.json"), BackendError);
  EXPECT_THROW(ScriptBundle::parse_script(R"({"script": "x"})", "x.json"), BackendError);
  auto bad_row = std::string(kScript);
  bad_row.replace(bad_row.find("[0.8, 0.2]"), 10, "[0.8]");
  EXPECT_THROW(ScriptBundle::parse_script(bad_row, "x.json"), BackendError);
  EXPECT_THROW(ScriptBundle::load("/nonexistent/scripts"), BackendError);
}

TEST(ScriptBundle, DuplicateOpeningNamesBothFiles) {
  auto a = ScriptBundle::parse_script(kScript, "a.json");
  auto b = a;
  b.name = "other";
  b.source = "b.json";
  try {
    ScriptBundle({a, b});
    FAIL();
  } catch (const BackendError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("a.json"), std::string::npos);
    EXPECT_NE(msg.find("b.json"), std::string::npos);
  }
}

TEST(ScriptedBackend, ReplaysScriptByOpening) {
  auto be = toy_backend(true);
  EXPECT_EQ(be.extract_symptom_text(kOpening).value, "chest pain");

  auto a = disease("angina"), r = disease("reflux");
  auto dist = be.elicit_distribution("", kOpening, {&a, &r});
  ASSERT_EQ(dist.value.weights.size(), 2u);
  EXPECT_EQ(dist.value.weights[0].p, 0.5);
  EXPECT_EQ(dist.value.weights[1].p, 0.3);
  EXPECT_EQ(dist.value.other, 0.2);
  EXPECT_NE(dist.raw_text.find("```"), std::string::npos);

  auto qs = be.generate_questions("", kOpening, {}, 5).value;
  ASSERT_EQ(qs.size(), 2u);
  EXPECT_EQ(qs[0].text, "Does it come on with exertion?");
  EXPECT_EQ(qs[1].id, 1);
  EXPECT_EQ(be.generate_questions("", kOpening, {}, 1).value.size(), 1u);

  auto rs = be.simulate_responses(qs[0], kOpening, 5).value;
  EXPECT_EQ(rs, (std::vector<std::string>{"Yes", "No"}));
  auto lk = be.elicit_likelihoods(qs[0], rs, a, kOpening).value;
  EXPECT_EQ(lk, (std::vector<double>{0.8, 0.2}));
  EXPECT_EQ(be.humanize_question(qs[0], kOpening).value, "Does it start when you walk uphill?");
  EXPECT_EQ(be.humanize_question(qs[1], kOpening).value, "Is it worse after meals?");
}

TEST(ScriptedBackend, EvidenceReweightsAndAskedQuestionsLeaveThePool) {
  auto be = toy_backend(true);
  Dialogue d = kOpening;
  d.push_back({"Does it start when you walk uphill?", "Yes."});
  auto a = disease("angina"), r = disease("reflux");
  auto dist = be.elicit_distribution("", d, {&a, &r}).value;
  EXPECT_DOUBLE_EQ(dist.weights[0].p, 1.0);
  EXPECT_DOUBLE_EQ(dist.weights[1].p, 0.15);
  EXPECT_EQ(dist.other, 0.2);

  auto qs = be.generate_questions("", d, {}, 5).value;
  ASSERT_EQ(qs.size(), 1u);
  EXPECT_EQ(qs[0].text, "Is it worse after meals?");
  EXPECT_EQ(qs[0].id, 0);
}

TEST(ScriptedBackend, StrictModeRaisesOnMiss) {
  auto be = toy_backend(true);
  Dialogue unknown{{"What brings you in?", "My foot itches."}};
  auto a = disease("angina");
  EXPECT_THROW(be.extract_symptom_text(unknown), ScriptedMiss);
  EXPECT_THROW(be.elicit_distribution("", unknown, {&a}), ScriptedMiss);
  EXPECT_THROW(be.generate_questions("", unknown, {}, 3), ScriptedMiss);
  prob::CandidateQuestion q{0, "Unscripted?", ""};
  EXPECT_THROW(be.simulate_responses(q, kOpening, 5), ScriptedMiss);
  const std::vector<std::string> rs{"Yes", "No"};
  EXPECT_THROW(be.elicit_likelihoods(q, rs, a, kOpening), ScriptedMiss);
  EXPECT_THROW(be.humanize_question(q, kOpening), ScriptedMiss);
}

TEST(ScriptedBackend, LenientModeUsesDefaults) {
  auto be = toy_backend(false);
  Dialogue unknown{{"What brings you in?", "My foot itches."}, {"Since when?", "Friday"}};
  EXPECT_EQ(be.extract_symptom_text(unknown).value, "My foot itches.; Friday");
  auto a = disease("angina"), r = disease("reflux");
  auto dist = be.elicit_distribution("", unknown, {&a, &r}).value;
  EXPECT_EQ(dist.weights[0].p, 1.0);
  EXPECT_EQ(dist.weights[1].p, 1.0);
  EXPECT_EQ(dist.other, 0.0);
  EXPECT_EQ(be.generate_questions("", unknown, {}, 5).value.size(), 3u);
  prob::CandidateQuestion q{0, "Unscripted?", ""};
  EXPECT_EQ(be.simulate_responses(q, unknown, 5).value, (std::vector<std::string>{"Yes", "No"}));
  const std::vector<std::string> rs{"Yes", "No"};
  EXPECT_EQ(be.elicit_likelihoods(q, rs, a, unknown).value,
            (std::vector<double>{ScriptedBackend::kDefaultLikelihood, ScriptedBackend::kDefaultLikelihood}));
  EXPECT_EQ(be.humanize_question(q, unknown).value, "Unscripted?");
}

TEST(ScriptedBackend, SingleResponseLikelihoodUsesFirstBundleEntry) {
  auto be = toy_backend(true);
  auto a = disease("angina");
  EXPECT_EQ(be.elicit_likelihood("yes", a).value, 0.8);
  EXPECT_THROW(be.elicit_likelihood("perhaps", a), ScriptedMiss);
}

TEST(ScriptedBackend, RespondsAsPatient) {
  auto be = toy_backend(true);
  PatientProfile p;
  p.symptoms = {"chest pain", "Short of breath!"};
  p.facts = {{"exertion", "Yes, when I climb stairs.", {"walk uphill", "exertion"}},
             {"meals", "Not really.", {}}};
  EXPECT_EQ(be.respond_as_patient(p, prompts::opening_question(), {}).value,
            "chest pain. Short of breath!");
  p.opening = "My chest hurts.";
  EXPECT_EQ(be.respond_as_patient(p, prompts::opening_question(), {}).value, "My chest hurts.");
  EXPECT_EQ(be.respond_as_patient(p, "Does it start when you walk uphill?", {}).value,
            "Yes, when I climb stairs.");
  EXPECT_EQ(be.respond_as_patient(p, "Any change after meals?", {}).value, "Not really.");
  // "walk" alone does not satisfy the two-word phrase.
  EXPECT_EQ(be.respond_as_patient(p, "Can you walk far?", {}).value, ScriptedBackend::kUnsureAnswer);
}

TEST(ScriptedBackend, IsDeterministic) {
  const auto& be = test::sample_backend();
  Dialogue d{{prompts::opening_question(), "I keep feeling dizzy."}};
  auto q1 = be.generate_questions("", d, {}, 5);
  auto q2 = be.generate_questions("", d, {}, 5);
  EXPECT_EQ(q1.value, q2.value);
  EXPECT_EQ(q1.raw_text, q2.raw_text);
}

}  // namespace
}  // namespace patience::backend
