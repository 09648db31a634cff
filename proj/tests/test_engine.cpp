#include <gtest/gtest.h>

#include <atomic>
#include <cmath>

#include "patience/engine.hpp"
#include "patience/error.hpp"
#include "patience/prompts.hpp"
#include "patience/sim.hpp"
#include "support.hpp"

namespace patience::engine {
namespace {

using backend::Dialogue;

// Forwards to another backend; can be told to fail a given operation.
class FlakyBackend : public backend::Backend {
 public:
  explicit FlakyBackend(const backend::Backend& inner) : inner_(inner) {}
  std::string name() const override { return "flaky"; }

  std::atomic<bool> fail_distribution_after_opening{false};
  std::atomic<bool> fail_questions{false};

  backend::Elicited<std::string> extract_symptom_text(const Dialogue& d) const override {
    return inner_.extract_symptom_text(d);
  }
  backend::Elicited<backend::WeightVector> elicit_distribution(
      std::string_view g, const Dialogue& d, const std::vector<const kb::DiseaseEntry*>& c) const override {
    if (fail_distribution_after_opening && d.size() > 1) throw BackendUnavailable("down");
    return inner_.elicit_distribution(g, d, c);
  }
  backend::Elicited<std::vector<prob::CandidateQuestion>> generate_questions(
      std::string_view u, const Dialogue& d, const prob::DiseaseDistribution& p, std::size_t k) const override {
    if (fail_questions) throw EmptyPool("nothing left");
    return inner_.generate_questions(u, d, p, k);
  }
  backend::Elicited<std::vector<std::string>> simulate_responses(const prob::CandidateQuestion& q,
                                                                 const Dialogue& d, std::size_t l) const override {
    return inner_.simulate_responses(q, d, l);
  }
  backend::Elicited<std::vector<double>> elicit_likelihoods(const prob::CandidateQuestion& q,
                                                            std::span<const std::string> r,
                                                            const kb::DiseaseEntry& e,
                                                            const Dialogue& d) const override {
    return inner_.elicit_likelihoods(q, r, e, d);
  }
  backend::Elicited<std::string> humanize_question(const prob::CandidateQuestion& q,
                                                   const Dialogue& d) const override {
    return inner_.humanize_question(q, d);
  }
  backend::Elicited<std::string> respond_as_patient(const PatientProfile& p, std::string_view q,
                                                    const Dialogue& d) const override {
    return inner_.respond_as_patient(p, q, d);
  }

 private:
  const backend::Backend& inner_;
};

PatientProfile load_case(const std::string& id) {
  return sim::parse_case(test::read_file(test::data_dir() / "cases" / (id + ".json")), id + ".json");
}

SessionConfig base_config() {
  SessionConfig c;
  c.backend = test::scripted_config();
  return c;
}

// Plays a case to the end with the scripted patient.
DialogueState play(const Engine& engine, const PatientProfile& p) {
  const auto& be = test::sample_backend();
  auto st = engine.start_session(be.respond_as_patient(p, prompts::opening_question(), {}).value);
  while (st.status == Status::active) {
    auto answer = be.respond_as_patient(p, st.pending_question, st.dialogue()).value;
    st = engine.step(st, answer).state;
  }
  return st;
}

TEST(Engine, FreshSessionHasOneDistribution) {
  Engine engine(test::sample_kb(), test::sample_backend(), base_config());
  auto st = engine.start_session("I keep feeling dizzy.");
  EXPECT_EQ(st.status, Status::active);
  EXPECT_EQ(st.iteration, 0);
  EXPECT_TRUE(st.turns.empty());
  ASSERT_EQ(st.distribution_history.size(), 1u);
  ASSERT_EQ(st.entropy_trace.size(), 1u);
  ASSERT_EQ(st.selection_reports.size(), 1u);
  EXPECT_FALSE(st.pending_question.empty());
  EXPECT_EQ(st.opening_question, prompts::opening_question());

  const auto& d = st.current();
  EXPECT_EQ(d.probability("orthostatic_hypotension"), 0.22);
  EXPECT_EQ(d.probability("cervical_spondylosis"), 0.19);
  EXPECT_EQ(d.probability("vertigo"), 0.17);
  EXPECT_EQ(d.other_mass(), 0.42);
  EXPECT_EQ(st.mapped_symptoms, (std::vector<std::string>{"dizziness"}));
  EXPECT_EQ(st.selection_reports[0].candidates.size(), 5u);
}

TEST(Engine, FullSessionCounts) {
  Engine engine(test::sample_kb(), test::sample_backend(), base_config());
  auto st = play(engine, load_case("rhin-01"));
  EXPECT_EQ(st.status, Status::diagnosed);
  EXPECT_EQ(st.iteration, 6);
  EXPECT_EQ(st.turns.size(), 6u);
  EXPECT_EQ(st.distribution_history.size(), 7u);
  EXPECT_EQ(st.entropy_trace.size(), 7u);
  EXPECT_EQ(st.selection_reports.size(), 6u);
  EXPECT_TRUE(st.pending_question.empty());
  ASSERT_TRUE(st.diagnosis);
  EXPECT_EQ(st.diagnosis->disease_id, "allergic_rhinitis");
  EXPECT_EQ(st.diagnosis->stop_reason, StopReason::max_turns);
  EXPECT_EQ(st.diagnosis->turns_used, 6);
  for (std::size_t t = 1; t < st.entropy_trace.size(); ++t) {
    EXPECT_LE(st.entropy_trace[t], st.entropy_trace[t - 1] + 1e-12) << t;
  }
  EXPECT_NO_THROW(st.check_invariants());
}

TEST(Engine, StopRulesInOrder) {
  auto cfg = base_config();
  cfg.max_turns = 1;
  cfg.stop_entropy = 10.0;
  Engine a(test::sample_kb(), test::sample_backend(), cfg);
  EXPECT_EQ(play(a, load_case("dizz-01")).diagnosis->stop_reason, StopReason::max_turns);

  cfg.max_turns = 6;
  Engine b(test::sample_kb(), test::sample_backend(), cfg);
  EXPECT_EQ(play(b, load_case("dizz-01")).diagnosis->stop_reason, StopReason::entropy);

  cfg.stop_entropy = 0.0;
  cfg.stop_top1 = 0.01;
  Engine c(test::sample_kb(), test::sample_backend(), cfg);
  auto st = play(c, load_case("dizz-01"));
  EXPECT_EQ(st.diagnosis->stop_reason, StopReason::top1);
  EXPECT_EQ(st.iteration, 1);
}

TEST(Engine, TwoUninformativeTurnsStop) {
  // Lenient replay of an unknown opening: default questions, flat likelihoods.
  backend::ScriptedBackend lenient(backend::ScriptBundle({}), test::scripted_config(false));
  Engine engine(test::sample_kb(), lenient, base_config());
  auto st = engine.start_session("My foot itches.");
  EXPECT_TRUE(st.mappings[0].fallback);
  EXPECT_EQ(st.current().size(), test::sample_kb().diseases().size());
  EXPECT_TRUE(st.selection_reports[0].uninformative);
  st = engine.step(st, "Since Friday.").state;
  EXPECT_EQ(st.status, Status::active);
  st = engine.step(st, "Nothing helps.").state;
  EXPECT_EQ(st.status, Status::diagnosed);
  EXPECT_EQ(st.diagnosis->stop_reason, StopReason::uninformative);
}

TEST(Engine, EmptyPoolEndsSessionAsExhausted) {
  FlakyBackend flaky(test::sample_backend());
  Engine engine(test::sample_kb(), flaky, base_config());
  auto st = engine.start_session("I keep feeling dizzy.");
  flaky.fail_questions = true;
  auto out = engine.step(st, "Yes");
  EXPECT_EQ(out.state.status, Status::exhausted);
  ASSERT_TRUE(out.diagnosis);
  EXPECT_EQ(out.diagnosis->stop_reason, StopReason::pool_exhausted);
  EXPECT_FALSE(out.next_question);

  auto fresh = engine.start_session("I keep feeling dizzy.");
  EXPECT_EQ(fresh.status, Status::exhausted);
  EXPECT_EQ(fresh.iteration, 0);
}

TEST(Engine, FailedStepLeavesStateUntouched) {
  FlakyBackend flaky(test::sample_backend());
  Engine engine(test::sample_kb(), flaky, base_config());
  const auto st = engine.start_session("I keep feeling dizzy.");
  const auto copy = st;
  flaky.fail_distribution_after_opening = true;
  EXPECT_THROW(engine.step(st, "Yes"), BackendUnavailable);
  EXPECT_EQ(st, copy);
  flaky.fail_distribution_after_opening = false;
  EXPECT_EQ(engine.step(st, "Yes").state.iteration, 1);
}

TEST(Engine, RejectsBadCalls) {
  Engine engine(test::sample_kb(), test::sample_backend(), base_config());
  EXPECT_THROW(engine.start_session("   "), EngineError);
  auto st = engine.start_session("I keep feeling dizzy.");
  EXPECT_THROW(engine.step(st, " "), EngineError);
  auto done = engine.conclude(st, StopReason::oneshot);
  EXPECT_EQ(done.status, Status::diagnosed);
  EXPECT_EQ(done.diagnosis->disease_id, "orthostatic_hypotension");
  EXPECT_THROW(engine.step(done, "Yes"), EngineError);
  EXPECT_THROW(engine.conclude(done, StopReason::oneshot), EngineError);

  auto bad = base_config();
  bad.l_max = 6;
  EXPECT_THROW(Engine(test::sample_kb(), test::sample_backend(), bad), ConfigError);
}

TEST(Engine, InvariantCheckCatchesTampering) {
  Engine engine(test::sample_kb(), test::sample_backend(), base_config());
  auto st = engine.start_session("I keep feeling dizzy.");
  auto t = st;
  t.entropy_trace[0] += 0.1;
  EXPECT_THROW(t.check_invariants(), EngineError);
  t = st;
  t.pending_question.clear();
  EXPECT_THROW(t.check_invariants(), EngineError);
  t = st;
  t.iteration = 1;
  EXPECT_THROW(t.check_invariants(), EngineError);
}

TEST(Engine, PoliciesRecordTheArgminAndPickDifferently) {
  auto cfg = base_config();
  cfg.policy = Policy::first;
  Engine first(test::sample_kb(), test::sample_backend(), cfg);
  auto st = first.start_session("I keep feeling dizzy.");
  const auto& rep = st.selection_reports[0];
  EXPECT_EQ(rep.selected_id, 0);
  EXPECT_EQ(rep.selected_text, "Can you describe what you feel when you experience dizziness?");
  // The app policy would have asked the standing question.
  EXPECT_EQ(rep.candidates[rep.argmin_id].table.question.text,
            "Does the dizziness come on when you stand up quickly?");

  cfg.policy = Policy::random;
  cfg.seed = 7;
  Engine random(test::sample_kb(), test::sample_backend(), cfg);
  auto r1 = random.start_session("I keep feeling dizzy.");
  auto r2 = random.start_session("I keep feeling dizzy.");
  EXPECT_EQ(r1, r2);
  EXPECT_EQ(r1.selection_reports[0].policy, Policy::random);
}

TEST(Engine, RandomPolicyDependsOnSeed) {
  auto cfg = base_config();
  cfg.policy = Policy::random;
  std::set<int> picks;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    cfg.seed = seed;
    Engine e(test::sample_kb(), test::sample_backend(), cfg);
    picks.insert(e.start_session("I keep feeling dizzy.").selection_reports[0].selected_id);
  }
  EXPECT_GT(picks.size(), 1u);
}

TEST(Engine, ParallelLookaheadMatchesSequential) {
  auto cfg = base_config();
  Engine seq(test::sample_kb(), test::sample_backend(), cfg);
  cfg.parallelism = 4;
  Engine par(test::sample_kb(), test::sample_backend(), cfg);
  for (const auto* id : {"rhin-01", "dizz-01", "gast-02"}) {
    auto p = load_case(id);
    EXPECT_EQ(play(seq, p), play(par, p)) << id;
  }
}

TEST(Engine, MappingOnceWhenRemapDisabled) {
  auto cfg = base_config();
  Engine every(test::sample_kb(), test::sample_backend(), cfg);
  cfg.remap_every_turn = false;
  Engine once(test::sample_kb(), test::sample_backend(), cfg);
  auto p = load_case("dizz-01");
  auto a = play(every, p);
  auto b = play(once, p);
  EXPECT_EQ(a.mappings.size(), a.distribution_history.size());
  EXPECT_EQ(b.mappings.size(), 1u);
  EXPECT_EQ(b.mapped_symptoms, a.mappings[0].symptoms.empty()
                                   ? std::vector<std::string>{}
                                   : std::vector<std::string>{a.mappings[0].symptoms[0].first});
}

TEST(Engine, EigModeRuns) {
  auto cfg = base_config();
  cfg.selection_mode = prob::SelectionMode::eig;
  Engine engine(test::sample_kb(), test::sample_backend(), cfg);
  auto st = play(engine, load_case("dizz-01"));
  EXPECT_EQ(st.selection_reports[0].mode, prob::SelectionMode::eig);
  EXPECT_EQ(st.diagnosis->disease_id, "orthostatic_hypotension");
}

TEST(Engine, EnumStrings) {
  EXPECT_EQ(policy_from_string(to_string(Policy::oneshot)), Policy::oneshot);
  EXPECT_EQ(status_from_string("exhausted"), Status::exhausted);
  EXPECT_EQ(stop_reason_from_string("pool_exhausted"), StopReason::pool_exhausted);
  EXPECT_THROW(policy_from_string("greedy"), ConfigError);
}

}  // namespace
}  // namespace patience::engine
