#include <gtest/gtest.h>

#include "patience/error.hpp"
#include "patience/sim.hpp"
#include "support.hpp"

namespace patience::sim {
namespace {

engine::SessionConfig config() {
  engine::SessionConfig c;
  c.backend = test::scripted_config();
  c.seed = 7;
  return c;
}

const std::vector<PatientProfile>& sample_cases() {
  static const auto cases = load_cases(test::data_dir() / "cases", test::sample_kb());
  return cases;
}

TEST(Cases, ParsesAllFields) {
  auto p = parse_case(R"({
    "case_id": "c1", "ground_truth": "vertigo", "specialty": "neurology", "age": 61,
    "intention": "reassurance", "personality": "terse",
    "symptoms": ["room spins"],
    "facts": {"onset": "Two days ago", "position": {"answer": "When I roll over", "keywords": ["roll", "bed"]}}
  })", "c1.json");
  EXPECT_EQ(p.case_id, "c1");
  EXPECT_EQ(p.age, 61);
  EXPECT_EQ(p.symptoms, (std::vector<std::string>{"room spins"}));
  EXPECT_TRUE(p.opening.empty());
  ASSERT_EQ(p.facts.size(), 2u);
  // File order is kept.
  EXPECT_EQ(p.facts[0].topic, "onset");
  EXPECT_TRUE(p.facts[0].keywords.empty());
  EXPECT_EQ(p.facts[1].keywords, (std::vector<std::string>{"roll", "bed"}));
}

TEST(Cases, RejectsMalformedCases) {
  EXPECT_THROW(parse_case("{", "x.json"), CaseError);
  EXPECT_THROW(parse_case("[]", "x.json"), CaseError);
  EXPECT_THROW(parse_case(R"({"ground_truth": "v", "opening": "hi"})", "x.json"), CaseError);
  EXPECT_THROW(parse_case(R"({"case_id": "c", "opening": "hi"})", "x.json"), CaseError);
  EXPECT_THROW(parse_case(R"({"case_id": "c", "ground_truth": "v"})", "x.json"), CaseError);
  EXPECT_THROW(parse_case(R"({"case_id": "c", "ground_truth": "v", "opening": "hi", "age": -1})", "x.json"),
               CaseError);
  EXPECT_THROW(parse_case(R"({"case_id": "c", "ground_truth": "v", "opening": "hi", "facts": [1]})", "x.json"),
               CaseError);
  try {
    parse_case(R"({"case_id": 3})", "bad.json");
    FAIL();
  } catch (const CaseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json"), std::string::npos);
  }
}

TEST(Cases, LoadsSampleDirectoryInNameOrder) {
  const auto& cases = sample_cases();
  ASSERT_EQ(cases.size(), 12u);
  EXPECT_EQ(cases.front().case_id, "dizz-01");
  EXPECT_EQ(cases.back().case_id, "rhin-04");
  auto single = load_cases(test::data_dir() / "cases" / "gast-02.json", test::sample_kb());
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].case_id, "gast-02");
}

TEST(Cases, LoadErrors) {
  test::TempDir dir;
  EXPECT_THROW(load_cases(dir / "missing", test::sample_kb()), CaseError);
  EXPECT_THROW(load_cases(dir.path(), test::sample_kb()), CaseError);

  test::write_file(dir / "a.json", R"({"case_id": "x", "ground_truth": "lupus", "opening": "hi"})");
  try {
    load_cases(dir.path(), test::sample_kb());
    FAIL();
  } catch (const CaseError& e) {
    EXPECT_NE(std::string(e.what()).find("not a disease in the knowledge base"), std::string::npos);
  }

  test::write_file(dir / "a.json", R"({"case_id": "x", "ground_truth": "vertigo", "opening": "hi"})");
  test::write_file(dir / "b.json", R"({"case_id": "x", "ground_truth": "vertigo", "opening": "hey"})");
  try {
    load_cases(dir.path(), test::sample_kb());
    FAIL();
  } catch (const CaseError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("a.json"), std::string::npos);
    EXPECT_NE(msg.find("b.json"), std::string::npos);
  }
}

TEST(RunCase, SampleCasesAreDiagnosedCorrectly) {
  for (const auto& p : sample_cases()) {
    auto o = run_case(p, test::sample_kb(), test::sample_backend(), config());
    EXPECT_FALSE(o.failed) << p.case_id << ": " << o.error;
    EXPECT_TRUE(o.hit) << p.case_id << " -> " << o.diagnosis_id;
    EXPECT_EQ(o.entropy_trace.size(), static_cast<std::size_t>(o.turns) + 1);
    EXPECT_EQ(o.distributions.size(), o.entropy_trace.size());
  }
}

TEST(RunCase, ContradictoryProfileMisses) {
  // dizz-01's patient, labelled with a different ground truth.
  auto p = sample_cases().front();
  ASSERT_EQ(p.case_id, "dizz-01");
  p.ground_truth = "vertigo";
  auto o = run_case(p, test::sample_kb(), test::sample_backend(), config());
  EXPECT_FALSE(o.failed);
  EXPECT_FALSE(o.hit);
  EXPECT_EQ(o.diagnosis_id, "orthostatic_hypotension");
}

TEST(RunCase, ProfileOutsideTheKnowledgeBaseMisses) {
  auto p = parse_case(R"({"case_id": "odd", "ground_truth": "vertigo", "opening": "My elbow itches.",
                          "facts": {"rash": "It is red"}})", "odd.json");
  auto o = run_case(p, test::sample_kb(), test::sample_backend(), config());
  EXPECT_FALSE(o.failed) << o.error;
  EXPECT_FALSE(o.hit);
  EXPECT_FALSE(o.diagnosis_id.empty());
}

TEST(RunCase, SingleTurnLimit) {
  auto cfg = config();
  cfg.max_turns = 1;
  auto o = run_case(sample_cases().back(), test::sample_kb(), test::sample_backend(), cfg);
  EXPECT_EQ(o.turns, 1);
  EXPECT_EQ(o.entropy_trace.size(), 2u);
}

TEST(RunCase, BackendErrorsBecomeFailures) {
  backend::ScriptedBackend strict(backend::ScriptBundle({}), test::scripted_config(true));
  auto o = run_case(sample_cases().front(), test::sample_kb(), strict, config());
  EXPECT_TRUE(o.failed);
  EXPECT_NE(o.error.find("no entry"), std::string::npos);
  EXPECT_TRUE(o.entropy_trace.empty());
}

TEST(RunCase, OneshotPolicyAsksNothing) {
  auto cfg = config();
  cfg.policy = engine::Policy::oneshot;
  auto o = run_case(sample_cases().front(), test::sample_kb(), test::sample_backend(), cfg);
  EXPECT_EQ(o.turns, 0);
  EXPECT_EQ(o.stop_reason, "oneshot");
  EXPECT_EQ(o.policy, "oneshot");
}

TEST(Benchmark, OrderingAndAggregates) {
  auto run = run_benchmark(sample_cases(), test::sample_kb(), test::sample_backend(), config(),
                           {"app", "first"}, 1);
  ASSERT_EQ(run.outcomes.size(), 24u);
  EXPECT_EQ(run.outcomes[0].policy, "app");
  EXPECT_EQ(run.outcomes[0].case_id, "dizz-01");
  EXPECT_EQ(run.outcomes[12].policy, "first");
  EXPECT_EQ(run.seed, 7u);
  ASSERT_EQ(run.aggregates.size(), 2u);

  int horizon = 0;
  for (const auto& o : run.outcomes) horizon = std::max(horizon, o.turns);
  EXPECT_EQ(run.horizon, horizon);

  // Recompute the app aggregate independently.
  double hits = 0, turns = 0, final_sum = 0;
  for (std::size_t i = 0; i < 12; ++i) {
    const auto& o = run.outcomes[i];
    hits += o.hit;
    turns += o.turns;
    final_sum += o.entropy_trace.back();
  }
  const auto& a = run.aggregates[0];
  EXPECT_EQ(a.cases, 12u);
  EXPECT_EQ(a.failures, 0u);
  EXPECT_DOUBLE_EQ(a.hit_rate, hits / 12);
  EXPECT_DOUBLE_EQ(a.mean_turns, turns / 12);
  EXPECT_NEAR(a.final_mean_entropy, final_sum / 12, 1e-12);
  EXPECT_EQ(a.mean_entropy.size(), static_cast<std::size_t>(run.horizon) + 1);
}

TEST(Benchmark, AppDominatesBaselinesOverAFixedHorizon) {
  auto cfg = config();
  cfg.max_turns = 5;
  cfg.stop_entropy = 0.0;
  cfg.stop_top1 = 1.0;
  auto run = run_benchmark(sample_cases(), test::sample_kb(), test::sample_backend(), cfg,
                           {"app", "first", "random", "oneshot"}, 4);
  ASSERT_EQ(run.outcomes.size(), 48u);
  const auto& app = run.aggregates[0];
  EXPECT_LE(app.final_mean_entropy, run.aggregates[1].final_mean_entropy);
  EXPECT_LT(app.final_mean_entropy, run.aggregates[2].final_mean_entropy);
  for (std::size_t i = 36; i < 48; ++i) EXPECT_EQ(run.outcomes[i].turns, 0);
}

TEST(Benchmark, DeterministicAcrossRunsAndWorkerCounts) {
  const std::vector<std::string> policies{"app", "random"};
  auto a = run_benchmark(sample_cases(), test::sample_kb(), test::sample_backend(), config(), policies, 1);
  auto b = run_benchmark(sample_cases(), test::sample_kb(), test::sample_backend(), config(), policies, 1);
  auto c = run_benchmark(sample_cases(), test::sample_kb(), test::sample_backend(), config(), policies, 6);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  EXPECT_EQ(write_run(a), write_run(c));
  EXPECT_EQ(cases_csv(a), cases_csv(c));
}

TEST(Benchmark, InputOrderDoesNotMatter) {
  auto reversed = sample_cases();
  std::reverse(reversed.begin(), reversed.end());
  auto a = run_benchmark(sample_cases(), test::sample_kb(), test::sample_backend(), config(), {"app"}, 2);
  auto b = run_benchmark(reversed, test::sample_kb(), test::sample_backend(), config(), {"app"}, 2);
  EXPECT_EQ(a, b);
}

TEST(Benchmark, RejectsEmptyInputs) {
  EXPECT_THROW(run_benchmark({}, test::sample_kb(), test::sample_backend(), config(), {"app"}), CaseError);
  EXPECT_THROW(run_benchmark(sample_cases(), test::sample_kb(), test::sample_backend(), config(), {}),
               ConfigError);
  EXPECT_THROW(run_benchmark(sample_cases(), test::sample_kb(), test::sample_backend(), config(), {"greedy"}),
               ConfigError);
}

TEST(Benchmark, FailuresAreCountedNotAveraged) {
  std::vector<CaseOutcome> outcomes(3);
  outcomes[0] = {"a", "app", "x", false, "", "x", "max_turns", true, 2, {1.0, 0.5, 0.25}, {}};
  outcomes[1] = {"b", "app", "y", false, "", "x", "top1", false, 1, {0.8, 0.4}, {}};
  outcomes[2] = {"c", "app", "y", true, "boom", "", "", false, 0, {}, {}};
  auto agg = compute_aggregates(outcomes, {"app"}, 2);
  ASSERT_EQ(agg.size(), 1u);
  EXPECT_EQ(agg[0].cases, 2u);
  EXPECT_EQ(agg[0].failures, 1u);
  EXPECT_EQ(agg[0].mean_entropy, (std::vector<double>{0.9, 0.45, 0.325}));
  EXPECT_DOUBLE_EQ(agg[0].hit_rate, 0.5);
  EXPECT_DOUBLE_EQ(agg[0].mean_turns, 1.5);
}

TEST(Benchmark, CarryForward) {
  EXPECT_EQ(carry_forward({1.0, 0.5}, 3), (std::vector<double>{1.0, 0.5, 0.5, 0.5}));
  EXPECT_EQ(carry_forward({1.0, 0.5}, 1), (std::vector<double>{1.0, 0.5}));
  EXPECT_TRUE(carry_forward({}, 3).empty());
}

TEST(Benchmark, RunFileRoundTrip) {
  test::TempDir dir;
  auto run = run_benchmark(sample_cases(), test::sample_kb(), test::sample_backend(), config(), {"app"}, 2);
  test::write_file(dir / "run.json", write_run(run));
  auto back = load_run(dir / "run.json");
  EXPECT_EQ(back, run);
  EXPECT_EQ(write_run(back), write_run(run));
  test::write_file(dir / "bad.json", "{\"format\": \"nope\"}");
  EXPECT_THROW(load_run(dir / "bad.json"), Error);
  EXPECT_THROW(load_run(dir / "missing.json"), Error);
}

TEST(Benchmark, CasesCsv) {
  BenchmarkRun run;
  run.outcomes.push_back({"c,1", "app", "x", true, "bad \"thing\"", "", "", false, 0, {}, {}});
  run.outcomes.push_back({"c2", "app", "x", false, "", "x", "top1", true, 1, {1.0, 0.25}, {}});
  EXPECT_EQ(cases_csv(run),
            "policy,case_id,ground_truth,diagnosis,hit,turns,stop_reason,final_entropy,error\n"
            "app,\"c,1\",x,,0,0,,,\"bad \"\"thing\"\"\"\n"
            "app,c2,x,x,1,1,top1,0.250000,\n");
}

}  // namespace
}  // namespace patience::sim
