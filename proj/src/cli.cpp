#include "patience/cli.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "patience/backend.hpp"
#include "patience/config.hpp"
#include "patience/engine.hpp"
#include "patience/error.hpp"
#include "patience/kb.hpp"
#include "patience/metrics.hpp"
#include "patience/prompts.hpp"
#include "patience/service.hpp"
#include "patience/sim.hpp"
#include "patience/text.hpp"
#include "patience/transcript.hpp"

namespace patience::cli {

namespace {

constexpr const char* kDefaultKb = "data/sample_kb.jsonl";
constexpr const char* kDefaultScripts = "data/scripts";
constexpr const char* kDefaultCases = "data/cases";

// Flag values, kept as strings so they can be applied on top of the config
// file with the same parser.
struct Flags {
  std::string config_path;
  std::map<std::string, std::string> values;
};

void add_flag(CLI::App* cmd, Flags& flags, const std::string& name, const std::string& key,
              const std::string& help) {
  cmd->add_option_function<std::string>(
      name, [&flags, key](const std::string& v) { flags.values[key] = v; }, help);
}

void add_common(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config_path, "Config file (key = value lines)");
  add_flag(cmd, flags, "--kb", "kb", "Knowledge base JSONL file");
  add_flag(cmd, flags, "--backend", "backend", "scripted or remote");
  add_flag(cmd, flags, "--script-bundle", "script_bundle", "Directory of scripted backend files");
  add_flag(cmd, flags, "--seed", "seed", "Seed for the random policy");
  add_flag(cmd, flags, "--max-turns", "max_turns", "Maximum follow-up questions");
  add_flag(cmd, flags, "--k", "k", "Candidate questions per turn");
  add_flag(cmd, flags, "--l-max", "l_max", "Maximum simulated responses per question");
  add_flag(cmd, flags, "--selection-mode", "selection_mode", "literal or eig");
}

config::AppConfig resolve(const Flags& flags) {
  config::AppConfig cfg;
  if (!flags.config_path.empty()) cfg = config::load(flags.config_path, cfg);
  for (const auto& [k, v] : flags.values) config::apply_setting(cfg, k, v);
  if (cfg.session.kb_path.empty()) cfg.session.kb_path = kDefaultKb;
  if (cfg.session.backend.kind == backend::BackendKind::scripted && cfg.session.backend.script_bundle.empty()) {
    cfg.session.backend.script_bundle = kDefaultScripts;
  }
  if (cfg.cases.empty()) cfg.cases = kDefaultCases;
  cfg.session.validate();
  return cfg;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << content;
}

void print_distribution(std::ostream& out, const kb::KnowledgeBase& kb, const prob::DiseaseDistribution& d,
                        double entropy) {
  out << "  H = " << text::fixed(entropy, 3) << " nats\n";
  std::size_t shown = 0;
  for (const auto& e : d.entries()) {
    if (shown++ == 5) break;
    const auto* disease = kb.find_disease(e.id);
    std::string name = disease ? disease->name : e.id;
    std::string bar(static_cast<std::size_t>(e.p * 40 + 0.5), '#');
    std::string label = name;
    label.resize(std::max<std::size_t>(label.size(), 28), ' ');
    out << "  " << label << " " << text::fixed(e.p * 100, 1) << "%  " << bar << "\n";
  }
  if (d.other_mass() > 0) out << "  (other " << text::fixed(d.other_mass() * 100, 1) << "%)\n";
}

int cmd_ingest(const Flags& flags, std::ostream& out) {
  auto cfg = resolve(flags);
  auto kb = kb::ingest(cfg.session.kb_path);
  std::set<std::string> specialties;
  for (const auto& [id, d] : kb.diseases()) specialties.insert(d.specialty);
  out << "kb " << cfg.session.kb_path.string() << ": " << kb.symptoms().size() << " symptoms, "
      << kb.diseases().size() << " diseases, " << specialties.size() << " specialties\n";
  return 0;
}

int cmd_consult(const Flags& flags, const std::string& transcript_path, std::istream& in, std::ostream& out) {
  auto cfg = resolve(flags);
  auto kb = kb::ingest(cfg.session.kb_path);
  auto backend = backend::make_backend(cfg.session.backend);
  engine::Engine eng(kb, *backend, cfg.session);

  out << "Doctor: " << prompts::opening_question() << "\n> " << std::flush;
  std::string line;
  if (!std::getline(in, line) || text::trim(line).empty()) throw Error("no opening statement given");
  auto state = eng.start_session(line);
  print_distribution(out, kb, state.current(), state.entropy_trace.back());
  while (state.status == engine::Status::active) {
    out << "Doctor: " << state.pending_question << "\n> " << std::flush;
    if (!std::getline(in, line)) {
      state = eng.conclude(state, engine::StopReason::max_turns);
      break;
    }
    state = eng.step(state, text::trim(line)).state;
    print_distribution(out, kb, state.current(), state.entropy_trace.back());
  }
  const auto& dx = *state.diagnosis;
  out << "Diagnosis: " << dx.name << " (" << text::fixed(dx.probability * 100, 1) << "%) after "
      << dx.turns_used << " questions; stopped by " << engine::to_string(dx.stop_reason) << "\n";
  if (!transcript_path.empty()) transcript::save(transcript_path, state, cfg.session);
  return 0;
}

int cmd_simulate(const Flags& flags, const std::string& case_filter, std::ostream& out) {
  auto cfg = resolve(flags);
  auto kb = kb::ingest(cfg.session.kb_path);
  auto backend = backend::make_backend(cfg.session.backend);
  auto cases = sim::load_cases(cfg.cases, kb);
  bool any = false;
  for (const auto& c : cases) {
    if (!case_filter.empty() && c.case_id != case_filter) continue;
    any = true;
    auto state = sim::simulate_case(c, kb, *backend, cfg.session);
    out << "== " << c.case_id << " (" << engine::to_string(cfg.session.policy) << ")\n";
    out << "Doctor: " << state.opening_question << "\nPatient: " << state.opening_statement << "\n";
    for (const auto& t : state.turns) out << "Doctor: " << t.question << "\nPatient: " << t.response << "\n";
    out << "H: ";
    for (std::size_t i = 0; i < state.entropy_trace.size(); ++i) {
      out << (i ? " " : "") << text::fixed(state.entropy_trace[i], 3);
    }
    const auto& dx = *state.diagnosis;
    out << "\nDiagnosis: " << dx.disease_id << " p=" << text::fixed(dx.probability) << " ("
        << engine::to_string(dx.stop_reason) << ")" << (dx.disease_id == c.ground_truth ? " correct" : " wrong")
        << "\n";
    if (!cfg.out.empty()) transcript::save(cfg.out / (c.case_id + ".json"), state, cfg.session);
  }
  if (!any) throw CaseError("no case with id '" + case_filter + "'");
  return 0;
}

int cmd_bench(const Flags& flags, std::ostream& out) {
  auto cfg = resolve(flags);
  auto kb = kb::ingest(cfg.session.kb_path);
  auto backend = backend::make_backend(cfg.session.backend);
  auto cases = sim::load_cases(cfg.cases, kb);
  auto run = sim::run_benchmark(cases, kb, *backend, cfg.session, cfg.policies, cfg.workers);
  if (!cfg.out.empty()) {
    write_file(cfg.out / "run.json", sim::write_run(run));
    write_file(cfg.out / "cases.csv", sim::cases_csv(run));
    metrics::emit_report(run, cfg.out);
  }
  out << metrics::summary_text(run, metrics::entropy_curves(run));
  return 0;
}

int cmd_report(const std::string& run_path, const std::string& out_dir, std::ostream& out) {
  auto run = sim::load_run(run_path);
  metrics::emit_report(run, out_dir);
  out << metrics::summary_text(run, metrics::entropy_curves(run));
  return 0;
}

int cmd_serve(const Flags& flags, std::ostream& err) {
  auto cfg = resolve(flags);
  auto kb = kb::ingest(cfg.session.kb_path);
  auto backend = backend::make_backend(cfg.session.backend);
  service::ServiceOptions opts;
  opts.transcript_dir = cfg.transcript_dir;
  opts.ttl = cfg.session_ttl;
  opts.ui_dir = cfg.ui_dir;
  opts.cors_origin = cfg.cors_origin;
  service::SessionService svc(kb, *backend, cfg.session, opts);
  err << "serving on " << cfg.addr << "\n";
  service::serve(svc, cfg.addr);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entropy-guided diagnostic consultation toolkit", "patience"};
  app.require_subcommand(1, 1);
  Flags flags;
  std::string transcript_path, case_filter, run_path, report_out;

  auto* ingest = app.add_subcommand("ingest", "Validate a knowledge base and print record counts");
  add_common(ingest, flags);

  auto* consult = app.add_subcommand("consult", "Interactive consultation on the terminal");
  add_common(consult, flags);
  consult->add_option("--transcript", transcript_path, "Write the session transcript here");

  auto* simulate = app.add_subcommand("simulate", "Run simulated patients and print their dialogues");
  add_common(simulate, flags);
  add_flag(simulate, flags, "--cases", "cases", "Case file or directory");
  add_flag(simulate, flags, "--policy", "policy", "app, random, first or oneshot");
  add_flag(simulate, flags, "--out", "out", "Directory for per-case transcripts");
  simulate->add_option("--case", case_filter, "Only this case id");

  auto* bench = app.add_subcommand("bench", "Benchmark question policies over a case suite");
  add_common(bench, flags);
  add_flag(bench, flags, "--cases", "cases", "Case file or directory");
  add_flag(bench, flags, "--policies", "policies", "Comma-separated policies");
  add_flag(bench, flags, "--workers", "workers", "Parallel cases");
  add_flag(bench, flags, "--out", "out", "Output directory for run.json, CSVs and summary");

  auto* report = app.add_subcommand("report", "Recompute curves and summary from a run file");
  report->add_option("--run", run_path, "run.json from bench")->required();
  report->add_option("--out", report_out, "Output directory")->required();

  auto* serve = app.add_subcommand("serve", "Start the HTTP session service");
  add_common(serve, flags);
  add_flag(serve, flags, "--addr", "addr", "host:port to bind");
  add_flag(serve, flags, "--transcript-dir", "transcript_dir", "Persist finished sessions here");
  add_flag(serve, flags, "--ui-dir", "ui_dir", "Static files served under /ui/");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(flags, out);
    if (consult->parsed()) return cmd_consult(flags, transcript_path, in, out);
    if (simulate->parsed()) return cmd_simulate(flags, case_filter, out);
    if (bench->parsed()) return cmd_bench(flags, out);
    if (report->parsed()) return cmd_report(run_path, report_out, out);
    if (serve->parsed()) return cmd_serve(flags, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cin, std::cout, std::cerr);
}

}  // namespace patience::cli
