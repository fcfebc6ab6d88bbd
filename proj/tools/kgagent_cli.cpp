#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "kgagent/dataset.hpp"
#include "kgagent/error.hpp"
#include "kgagent/kg_store.hpp"
#include "kgagent/policy.hpp"
#include "kgagent/reward.hpp"
#include "kgagent/rollout.hpp"
#include "kgagent/text.hpp"
#include "kgagent/trajectory.hpp"
#include "kgagent/web.hpp"

using namespace kgagent;

namespace {

struct Options {
  uint64_t seed = 0;
  std::string config;

  std::string kg, aliases, qa, out, ikg_log, traj, scores;
  std::string out_kg, out_log;
  double fraction = 0.4;

  std::string policy = "scripted", policy_endpoint;
  std::string web = "offline", corpus, web_endpoint;
  int max_iters = 10;
  int top_k_relations = kDefaultRelationTopK;
  int top_k_docs = 3;
  bool strict = false;
  int samples = 1;
  unsigned jobs = 1;

  int group_size = kDefaultGroupSize;
  std::string judge = "rule", judge_endpoint;
  double answer_threshold = 1.0;
};

/// key=value lines; '#' starts a comment. Keys are long flag names without dashes.
std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open config " + path);
  std::map<std::string, std::string> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw LoadError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key.front() == '-') key.erase(0, 1);
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

void require(CLI::App* sub, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    if (sub->get_option(name)->count() == 0) {
      throw CLI::RequiredError(std::string(name) + " (flag or config key)");
    }
  }
}

KnowledgeGraph load_kg(const Options& o) {
  if (o.aliases.empty()) return load_triples(o.kg);
  return load_triples(o.kg, std::filesystem::path(o.aliases));
}

const QAExample& find_question(const std::map<std::string, const QAExample*>& by_id,
                               const std::string& rollout_id) {
  auto it = by_id.find(base_question_id(rollout_id));
  if (it == by_id.end()) throw Error("trajectory " + rollout_id + " has no question in the QA file");
  return *it->second;
}

std::map<std::string, const QAExample*> index_questions(const std::vector<QAExample>& qa) {
  std::map<std::string, const QAExample*> out;
  for (const auto& q : qa) out.emplace(q.id, &q);
  return out;
}

int cmd_build_kg(const Options& o) {
  auto kg = load_kg(o);
  write_triples(o.out, kg);
  std::cout << "triples " << kg.size() << ", relations " << kg.relation_vocabulary().size()
            << "\n";
  return 0;
}

int cmd_sample_ikg(const Options& o) {
  auto kg = load_kg(o);
  auto qa = load_qa(o.qa);
  auto sample = sample_ikg(kg, qa, o.fraction, o.seed);
  write_triples(o.out_kg, sample.graph);
  save_removal_log(o.out_log, sample.log);
  size_t ikg = 0;
  for (const auto& e : sample.log.entries) ikg += e.coverage == Coverage::IKG;
  std::cout << "kept " << sample.graph.size() << " of " << kg.size() << " triples; " << ikg
            << " of " << qa.size() << " questions IKG\n";
  return 0;
}

int cmd_rollout(const Options& o) {
  const auto reference = load_kg(o);
  auto qa = load_qa(o.qa);
  const KnowledgeGraph env =
      o.ikg_log.empty() ? reference : apply_removal_log(reference, load_removal_log(o.ikg_log));

  std::unique_ptr<WebTool> web;
  if (o.web == "offline") {
    if (o.corpus.empty()) throw CLI::ValidationError("--corpus", "required with --web offline");
    web = std::make_unique<OfflineWebCorpus>(OfflineWebCorpus::load(o.corpus));
  } else {
    if (o.web_endpoint.empty()) {
      throw CLI::ValidationError("--web-endpoint", "required with --web remote");
    }
    web = std::make_unique<RemoteWebTool>(o.web_endpoint);
  }

  PolicyFactory factory;
  if (o.policy == "scripted") {
    factory = [&reference](const QAExample& q) -> std::unique_ptr<Policy> {
      return std::make_unique<ScriptedOraclePolicy>(reference, q);
    };
  } else {
    if (o.policy_endpoint.empty()) {
      throw CLI::ValidationError("--policy-endpoint", "required with --policy remote");
    }
    std::string endpoint = o.policy_endpoint;
    factory = [endpoint](const QAExample&) -> std::unique_ptr<Policy> {
      return std::make_unique<RemotePolicy>(endpoint);
    };
  }

  std::vector<QAExample> runs;
  for (const auto& q : qa) {
    if (o.samples <= 1) {
      runs.push_back(q);
      continue;
    }
    for (int i = 0; i < o.samples; ++i) {
      QAExample copy = q;
      copy.id = q.id + "#" + std::to_string(i);
      runs.push_back(std::move(copy));
    }
  }

  RolloutConfig cfg;
  cfg.max_iterations = o.max_iters;
  cfg.top_k_relations = o.top_k_relations;
  cfg.top_k_docs = o.top_k_docs;
  cfg.seed = o.seed;
  cfg.strict_format = o.strict;

  auto trajs = run_rollouts(factory, env, *web, runs, cfg, o.jobs);
  std::vector<TrajectoryRecord> records;
  for (const auto& t : trajs) records.push_back({t.question_id, t.raw});
  save_trajectory_file(o.out, records);
  std::cout << "wrote " << records.size() << " trajectories\n";
  return 0;
}

int cmd_score(const Options& o) {
  auto qa = load_qa(o.qa);
  auto by_id = index_questions(qa);
  auto log = load_removal_log(o.ikg_log);
  std::vector<ScoreRecord> scores;
  for (const auto& rec : load_trajectory_file(o.traj)) {
    const QAExample& q = find_question(by_id, rec.id);
    ScoreRecord s;
    s.id = rec.id;
    try {
      s.reward = score_trajectory(parse_trajectory(rec.text, rec.id), q.answers,
                                  log.coverage_of(q.id));
    } catch (const ParseError& e) {
      // Unparseable text is a format failure with no observations.
      Trajectory empty;
      empty.question_id = rec.id;
      s.reward = score_trajectory(empty, q.answers, log.coverage_of(q.id));
      s.reward.format_ok = false;
      s.reward.r_acc = 0.0;
      s.reward.r_over = overall_reward(0.0, 0, 0, log.coverage_of(q.id));
      std::cerr << "warning: " << rec.id << ": " << e.what() << "\n";
    }
    scores.push_back(std::move(s));
  }
  save_scores(o.out, scores);
  std::cout << "scored " << scores.size() << " trajectories\n";
  return 0;
}

int cmd_advantages(const Options& o) {
  auto groups = compute_advantage_groups(load_scores(o.scores), o.group_size);
  save_advantages(o.out, groups);
  std::cout << "wrote " << groups.size() << " groups\n";
  return 0;
}

int cmd_filter_sft(const Options& o) {
  // Without --kg the judge sees topic entities as their id text.
  auto kg = o.kg.empty() ? KnowledgeGraph::build({}) : load_kg(o);
  auto qa = load_qa(o.qa);
  auto by_id = index_questions(qa);
  auto log = load_removal_log(o.ikg_log);

  std::unique_ptr<Judge> judge;
  if (o.judge == "rule") {
    judge = std::make_unique<RuleJudge>();
  } else {
    if (o.judge_endpoint.empty()) {
      throw CLI::ValidationError("--judge-endpoint", "required with --judge remote");
    }
    judge = std::make_unique<RemoteJudge>(o.judge_endpoint);
  }

  std::vector<SftRecord> kept;
  std::map<std::string, size_t> failures;
  auto records = load_trajectory_file(o.traj);
  for (const auto& rec : records) {
    const QAExample& q = find_question(by_id, rec.id);
    auto coverage = log.coverage_of(q.id);
    if (!coverage) throw Error("no coverage label for " + q.id);
    auto ctx = make_context(q, kg);
    auto verdict = filter_trajectory(rec.text, q, *coverage, *judge, ctx,
                                     FilterOptions{o.answer_threshold});
    for (const auto& code : verdict.failed_checks) ++failures[code];
    if (!verdict.keep) continue;
    kept.push_back({rec.id, build_prompt(ctx), rec.text,
                    retrieval_mask(parse_trajectory(rec.text, rec.id))});
  }
  save_sft(o.out, kept);
  std::cout << "kept " << kept.size() << " of " << records.size() << "\n";
  for (const auto& [code, n] : failures) std::cout << "  " << code << " " << n << "\n";
  return 0;
}

std::vector<Trajectory> parse_all(const std::vector<TrajectoryRecord>& records, bool by_question) {
  std::vector<Trajectory> out;
  std::map<std::string, bool> seen;
  for (const auto& rec : records) {
    std::string id = by_question ? base_question_id(rec.id) : rec.id;
    if (by_question && !seen.emplace(id, true).second) {
      std::cerr << "warning: extra trajectory " << rec.id << " ignored\n";
      continue;
    }
    try {
      out.push_back(parse_trajectory(rec.text, id));
    } catch (const ParseError& e) {
      std::cerr << "warning: " << rec.id << ": " << e.what() << "\n";
      Trajectory empty;
      empty.question_id = id;
      empty.raw = rec.text;
      out.push_back(std::move(empty));
    }
  }
  return out;
}

int cmd_eval(const Options& o) {
  auto qa = load_qa(o.qa);
  auto trajs = parse_all(load_trajectory_file(o.traj), true);
  auto report = evaluate(trajs, qa, [](const std::string& w) { std::cerr << "warning: " << w << "\n"; });
  save_eval_report(o.out, report);
  std::cout << "hits@1 " << report.hits_at_1 << ", web_search_ratio " << report.web_search_ratio
            << ", web_calls_per_tool_call " << report.web_calls_per_tool_call << "\n";
  return 0;
}

int cmd_mask(const Options& o) {
  save_mask_file(o.out, parse_all(load_trajectory_file(o.traj), false));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Knowledge-graph QA agent environment and reward toolkit", "kgagent"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.add_option("--seed", o.seed, "Random seed");
  app.add_option("--config", o.config, "key=value file supplying any flag");

  auto add_kg = [&](CLI::App* sub) {
    sub->add_option("--kg", o.kg, "Triple file (TSV)");
    sub->add_option("--aliases", o.aliases, "Alias file (JSON lines)");
  };

  auto* build = app.add_subcommand("build-kg", "Validate and normalize a triple file");
  add_kg(build);
  build->add_option("--out", o.out, "Output triple file");

  auto* sample = app.add_subcommand("sample-ikg", "Remove critical triples to build an IKG");
  add_kg(sample);
  sample->add_option("--qa", o.qa, "QA file");
  sample->add_option("--fraction", o.fraction, "Fraction of critical triples to remove")
      ->check(CLI::Range(0.0, 1.0));
  sample->add_option("--out-kg", o.out_kg, "Output triple file");
  sample->add_option("--out-log", o.out_log, "Output removal log");

  auto* rollout = app.add_subcommand("rollout", "Run agent rollouts");
  add_kg(rollout);
  rollout->add_option("--qa", o.qa, "QA file");
  rollout->add_option("--ikg-log", o.ikg_log, "Removal log; the rollout sees the IKG");
  rollout->add_option("--policy", o.policy)->check(CLI::IsMember({"scripted", "remote"}));
  rollout->add_option("--policy-endpoint", o.policy_endpoint);
  rollout->add_option("--web", o.web)->check(CLI::IsMember({"offline", "remote"}));
  rollout->add_option("--corpus", o.corpus, "Offline web corpus (JSON lines)");
  rollout->add_option("--web-endpoint", o.web_endpoint);
  rollout->add_option("--out", o.out, "Trajectory file");
  rollout->add_option("--max-iters", o.max_iters)->check(CLI::PositiveNumber);
  rollout->add_option("--top-k-relations", o.top_k_relations)->check(CLI::NonNegativeNumber);
  rollout->add_option("--top-k-docs", o.top_k_docs)->check(CLI::NonNegativeNumber);
  rollout->add_flag("--strict", o.strict, "Reject stray text between blocks");
  rollout->add_option("--samples", o.samples, "Rollouts per question (ids become q#i)")
      ->check(CLI::PositiveNumber);
  rollout->add_option("--jobs", o.jobs)->check(CLI::PositiveNumber);

  auto* score = app.add_subcommand("score", "Score trajectories");
  score->add_option("--traj", o.traj);
  score->add_option("--qa", o.qa);
  score->add_option("--ikg-log", o.ikg_log);
  score->add_option("--out", o.out);

  auto* adv = app.add_subcommand("advantages", "Group-relative advantages from a score file");
  adv->add_option("--scores", o.scores);
  adv->add_option("--group-size", o.group_size)->check(CLI::PositiveNumber);
  adv->add_option("--out", o.out);

  auto* filter = app.add_subcommand("filter-sft", "Filter trajectories into an SFT file");
  add_kg(filter);
  filter->add_option("--traj", o.traj);
  filter->add_option("--qa", o.qa);
  filter->add_option("--ikg-log", o.ikg_log);
  filter->add_option("--judge", o.judge)->check(CLI::IsMember({"rule", "remote"}));
  filter->add_option("--judge-endpoint", o.judge_endpoint);
  filter->add_option("--answer-threshold", o.answer_threshold)->check(CLI::Range(0.0, 1.0));
  filter->add_option("--out", o.out);

  auto* eval = app.add_subcommand("eval", "Hits@1 and web-search ratio");
  eval->add_option("--traj", o.traj);
  eval->add_option("--qa", o.qa);
  eval->add_option("--out", o.out);

  auto* mask = app.add_subcommand("mask", "Retrieval mask spans per trajectory");
  mask->add_option("--traj", o.traj);
  mask->add_option("--out", o.out);

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::reverse(args.begin(), args.end());
    app.parse(args);

    if (!o.config.empty()) {
      CLI::App* sub = app.get_subcommands().front();
      std::vector<std::string> extra;
      for (const auto& [key, value] : read_config(o.config)) {
        std::string flag = "--" + key;
        CLI::Option* opt = sub->get_option_no_throw(flag);
        if (!opt) opt = app.get_option_no_throw(flag);
        if (!opt) {
          bool known = false;
          for (auto* other : app.get_subcommands({})) known = known || other->get_option_no_throw(flag);
          if (!known) throw CLI::ValidationError("config", "unknown key '" + key + "'");
          continue;
        }
        if (opt->count() > 0) continue;  // command line wins
        extra.push_back(flag + "=" + value);
      }
      if (!extra.empty()) {
        std::vector<std::string> again(argv + 1, argv + argc);
        again.insert(again.end(), extra.begin(), extra.end());
        std::reverse(again.begin(), again.end());
        app.clear();
        app.parse(again);
      }
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*build) {
      require(build, {"--kg", "--out"});
      return cmd_build_kg(o);
    }
    if (*sample) {
      require(sample, {"--kg", "--qa", "--out-kg", "--out-log"});
      return cmd_sample_ikg(o);
    }
    if (*rollout) {
      require(rollout, {"--kg", "--qa", "--out"});
      return cmd_rollout(o);
    }
    if (*score) {
      require(score, {"--traj", "--qa", "--ikg-log", "--out"});
      return cmd_score(o);
    }
    if (*adv) {
      require(adv, {"--scores", "--out"});
      return cmd_advantages(o);
    }
    if (*filter) {
      require(filter, {"--traj", "--qa", "--ikg-log", "--out"});
      return cmd_filter_sft(o);
    }
    if (*eval) {
      require(eval, {"--traj", "--qa", "--out"});
      return cmd_eval(o);
    }
    if (*mask) {
      require(mask, {"--traj", "--out"});
      return cmd_mask(o);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
