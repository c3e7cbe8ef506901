#include <gtest/gtest.h>

#include "judgeharness/distill.hpp"
#include "judgeharness/oracles.hpp"
#include "support.hpp"

using namespace judgeharness;

namespace {

BackendDescriptor scripted(std::string id) {
  BackendDescriptor b;
  b.backend_id = std::move(id);
  b.kind = BackendKind::ScriptedOracle;
  return b;
}

std::vector<InstructionItem> instructions(int n) {
  std::vector<InstructionItem> out;
  for (int i = 0; i < n; ++i) out.push_back({"Task number " + std::to_string(i), i % 2 ? "ctx" : ""});
  return out;
}

std::string noisy_judge(const std::string& prompt) {
  const double u = unit_hash("noisy" + prompt);
  if (u < 0.3) return "1\nReason: first is good\nReference: ref";
  if (u < 0.6) return "2\nReason: second is good\nReference: ref";
  if (u < 0.75) return "Tie\nReason: similar\nReference: ref";
  if (u < 0.9) return "Overall response 1 is better.";
  return "???";
}

std::vector<ComparisonTask> corpus_tasks(int n) {
  std::vector<ComparisonTask> out;
  for (int i = 0; i < n; ++i) {
    const auto s = std::to_string(i);
    out.push_back(jhtest::make_task("c" + s, "x", "first " + s, "y", "second answer " + s));
  }
  return out;
}

}  // namespace

TEST(BuildPairs, AllUnorderedPairsPerInstruction) {
  Gateway gw({scripted("sys-c"), scripted("sys-a"), scripted("sys-b")});
  gw.set_oracle_factory(oracles::from_spec);
  for (auto id : {"sys-a", "sys-b", "sys-c"}) gw.register_oracle(id, oracles::tagged_generator());
  const auto out = build_pairs(instructions(4), {"sys-c", "sys-a", "sys-b", "sys-a"}, gw, 3);
  ASSERT_EQ(out.tasks.size(), 12u);
  EXPECT_TRUE(out.incomplete.empty());
  std::set<std::string> ids;
  for (std::size_t i = 0; i < out.tasks.size(); ++i) {
    const auto& t = out.tasks[i];
    EXPECT_LT(t.response_1.system, t.response_2.system);
    EXPECT_TRUE(ids.insert(t.task_id).second);
    EXPECT_FALSE(has_errors(validate_task(t)));
    EXPECT_EQ(oracles::system_tag(t.response_1.text), t.response_1.system);
  }
  EXPECT_EQ(out.tasks[0].response_1.system, "sys-a");
  EXPECT_EQ(out.tasks[0].response_2.system, "sys-b");
  EXPECT_EQ(out.tasks[2].response_1.system, "sys-b");
}

TEST(BuildPairs, FailingGeneratorIsReportedNotFatal) {
  Gateway gw({scripted("a"), scripted("b"), scripted("c")});
  gw.register_oracle("a", oracles::tagged_generator());
  gw.register_oracle("b", oracles::tagged_generator());
  gw.register_oracle("c", [](const std::string& id, const std::string& prompt) -> std::string {
    if (prompt.find("Task number 1") != std::string::npos)
      throw Error(Errc::BackendUnavailable, "c is down");
    return "[system=" + id + "] ok";
  });
  const auto out = build_pairs(instructions(3), {"a", "b", "c"}, gw);
  ASSERT_EQ(out.incomplete.size(), 1u);
  EXPECT_EQ(out.incomplete[0].index, 1u);
  EXPECT_EQ(out.incomplete[0].system, "c");
  EXPECT_EQ(out.tasks.size(), 3u + 1u + 3u);
}

TEST(BuildPairs, PreconditionErrors) {
  Gateway gw({scripted("a"), scripted("b")});
  try {
    build_pairs(instructions(2), {"a", "a"}, gw);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientSystems);
  }
  try {
    build_pairs({}, {"a", "b"}, gw);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyInput);
  }
}

TEST(Filter, EveryKeptSampleIsConsistentAndParsed) {
  const auto run = distill(corpus_tasks(300), noisy_judge, "noisy", default_template(), 4);
  ASSERT_EQ(run.candidates.size(), 300u);
  const auto res = filter_corpus(run.candidates);
  EXPECT_EQ(res.kept.size() + res.dropped.size(), 300u);
  EXPECT_GT(res.kept.size(), 0u);
  for (const auto& k : res.kept) {
    EXPECT_FALSE(k.debiased.conflict);
    EXPECT_EQ(k.debiased.forward.status, ParseStatus::Parsed);
    EXPECT_EQ(k.debiased.reverse.status, ParseStatus::Parsed);
    EXPECT_EQ(*k.debiased.forward.verdict, *k.debiased.reverse.verdict);
    EXPECT_EQ(k.result, *k.debiased.forward.verdict);
  }
  const auto hist = res.histogram();
  EXPECT_GT(hist.at("SwapConflict"), 0u);
  EXPECT_GT(hist.at("InvalidJudgeOutput"), 0u);
}

TEST(Filter, IsIdempotent) {
  const auto first = filter_corpus(distill(corpus_tasks(120), noisy_judge, "n", default_template()).candidates);
  const auto second = filter_corpus(first.kept);
  EXPECT_TRUE(second.dropped.empty());
  ASSERT_EQ(second.kept.size(), first.kept.size());
  EXPECT_EQ(candidates_jsonl(second.kept), candidates_jsonl(first.kept));
}

TEST(Filter, RuleOrderAndDuplicates) {
  auto cands = distill(corpus_tasks(4), noisy_judge, "n", default_template()).candidates;
  auto dup = cands[0];
  dup.debiased.forward.status = ParseStatus::Recovered;
  cands.push_back(dup);
  cands[1].debiased.forward.status = ParseStatus::Recovered;
  cands[1].debiased.conflict = true;
  const auto res = filter_corpus(cands);
  std::map<std::string, std::string> why;
  for (const auto& d : res.dropped) why[d.example.input.task_id] += std::string(to_string(d.reason)) + ";";
  EXPECT_NE(why["c0"].find("DuplicateTaskId"), std::string::npos);
  EXPECT_EQ(why["c1"], "InvalidJudgeOutput;");
}

TEST(Filter, CandidateJsonRoundTrip) {
  jhtest::TempDir dir;
  const auto cands = distill(corpus_tasks(10), noisy_judge, "n", default_template()).candidates;
  write_file_atomic(dir / "c.jsonl", candidates_jsonl(cands));
  const auto back = read_candidates(dir / "c.jsonl");
  EXPECT_EQ(candidates_jsonl(back), candidates_jsonl(cands));
  const auto res = filter_corpus(cands);
  write_file_atomic(dir / "d.jsonl", dropped_jsonl(res.dropped));
  const auto dropped = read_dropped(dir / "d.jsonl");
  ASSERT_EQ(dropped.size(), res.dropped.size());
  for (std::size_t i = 0; i < dropped.size(); ++i) EXPECT_EQ(dropped[i].reason, res.dropped[i].reason);
}

TEST(Export, SortedDeterministicAndManifested) {
  jhtest::TempDir dir;
  auto cands = distill(corpus_tasks(50), noisy_judge, "teacher", default_template()).candidates;
  const auto res = filter_corpus(cands);
  const auto a = export_training_file(res, dir / "a.jsonl", Json{{"seed", "1"}});
  std::reverse(cands.begin(), cands.end());
  const auto b = export_training_file(filter_corpus(cands), dir / "b.jsonl", Json{{"seed", "1"}});
  EXPECT_EQ(read_file(dir / "a.jsonl"), read_file(dir / "b.jsonl"));
  EXPECT_EQ(a.content_digest, sha256_hex(read_file(dir / "a.jsonl")));

  const auto rows = read_jsonl(dir / "a.jsonl");
  ASSERT_EQ(rows.size(), res.kept.size());
  for (const auto& r : rows) {
    for (auto key : {"instruction", "input", "response_1", "response_2", "result", "reason", "reference"})
      EXPECT_TRUE(r.contains(key)) << key;
    EXPECT_NO_THROW(normalize_verdict(r.at("result").get<std::string>()));
  }
  const auto m = read_json(a.manifest_path);
  EXPECT_EQ(m.at("kept"), res.kept.size());
  EXPECT_EQ(m.at("dropped_total"), res.dropped.size());
  EXPECT_EQ(m.at("judges"), Json::array({"teacher"}));
  EXPECT_EQ(m.at("config").at("seed"), "1");
  std::size_t total = 0;
  for (const auto& [k, v] : m.at("dropped").items()) total += v.get<std::size_t>();
  EXPECT_EQ(total, res.dropped.size());
}

TEST(Export, EmptyCorpusIsAnError) {
  jhtest::TempDir dir;
  try {
    export_training_file(FilterResult{}, dir / "x.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyInput);
  }
}
