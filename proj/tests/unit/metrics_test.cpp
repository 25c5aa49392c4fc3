#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gmock/gmock.h>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "d2t/corpus.hpp"
#include "d2t/error.hpp"
#include "d2t/metrics.hpp"
#include "oracle/parent_oracle.hpp"
#include "test_support.hpp"

namespace d2t {
namespace {

using ::testing::ElementsAre;

Tokens T(std::string_view s) { return tokenize(s); }

TEST(Tokenize, Example) {
  EXPECT_THAT(tokenize("Apollo 11 is operated by NASA."), ElementsAre("apollo", "11", "is", "operated", "by", "nasa", "."));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_THAT(tokenize("F.C.'s"), ElementsAre("f", ".", "c", ".", "'", "s"));
}

TEST(Tokenize, IdempotentUnderRejoin) {
  for (const char* s : {"Apollo 11 is operated by NASA.", "A, b; (c) d-e!", "  x\ty\n"}) {
    auto once = tokenize(s);
    std::string joined;
    for (const auto& t : once) joined += (joined.empty() ? "" : " ") + t;
    EXPECT_EQ(tokenize(joined), once);
  }
}

TEST(Bleu, WorkedExample) {
  auto r = corpus_bleu({T("the cat sat on mat")}, {{T("the cat sat on the mat")}});
  EXPECT_NEAR(r.bleu, 57.893006746740, 1e-9);
  EXPECT_THAT(r.matches, ElementsAre(5u, 3u, 2u, 1u));
  EXPECT_THAT(r.totals, ElementsAre(5u, 4u, 3u, 2u));
  EXPECT_NEAR(r.brevity_penalty, std::exp(1.0 - 6.0 / 5.0), 1e-12);
}

TEST(Bleu, Identity) {
  std::vector<Tokens> hyps = {T("a b c d e"), T("one two three four five six")};
  EXPECT_EQ(corpus_bleu(hyps, {{hyps[0]}, {hyps[1]}}).bleu, 100.0);
}

TEST(Bleu, AllEmptyHypotheses) {
  EXPECT_EQ(corpus_bleu({Tokens{}, Tokens{}}, {{T("a b")}, {T("c d")}}).bleu, 0.0);
}

TEST(Bleu, ClosestReferenceLengthTiesShorter) {
  // hyp length 4; refs of length 3 and 5 are equally close, shorter wins
  auto r = corpus_bleu({T("a b c d")}, {{T("a b c"), T("a b c d e")}});
  EXPECT_EQ(r.ref_length, 3u);
  EXPECT_EQ(r.brevity_penalty, 1.0);
}

TEST(Bleu, ClipsByMaxReferenceCount) {
  auto r = corpus_bleu({T("the the the the")}, {{T("the cat"), T("the the dog")}});
  EXPECT_EQ(r.matches[0], 2u);
}

TEST(Bleu, BoundsOnRandomCorpora) {
  std::mt19937_64 rng(3);
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "."};
  auto sentence = [&] {
    Tokens t;
    for (int n = 1 + static_cast<int>(rng() % 8); n > 0; --n) t.push_back(vocab[rng() % vocab.size()]);
    return t;
  };
  for (int i = 0; i < 100; ++i) {
    std::vector<Tokens> hyps;
    std::vector<std::vector<Tokens>> refs;
    for (int k = 0; k < 5; ++k) {
      hyps.push_back(sentence());
      refs.push_back({sentence(), sentence()});
    }
    auto b = corpus_bleu(hyps, refs).bleu;
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, 100.0);
  }
}

TEST(Bleu, MultiBleuFixture) {
  auto lines = testing::read_fixture("bleu100.jsonl");
  std::vector<Tokens> hyps;
  std::vector<std::vector<Tokens>> refs;
  std::size_t start = 0;
  while (start < lines.size()) {
    auto end = lines.find('\n', start);
    auto j = nlohmann::json::parse(lines.substr(start, end - start));
    start = end + 1;
    hyps.push_back(T(j["hyp"].get<std::string>()));
    refs.emplace_back();
    for (const auto& r : j["refs"]) refs.back().push_back(T(r.get<std::string>()));
  }
  ASSERT_EQ(hyps.size(), 100u);
  EXPECT_NEAR(corpus_bleu(hyps, refs).bleu, 68.027253, 1e-4);
}

EvalExample example(std::string_view hyp, std::vector<std::string_view> refs, std::vector<std::string_view> table) {
  EvalExample ex;
  ex.hypothesis = T(hyp);
  for (auto r : refs) ex.references.push_back(T(r));
  for (auto v : table) ex.table_values.push_back(T(v));
  return ex;
}

TEST(Parent, EmptyHypothesisIsZero) {
  auto s = parent_instance(example("", {"a b c"}, {"a", "c", "b"}));
  EXPECT_EQ(s.f1, 0.0);
}

TEST(Parent, FullyEntailedIdentityIsOne) {
  auto s = parent_instance(example("a b c", {"a b c"}, {"a", "c", "b"}));
  EXPECT_EQ(s.precision, 1.0);
  EXPECT_EQ(s.recall, 1.0);
  EXPECT_EQ(s.f1, 1.0);
}

TEST(Parent, NoSharedTokensIsZero) {
  auto s = parent_instance(example("x y z", {"a b c"}, {"a", "c", "b"}));
  EXPECT_EQ(s.precision, 0.0);
  EXPECT_EQ(s.f1, 0.0);
}

TEST(Parent, HandComputedCase) {
  // worked by hand: P = 0.2^(1/4); reference recall orders 1, 1/2, 1/2, eps;
  // table recall 1
  auto s = parent_instance(example("john was born in paris", {"john born in paris"}, {"john", "paris", "born"}));
  EXPECT_NEAR(s.precision, 0.668740304976422, 1e-12);
  EXPECT_NEAR(s.recall, 0.19940796483178033, 1e-12);
  EXPECT_NEAR(s.f1, 0.3072105257913917, 1e-12);
}

TEST(Parent, BestReferenceWins) {
  auto one = parent_instance(example("a b c", {"a b c"}, {"a", "b", "c"}));
  auto two = parent_instance(example("a b c", {"x y", "a b c"}, {"a", "b", "c"}));
  EXPECT_EQ(one.f1, two.f1);
}

TEST(Parent, F1NotAboveMaxOfPrecisionRecall) {
  std::mt19937_64 rng(9);
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f"};
  auto words = [&](int lo, int hi) {
    std::string s;
    for (int n = lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1)); n > 0; --n)
      s += vocab[rng() % vocab.size()] + " ";
    return s;
  };
  for (int i = 0; i < 300; ++i) {
    auto ex = example(words(0, 7), {}, {});
    ex.references = {T(words(1, 7))};
    ex.table_values = {T(words(1, 2)), T(words(1, 2))};
    auto s = parent_instance(ex);
    EXPECT_GE(s.f1, 0.0);
    EXPECT_LE(s.f1, 1.0);
    EXPECT_LE(s.f1, std::max(s.precision, s.recall) + 1e-12);
  }
}

TEST(Parent, AppendingReferenceSentenceKeepsRecall) {
  auto base = example("john was born", {"john was born in paris . he died in rome ."}, {"john", "paris", "rome"});
  auto longer = base;
  for (const auto& t : T("he died in rome .")) longer.hypothesis.push_back(t);
  EXPECT_GE(parent_instance(longer).recall, parent_instance(base).recall);
}

TEST(Parent, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f", "g"};
  auto draw = [&](std::size_t lo, std::size_t hi) {
    oracle::Words w;
    for (auto n = lo + rng() % (hi - lo + 1); n > 0; --n) w.push_back(vocab[rng() % vocab.size()]);
    return w;
  };
  for (int i = 0; i < 200; ++i) {
    EvalExample ex;
    ex.hypothesis = draw(0, 6);
    for (auto n = 1 + rng() % 3; n > 0; --n) ex.references.push_back(draw(1, 8));
    for (auto n = 1 + rng() % 4; n > 0; --n) ex.table_values.push_back(draw(1, 3));
    double lambda = (rng() % 5) / 4.0;
    auto got = parent_instance(ex, lambda);
    auto want = oracle::parent(ex.hypothesis, ex.references, ex.table_values, lambda);
    ASSERT_NEAR(got.precision, want.p, 1e-9) << i;
    ASSERT_NEAR(got.recall, want.r, 1e-9) << i;
    ASSERT_NEAR(got.f1, want.f, 1e-9) << i;
  }
}

TEST(Parent, BadArguments) {
  EXPECT_THROW(parent_instance(example("a", {"a"}, {"a"}), 1.5), MetricError);
  EXPECT_THROW(parent_instance(example("a", {}, {"a"})), MetricError);
}

TEST(EvalExample, TableValuesFromTriples) {
  DataInstance inst{"i", {Triple("Alan Shepard", "birthPlace", "New Hampshire")}, {"r."}, std::nullopt, Split::kTest};
  auto ex = make_eval_example("x", inst);
  ASSERT_EQ(ex.table_values.size(), 3u);
  EXPECT_THAT(ex.table_values[2], ElementsAre("birth", "place"));
}

std::vector<Hypothesis> first_references(const std::vector<DataInstance>& corpus) {
  std::vector<Hypothesis> out;
  for (const auto& i : corpus) out.push_back({i.id, i.references.front()});
  return out;
}

TEST(Evaluate, FirstReferencesScoreBleu100AndOracleParent) {
  auto corpus = read_canonical(testing::read_fixture("corpus50.jsonl"));
  auto report = evaluate(first_references(corpus), corpus);
  EXPECT_EQ(report.bleu, 100.0);
  double f1 = 0;
  for (const auto& inst : corpus) {
    auto ex = make_eval_example(inst.references.front(), inst);
    f1 += oracle::parent(ex.hypothesis, ex.references, ex.table_values).f;
  }
  EXPECT_NEAR(report.parent_f1, f1 / static_cast<double>(corpus.size()), 1e-9);
  EXPECT_EQ(report.instances, 50u);
}

TEST(Evaluate, OrderInvariant) {
  auto corpus = read_canonical(testing::read_fixture("corpus50.jsonl"));
  auto hyps = first_references(corpus);
  for (std::size_t i = 0; i < hyps.size(); i += 3) hyps[i].text = corpus[(i + 1) % corpus.size()].references.front();
  auto a = evaluate(hyps, corpus);
  std::mt19937 rng(1);
  std::shuffle(corpus.begin(), corpus.end(), rng);
  std::shuffle(hyps.begin(), hyps.end(), rng);
  auto b = evaluate(hyps, corpus);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(Evaluate, Misaligned) {
  auto corpus = read_canonical(testing::read_fixture("corpus50.jsonl"));
  auto hyps = first_references(corpus);
  hyps.pop_back();
  EXPECT_THROW(evaluate(hyps, corpus), MetricError);
  hyps = first_references(corpus);
  hyps.push_back(hyps.front());
  EXPECT_THROW(evaluate(hyps, corpus), MetricError);
}

TEST(Evaluate, UnlabeledRejected) {
  auto corpus = strip_references(read_canonical(testing::read_fixture("corpus50.jsonl")));
  std::vector<Hypothesis> hyps;
  for (const auto& i : corpus) hyps.push_back({i.id, "x"});
  EXPECT_THROW(evaluate(hyps, corpus), MetricError);
}

TEST(Evaluate, ReportSchemaGolden) {
  DataInstance inst{"i1", {Triple("john", "born", "paris")}, {"john born in paris"}, std::nullopt, Split::kTest};
  auto report = evaluate({{"i1", "john was born in paris"}}, {inst});
  auto golden = nlohmann::json::parse(read_file(testing::golden("metric_report.json")));
  auto got = report.to_json();
  // same keys all the way down; numbers compared with a tolerance
  std::function<void(const nlohmann::json&, const nlohmann::json&, const std::string&)> same =
      [&](const nlohmann::json& a, const nlohmann::json& b, const std::string& path) {
        if (a.is_number() && b.is_number()) {
          EXPECT_NEAR(a.get<double>(), b.get<double>(), 1e-9) << path;
          return;
        }
        ASSERT_EQ(a.type(), b.type()) << path;
        if (a.is_object()) {
          ASSERT_EQ(a.size(), b.size()) << path;
          for (const auto& [k, v] : a.items()) {
            ASSERT_TRUE(b.contains(k)) << path << "." << k;
            same(v, b[k], path + "." + k);
          }
        } else if (a.is_array()) {
          ASSERT_EQ(a.size(), b.size()) << path;
          for (std::size_t i = 0; i < a.size(); ++i) same(a[i], b[i], path + "[" + std::to_string(i) + "]");
        } else {
          EXPECT_EQ(a, b) << path;
        }
      };
  same(got, golden, "$");
}

TEST(Hypotheses, JsonlRoundTrip) {
  std::vector<Hypothesis> h = {{"b", "x \"y\""}, {"a", "line\nbreak"}};
  auto back = read_hypotheses_jsonl(write_hypotheses_jsonl(h));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].id, "b");
  EXPECT_EQ(back[1].text, "line\nbreak");
  EXPECT_EQ(write_hypotheses_jsonl(h).substr(0, 8), "{\"id\":\"b");
}

TEST(Hypotheses, TextPairsByOrder) {
  auto corpus = read_canonical(testing::read_fixture("corpus50.jsonl"));
  std::string text;
  for (std::size_t i = 0; i < corpus.size(); ++i) text += "h" + std::to_string(i) + "\n";
  auto hyps = read_hypotheses_text(text, corpus);
  EXPECT_EQ(hyps[3].id, corpus[3].id);
  EXPECT_EQ(hyps[3].text, "h3");
  EXPECT_THROW(read_hypotheses_text("one\n", corpus), MetricError);
}

TEST(CommandMetric, ParsesLastNumber) {
  CommandMetric m("wc", "cat {hyp} {refs} | wc -l");
  // 2 hypotheses, max 2 references per instance: 2 + 2 * 2 lines
  EXPECT_EQ(m.score({"a", "b"}, {{"r1", "r2"}, {"s1"}}), 6.0);
  CommandMetric bad("bad", "exit 3");
  EXPECT_THROW(bad.score({"a"}, {{"r"}}), MetricError);
}

}  // namespace
}  // namespace d2t
