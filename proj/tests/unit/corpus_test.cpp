#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "d2t/corpus.hpp"
#include "d2t/error.hpp"
#include "test_support.hpp"

namespace d2t {
namespace {

using ::testing::ElementsAre;
using testing::read_fixture;

std::size_t triple_count(const std::vector<DataInstance>& v) {
  return std::accumulate(v.begin(), v.end(), std::size_t{0},
                         [](std::size_t n, const DataInstance& i) { return n + i.triples.size(); });
}

std::size_t reference_count(const std::vector<DataInstance>& v) {
  return std::accumulate(v.begin(), v.end(), std::size_t{0},
                         [](std::size_t n, const DataInstance& i) { return n + i.references.size(); });
}

DataInstance make(std::string id, std::vector<Triple> triples, std::vector<std::string> refs = {"x."}) {
  return DataInstance{std::move(id), std::move(triples), std::move(refs), std::nullopt, Split::kTest};
}

TEST(WebNlg, SampleCounts) {
  auto r = parse_webnlg(read_fixture("webnlg_sample.xml"));
  EXPECT_EQ(r.instances.size(), 5u);
  EXPECT_EQ(triple_count(r.instances), 9u);
  EXPECT_EQ(reference_count(r.instances), 8u);
  EXPECT_TRUE(r.errors.empty());
}

TEST(WebNlg, FirstEntryMatchesFigureTriple) {
  auto r = parse_webnlg(read_fixture("webnlg_sample.xml"));
  const auto& first = r.instances.front();
  EXPECT_EQ(first.id, "Id1");
  EXPECT_THAT(first.triples, ElementsAre(Triple("Apollo 11", "operator", "NASA")));
  EXPECT_THAT(first.references, ElementsAre("Apollo 11 was operated by NASA."));
  EXPECT_EQ(first.category, "MeanOfTransportation");
}

TEST(WebNlg, EdgeCases) {
  auto r = parse_webnlg(read_fixture("webnlg_sample.xml"));
  const auto& id3 = r.instances[2];
  EXPECT_EQ(id3.triples[0].object(), "Aarhus, Denmark");
  EXPECT_EQ(id3.references[0], "Aarhus Airport serves the city of Aarhus, Denmark & lies 25 metres above sea level.");
  // enriched release: <lex> wraps a <text> element
  EXPECT_EQ(id3.references[1], "At an elevation of 25 metres, Aarhus Airport serves Aarhus, Denmark.");
  const auto& id4 = r.instances[3];
  EXPECT_TRUE(id4.references.empty());
  EXPECT_EQ(id4.triples[0], Triple("Fearless (Taylor Swift album)", "releaseDate", "2008-11-11"));
}

TEST(WebNlg, MalformedXmlReportsLine) {
  try {
    parse_webnlg("<benchmark>\n<entries>\n<entry>\n</benchmark>");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GT(e.line(), 0u);
  }
}

TEST(WebNlg, BadTripleOverBudget) {
  const char* xml = R"(<benchmark><entries>
<entry eid="Id1"><modifiedtripleset><mtriple>a | b</mtriple></modifiedtripleset></entry>
</entries></benchmark>)";
  EXPECT_THROW(parse_webnlg(xml), CorpusError);
  ParseOptions lenient;
  lenient.max_bad_fraction = 1.0;
  auto r = parse_webnlg(xml, lenient);
  EXPECT_TRUE(r.instances.empty());
  EXPECT_EQ(r.errors.size(), 1u);
}

TEST(Dart, SampleCounts) {
  auto r = parse_dart(read_fixture("dart_sample.json"));
  EXPECT_EQ(r.source_records, 5u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.instances.size(), 4u);
  EXPECT_EQ(triple_count(r.instances), 6u);
  EXPECT_EQ(reference_count(r.instances), 6u);
}

TEST(Dart, TableFourTriple) {
  auto r = parse_dart(read_fixture("dart_sample.json"));
  const auto& first = r.instances.front();
  EXPECT_EQ(first.triples[0], Triple("Zolder", "FASTEST LAP", "Liverpool F.C."));
  EXPECT_EQ(first.references.size(), 2u);
  EXPECT_EQ(first.id, "dart-0");
  EXPECT_EQ(first.category, "WikiSQL_decl_sents");
}

TEST(Dart, MalformedJsonReportsLine) {
  try {
    parse_dart("[\n{\"tripleset\": [}\n]");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Dart, RemoveSourcesDropsWebnlgAndE2e) {
  auto r = parse_dart(read_fixture("dart_sample.json"));
  auto kept = remove_sources(r.instances, {"webnlg", "E2E"});
  ASSERT_EQ(kept.size(), 2u);
  for (const auto& inst : kept) EXPECT_THAT(*inst.category, ::testing::StartsWith("Wiki"));
}

TEST(E2e, SampleCounts) {
  auto r = parse_e2e(read_fixture("e2e_sample.csv"));
  EXPECT_EQ(r.source_records, 6u);
  EXPECT_EQ(r.instances.size(), 4u);
  EXPECT_EQ(r.merged_rows, 2u);
  EXPECT_EQ(triple_count(r.instances), 17u);
  EXPECT_EQ(reference_count(r.instances), 6u);
  EXPECT_EQ(predicate_set(r.instances).size(), 7u);
}

TEST(E2e, MrToTriples) {
  auto r = parse_e2e("mr,ref\n\"name[The Vaults], eatType[pub]\",The Vaults is a pub.\n");
  ASSERT_EQ(r.instances.size(), 1u);
  EXPECT_THAT(r.instances[0].triples, ElementsAre(Triple("The Vaults", "eatType", "pub")));
}

TEST(E2e, QuotedFields) {
  auto r = parse_e2e(read_fixture("e2e_sample.csv"));
  EXPECT_EQ(r.instances[2].references[1],
            "The Eagle, a \"family friendly\" coffee shop by the riverside near Burger King, serves Japanese food "
            "under £20 but has a low rating.");
  EXPECT_EQ(r.instances[3].references[0], "Blue Spice serves Italian food in the city centre,\nclose to the river.");
}

TEST(E2e, NameOnlyRejected) {
  ParseOptions lenient;
  lenient.max_bad_fraction = 1.0;
  auto r = parse_e2e("mr,ref\nname[X],X.\n", lenient);
  EXPECT_TRUE(r.instances.empty());
  EXPECT_EQ(r.errors.size(), 1u);
  EXPECT_THROW(parse_e2e("mr,ref\nname[X],X.\n"), CorpusError);
}

TEST(Canonical, RoundTripAllFormats) {
  std::vector<std::vector<DataInstance>> corpora = {
      parse_webnlg(read_fixture("webnlg_sample.xml")).instances,
      parse_dart(read_fixture("dart_sample.json")).instances,
      parse_e2e(read_fixture("e2e_sample.csv")).instances,
      read_canonical(read_fixture("corpus50.jsonl")),
  };
  for (const auto& c : corpora) {
    auto bytes = write_canonical(c);
    EXPECT_EQ(read_canonical(bytes), c);
    EXPECT_EQ(write_canonical(read_canonical(bytes)), bytes);
  }
}

TEST(Canonical, Empty) {
  EXPECT_EQ(write_canonical({}), "");
  EXPECT_TRUE(read_canonical("").empty());
}

TEST(Canonical, StableFieldOrder) {
  auto bytes = write_canonical({make("a", {Triple("s", "p", "o")}, {"S p o."})});
  EXPECT_EQ(bytes,
            "{\"id\":\"a\",\"triples\":[[\"s\",\"p\",\"o\"]],\"references\":[\"S p o.\"],"
            "\"category\":null,\"split\":\"test\"}\n");
}

TEST(Canonical, DuplicateIdsRejected) {
  auto line = write_canonical({make("a", {Triple("s", "p", "o")})});
  EXPECT_THROW(read_canonical(line + line), CorpusError);
}

TEST(Canonical, BadLineNumber) {
  auto line = write_canonical({make("a", {Triple("s", "p", "o")})});
  try {
    read_canonical(line + "{\"id\":\"b\",\"triples\":[[\"s\",\"p\"]]}\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(UnseenSplit, PartiallySeenExcluded) {
  std::vector<DataInstance> train = {make("t", {Triple("x", "a", "y")})};
  std::vector<DataInstance> test = {make("1", {Triple("x", "a", "y"), Triple("x", "b", "y")}),
                                    make("2", {Triple("x", "c", "y")})};
  auto out = build_unseen_predicate_split(train, {}, test);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].id, "2");
}

TEST(UnseenSplit, ValidationCountsAsSeen) {
  std::vector<DataInstance> dev = {make("d", {Triple("x", "b", "y")})};
  std::vector<DataInstance> test = {make("1", {Triple("x", "b", "y")}), make("2", {Triple("x", "c", "y")})};
  auto out = build_unseen_predicate_split({make("t", {Triple("x", "a", "y")})}, dev, test);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].id, "2");
}

TEST(UnseenSplit, DisjointOnFixtureSplits) {
  auto train = parse_dart(read_fixture("dart_train.json")).instances;
  auto dev = parse_dart(read_fixture("dart_dev.json")).instances;
  auto test = parse_dart(read_fixture("dart_test.json")).instances;
  auto unseen = build_unseen_predicate_split(train, dev, test);
  auto seen = predicate_set(train);
  seen.merge(predicate_set(dev));
  for (const auto& p : predicate_set(unseen)) EXPECT_EQ(seen.count(p), 0u) << p;
  EXPECT_EQ(unseen.size(), 21u);
}

std::vector<DataInstance> numbered(std::size_t n) {
  std::vector<DataInstance> out;
  for (std::size_t i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "i%03zu", i);
    out.push_back(make(id, {Triple("s", "p", "o")}));
  }
  return out;
}

TEST(FewShot, ZeroAndFull) {
  auto train = numbered(30);
  EXPECT_TRUE(sample_few_shot(train, 0, 1).empty());
  auto all = sample_few_shot(train, 30, 1);
  EXPECT_EQ(all, train);
  EXPECT_THROW(sample_few_shot(train, 31, 1), ConfigError);
}

TEST(FewShot, DeterministicAndOrderIndependent) {
  auto train = numbered(100);
  auto a = sample_few_shot(train, 10, 42);
  auto shuffled = train;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937(3));
  auto b = sample_few_shot(shuffled, 10, 42);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 10u);
  std::set<std::string> ids;
  for (const auto& i : a) ids.insert(i.id);
  EXPECT_EQ(ids.size(), 10u);
  EXPECT_NE(a, sample_few_shot(train, 10, 43));
}

TEST(FewShot, FrozenDraw) {
  // pinned so a change of RNG or draw procedure shows up
  auto a = sample_few_shot(numbered(20), 3, 0);
  std::vector<std::string> ids;
  for (const auto& i : a) ids.push_back(i.id);
  EXPECT_EQ(ids, (std::vector<std::string>{"i000", "i014", "i015"}));
}

TEST(StripReferences, ClearsOnlyReferences) {
  auto in = parse_webnlg(read_fixture("webnlg_sample.xml")).instances;
  auto out = strip_references(in);
  ASSERT_EQ(out.size(), in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_TRUE(out[i].references.empty());
    EXPECT_EQ(out[i].triples, in[i].triples);
    EXPECT_EQ(out[i].id, in[i].id);
  }
}

TEST(Manifest, DartIdsPrefixedBySplit) {
  CorpusManifest m;
  m.format = CorpusFormat::kDartJson;
  m.splits = {{"train", testing::fixture("dart_train.json")}, {"test", testing::fixture("dart_test.json")}};
  auto loaded = load_manifest(m);
  EXPECT_EQ(loaded.at("train").front().id, "train-dart-0");
  EXPECT_EQ(loaded.at("test").front().id, "test-dart-0");
  EXPECT_EQ(loaded.at("train").front().split, Split::kTrain);
}

}  // namespace
}  // namespace d2t
