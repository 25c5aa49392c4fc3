#include <mutex>
#include <regex>
#include <string>
#include <vector>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "d2t/corpus.hpp"
#include "d2t/error.hpp"
#include "d2t/fusion.hpp"
#include "test_support.hpp"

namespace d2t {
namespace {

using Fixture = std::map<std::string, std::string>;

using ::testing::HasSubstr;

// Records what reaches the backend.
class RecordingBackend : public GenerationBackend {
 public:
  std::string generate(const std::string& input, const DecodeConfig& decode) override {
    std::lock_guard lock(mu_);
    inputs.push_back(input);
    decodes.push_back(decode);
    return reply;
  }
  std::string identity() const override { return "recording"; }

  std::string reply = "  fused text.  ";
  std::vector<std::string> inputs;
  std::vector<DecodeConfig> decodes;

 private:
  std::mutex mu_;
};

TEST(FusionInput, FigureOneSentences) {
  EXPECT_EQ(build_fusion_input(std::vector<std::string>{"Apollo 11 is operated by NASA.",
                                                        "Alan Shepard was born in New Hampshire."}),
            "summarize: Apollo 11 is operated by NASA. Alan Shepard was born in New Hampshire.");
}

TEST(FusionInput, Single) {
  EXPECT_EQ(build_fusion_input(std::vector<std::string>{"A b."}), "summarize: A b.");
}

TEST(FusionInput, LengthArithmetic) {
  std::vector<std::string> s = {"One.", "Two two.", "Three three three."};
  auto out = build_fusion_input(s);
  EXPECT_EQ(out.size(), 11u + 4u + 8u + 18u + 2u);
}

TEST(FusionInput, EmptyRejected) {
  EXPECT_THROW(build_fusion_input(std::vector<std::string>{}), FusionError);
  EXPECT_THROW(build_fusion_input(std::vector<std::string>{"a.", ""}), FusionError);
}

TEST(Fuse, IdentityMockStripsPrefix) {
  IdentityGenerationBackend id;
  auto req = make_fusion_request({{0, "A b.", Provenance::kLlm}, {1, "C d.", Provenance::kFallback}});
  EXPECT_EQ(fuse(req, id), "A b. C d.");
}

TEST(Fuse, DecodePassedThrough) {
  RecordingBackend rec;
  DecodeConfig d;
  d.beam_width = 3;
  d.max_new_tokens = 64;
  d.stop_sequence = "\n";
  auto req = make_fusion_request({{0, "A b.", Provenance::kLlm}}, d);
  EXPECT_EQ(fuse(req, rec), "fused text.");
  ASSERT_EQ(rec.decodes.size(), 1u);
  EXPECT_EQ(rec.decodes[0], d);
  EXPECT_EQ(rec.inputs[0], "summarize: A b.");
}

TEST(Fuse, DefaultBeamFive) {
  RecordingBackend rec;
  fuse(make_fusion_request({{0, "A b.", Provenance::kLlm}}), rec);
  EXPECT_EQ(rec.decodes.at(0).beam_width, 5);
  EXPECT_EQ(rec.decodes.at(0).max_new_tokens, 256);
}

TEST(Fuse, EmptyOutputIsError) {
  RecordingBackend rec;
  rec.reply = "   ";
  EXPECT_THROW(fuse(make_fusion_request({{0, "A b.", Provenance::kLlm}}), rec), FusionError);
}

TEST(Fuse, TableFourPair) {
  MockBackend mock(Fixture{{"summarize: Liverpool F.C. set the fastest lap in the Zolder. Zolder was on October 5.",
                     "Liverpool F.C. set the fastest lap in the Zolder on October 5."}});
  auto req = make_fusion_request(
      {{0, "Liverpool F.C. set the fastest lap in the Zolder.", Provenance::kLlm}, {1, "Zolder was on October 5.", Provenance::kLlm}});
  EXPECT_EQ(fuse(req, mock), "Liverpool F.C. set the fastest lap in the Zolder on October 5.");
}

TEST(FuseAll, FailuresAreRecordedPerInstance) {
  MockBackend mock(Fixture{{"summarize: A b.", "ok."}});
  std::vector<FusionRequest> reqs = {make_fusion_request({{0, "A b.", Provenance::kLlm}}),
                                     make_fusion_request({{0, "C d.", Provenance::kLlm}})};
  auto out = fuse_all({"i1", "i2"}, reqs, mock, 2);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_TRUE(out[0].ok());
  EXPECT_EQ(out[0].text, "ok.");
  EXPECT_FALSE(out[1].ok());
  EXPECT_EQ(out[1].id, "i2");
  EXPECT_TRUE(out[1].text.empty());
  EXPECT_THROW(fuse_all({"x"}, {}, mock, 1), FusionError);
}

TEST(Linearize, ApolloExample) {
  DataInstance inst{"a", {Triple("Apollo 11", "operator", "NASA")}, {}, std::nullopt, Split::kTest};
  EXPECT_EQ(linearize_baseline(inst), "translate Graph to English: <H> Apollo 11 <R> operator <T> NASA");
}

TEST(Linearize, MarkerCounts) {
  auto corpus = read_canonical(testing::read_fixture("corpus50.jsonl"));
  for (const auto& inst : corpus) {
    auto s = linearize_baseline(inst);
    for (const char* marker : {"<H> ", "<R> ", "<T> "})
      EXPECT_EQ(count_occurrences(s, marker), inst.triples.size()) << s;
    EXPECT_THAT(s, ::testing::StartsWith("translate Graph to English: <H> "));
  }
}

}  // namespace
}  // namespace d2t
