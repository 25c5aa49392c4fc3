#include "d2t/fusion.hpp"

#include "d2t/error.hpp"
#include "text_util.hpp"

namespace d2t {

std::string build_fusion_input(const std::vector<std::string>& sentences) {
  if (sentences.empty()) throw FusionError("cannot build a fusion input from zero sentences");
  std::string out(kFusionPrefix);
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i].empty()) throw FusionError("sentence " + std::to_string(i) + " is empty");
    if (i) out += ' ';
    out += sentences[i];
  }
  return out;
}

std::string build_fusion_input(const std::vector<DisambiguatedSentence>& sentences) {
  std::vector<std::string> texts;
  texts.reserve(sentences.size());
  for (const auto& s : sentences) texts.push_back(s.text);
  return build_fusion_input(texts);
}

FusionRequest make_fusion_request(const std::vector<DisambiguatedSentence>& sentences, const DecodeConfig& decode) {
  validate(decode);
  return FusionRequest{build_fusion_input(sentences), decode};
}

std::string fuse(const FusionRequest& request, GenerationBackend& backend) {
  auto output = std::string(detail::trim(backend.generate(request.input_text, request.decode)));
  if (output.empty()) throw FusionError("fusion backend returned an empty sequence");
  return output;
}

std::string linearize_baseline(const DataInstance& instance) {
  std::string out(kBaselinePrefix);
  for (std::size_t i = 0; i < instance.triples.size(); ++i) {
    const auto& t = instance.triples[i];
    if (i) out += ' ';
    out += "<H> " + t.subject() + " <R> " + t.predicate() + " <T> " + t.object();
  }
  return out;
}

std::vector<FusionOutcome> fuse_all(const std::vector<std::string>& ids, const std::vector<FusionRequest>& requests,
                                    GenerationBackend& backend, int parallelism) {
  if (ids.size() != requests.size()) throw FusionError("fuse_all: ids and requests differ in length");
  std::vector<FusionOutcome> outcomes(requests.size());
  run_bounded(requests.size(), parallelism, [&](std::size_t i) {
    outcomes[i].id = ids[i];
    try {
      outcomes[i].text = fuse(requests[i], backend);
    } catch (const std::exception& e) {
      outcomes[i].error = e.what();
    }
  });
  return outcomes;
}

}  // namespace d2t
