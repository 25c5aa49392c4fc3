#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "d2t/backend.hpp"
#include "d2t/triple.hpp"

namespace d2t {

inline constexpr std::string_view kFusionPrefix = "summarize: ";
inline constexpr std::string_view kBaselinePrefix = "translate Graph to English: ";

struct FusionRequest {
  std::string input_text;
  DecodeConfig decode;
};

// "summarize: " + sentences joined by single spaces. Throws FusionError on
// an empty list or an empty sentence.
std::string build_fusion_input(const std::vector<std::string>& sentences);
std::string build_fusion_input(const std::vector<DisambiguatedSentence>& sentences);

FusionRequest make_fusion_request(const std::vector<DisambiguatedSentence>& sentences, const DecodeConfig& decode = {});

// The backend's best sequence, trimmed. Throws FusionError when the output
// is empty and lets BackendError through.
std::string fuse(const FusionRequest& request, GenerationBackend& backend);

// "translate Graph to English: <H> s <R> p <T> o <H> ..."
std::string linearize_baseline(const DataInstance& instance);

struct FusionOutcome {
  std::string id;
  std::string text;   // empty when failed
  std::string error;  // empty when ok
  bool ok() const { return error.empty(); }
};

// Fuses every request with at most `parallelism` in flight. A failed
// instance is reported in its outcome and never aborts the batch. Outcomes
// come back in the order of `ids`.
std::vector<FusionOutcome> fuse_all(const std::vector<std::string>& ids, const std::vector<FusionRequest>& requests,
                                    GenerationBackend& backend, int parallelism);

}  // namespace d2t
