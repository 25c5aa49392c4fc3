#pragma once

#include <string>
#include <string_view>

#include "d2t/triple.hpp"

namespace d2t {

// The four table-to-sentence demonstrations used for every domain. No
// trailing newline.
std::string_view default_prompt_prefix();

struct PromptSpec {
  std::string prefix = std::string(default_prompt_prefix());
  std::string stop_sequence = "\n";
  int max_new_tokens = 256;
  double temperature = 0.0;
};

// prefix + "\n\n" + "Table: {s} | {p} | {o}\nText:". With an empty prefix
// only the query block is returned. Throws FieldError if a field contains '|'.
std::string build_prompt(const Triple& triple, const PromptSpec& spec = {});

// "Table: {s} | {p} | {o}\nText:"
std::string prompt_query(const Triple& triple);

// Cuts a raw completion at the first stop sequence and trims surrounding
// whitespace (the model emits the space after "Text:").
std::string clean_completion(std::string_view raw, std::string_view stop_sequence);

}  // namespace d2t
