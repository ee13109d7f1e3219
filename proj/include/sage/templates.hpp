// SPDX-License-Identifier: Apache-2.0
#pragma once

// Prompt templates for the generation pipeline. A template is a sequence of
// literal text and `{name}` placeholders; rendering requires every
// placeholder to be bound to a non-empty value.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sage/error.hpp"

namespace sage {

enum class TemplateKind { kParaphrase, kRot, kAnswer, kAnswerWithRot };

inline std::string_view to_string(TemplateKind k) {
  switch (k) {
    case TemplateKind::kParaphrase: return "paraphrase";
    case TemplateKind::kRot: return "rot";
    case TemplateKind::kAnswer: return "answer";
    case TemplateKind::kAnswerWithRot: return "answer_with_rot";
  }
  return "?";
}

using Bindings = std::map<std::string, std::string, std::less<>>;

class PromptTemplate {
 public:
  struct Segment {
    std::string text;
    bool placeholder = false;
  };

  PromptTemplate(TemplateKind kind, std::string_view source) : kind_(kind) {
    std::string literal;
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (source[i] == '{') {
        const auto close = source.find('}', i);
        if (close == std::string_view::npos) throw InputError("unterminated placeholder in template");
        if (!literal.empty()) segments_.push_back({std::move(literal), false});
        literal.clear();
        segments_.push_back({std::string(source.substr(i + 1, close - i - 1)), true});
        i = close;
      } else {
        literal.push_back(source[i]);
      }
    }
    if (!literal.empty()) segments_.push_back({std::move(literal), false});
  }

  [[nodiscard]] TemplateKind kind() const noexcept { return kind_; }
  [[nodiscard]] std::string_view name() const noexcept { return to_string(kind_); }
  [[nodiscard]] const std::vector<Segment>& segments() const noexcept { return segments_; }

  [[nodiscard]] std::vector<std::string> placeholders() const {
    std::vector<std::string> out;
    for (const auto& s : segments_) {
      if (s.placeholder) out.push_back(s.text);
    }
    return out;
  }

  [[nodiscard]] std::string render(const Bindings& bindings) const {
    std::string out;
    for (const auto& s : segments_) {
      if (!s.placeholder) {
        out += s.text;
        continue;
      }
      auto it = bindings.find(s.text);
      if (it == bindings.end()) {
        throw InputError(std::string(name()) + " template: placeholder '" + s.text + "' is unbound");
      }
      if (it->second.empty()) {
        throw InputError(std::string(name()) + " template: placeholder '" + s.text + "' is empty");
      }
      out += it->second;
    }
    return out;
  }

  /// Recovers the bindings from a prompt rendered by this template, or
  /// nullopt if `prompt` does not have this template's shape.
  [[nodiscard]] std::optional<Bindings> match(std::string_view prompt) const {
    Bindings out;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < segments_.size(); ++k) {
      const auto& s = segments_[k];
      if (!s.placeholder) {
        if (prompt.substr(pos, s.text.size()) != s.text) return std::nullopt;
        pos += s.text.size();
        continue;
      }
      std::size_t end = prompt.size();
      if (k + 1 < segments_.size()) {
        end = prompt.find(segments_[k + 1].text, pos);
        if (end == std::string_view::npos) return std::nullopt;
      }
      out[s.text] = std::string(prompt.substr(pos, end - pos));
      pos = end;
    }
    if (pos != prompt.size()) return std::nullopt;
    return out;
  }

 private:
  TemplateKind kind_;
  std::vector<Segment> segments_;
};

namespace prompts {

inline constexpr std::string_view kParaphraseText =
    "Instruction: Your task is to generate multiple paraphrased sentences. Do not change the meaning of the "
    "text and be concise.\n"
    "\n"
    "Sentence: {example_sentence}\n"
    "\n"
    "Paraphrases: {example_paraphrases}\n"
    "\n"
    "Sentence: {question}\n"
    "\n"
    "Paraphrases:";

inline constexpr std::string_view kRotText =
    "A Rule of Thumb (RoT) is a fundamental judgment about right and wrong behavior. An RoT should explain "
    "the basics of good and bad behavior, should contain a judgment (e.g. “you should”) and an "
    "action (e.g. “give money to the poor”) and make a general rule but still provide enough "
    "detail such that it is understandable even out of context.\n"
    "\n"
    "Instruction: Generate the rule of thumb for the task question-answer pair: be as concise as possible.\n"
    "\n"
    "Question: When is it worth it to fight a losing battle?\n"
    "\n"
    "Answer: It is never worth it.\n"
    "\n"
    "Rule of Thumb: Cowardice saves you from fights you cannot win.\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "Answer: {answer}\n"
    "\n"
    "Rule of Thumb:";

inline constexpr std::string_view kAnswerText =
    "Instruction: Answer the following question.\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "Answer:";

inline constexpr std::string_view kAnswerWithRotText =
    "Instruction: Answer the following question.\n"
    "\n"
    "Keep in mind this rule of thumb, {rot}\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "Answer:";

// One-shot example bound into the paraphrase template.
inline constexpr std::string_view kExampleSentence = "When is it worth it to fight a losing battle?";
inline constexpr std::string_view kExampleParaphrases =
    "\n1. Is it ever worthwhile to keep fighting a battle you are going to lose?"
    "\n2. In what situations does fighting a battle you cannot win make sense?"
    "\n3. When should someone continue a fight that is already lost?";

inline const PromptTemplate& paraphrase() {
  static const PromptTemplate t(TemplateKind::kParaphrase, kParaphraseText);
  return t;
}
inline const PromptTemplate& rot() {
  static const PromptTemplate t(TemplateKind::kRot, kRotText);
  return t;
}
inline const PromptTemplate& answer() {
  static const PromptTemplate t(TemplateKind::kAnswer, kAnswerText);
  return t;
}
inline const PromptTemplate& answer_with_rot() {
  static const PromptTemplate t(TemplateKind::kAnswerWithRot, kAnswerWithRotText);
  return t;
}

inline const PromptTemplate& get(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::kParaphrase: return paraphrase();
    case TemplateKind::kRot: return rot();
    case TemplateKind::kAnswer: return answer();
    case TemplateKind::kAnswerWithRot: return answer_with_rot();
  }
  return answer();
}

inline std::string render_paraphrase(std::string_view question) {
  return paraphrase().render({{"example_sentence", std::string(kExampleSentence)},
                              {"example_paraphrases", std::string(kExampleParaphrases)},
                              {"question", std::string(question)}});
}
inline std::string render_rot(std::string_view question, std::string_view answer_text) {
  return rot().render({{"question", std::string(question)}, {"answer", std::string(answer_text)}});
}
inline std::string render_answer(std::string_view question) {
  return answer().render({{"question", std::string(question)}});
}
inline std::string render_answer_with_rot(std::string_view question, std::string_view rule) {
  return answer_with_rot().render({{"question", std::string(question)}, {"rot", std::string(rule)}});
}

/// Identifies which pipeline template produced `prompt`.
struct Recognized {
  TemplateKind kind;
  Bindings bindings;
};

inline std::optional<Recognized> recognize(std::string_view prompt) {
  for (auto kind : {TemplateKind::kParaphrase, TemplateKind::kRot, TemplateKind::kAnswerWithRot,
                    TemplateKind::kAnswer}) {
    if (auto b = get(kind).match(prompt)) return Recognized{kind, std::move(*b)};
  }
  return std::nullopt;
}

}  // namespace prompts
}  // namespace sage
