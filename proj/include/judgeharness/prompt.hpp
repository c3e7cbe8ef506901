#pragma once

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "judgeharness/error.hpp"
#include "judgeharness/jsonl.hpp"
#include "judgeharness/task.hpp"

namespace judgeharness {

/// Rules the parser uses to read a judge completion.
struct OutputGrammar {
  std::string reason_marker = "Reason:";
  std::string reference_marker = "Reference:";
  /// Optional labels allowed before the verdict token on the first line.
  std::vector<std::string> verdict_prefixes = {"Result:", "Verdict:", "Evaluation:",
                                               "Answer:", "Evaluation result:"};
};

struct PromptTemplate {
  std::string template_id;
  std::string template_text;
  std::string no_input_variant;
  OutputGrammar grammar;
};

namespace detail {

inline std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size()))
    ++n;
  return n;
}

/// Single-pass substitution: text inserted for one placeholder is never
/// rescanned, so responses that contain "{response_2}" stay literal.
inline std::string substitute(std::string_view text,
                              const std::map<std::string, std::string_view, std::less<>>& values) {
  std::string out;
  out.reserve(text.size() + 256);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t open = text.find('{', pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = text.find('}', open + 1);
    if (close == std::string_view::npos) break;
    const auto name = text.substr(open + 1, close - open - 1);
    auto it = values.find(name);
    if (it == values.end()) {
      out.append(text.substr(pos, open + 1 - pos));
      pos = open + 1;
      continue;
    }
    out.append(text.substr(pos, open - pos));
    out.append(it->second);
    pos = close + 1;
  }
  out.append(text.substr(pos));
  return out;
}

inline void require_once(std::string_view text, std::string_view placeholder,
                         std::string_view which) {
  const auto n = count_occurrences(text, placeholder);
  if (n != 1)
    throw Error(Errc::TemplateError, std::string(which) + " must contain " +
                                         std::string(placeholder) + " exactly once (found " +
                                         std::to_string(n) + ")");
}

}  // namespace detail

inline void validate_template(const PromptTemplate& p) {
  for (auto ph : {"{instruction}", "{input}", "{response_1}", "{response_2}"})
    detail::require_once(p.template_text, ph, "template '" + p.template_id + "'");
  for (auto ph : {"{instruction}", "{response_1}", "{response_2}"})
    detail::require_once(p.no_input_variant, ph, "no_input variant of '" + p.template_id + "'");
  if (detail::count_occurrences(p.no_input_variant, "{input}") != 0)
    throw Error(Errc::TemplateError, "no_input variant must not contain {input}");
}

/// Renders the judge prompt. Forward puts response_1 first, Swapped puts
/// response_2 first; an empty input selects the no-input variant.
inline std::string build_prompt(const ComparisonTask& t, const PromptTemplate& p, Order order) {
  validate_template(p);
  const bool fwd = order == Order::Forward;
  const Response& first = fwd ? t.response_1 : t.response_2;
  const Response& second = fwd ? t.response_2 : t.response_1;
  const bool no_input = detail::trim(t.input).empty();
  std::map<std::string, std::string_view, std::less<>> values{
      {"instruction", t.instruction},
      {"response_1", first.text},
      {"response_2", second.text},
  };
  if (!no_input) values.emplace("input", t.input);
  return detail::substitute(no_input ? p.no_input_variant : p.template_text, values);
}

inline const PromptTemplate& default_template() {
  static const PromptTemplate tmpl = [] {
    PromptTemplate p;
    p.template_id = "pairwise-default";
    const std::string head =
        "You are comparing two responses to the same task. Decide which response is better, "
        "or whether they are of similar quality.\n"
        "\n"
        "Judge the responses on relative conciseness, clarity, adherence to the instruction, "
        "comprehensiveness and formality. Penalize logical fallacies, unnecessary repetition, "
        "grammatical errors and content that is irrelevant to the context.\n"
        "\n"
        "### Instruction:\n"
        "{instruction}\n"
        "\n";
    const std::string input_block =
        "### Input:\n"
        "{input}\n"
        "\n";
    const std::string tail =
        "### Response 1:\n"
        "{response_1}\n"
        "\n"
        "### Response 2:\n"
        "{response_2}\n"
        "\n"
        "Answer in exactly this format:\n"
        "- first line: 1 if Response 1 is better, 2 if Response 2 is better, Tie if they are of "
        "similar quality\n"
        "- then a line starting with \"Reason:\" giving a brief explanation\n"
        "- then a line starting with \"Reference:\" followed by a reference response for the "
        "task\n"
        "\n"
        "### Evaluation:\n";
    p.template_text = head + input_block + tail;
    p.no_input_variant = head + tail;
    return p;
  }();
  return tmpl;
}

/// Template file: `key: value` header lines, then an `@@ template` section and
/// an optional `@@ no_input` section. Without `@@ no_input`, the variant is
/// derived by dropping every line of the main body that mentions {input}.
inline PromptTemplate parse_template_file(std::string_view text) {
  PromptTemplate p;
  std::map<std::string, std::string> header;
  std::string section;
  std::string body, no_input;
  bool have_no_input = false;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "@@ template") {
      section = "template";
      continue;
    }
    if (line == "@@ no_input") {
      section = "no_input";
      have_no_input = true;
      continue;
    }
    if (section.empty()) {
      if (detail::trim(line).empty() || line.front() == '#') continue;
      const auto colon = line.find(':');
      if (colon == std::string::npos)
        throw Error(Errc::TemplateError, "bad header line '" + line + "'");
      header[std::string(detail::trim(std::string_view(line).substr(0, colon)))] =
          std::string(detail::trim(std::string_view(line).substr(colon + 1)));
    } else {
      (section == "template" ? body : no_input) += line + "\n";
    }
  }
  if (section.empty()) throw Error(Errc::TemplateError, "missing '@@ template' section");
  p.template_id = header.count("template_id") ? header["template_id"] : "custom";
  if (header.count("reason_marker")) p.grammar.reason_marker = header["reason_marker"];
  if (header.count("reference_marker")) p.grammar.reference_marker = header["reference_marker"];
  if (header.count("verdict_prefixes")) {
    p.grammar.verdict_prefixes.clear();
    std::stringstream ss(header["verdict_prefixes"]);
    std::string item;
    while (std::getline(ss, item, '|'))
      if (!detail::trim(item).empty()) p.grammar.verdict_prefixes.emplace_back(detail::trim(item));
  }
  p.template_text = body;
  if (have_no_input) {
    p.no_input_variant = no_input;
  } else {
    // Drop the {input} line together with a heading right above it and one
    // blank line right below it.
    std::vector<std::string> lines;
    std::istringstream bs(body);
    while (std::getline(bs, line)) lines.push_back(line);
    std::vector<bool> keep(lines.size(), true);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].find("{input}") == std::string::npos) continue;
      keep[i] = false;
      if (i > 0 && (lines[i - 1].rfind("#", 0) == 0 ||
                    (!lines[i - 1].empty() && lines[i - 1].back() == ':')))
        keep[i - 1] = false;
      if (i + 1 < lines.size() && detail::trim(lines[i + 1]).empty()) keep[i + 1] = false;
    }
    for (std::size_t i = 0; i < lines.size(); ++i)
      if (keep[i]) p.no_input_variant += lines[i] + "\n";
  }
  validate_template(p);
  return p;
}

inline PromptTemplate load_template(const std::filesystem::path& path) {
  return parse_template_file(read_file(path));
}

inline std::string render_template_file(const PromptTemplate& p) {
  std::string out = "template_id: " + p.template_id + "\n";
  out += "reason_marker: " + p.grammar.reason_marker + "\n";
  out += "reference_marker: " + p.grammar.reference_marker + "\n";
  out += "verdict_prefixes: ";
  for (std::size_t i = 0; i < p.grammar.verdict_prefixes.size(); ++i)
    out += (i ? "|" : "") + p.grammar.verdict_prefixes[i];
  out += "\n@@ template\n" + p.template_text + "@@ no_input\n" + p.no_input_variant;
  return out;
}

/// Prompt sent to generator backends to obtain a response for an instruction.
struct GenerationTemplate {
  std::string text =
      "Below is an instruction that describes a task, paired with an input that provides "
      "further context. Write a response that appropriately completes the request.\n\n"
      "### Instruction:\n{instruction}\n\n### Input:\n{input}\n\n### Response:\n";
  std::string no_input_text =
      "Below is an instruction that describes a task. Write a response that appropriately "
      "completes the request.\n\n### Instruction:\n{instruction}\n\n### Response:\n";
};

inline std::string build_generation_prompt(std::string_view instruction, std::string_view input,
                                           const GenerationTemplate& g = {}) {
  const bool no_input = detail::trim(input).empty();
  std::map<std::string, std::string_view, std::less<>> values{{"instruction", instruction}};
  if (!no_input) values.emplace("input", input);
  return detail::substitute(no_input ? g.no_input_text : g.text, values);
}

}  // namespace judgeharness
