#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vlcap {

using Sentence = std::vector<std::string>;

// Lowercase (ASCII), drop punctuation characters, split on whitespace.
std::vector<std::string> tokenize(std::string_view text);

struct Paragraph {
  std::vector<Sentence> sentences;

  static Paragraph from_strings(const std::vector<std::string>& sentences);
  // Sentences concatenated in order.
  std::vector<std::string> tokens() const;
};

// Corpus BLEU-4 with one reference per candidate paragraph: clipped n-gram
// precisions for n = 1..4 (add-one smoothing for n >= 2), geometric mean,
// brevity penalty over the corpus totals.
double bleu4(const std::vector<Paragraph>& candidates, const std::vector<Paragraph>& references);

// Mean over pairs of the LCS F-measure with beta = 1.2.
double rouge_l(const std::vector<Paragraph>& candidates,
               const std::vector<Paragraph>& references);

// tf-idf weighted n-gram cosine for n = 1..4, averaged over n, times 10,
// averaged over pairs. Document frequencies come from the references.
double cider(const std::vector<Paragraph>& candidates, const std::vector<Paragraph>& references);

// Distinct bigrams / total bigrams; nullopt below 2 tokens.
std::optional<double> div2(const Paragraph& paragraph);
// Fraction of 4-gram occurrences repeating an earlier one; nullopt below 4 tokens.
std::optional<double> rep4(const Paragraph& paragraph);

struct MetricReport {
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double cider = 0.0;
  double div2 = 0.0;
  double rep4 = 0.0;
  std::vector<std::string> warnings;

  std::string to_json() const;
  // Human-readable row in the B@4 / C / R / Div@2 / R@4 column order,
  // values shown as percentages.
  std::string to_table() const;

  bool operator==(const MetricReport&) const = default;
};

// Div@2 and R@4 are means over the candidate paragraphs for which they are
// defined; skipped paragraphs are recorded as warnings.
MetricReport evaluate_corpus(const std::vector<Paragraph>& candidates,
                             const std::vector<Paragraph>& references);

}  // namespace vlcap
