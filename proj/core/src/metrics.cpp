#include "vlcap/metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include <json.hpp>

#include "vlcap/errors.hpp"

namespace vlcap {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  NgramCounts counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

void check_pairs(const std::vector<Paragraph>& c, const std::vector<Paragraph>& r,
                 const char* metric) {
  if (c.empty()) throw ContractError(std::string(metric) + ": empty corpus");
  if (c.size() != r.size()) {
    throw ContractError(std::string(metric) + ": " + std::to_string(c.size()) +
                        " candidates vs " + std::to_string(r.size()) + " references");
  }
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else if (!std::ispunct(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

Paragraph Paragraph::from_strings(const std::vector<std::string>& sentences) {
  Paragraph p;
  for (const auto& s : sentences) p.sentences.push_back(tokenize(s));
  return p;
}

std::vector<std::string> Paragraph::tokens() const {
  std::vector<std::string> out;
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

double bleu4(const std::vector<Paragraph>& candidates, const std::vector<Paragraph>& references) {
  check_pairs(candidates, references, "bleu4");
  std::array<double, 4> matched{}, total{};
  double cand_len = 0.0, ref_len = 0.0;
  for (std::size_t p = 0; p < candidates.size(); ++p) {
    const auto c = candidates[p].tokens();
    const auto r = references[p].tokens();
    cand_len += static_cast<double>(c.size());
    ref_len += static_cast<double>(r.size());
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cc = count_ngrams(c, n);
      const auto rc = count_ngrams(r, n);
      for (const auto& [gram, count] : cc) {
        total[n - 1] += static_cast<double>(count);
        const auto it = rc.find(gram);
        if (it != rc.end()) matched[n - 1] += static_cast<double>(std::min(count, it->second));
      }
    }
  }
  if (cand_len == 0.0 || matched[0] == 0.0) return 0.0;
  double log_sum = std::log(matched[0] / total[0]);
  for (std::size_t n = 1; n < 4; ++n) log_sum += std::log((matched[n] + 1.0) / (total[n] + 1.0));
  const double bp = cand_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return bp * std::exp(log_sum / 4.0);
}

double rouge_l(const std::vector<Paragraph>& candidates,
               const std::vector<Paragraph>& references) {
  check_pairs(candidates, references, "rouge_l");
  constexpr double beta2 = 1.2 * 1.2;
  double total = 0.0;
  for (std::size_t p = 0; p < candidates.size(); ++p) {
    const auto c = candidates[p].tokens();
    const auto r = references[p].tokens();
    const auto lcs = static_cast<double>(lcs_length(c, r));
    if (lcs == 0.0) continue;
    const double prec = lcs / static_cast<double>(c.size());
    const double rec = lcs / static_cast<double>(r.size());
    total += (1.0 + beta2) * prec * rec / (rec + beta2 * prec);
  }
  return total / static_cast<double>(candidates.size());
}

double cider(const std::vector<Paragraph>& candidates, const std::vector<Paragraph>& references) {
  check_pairs(candidates, references, "cider");
  if (references.size() < 2) {
    throw ContractError("cider: idf needs at least 2 reference documents");
  }
  const double log_docs = std::log(static_cast<double>(references.size()));
  std::vector<std::vector<std::string>> cand_tokens, ref_tokens;
  for (const auto& c : candidates) cand_tokens.push_back(c.tokens());
  for (const auto& r : references) ref_tokens.push_back(r.tokens());

  std::vector<double> per_pair(candidates.size(), 0.0);
  for (std::size_t n = 1; n <= 4; ++n) {
    std::vector<NgramCounts> ref_counts;
    std::map<std::vector<std::string>, double> df;
    for (const auto& r : ref_tokens) {
      ref_counts.push_back(count_ngrams(r, n));
      for (const auto& [gram, _] : ref_counts.back()) df[gram] += 1.0;
    }
    auto weight = [&](const std::vector<std::string>& gram) {
      const auto it = df.find(gram);
      return log_docs - std::log(std::max(1.0, it == df.end() ? 0.0 : it->second));
    };
    for (std::size_t p = 0; p < candidates.size(); ++p) {
      const auto cc = count_ngrams(cand_tokens[p], n);
      const auto& rc = ref_counts[p];
      double dot = 0.0, nc = 0.0, nr = 0.0;
      for (const auto& [gram, count] : cc) {
        const double w = static_cast<double>(count) * weight(gram);
        nc += w * w;
        const auto it = rc.find(gram);
        if (it != rc.end()) dot += w * static_cast<double>(it->second) * weight(gram);
      }
      for (const auto& [gram, count] : rc) {
        const double w = static_cast<double>(count) * weight(gram);
        nr += w * w;
      }
      if (nc > 0.0 && nr > 0.0) per_pair[p] += dot / (std::sqrt(nc) * std::sqrt(nr));
    }
  }
  double total = 0.0;
  for (double s : per_pair) total += s / 4.0 * 10.0;
  return total / static_cast<double>(candidates.size());
}

std::optional<double> div2(const Paragraph& paragraph) {
  const auto t = paragraph.tokens();
  if (t.size() < 2) return std::nullopt;
  std::set<std::pair<std::string, std::string>> distinct;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) distinct.emplace(t[i], t[i + 1]);
  return static_cast<double>(distinct.size()) / static_cast<double>(t.size() - 1);
}

std::optional<double> rep4(const Paragraph& paragraph) {
  const auto t = paragraph.tokens();
  if (t.size() < 4) return std::nullopt;
  std::set<std::vector<std::string>> seen;
  std::size_t repeats = 0;
  const auto total = t.size() - 3;
  for (std::size_t i = 0; i < total; ++i) {
    std::vector<std::string> gram(t.begin() + static_cast<std::ptrdiff_t>(i),
                                  t.begin() + static_cast<std::ptrdiff_t>(i + 4));
    if (!seen.insert(std::move(gram)).second) ++repeats;
  }
  return static_cast<double>(repeats) / static_cast<double>(total);
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["bleu4"] = bleu4;
  j["rouge_l"] = rouge_l;
  j["cider"] = cider;
  j["div2"] = div2;
  j["rep4"] = rep4;
  j["warnings"] = warnings;
  return j.dump();
}

std::string MetricReport::to_table() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%8s %8s %8s %8s %8s\n%8.2f %8.2f %8.2f %8.2f %8.2f\n", "B@4", "C", "R",
                "Div@2", "R@4", 100.0 * bleu4, 100.0 * cider, 100.0 * rouge_l, 100.0 * div2,
                100.0 * rep4);
  return buf;
}

MetricReport evaluate_corpus(const std::vector<Paragraph>& candidates,
                             const std::vector<Paragraph>& references) {
  MetricReport r;
  r.bleu4 = bleu4(candidates, references);
  r.rouge_l = rouge_l(candidates, references);
  r.cider = cider(candidates, references);
  double d2 = 0.0, r4 = 0.0;
  std::size_t n2 = 0, n4 = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (auto v = div2(candidates[i])) {
      d2 += *v;
      ++n2;
    } else {
      r.warnings.push_back("div2: paragraph " + std::to_string(i) + " has < 2 tokens, skipped");
    }
    if (auto v = rep4(candidates[i])) {
      r4 += *v;
      ++n4;
    } else {
      r.warnings.push_back("rep4: paragraph " + std::to_string(i) + " has < 4 tokens, skipped");
    }
  }
  r.div2 = n2 ? d2 / static_cast<double>(n2) : 0.0;
  r.rep4 = n4 ? r4 / static_cast<double>(n4) : 0.0;
  return r;
}

}  // namespace vlcap
