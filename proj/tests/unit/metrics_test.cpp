#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "vlcap/errors.hpp"
#include "vlcap/metrics.hpp"
#include "vlcap/rng.hpp"

namespace vlcap {
namespace {

Paragraph para(std::initializer_list<const char*> sentences) {
  std::vector<std::string> s(sentences.begin(), sentences.end());
  return Paragraph::from_strings(s);
}

TEST(Tokenize, LowercaseStripSplit) {
  EXPECT_EQ(tokenize("  The Cat, sat-down!  "),
            (std::vector<std::string>{"the", "cat", "satdown"}));
  EXPECT_TRUE(tokenize("...").empty());
  EXPECT_EQ(tokenize("a\tb\nc"), tokenize("A B C"));
}

TEST(Bleu, IdentityAndDisjoint) {
  const std::vector<Paragraph> x{para({"a man cuts the onion"})};
  EXPECT_DOUBLE_EQ(bleu4(x, x), 1.0);
  const std::vector<Paragraph> y{para({"dogs bark loudly outside now"})};
  EXPECT_EQ(bleu4(y, x), 0.0);
  EXPECT_THROW(bleu4({}, {}), ContractError);
  EXPECT_THROW(bleu4(x, {x[0], x[0]}), ContractError);
}

TEST(Bleu, HandExpandedCase) {
  const std::vector<Paragraph> c{para({"the cat sat on the mat mat"})};
  const std::vector<Paragraph> r{para({"the cat sat on the mat"})};
  const double want = std::pow(6.0 / 7 * 6.0 / 7 * 5.0 / 6 * 4.0 / 5, 0.25);
  EXPECT_NEAR(bleu4(c, r), want, 1e-12);
  // Short candidate: brevity penalty exp(1 - 6/4).
  const std::vector<Paragraph> s{para({"the cat sat on"})};
  const double bp = std::exp(1.0 - 6.0 / 4.0);
  const double p = std::pow(1.0 * (4.0 / 4.0) * (4.0 / 4.0) * (2.0 / 2.0), 0.25);
  EXPECT_NEAR(bleu4(s, r), bp * p, 1e-12);
}

TEST(Bleu, SelfScoreIsOneOnRandomParagraphs) {
  Rng rng(3);
  const std::vector<std::string> bank{"a", "b", "c", "d", "e", "f"};
  for (int rep = 0; rep < 20; ++rep) {
    std::string s;
    const auto n = 4 + rng.uniform_int(0, 10);
    for (int i = 0; i < n; ++i) s += bank[static_cast<std::size_t>(rng.uniform_int(0, 5))] + " ";
    const std::vector<Paragraph> x{Paragraph::from_strings({s})};
    EXPECT_NEAR(bleu4(x, x), 1.0, 1e-12);
  }
}

TEST(RougeL, Cases) {
  const std::vector<Paragraph> x{para({"a b c d"})};
  EXPECT_DOUBLE_EQ(rouge_l(x, x), 1.0);
  EXPECT_EQ(rouge_l(x, {para({"e f g"})}), 0.0);
  // LCS("a b c d", "a c d e") = 3; P = R = 3/4.
  const double p = 0.75, r = 0.75, b2 = 1.44;
  EXPECT_NEAR(rouge_l(x, {para({"a c d e"})}), (1 + b2) * p * r / (r + b2 * p), 1e-15);
  // Unequal lengths: cand "a b", ref "a x b y z" -> LCS 2, P = 1, R = 0.4.
  const double p2 = 1.0, r2 = 0.4;
  EXPECT_NEAR(rouge_l({para({"a b"})}, {para({"a x b y z"})}),
              (1 + b2) * p2 * r2 / (r2 + b2 * p2), 1e-15);
}

// tf-idf n-gram cosine, recomputed by scanning documents for each n-gram.
double brute_cider(const std::vector<std::vector<std::string>>& cands,
                   const std::vector<std::vector<std::string>>& refs) {
  auto ngrams = [](const std::vector<std::string>& t, std::size_t n) {
    std::map<std::vector<std::string>, double> m;
    for (std::size_t i = 0; i + n <= t.size(); ++i) m[{t.begin() + i, t.begin() + i + n}] += 1;
    return m;
  };
  double total = 0;
  for (std::size_t p = 0; p < cands.size(); ++p) {
    double score = 0;
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto c = ngrams(cands[p], n), r = ngrams(refs[p], n);
      std::set<std::vector<std::string>> all;
      for (auto& [g, _] : c) all.insert(g);
      for (auto& [g, _] : r) all.insert(g);
      double dot = 0, nc = 0, nr = 0;
      for (const auto& g : all) {
        double df = 0;
        for (const auto& doc : refs) df += ngrams(doc, n).count(g) ? 1 : 0;
        const double idf = std::log(static_cast<double>(refs.size())) - std::log(std::max(1.0, df));
        const double a = (c.count(g) ? c.at(g) : 0) * idf;
        const double b = (r.count(g) ? r.at(g) : 0) * idf;
        dot += a * b;
        nc += a * a;
        nr += b * b;
      }
      if (nc > 0 && nr > 0) score += dot / std::sqrt(nc * nr);
    }
    total += 10 * score / 4;
  }
  return total / static_cast<double>(cands.size());
}

TEST(Cider, ThreeDocumentToyMatchesBruteForce) {
  const std::vector<Paragraph> c{para({"a man cuts an onion"}), para({"a dog runs in a park"}),
                                 para({"the chef stirs the pot slowly"})};
  const std::vector<Paragraph> r{para({"a man slices an onion"}), para({"the dog runs in the park"}),
                                 para({"a chef stirs a pot"})};
  std::vector<std::vector<std::string>> ct, rt;
  for (const auto& p : c) ct.push_back(p.tokens());
  for (const auto& p : r) rt.push_back(p.tokens());
  EXPECT_NEAR(cider(c, r), brute_cider(ct, rt), 1e-10);
}

TEST(Cider, IdentityMaximalDisjointZero) {
  const std::vector<Paragraph> r{para({"a man cuts an onion"}), para({"a dog runs in a park"}),
                                 para({"the chef stirs the pot"})};
  const double self = cider(r, r);
  EXPECT_NEAR(self, 10.0, 1e-12);
  const std::vector<Paragraph> other{para({"zebra"}), para({"quartz lamp"}), para({"violin"})};
  EXPECT_EQ(cider(other, r), 0.0);
  EXPECT_THROW(cider({r[0]}, {r[0]}), ContractError);
}

TEST(Div2, HandCounts) {
  EXPECT_DOUBLE_EQ(*div2(para({"a b c d"})), 1.0);
  EXPECT_NEAR(*div2(para({"a b a b"})), 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(*div2(para({"a a a a a"})), 0.25);
  EXPECT_FALSE(div2(para({"a"})).has_value());
  // Bigrams span sentence boundaries (sentences concatenated).
  EXPECT_NEAR(*div2(para({"a b", "a b"})), 2.0 / 3.0, 1e-15);
}

TEST(Rep4, HandCounts) {
  EXPECT_DOUBLE_EQ(*rep4(para({"a b c d e"})), 0.0);
  EXPECT_NEAR(*rep4(para({"a b c d a b c d"})), 0.2, 1e-15);
  EXPECT_NEAR(*rep4(para({"a a a a a a a a"})), 0.8, 1e-15);
  EXPECT_FALSE(rep4(para({"a b c"})).has_value());
}

TEST(Rep4, NonDecreasingWhenAppendingDuplicateFourGram) {
  std::string s = "a b c d e f";
  double prev = *rep4(para({s.c_str()}));
  for (int i = 0; i < 5; ++i) {
    s += " a b c d";
    const double now = *rep4(para({s.c_str()}));
    EXPECT_GE(now, prev);
    prev = now;
  }
}

TEST(Report, CorpusMeansSkipUndefined) {
  const std::vector<Paragraph> c{para({"a b a b"}), para({"x"})};
  const std::vector<Paragraph> r{para({"a b c d"}), para({"x y"})};
  const auto rep = evaluate_corpus(c, r);
  EXPECT_NEAR(rep.div2, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(rep.rep4, 0.0);
  EXPECT_EQ(rep.warnings.size(), 2u);
  const auto table = rep.to_table();
  EXPECT_LT(table.find("B@4"), table.find("C "));
  EXPECT_LT(table.find("R@4"), std::string::npos);
  const auto j = nlohmann::json::parse(rep.to_json());
  EXPECT_NEAR(j["div2"].get<double>(), rep.div2, 0);
}

TEST(Report, RangesOnRandomCorpora) {
  Rng rng(8);
  const std::vector<std::string> bank{"a", "b", "c", "d", "e"};
  auto random_para = [&] {
    std::string s;
    const auto n = 1 + rng.uniform_int(0, 12);
    for (int i = 0; i < n; ++i) s += bank[static_cast<std::size_t>(rng.uniform_int(0, 4))] + " ";
    return Paragraph::from_strings({s});
  };
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<Paragraph> c, r;
    for (int i = 0; i < 4; ++i) {
      c.push_back(random_para());
      r.push_back(random_para());
    }
    const auto m = evaluate_corpus(c, r);
    for (double v : {m.bleu4, m.rouge_l, m.div2, m.rep4}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-12);
    }
    EXPECT_GE(m.cider, 0.0);
    EXPECT_LE(m.cider, 10.0 + 1e-9);
    EXPECT_EQ(evaluate_corpus(c, r), m);
  }
}

TEST(Fixture, MatchesIndependentOracle) {
  std::ifstream in(std::string(VLCAP_TEST_DATA_DIR) + "/metrics_fixture.json");
  ASSERT_TRUE(in);
  const auto j = nlohmann::json::parse(in);
  std::vector<Paragraph> c, r;
  for (const auto& p : j["candidates"]) c.push_back(Paragraph::from_strings(p.get<std::vector<std::string>>()));
  for (const auto& p : j["references"]) r.push_back(Paragraph::from_strings(p.get<std::vector<std::string>>()));
  ASSERT_EQ(c.size(), 10u);
  const auto& e = j["expected"];
  const auto rep = evaluate_corpus(c, r);
  EXPECT_NEAR(rep.bleu4, e["bleu4"].get<double>(), 1e-10);
  EXPECT_NEAR(rep.rouge_l, e["rouge_l"].get<double>(), 1e-10);
  EXPECT_NEAR(rep.cider, e["cider"].get<double>(), 1e-10);
  EXPECT_NEAR(rep.div2, e["corpus_div2"].get<double>(), 1e-10);
  EXPECT_NEAR(rep.rep4, e["corpus_rep4"].get<double>(), 1e-10);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto d = div2(c[i]);
    const auto q = rep4(c[i]);
    if (e["div2"][i].is_null()) EXPECT_FALSE(d); else EXPECT_NEAR(*d, e["div2"][i].get<double>(), 1e-10);
    if (e["rep4"][i].is_null()) EXPECT_FALSE(q); else EXPECT_NEAR(*q, e["rep4"][i].get<double>(), 1e-10);
  }
  EXPECT_NEAR(bleu4(r, r), 1.0, 1e-10);
  EXPECT_NEAR(rouge_l(r, r), 1.0, 1e-10);
  EXPECT_NEAR(cider(r, r), e["self_cider"].get<double>(), 1e-10);
}

}  // namespace
}  // namespace vlcap
