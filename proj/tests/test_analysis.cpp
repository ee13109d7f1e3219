// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "sage/analysis.hpp"
#include "sage/report_io.hpp"

using namespace sage;

namespace {

constexpr Label Y = Label::kYes, N = Label::kNo, NA = Label::kNotApplicable;

struct Fixture {
  std::map<std::string, EmbeddingVector> emb;
  EmbeddingLookup lookup() const {
    return [this](std::string_view t) -> const EmbeddingVector* {
      auto it = emb.find(std::string(t));
      return it == emb.end() ? nullptr : &it->second;
    };
  }
};

EvaluationRecord record_with_answers(const std::string& id, std::vector<std::string> answers,
                                     const std::string& model = "m") {
  EvaluationRecord r;
  r.question_id = id;
  for (std::size_t i = 0; i < answers.size(); ++i) r.paraphrases.push_back({"p" + std::to_string(i), 0.9});
  ResponseSet rs;
  rs.model_id = model;
  rs.answers = std::move(answers);
  r.responses.push_back(std::move(rs));
  return r;
}

// Pairwise form of nominal alpha: 1 - (n - 1) * sum_u D_u / sum_{c != k} n_c n_k,
// where D_u counts ordered disagreeing pairs in unit u divided by (m_u - 1).
double alpha_oracle(const std::vector<std::vector<int>>& units) {
  double dis = 0, n = 0, ny = 0, nn = 0;
  for (const auto& u : units) {
    if (u.size() < 2) continue;
    for (std::size_t a = 0; a < u.size(); ++a) {
      for (std::size_t b = 0; b < u.size(); ++b)
        if (a != b && u[a] != u[b]) dis += 1.0 / (u.size() - 1);
      (u[a] == 0 ? ny : nn) += 1;
    }
  }
  n = ny + nn;
  if (dis == 0) return 1.0;
  return 1.0 - (n - 1) * dis / (2 * ny * nn);
}

}  // namespace

TEST(EvaluateQuestion, IdenticalAnswersScoreOne) {
  Fixture f;
  f.emb.emplace("same answer", EmbeddingVector({0.3, 0.4, 0.5}));
  const auto r = record_with_answers("q", std::vector<std::string>(5, "same answer"));
  for (const auto& [m, s] : evaluate_question(r, "m", Target::kAnswers, all_metrics(), f.lookup())) {
    EXPECT_EQ(s, 1.0) << to_string(m);
  }
}

TEST(EvaluateQuestion, OrthogonalAndWorkedExample) {
  Fixture f;
  f.emb.emplace("a", EmbeddingVector({1.0, 0.0}));
  f.emb.emplace("b", EmbeddingVector({0.0, 1.0}));
  f.emb.emplace("a again", EmbeddingVector({1.0, 0.0}));
  const std::vector<Metric> sage_only{Metric::kSage};
  EXPECT_EQ(evaluate_question(record_with_answers("q", {"a", "b"}), "m", Target::kAnswers, sage_only, f.lookup())[0].second,
            0.0);
  EXPECT_NEAR(evaluate_question(record_with_answers("q", {"a", "a again", "b"}), "m", Target::kAnswers, sage_only,
                                f.lookup())[0]
                  .second,
              0.3598468547594925, 1e-12);
}

TEST(EvaluateQuestion, Errors) {
  Fixture f;
  const std::vector<Metric> sage_only{Metric::kSage};
  EXPECT_THROW(evaluate_question(record_with_answers("q", {"a", "b"}), "m", Target::kAnswers, sage_only, f.lookup()),
               InputError);
  EXPECT_THROW(evaluate_question(record_with_answers("q", {"a", "b"}), "m", Target::kRots, sage_only, f.lookup()),
               InputError);
  EXPECT_THROW(evaluate_question(record_with_answers("q", {"a", "b"}), "other", Target::kAnswers, sage_only, f.lookup()),
               InputError);
}

TEST(AggregateReport, SkipsInvalidAndAveragesValid) {
  Fixture f;
  f.emb.emplace("x", EmbeddingVector({1.0, 0.0}));
  f.emb.emplace("y", EmbeddingVector({0.0, 1.0}));
  std::vector<EvaluationRecord> recs{record_with_answers("q1", {"x", "x"}), record_with_answers("q2", {"x", "y"}),
                                     record_with_answers("q3", {"x", "unknown"})};
  ReportOptions o;
  o.metrics = {Metric::kSage};
  o.targets = {Target::kAnswers};
  const auto r = aggregate_report(recs, f.lookup(), o);
  ASSERT_EQ(r.aggregates.size(), 1u);
  EXPECT_DOUBLE_EQ(r.aggregates[0].mean, 0.5);
  EXPECT_EQ(r.aggregates[0].count, 2u);
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_EQ(r.skipped[0].question_id, "q3");

  std::vector<EvaluationRecord> bad{recs[2]};
  EXPECT_THROW(aggregate_report(bad, f.lookup(), o), InputError);
}

TEST(AggregateReport, PermutationInvariantAndDeterministicOutput) {
  Fixture f;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::vector<EvaluationRecord> recs;
  for (int q = 0; q < 30; ++q) {
    std::vector<std::string> ans;
    for (int i = 0; i < 4; ++i) {
      const std::string t = "q" + std::to_string(q) + " answer " + std::to_string(i);
      f.emb.emplace(t, EmbeddingVector({g(rng), g(rng), g(rng)}));
      ans.push_back(t);
    }
    recs.push_back(record_with_answers("q" + std::to_string(q), ans));
  }
  ReportOptions o;
  o.targets = {Target::kAnswers};
  o.threads = 4;
  const auto a = aggregate_report(recs, f.lookup(), o);
  std::shuffle(recs.begin(), recs.end(), rng);
  const auto b = aggregate_report(recs, f.lookup(), o);
  ASSERT_EQ(a.aggregates.size(), b.aggregates.size());
  for (std::size_t k = 0; k < a.aggregates.size(); ++k) EXPECT_EQ(a.aggregates[k].mean, b.aggregates[k].mean);
  EXPECT_EQ(render(scores_table(a), ReportFormat::kCsv), render(scores_table(b), ReportFormat::kCsv));
  EXPECT_EQ(render(aggregates_table(a), ReportFormat::kMarkdown).substr(0, 43),
            "| model | target | metric | mean | count |\n");
}

TEST(AnnotationEntropy, Examples) {
  const std::vector<Label> all_y{Y, Y, Y}, half{Y, N}, three_one{Y, Y, Y, N};
  EXPECT_EQ(annotation_entropy(all_y), 0.0);
  EXPECT_NEAR(annotation_entropy(half), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(annotation_entropy(three_one), 0.5623351446188083, 1e-12);
  EXPECT_THROW(annotation_entropy(std::vector<Label>{}), InputError);
  EXPECT_THROW(annotation_entropy(std::vector<Label>{Y, NA}), InputError);
}

TEST(Krippendorff, Examples) {
  std::vector<AnnotationRecord> agree{{"q", 0, 1, {Y, Y, Y}}, {"q", 1, 2, {N, N, NA}}};
  EXPECT_EQ(krippendorff_alpha(agree), 1.0);
  std::vector<AnnotationRecord> two{{"q", 0, 1, {Y, Y, NA}}, {"q", 1, 2, {Y, N, NA}}};
  EXPECT_NEAR(krippendorff_alpha(two), 0.0, 1e-12);
  // A unit with a single non-NA label contributes nothing.
  auto with_single = two;
  with_single.push_back({"q", 0, 2, {N, NA, NA}});
  EXPECT_EQ(krippendorff_alpha(with_single), krippendorff_alpha(two));
  std::vector<AnnotationRecord> none{{"q", 0, 1, {Y, NA, NA}}};
  EXPECT_THROW(krippendorff_alpha(none), UndefinedStatistic);
}

TEST(Krippendorff, MatchesPairwiseOracleAndIsLabelSymmetric) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> lab(0, 2);
  for (int t = 0; t < 200; ++t) {
    std::vector<AnnotationRecord> anns;
    std::vector<std::vector<int>> units;
    for (int u = 0; u < 12; ++u) {
      AnnotationRecord a{"q", 0, 1, {}};
      std::vector<int> vals;
      for (auto& l : a.labels) {
        const int v = lab(rng);
        l = v == 0 ? Y : v == 1 ? N : NA;
        if (v < 2) vals.push_back(v);
      }
      anns.push_back(a);
      units.push_back(vals);
    }
    double got;
    try {
      got = krippendorff_alpha(anns);
    } catch (const UndefinedStatistic&) {
      continue;
    }
    EXPECT_NEAR(got, alpha_oracle(units), 1e-12);
    auto flipped = anns;
    for (auto& a : flipped)
      for (auto& l : a.labels) l = l == Y ? N : l == N ? Y : NA;
    EXPECT_NEAR(krippendorff_alpha(flipped), got, 1e-12);
  }
}

TEST(Pearson, Examples) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_NEAR(pearson(x, std::vector<double>{2, 4, 6}), 1.0, 1e-15);
  EXPECT_NEAR(pearson(x, std::vector<double>{3, 2, 1}), -1.0, 1e-15);
  EXPECT_NEAR(pearson(x, std::vector<double>{1, 3, 2}), 0.5, 1e-15);
  EXPECT_THROW(pearson(x, std::vector<double>{1, 1, 1}), UndefinedStatistic);
  EXPECT_THROW(pearson(x, std::vector<double>{1, 2}), InputError);
}

TEST(Pearson, AffineInvariance) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<double> x(20), y(20), z(20);
  for (int i = 0; i < 20; ++i) {
    x[i] = g(rng);
    y[i] = g(rng);
    z[i] = 3.5 * y[i] - 2.0;
  }
  EXPECT_NEAR(pearson(x, y), pearson(x, z), 1e-12);
}

TEST(Spearman, UsesAverageRanks) {
  EXPECT_EQ(ranks(std::vector<double>{10, 20, 20, 5}), (std::vector<double>{2, 3.5, 3.5, 1}));
  EXPECT_NEAR(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 4, 9, 16}), 1.0, 1e-15);
}

TEST(Correlate, IdenticalSeriesGivesOne) {
  std::vector<AnnotationRecord> anns{{"q1", 0, 1, {Y, Y, Y}}, {"q2", 0, 1, {Y, N, N}}, {"q3", 0, 1, {Y, Y, N}}};
  const auto human = human_series(anns, HumanAggregation::kMean);
  std::vector<ReportRow> rows;
  for (const auto& [q, v] : human) rows.push_back({"m", Target::kAnswers, Metric::kSage, q, v});
  for (const auto& [q, v] : human) rows.push_back({"m", Target::kAnswers, Metric::kBleu, q, 0.2 + 0.5 * v});
  const auto r = correlate_with_humans(rows, anns, HumanAggregation::kMean);
  ASSERT_EQ(r.results.size(), 2u);
  for (const auto& c : r.results) EXPECT_NEAR(c.pearson_r, 1.0, 1e-12);
}

TEST(Correlate, EntropySeriesIsSignFlipped) {
  std::vector<AnnotationRecord> anns{{"q1", 0, 1, {Y, Y, Y}}, {"q2", 0, 1, {Y, N, NA}}};
  const auto h = human_series(anns, HumanAggregation::kEntropy);
  EXPECT_NEAR(h.at("q1"), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(h.at("q2"), 0.0, 1e-15);
  // Two points: any non-constant pair correlates at +-1.
  std::vector<ReportRow> rows{{"m", Target::kAnswers, Metric::kSage, "q1", 0.9},
                              {"m", Target::kAnswers, Metric::kSage, "q2", 0.1}};
  EXPECT_NEAR(correlate_with_humans(rows, anns, HumanAggregation::kEntropy).results.at(0).pearson_r, 1.0, 1e-12);
}

TEST(Correlate, Errors) {
  std::vector<AnnotationRecord> anns{{"q1", 0, 1, {Y, Y, Y}}, {"q2", 0, 1, {Y, N, N}}};
  std::vector<ReportRow> disjoint{{"m", Target::kAnswers, Metric::kSage, "z", 0.5}};
  EXPECT_THROW(correlate_with_humans(disjoint, anns, HumanAggregation::kMean), InputError);
  std::vector<ReportRow> flat{{"m", Target::kAnswers, Metric::kSage, "q1", 0.5},
                              {"m", Target::kAnswers, Metric::kSage, "q2", 0.5}};
  EXPECT_THROW(correlate_with_humans(flat, anns, HumanAggregation::kMean), UndefinedStatistic);
}

namespace {

std::unique_ptr<Gateway> stub_gateway(StubMode mode) {
  StubOptions so;
  so.mode = mode;
  GatewayOptions go;
  go.sleep = [](std::chrono::milliseconds) {};
  return std::make_unique<Gateway>(std::make_shared<StubChatProvider>(so), std::make_shared<StubEmbeddingProvider>(),
                                   go);
}

std::vector<QuestionRecord> some_questions() {
  return {{"q1", "Is it wrong to lie to a friend about a gift you dislike?"},
          {"q2", "Should you report a coworker who steals office supplies?"},
          {"q3", "Is it acceptable to skip a family dinner to finish work?"}};
}

}  // namespace

TEST(Sweep, TemperatureScaledStubDegradesWithTemperature) {
  auto gw = stub_gateway(StubMode::kTemperatureScaled);
  const auto qs = some_questions();
  const auto r = temperature_sweep(qs, default_temperature_grid(), SweepMode::kSameQuestion, "m", *gw);
  for (Metric m : {Metric::kRougeL, Metric::kSage}) {
    const auto c = r.curve(m);
    ASSERT_EQ(c.size(), 7u);
    EXPECT_EQ(c[0], 1.0);
    for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LE(c[i], c[i - 1] + 1e-12);
    EXPECT_LE(spearman(r.temperatures, c), 0.0);
  }
}

TEST(Sweep, ParaphraseModeWithTemperatureBlindStubIsFlat) {
  auto gw = stub_gateway(StubMode::kDigest);
  const auto qs = some_questions();
  const auto r = temperature_sweep(qs, default_temperature_grid(), SweepMode::kParaphrase, "m", *gw);
  for (Metric m : {Metric::kRougeL, Metric::kSage}) {
    const auto c = r.curve(m);
    for (double v : c) EXPECT_NEAR(v, c[0], 1e-12);
  }
}

TEST(Sweep, RejectsBadGrid) {
  auto gw = stub_gateway(StubMode::kDigest);
  const auto qs = some_questions();
  EXPECT_THROW(temperature_sweep(qs, std::vector<double>{0.5, 0.1}, SweepMode::kSameQuestion, "m", *gw), InputError);
  EXPECT_THROW(temperature_sweep(qs, std::vector<double>{}, SweepMode::kSameQuestion, "m", *gw), InputError);
  EXPECT_THROW(temperature_sweep(qs, std::vector<double>{-1.0}, SweepMode::kSameQuestion, "m", *gw), InputError);
}
