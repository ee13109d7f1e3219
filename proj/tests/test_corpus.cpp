// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "sage/corpus.hpp"
#include "sage/embedding_store.hpp"
#include "sage/report_io.hpp"

using namespace sage;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("sage_corpus_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& f) const { return path / f; }
};

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

EvaluationRecord aligned_record(std::size_t n = 5) {
  EvaluationRecord r;
  r.question_id = "q7";
  r.source = "Is it fine to lie?";
  for (std::size_t i = 0; i < n; ++i) r.paraphrases.push_back({"paraphrase number " + std::to_string(i), 0.8 + 0.01 * i});
  ResponseSet rs;
  rs.model_id = "m1";
  rs.generation = {"m1", 0.0, 128};
  for (std::size_t i = 0; i < n; ++i) {
    rs.answers.push_back("answer " + std::to_string(i));
    rs.rots.push_back("You should answer " + std::to_string(i) + ".");
  }
  r.responses.push_back(rs);
  ResponseSet cond = rs;
  cond.variant = ResponseVariant::kRotConditioned;
  cond.rots.clear();
  cond.given_rots.assign(n, "Be honest.");
  r.responses.push_back(cond);
  return r;
}

}  // namespace

TEST(LoadQuestions, ParsesValidLines) {
  TempDir d("q");
  write(d / "q.jsonl", "{\"id\":\"a\",\"question\":\"Why?\"}\n\n{\"id\":2,\"question\":\"How?\"}\n");
  const auto qs = load_questions(d / "q.jsonl");
  ASSERT_EQ(qs.size(), 2u);
  EXPECT_EQ(qs[0].id, "a");
  EXPECT_EQ(qs[1].id, "2");
}

TEST(LoadQuestions, EmptyFileGivesNothing) {
  TempDir d("e");
  write(d / "q.jsonl", "");
  EXPECT_TRUE(load_questions(d / "q.jsonl").empty());
}

TEST(LoadQuestions, DuplicateIdNamed) {
  TempDir d("dup");
  write(d / "q.jsonl", "{\"id\":\"a\",\"question\":\"Why?\"}\n{\"id\":\"a\",\"question\":\"How?\"}\n");
  try {
    load_questions(d / "q.jsonl");
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
}

TEST(LoadQuestions, MalformedLineReportsLineNumber) {
  TempDir d("bad");
  write(d / "q.jsonl", "{\"id\":\"a\",\"question\":\"Why?\"}\n{\"id\":\"b\",\n");
  try {
    load_questions(d / "q.jsonl");
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  write(d / "q2.jsonl", "{\"id\":\"a\",\"question\":\"  \"}\n");
  EXPECT_THROW(load_questions(d / "q2.jsonl"), SchemaError);
}

TEST(LoadQuestions, HeaderAcceptedAndWrongSchemaRejected) {
  TempDir d("hdr");
  save_questions({{"x", "Is it right?"}}, d / "q.jsonl");
  EXPECT_EQ(load_questions(d / "q.jsonl").size(), 1u);
  save_records({aligned_record()}, d / "r.jsonl");
  EXPECT_THROW(load_questions(d / "r.jsonl"), SchemaError);
}

TEST(Records, RoundTrip) {
  TempDir d("rt");
  std::vector<EvaluationRecord> rs{aligned_record(), aligned_record(3)};
  rs[1].question_id = "q8";
  rs[1].paraphrases[0].quality = 0.1 + 0.2;  // not representable in short decimal
  save_records(rs, d / "r.jsonl");
  EXPECT_EQ(load_records(d / "r.jsonl"), rs);
  EXPECT_FALSE(fs::exists(d / "r.jsonl.tmp"));
}

TEST(Records, LoadRejectsInvalid) {
  TempDir d("inv");
  auto one = aligned_record(1);
  save_records({one}, d / "one.jsonl");
  EXPECT_THROW(load_records(d / "one.jsonl"), SchemaError);

  auto mis = aligned_record(5);
  mis.responses[0].answers.pop_back();
  save_records({mis}, d / "mis.jsonl");
  EXPECT_THROW(load_records(d / "mis.jsonl"), SchemaError);

  auto a = aligned_record(), b = aligned_record();
  save_records({a, b}, d / "dup.jsonl");
  EXPECT_THROW(load_records(d / "dup.jsonl"), SchemaError);

  write(d / "nohdr.jsonl", to_json(aligned_record()).dump() + "\n");
  EXPECT_THROW(load_records(d / "nohdr.jsonl"), SchemaError);
}

TEST(ValidateRecord, Examples) {
  EXPECT_TRUE(validate_record(aligned_record()).empty());

  auto empty_rot = aligned_record();
  empty_rot.responses[0].rots[2] = " . ";
  EXPECT_EQ(validate_record(empty_rot).size(), 1u);

  auto short_answers = aligned_record(5);
  short_answers.responses[0].answers.pop_back();
  EXPECT_EQ(validate_record(short_answers).size(), 1u);

  auto many = aligned_record(1);
  many.paraphrases[0].quality = 2.0;
  EXPECT_GE(validate_record(many).size(), 2u);
}

TEST(Annotations, ParseAndValidate) {
  TempDir d("ann");
  write(d / "a.jsonl",
        "{\"question_id\":\"q1\",\"pair\":[0,1],\"labels\":[\"Y\",\"N\",\"NA\"]}\n"
        "{\"question_id\":\"q1\",\"pair\":[1,2],\"labels\":[\"Y\",\"Y\",\"Y\"]}\n");
  const auto a = load_annotations(d / "a.jsonl");
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].labels[2], Label::kNotApplicable);
  save_annotations(a, d / "b.jsonl");
  EXPECT_EQ(load_annotations(d / "b.jsonl"), a);

  write(d / "bad.jsonl", "{\"question_id\":\"q1\",\"pair\":[1,1],\"labels\":[\"Y\",\"N\",\"NA\"]}\n");
  EXPECT_THROW(load_annotations(d / "bad.jsonl"), SchemaError);
  write(d / "two.jsonl", "{\"question_id\":\"q1\",\"pair\":[0,1],\"labels\":[\"Y\",\"N\"]}\n");
  EXPECT_THROW(load_annotations(d / "two.jsonl"), SchemaError);
  write(d / "lbl.jsonl", "{\"question_id\":\"q1\",\"pair\":[0,1],\"labels\":[\"Y\",\"N\",\"maybe\"]}\n");
  EXPECT_THROW(load_annotations(d / "lbl.jsonl"), SchemaError);
}

TEST(Rots, LoadRejectsDuplicatesAndEmpty) {
  TempDir d("rots");
  write(d / "r.jsonl", "{\"question_id\":\"q1\",\"rot\":\"Be kind.\"}\n");
  EXPECT_EQ(load_rots(d / "r.jsonl").at(0).rot, "Be kind.");
  write(d / "dup.jsonl", "{\"question_id\":\"q1\",\"rot\":\"a\"}\n{\"question_id\":\"q1\",\"rot\":\"b\"}\n");
  EXPECT_THROW(load_rots(d / "dup.jsonl"), SchemaError);
  write(d / "empty.jsonl", "{\"question_id\":\"q1\",\"rot\":\"\"}\n");
  EXPECT_THROW(load_rots(d / "empty.jsonl"), SchemaError);
}

TEST(EmbeddingStore, RoundTripIsBitExact) {
  TempDir d("emb");
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  EmbeddingStore s("enc");
  for (int k = 0; k < 20; ++k) {
    std::vector<double> v(16);
    for (auto& x : v) x = g(rng);
    s.insert("text " + std::to_string(k), EmbeddingVector(v));
  }
  s.save(d / "e.jsonl");
  const auto t = EmbeddingStore::load(d / "e.jsonl", "enc");
  EXPECT_EQ(t.size(), 20u);
  EXPECT_EQ(t.dim(), 16u);
  for (int k = 0; k < 20; ++k) EXPECT_EQ(*t.find("text " + std::to_string(k)), *s.find("text " + std::to_string(k)));
  EXPECT_EQ(t.find("absent"), nullptr);
  EXPECT_THROW(EmbeddingStore::load(d / "e.jsonl", "other"), SchemaError);
}

TEST(EmbeddingStore, DimensionMismatchRejected) {
  EmbeddingStore s("enc");
  s.insert("a", EmbeddingVector({1.0, 2.0}));
  EXPECT_THROW(s.insert("b", EmbeddingVector({1.0})), InputError);
}

TEST(EmbeddingStore, SlowPathAcceptsReformattedLines) {
  TempDir d("slow");
  write(d / "e.jsonl",
        "{\"schema\":\"sage.embeddings\",\"version\":1,\"model\":\"m\",\"dim\":2}\n"
        "{ \"vector\": [1, 2e0], \"key\": \"" + EmbeddingStore::key_for("x") + "\" }\n");
  const auto s = EmbeddingStore::load(d / "e.jsonl");
  ASSERT_NE(s.find("x"), nullptr);
  EXPECT_EQ(s.find("x")->components()[1], 2.0);
  write(d / "bad.jsonl", "{\"schema\":\"sage.embeddings\",\"version\":1,\"model\":\"m\"}\n{\"key\":\"k\",\"vector\":[0,0]}\n");
  EXPECT_THROW(EmbeddingStore::load(d / "bad.jsonl"), SchemaError);
}

TEST(ReportIo, CsvRoundTripAndQuoting) {
  TempDir d("csv");
  ConsistencyReport r;
  r.rows = {{"m,1", Target::kAnswers, Metric::kSage, "q\"1", 0.123456}, {"m2", Target::kRots, Metric::kBleu, "q2", 1.0}};
  emit(scores_table(r), d / "s.csv", ReportFormat::kCsv);
  const auto back = load_score_rows(d / "s.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].model, "m,1");
  EXPECT_EQ(back[0].question_id, "q\"1");
  EXPECT_DOUBLE_EQ(back[0].score, 0.1235);
  EXPECT_EQ(back[1].metric, Metric::kBleu);
}

TEST(ReportIo, EmptyTableIsRefused) {
  TempDir d("empty");
  EXPECT_THROW(emit(scores_table({}), d / "s.csv", ReportFormat::kCsv), InputError);
  EXPECT_FALSE(fs::exists(d / "s.csv"));
}

TEST(ReportIo, MarkdownShape) {
  Table t{{"a", "b"}, {{"1", "x|y"}}};
  EXPECT_EQ(render(t, ReportFormat::kMarkdown), "| a | b |\n| --- | --- |\n| 1 | x\\|y |\n");
  EXPECT_EQ(fixed4(-0.00001), "0.0000");
}
