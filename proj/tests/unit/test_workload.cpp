#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "support/generators.hpp"
#include "uae/error.hpp"
#include "uae/workload.hpp"

using namespace uae;

namespace {

EncodedTable small_table(std::vector<std::vector<std::string>> rows, std::vector<std::string> header) {
  return ingest_records(CsvRecords{std::move(header), std::move(rows)});
}

// Second, independent counter: evaluates predicates on raw text values.
std::int64_t nested_loop_count(const EncodedTable& t, const Query& q) {
  std::int64_t count = 0;
  for (std::size_t r = 0; r < t.row_count(); ++r) {
    bool ok = true;
    for (const auto& p : q.predicates) {
      const std::size_t c = t.column_index(p.column);
      if (!testing::satisfies(p, t.schema()[c], t.code(r, c))) {
        ok = false;
        break;
      }
    }
    count += ok ? 1 : 0;
  }
  return count;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("to_region examples") {
  const auto t = small_table({{"5", "0"}, {"6", "1"}, {"7", "2"}, {"7", "3"}}, {"A", "B"});
  const auto r = to_region(Query{{{"A", Op::eq, {"6"}}}}, t.schema());
  CHECK(r.allowed[0](0) == false);
  CHECK(r.allowed[0](1) == true);
  CHECK(r.allowed[0](2) == false);
  CHECK_FALSE(r.wildcard[0]);
  CHECK(r.wildcard[1]);

  const auto b = to_region(Query{{{"B", Op::gt, {"1"}}, {"B", Op::le, {"2"}}}}, t.schema());
  CHECK(b.allowed[1](0) == false);
  CHECK(b.allowed[1](1) == false);
  CHECK(b.allowed[1](2) == true);
  CHECK(b.allowed[1](3) == false);

  const auto empty = to_region(Query{{{"B", Op::gt, {"2"}}, {"B", Op::lt, {"1"}}}}, t.schema());
  CHECK(empty.empty());
  CHECK(exact_cardinality(t, Query{{{"B", Op::gt, {"2"}}, {"B", Op::lt, {"1"}}}}) == 0);
  CHECK(exact_cardinality(t, Query{}) == 4);
  CHECK_THROWS_AS(to_region(Query{{{"C", Op::eq, {"1"}}}}, t.schema()), ValidationError);

  // Literals outside the dictionary.
  CHECK(exact_cardinality(t, Query{{{"A", Op::eq, {"5.5"}}}}) == 0);
  CHECK(exact_cardinality(t, Query{{{"A", Op::lt, {"6.5"}}}}) == 2);
  CHECK(exact_cardinality(t, Query{{{"A", Op::in, {"5", "7", "9"}}}}) == 3);
  CHECK(exact_cardinality(t, Query{{{"A", Op::ne, {"7"}}}}) == 2);
}

TEST_CASE("nulls never match") {
  const auto t = small_table({{""}, {"a"}, {"b"}}, {"x"});
  CHECK(exact_cardinality(t, Query{{{"x", Op::ne, {"a"}}}}) == 1);
  CHECK(exact_cardinality(t, Query{{{"x", Op::lt, {"b"}}}}) == 1);
  CHECK(exact_cardinality(t, Query{{{"x", Op::eq, {""}}}}) == 0);
}

TEST_CASE("region counts agree with brute-force indicators") {
  Rng rng(1);
  const auto t = testing::random_table(rng, {6, 9, 4, 12}, 200);
  for (int i = 0; i < 1000; ++i) {
    const auto q = testing::random_query(rng, t);
    const auto region = to_region(q, t.schema());
    for (std::size_t r = 0; r < t.row_count(); ++r) {
      bool direct = true;
      for (const auto& p : q.predicates) direct = direct && testing::satisfies(p, t.schema()[t.column_index(p.column)], t.code(r, t.column_index(p.column)));
      if (direct != region.contains(t.row(r))) {
        FAIL("region mismatch on row " << r);
      }
    }
  }
}

TEST_CASE("exact cardinality equals an independent nested-loop counter") {
  Rng rng(2);
  const auto t = testing::skewed_table(3, 1000, 5, 20, 1.2, 0.5);
  for (int i = 0; i < 500; ++i) {
    const auto q = testing::random_query(rng, t);
    REQUIRE(exact_cardinality(t, q) == nested_loop_count(t, q));
  }
}

TEST_CASE("generated workloads respect the spec") {
  Rng rng(3);
  const auto t = testing::skewed_table(4, 3000, 6, 150, 1.1, 0.4);
  WorkloadSpec spec;
  spec.train_count = 300;
  spec.test_count = 60;
  spec.seed = 11;
  const auto w = generate_workload(t, spec);
  CHECK(w.train.size() == 300);
  CHECK(w.test_in_workload.size() == 60);
  CHECK(w.test_random.size() == 60);

  std::set<std::string> train_keys;
  for (const auto& q : w.train) {
    train_keys.insert(canonical_key(q.query));
    CHECK(q.cardinality >= 1);
    CHECK(q.cardinality == exact_cardinality(t, q.query));
    CHECK(q.cardinality <= static_cast<std::int64_t>(t.row_count()));
  }
  for (const auto* suite : {&w.test_in_workload, &w.test_random}) {
    for (const auto& q : *suite) {
      CHECK(train_keys.count(canonical_key(q.query)) == 0);
      CHECK(q.cardinality == exact_cardinality(t, q.query));
    }
  }
  // Largest-domain column is bounded by a narrow window in every in-workload query.
  std::size_t bounded = 0;
  for (std::size_t c = 1; c < t.num_columns(); ++c) {
    if (t.schema()[c].domain_size() > t.schema()[bounded].domain_size()) bounded = c;
  }
  const auto& name = t.schema()[bounded].name();
  for (const auto& q : w.train) {
    const auto r = to_region(q.query, t.schema());
    CHECK_FALSE(r.wildcard[bounded]);
    CHECK(r.allowed[bounded].count() <= std::max<Eigen::Index>(2, std::lround(0.01 * t.schema()[bounded].domain_size())));
    int others = 0;
    for (const auto& p : q.query.predicates) others += p.column != name;
    CHECK(others >= 1);
  }
}

TEST_CASE("full target volume degenerates to a wildcard") {
  const auto t = testing::skewed_table(5, 500, 4, 30, 1.1, 0.3);
  WorkloadSpec spec;
  spec.target_volume = 1.0;
  spec.bounded_column = "z0";
  spec.train_count = 20;
  spec.test_count = 5;
  const auto w = generate_workload(t, spec);
  for (const auto& q : w.train) {
    for (const auto& p : q.query.predicates) CHECK(p.column != "z0");
  }
  spec.target_volume = 0.01;  // 30 values < 1 / 0.01
  CHECK_THROWS_AS(generate_workload(t, spec), ValidationError);
  spec.target_volume = 0.0;
  CHECK_THROWS_AS(generate_workload(t, spec), ValidationError);
}

TEST_CASE("workload files round trip and are deterministic") {
  const auto t = testing::skewed_table(6, 800, 5, 120, 1.1, 0.3);
  WorkloadSpec spec;
  spec.train_count = 50;
  spec.test_count = 10;
  spec.seed = 9;
  const auto a = generate_workload(t, spec);
  const auto b = generate_workload(t, spec);
  const auto dir = std::filesystem::temp_directory_path();
  write_workload(dir / "uae_w_a.jsonl", a.train);
  write_workload(dir / "uae_w_b.jsonl", b.train);
  CHECK(slurp(dir / "uae_w_a.jsonl") == slurp(dir / "uae_w_b.jsonl"));
  const auto back = read_workload(dir / "uae_w_a.jsonl");
  REQUIRE(back.size() == a.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].query == a.train[i].query);
    CHECK(back[i].cardinality == a.train[i].cardinality);
  }

  const LabeledQuery q{Query{{{"name", Op::in, {"x", "12", "1.5", "007"}}}}, 3};
  const auto j = to_json(q);
  CHECK(j.dump() == R"({"predicates":[{"col":"name","op":"IN","vals":["x",12,1.5,"007"]}],"card":3})");
  CHECK(labeled_query_from_json(nlohmann::json::parse(j.dump())).query == q.query);

  std::ofstream(dir / "uae_w_bad.jsonl") << "{\"predicates\":[{\"col\":\"a\",\"op\":\"~\",\"vals\":[1]}]}\n";
  CHECK_THROWS_AS(read_workload(dir / "uae_w_bad.jsonl"), ValidationError);
  std::ofstream(dir / "uae_w_bad2.jsonl") << "{not json\n";
  CHECK_THROWS_AS(read_workload(dir / "uae_w_bad2.jsonl"), ValidationError);
}
