#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "limi/adult.hpp"
#include "limi/error.hpp"
#include "limi/schema.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace limi;

namespace {

fs::path write_file(const std::string& name, const std::string& text) {
  const auto path = fs::temp_directory_path() / ("limi_test_" + name);
  std::ofstream(path) << text;
  return path;
}

Schema planet_schema() {
  auto planet = ColumnSpec::categorical("planet", {"Mars", "Venus"});
  planet.is_protected = true;
  return Schema({planet, ColumnSpec::numeric("mass", 0, 100)}, "label");
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no limi::Error thrown");
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST_CASE("load_csv parses a small file") {
  const auto path = write_file("three.csv", "planet,mass,label\nMars,10,0\nVenus,99,1\nMars,0,1\n");
  const auto ds = load_csv(path, planet_schema());
  CHECK(ds.size() == 3);
  CHECK(ds.rows[1][0] == 1.0);
  CHECK(ds.rows[1][1] == 99.0);
  CHECK(ds.labels == std::vector<int>{0, 1, 1});
}

TEST_CASE("load_csv rejects bad cells") {
  const auto schema = planet_schema();
  CHECK(code_of([&] { load_csv(write_file("marz.csv", "planet,mass,label\nMarz,10,0\n"), schema); }) ==
        ErrorCode::OutOfDomainValue);
  CHECK(code_of([&] { load_csv(write_file("range.csv", "planet,mass,label\nMars,101,0\n"), schema); }) ==
        ErrorCode::OutOfDomainValue);
  CHECK(code_of([&] { load_csv(write_file("nolabel.csv", "planet,mass\nMars,10\n"), schema); }) ==
        ErrorCode::MissingColumn);
  CHECK(code_of([&] { load_csv(write_file("badlabel.csv", "planet,mass,label\nMars,10,2\n"), schema); }) ==
        ErrorCode::BadLabel);
  CHECK(code_of([&] { load_csv(fs::temp_directory_path() / "limi_test_absent.csv", schema); }) == ErrorCode::Io);
}

TEST_CASE("write_csv round trip") {
  const auto schema = planet_schema();
  Dataset ds{schema, {Row{{0, 5}}, Row{{1, 7}}}, {1, 0}};
  const auto path = fs::temp_directory_path() / "limi_test_roundtrip.csv";
  write_csv(path, ds);
  const auto back = load_csv(path, schema);
  CHECK(back.rows == ds.rows);
  CHECK(back.labels == ds.labels);
}

TEST_CASE("schema json round trip") {
  const auto schema = test::person_schema();
  CHECK(Schema::from_json(schema.to_json()) == schema);
  const auto adult = adult_schema().with_protected({"sex"});
  CHECK(Schema::from_json(adult.to_json()) == adult);
  CHECK(adult.protected_indices() == std::vector<std::size_t>{adult.index_of("sex")});
  CHECK(code_of([&] { (void)adult.index_of("planet"); }) == ErrorCode::MissingColumn);
}

TEST_CASE("adult training split has 32561 rows") {
  const fs::path dir = LIMI_DATA_DIR;
  const auto schema = Schema::load(dir / "adult_schema.json");
  const auto train = load_csv(dir / "adult_train.csv", schema);
  CHECK(train.size() == 32'561);
  CHECK(schema.size() == 13);
  const auto test = load_csv(dir / "adult_test.csv", schema);
  CHECK(test.size() == 16'281);
}

TEST_CASE("encode scales into the unit interval") {
  auto num = ColumnSpec::numeric("n", 0, 100);
  auto cat = ColumnSpec::categorical("c", {"A", "B", "C"});
  CHECK(encode_value(num, 25) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(encode_value(cat, 2) == 1.0);
  CHECK(encode_value(num, 0) == 0.0);
  CHECK(encode_value(cat, 0) == 0.0);

  const auto schema = test::person_schema();
  const auto fv = encode(schema, Row{{1, 5, 1}});
  CHECK(fv.entries == std::vector<double>{1.0, 0.5, 0.5});
  REQUIRE(fv.encoding_map.size() == 3);
  CHECK(fv.encoding_map[2].begin == 2);
  CHECK(fv.encoding_map[2].end == 3);
}

TEST_CASE("encode is injective over a full discrete domain") {
  const auto schema = test::person_schema();
  std::set<std::vector<double>> seen;
  std::size_t n = 0;
  for (double g = 0; g < 2; ++g)
    for (double a = 1; a <= 9; ++a)
      for (double c = 0; c < 3; ++c) {
        const auto fv = encode(schema, Row{{g, a, c}});
        for (double e : fv.entries) CHECK((e >= 0.0 && e <= 1.0));
        seen.insert(fv.entries);
        ++n;
      }
  CHECK(seen.size() == n);
}

TEST_CASE("protected variants") {
  auto schema = test::person_schema();
  SUBCASE("binary attribute has one variant") {
    const auto v = protected_variants(schema, Row{{1, 4, 2}});
    REQUIRE(v.size() == 1);
    CHECK(v[0] == Row{{0, 4, 2}});
  }
  SUBCASE("nine age bins give eight variants") {
    const auto s = schema.with_protected({"age"});
    const Row row{{1, 3, 0}};
    const auto v = protected_variants(s, row);
    CHECK(v.size() == 8);
    for (const auto& r : v) {
      CHECK(r != row);
      CHECK(r[0] == row[0]);
      CHECK(r[2] == row[2]);
    }
  }
  SUBCASE("cartesian product over two protected columns") {
    const auto s = schema.with_protected({"gender", "color"});
    const Row row{{0, 7, 1}};
    const auto v = protected_variants(s, row);
    // brute-force enumeration of the product
    std::vector<Row> expected;
    for (double g = 0; g < 2; ++g)
      for (double c = 0; c < 3; ++c) {
        Row r{{g, 7, c}};
        if (r != row) expected.push_back(r);
      }
    CHECK(v.size() == 5);
    CHECK(v == expected);
  }
}

TEST_CASE("sample_uniform") {
  auto flag = ColumnSpec::categorical("flag", {"no", "yes"});
  flag.is_protected = true;
  const Schema binary({flag}, "label");
  const auto one = sample_uniform(binary, 1, 3);
  REQUIRE(one.size() == 1);
  CHECK((one[0][0] == 0.0 || one[0][0] == 1.0));

  CHECK(sample_uniform(test::person_schema(), 50, 11) == sample_uniform(test::person_schema(), 50, 11));
  CHECK(sample_uniform(test::person_schema(), 50, 11) != sample_uniform(test::person_schema(), 50, 12));

  const auto many = sample_uniform(binary, 10'000, 5);
  double yes = 0;
  for (const auto& r : many) yes += r[0];
  CHECK(yes / 10'000 >= 0.45);
  CHECK(yes / 10'000 <= 0.55);

  for (const auto& r : sample_uniform(adult_schema(), 2'000, 9)) CHECK(is_valid_row(adult_schema(), r));
}

TEST_CASE("uniform stream continues the batch sequence") {
  const auto schema = test::person_schema();
  UniformRowStream stream(schema, 21);
  auto a = stream.next(30);
  const auto b = stream.next(70);
  a.insert(a.end(), b.begin(), b.end());
  CHECK(a == sample_uniform(schema, 100, 21));
}

TEST_CASE("schema validation") {
  auto c = ColumnSpec::numeric("x", 0, 1);
  CHECK(code_of([&] { Schema({c}, "label").validate(); }) == ErrorCode::InvalidSchema);
  c.is_protected = true;
  CHECK(code_of([&] { Schema({c, c}, "label").validate(); }) == ErrorCode::InvalidSchema);
  CHECK(code_of([&] { Schema({c}, "x").validate(); }) == ErrorCode::InvalidSchema);
  Schema({c}, "label").validate();
}
