#include "limi/adult.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "limi/error.hpp"

namespace limi {

namespace {

const std::vector<std::string> kWorkclass = {"Private",   "Self-emp-not-inc", "Self-emp-inc", "Federal-gov",
                                             "Local-gov", "State-gov",        "Without-pay",  "Never-worked", "?"};

const std::vector<std::string> kEducation = {"Preschool",   "1st-4th",    "5th-6th",   "7th-8th",
                                             "9th",         "10th",       "11th",      "12th",
                                             "HS-grad",     "Some-college", "Assoc-voc", "Assoc-acdm",
                                             "Bachelors",   "Masters",    "Prof-school", "Doctorate"};

const std::vector<std::string> kMarital = {"Married-civ-spouse", "Divorced", "Never-married", "Separated",
                                           "Widowed", "Married-spouse-absent", "Married-AF-spouse"};

const std::vector<std::string> kOccupation = {"Tech-support",    "Craft-repair",      "Other-service",
                                              "Sales",           "Exec-managerial",   "Prof-specialty",
                                              "Handlers-cleaners", "Machine-op-inspct", "Adm-clerical",
                                              "Farming-fishing", "Transport-moving",  "Priv-house-serv",
                                              "Protective-serv", "Armed-Forces", "?"};

const std::vector<std::string> kRelationship = {"Wife",          "Own-child",      "Husband",
                                                "Not-in-family", "Other-relative", "Unmarried"};

const std::vector<std::string> kRace = {"White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"};

const std::vector<std::string> kSex = {"Female", "Male"};

const std::vector<std::string> kCountry = {
    "United-States", "Cambodia",    "England",   "Puerto-Rico",        "Canada",     "Germany",
    "Outlying-US(Guam-USVI-etc)",   "India",     "Japan",              "Greece",     "South",
    "China",         "Cuba",        "Iran",      "Honduras",           "Philippines", "Italy",
    "Poland",        "Jamaica",     "Vietnam",   "Mexico",             "Portugal",   "Ireland",
    "France",        "Dominican-Republic",       "Laos",               "Ecuador",    "Taiwan",
    "Haiti",         "Columbia",    "Hungary",   "Guatemala",          "Nicaragua",  "Scotland",
    "Thailand",      "Yugoslavia",  "El-Salvador", "Trinadad&Tobago",  "Peru",       "Hong",
    "Holand-Netherlands", "?"};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r.");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double bin(double v, double width, double lo, double hi) {
  return std::clamp(std::floor(v / width), lo, hi);
}

Dataset read_uci(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  Dataset ds{schema, {}, {}};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '|' || trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(trim(cell));
    if (cells.size() != 15) {
      throw Error(ErrorCode::MissingColumn, path.string() + ":" + std::to_string(line_no) + ": expected 15 fields");
    }
    const auto num = [&](std::size_t i) { return std::stod(cells[i]); };
    Row row;
    row.values = {bin(num(0), 10.0, 1.0, 9.0),
                  schema.column(1).parse(cells[1]),
                  schema.column(2).parse(cells[3]),
                  num(4),
                  schema.column(4).parse(cells[5]),
                  schema.column(5).parse(cells[6]),
                  schema.column(6).parse(cells[7]),
                  schema.column(7).parse(cells[8]),
                  schema.column(8).parse(cells[9]),
                  bin(num(10), 5000.0, 0.0, 19.0),
                  bin(num(11) * 20.0, 4357.0, 0.0, 19.0),
                  std::clamp(std::ceil(num(12) / 10.0), 1.0, 10.0),
                  schema.column(12).parse(cells[13])};
    validate_row(schema, row);
    const auto& label = cells[14];
    if (label != ">50K" && label != "<=50K") {
      throw Error(ErrorCode::BadLabel, path.string() + ":" + std::to_string(line_no) + ": label '" + label + "'");
    }
    ds.rows.push_back(std::move(row));
    ds.labels.push_back(label == ">50K" ? 1 : 0);
  }
  return ds;
}

}  // namespace

Schema adult_schema() {
  auto age = ColumnSpec::numeric("age", 1, 9);
  age.is_protected = true;
  auto race = ColumnSpec::categorical("race", kRace);
  race.is_protected = true;
  race.privileged = {0.0};
  auto sex = ColumnSpec::categorical("sex", kSex);
  sex.is_protected = true;
  sex.privileged = {1.0};
  return Schema({age, ColumnSpec::categorical("workclass", kWorkclass), ColumnSpec::categorical("education", kEducation),
                 ColumnSpec::numeric("education_num", 1, 16), ColumnSpec::categorical("marital_status", kMarital),
                 ColumnSpec::categorical("occupation", kOccupation),
                 ColumnSpec::categorical("relationship", kRelationship), race, sex,
                 ColumnSpec::numeric("capital_gain", 0, 19), ColumnSpec::numeric("capital_loss", 0, 19),
                 ColumnSpec::numeric("hours_per_week", 1, 10), ColumnSpec::categorical("native_country", kCountry)},
                "income", 1);
}

AdultSplit load_uci_adult(const std::filesystem::path& train_path, const std::filesystem::path& test_path) {
  const auto schema = adult_schema();
  return {read_uci(train_path, schema), read_uci(test_path, schema)};
}

}  // namespace limi
