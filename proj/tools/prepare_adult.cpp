#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "limi/adult.hpp"
#include "limi/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Bin the raw UCI Adult files into the 13-attribute schema"};
  std::string train;
  std::string test;
  std::string out = "data";
  app.add_option("--train", train, "adult.data")->required()->check(CLI::ExistingFile);
  app.add_option("--test", test, "adult.test")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out, "output directory");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto split = limi::load_uci_adult(train, test);
    std::filesystem::create_directories(out);
    limi::write_csv(std::filesystem::path(out) / "adult_train.csv", split.train);
    limi::write_csv(std::filesystem::path(out) / "adult_test.csv", split.test);
    std::ofstream(std::filesystem::path(out) / "adult_schema.json") << split.train.schema.to_json().dump(2) << '\n';
    std::cout << "train " << split.train.size() << " rows, test " << split.test.size() << " rows\n";
  } catch (const limi::Error& e) {
    std::cerr << e.what() << '\n';
    return static_cast<int>(e.family());
  }
  return 0;
}
