#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using mvts::test::TempDir;

namespace {

std::vector<std::string> cells(const std::string& line)
{
    std::vector<std::string> out;
    std::istringstream in(line);
    for (std::string c; std::getline(in, c, ',');) out.push_back(c);
    return out;
}

}  // namespace

// Full-size synthetic benchmark with the shipped configuration: MVTs has the lowest MAPE.
TEST_CASE("compare on the synthetic benchmark ranks MVTs first")
{
    TempDir t;
    std::ostringstream out, err;
    REQUIRE(mvts::cli::run({"--out", (t / "data").string(), "synth", "--n", "500"}, out, err) == 0);
    const int code = mvts::cli::run({"--config", MVTS_BENCHMARK_CONFIG, "--seed", "1", "--out", (t / "cmp").string(),
                                     "compare", "--data", (t / "data").string()},
                                    out, err);
    INFO(err.str());
    REQUIRE(code == 0);

    std::ifstream in(t / "cmp" / "report.csv");
    std::string header, mape_row;
    REQUIRE(std::getline(in, header));
    REQUIRE(std::getline(in, mape_row));
    const auto names = cells(header), values = cells(mape_row);
    REQUIRE(names.size() == 10);
    REQUIRE(values.size() == 10);
    REQUIRE(values[0].rfind("MAPE", 0) == 0);
    std::size_t best = 1;
    for (std::size_t j = 2; j < 10; ++j)
        if (std::stod(values[j]) < std::stod(values[best])) best = j;
    MESSAGE(header << "\n" << mape_row);
    CHECK(names[best] == "MVTs");
    CHECK(fs::exists(t / "cmp" / "config.json"));
}
