#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "ash/io.hpp"
#include "ash/rng.hpp"
#include "ash/simulate.hpp"
#include "helpers.hpp"

using namespace ash;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("ash_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int n = 0;
        return n;
    }
};

} // namespace

TEST_CASE("doubles survive the 17-digit round trip") {
    Rng rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        double x = rng.uniform(-1e6, 1e6);
        if (trial % 3 == 0) {
            x = rng.uniform(0.0, 1.0) * 1e-5;
        }
        CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
    }
    CHECK(std::strtod(format_double(0.1).c_str(), nullptr) == 0.1);
    CHECK(std::strtod(format_double(1e-300).c_str(), nullptr) == 1e-300);
}

TEST_CASE("model files round trip exactly") {
    TempDir dir;
    Rng rng(17);
    const HawkesNetwork net = testing::make_random_network(rng, 7, 2.0, 0.73, 0.6);
    Model model{net, testing::random_vector(rng, 7, 0.0, 0.5)};
    const std::string path = dir.file("model.json");
    write_model(path, model);
    const Model back = read_model(path);
    CHECK(back.net == model.net);
    CHECK(back.lambda0 == model.lambda0);
}

TEST_CASE("model files validate on load") {
    TempDir dir;
    const std::string path = dir.file("bad.json");
    {
        std::ofstream out(path);
        out << R"({"m": 2, "omega": 1.0, "lambda0": [0.1, 0.2], "A": [[0, 5, 0.1]]})";
    }
    CHECK_THROWS_WITH_AS(static_cast<void>(read_model(path)),
                         doctest::Contains("out of range"), std::runtime_error);
    CHECK_THROWS_AS(static_cast<void>(read_model(dir.file("missing.json"))),
                    std::runtime_error);
}

TEST_CASE("event logs round trip with and without labels") {
    TempDir dir;
    Rng rng(27);
    const HawkesNetwork net = testing::make_random_network(rng, 5, 2.0, 1.0, 0.6);
    const EventLog log =
        simulate_cascades(net, testing::random_vector(rng, 5, 0.2, 0.6), 20.0, 3, 77);

    const std::string labeled = dir.file("events.csv");
    write_events(labeled, log, /*labels=*/true);
    const EventLog back = read_events(labeled, 20.0);
    CHECK(back == log);

    const std::string bare = dir.file("bare.csv");
    write_events(bare, log, /*labels=*/false);
    const EventLog unlabeled = read_events(bare, 20.0);
    REQUIRE(unlabeled.cascades.size() == log.cascades.size());
    for (std::size_t c = 0; c < log.cascades.size(); ++c) {
        REQUIRE(unlabeled.cascades[c].events.size() == log.cascades[c].events.size());
        for (std::size_t i = 0; i < log.cascades[c].events.size(); ++i) {
            const Event& e = unlabeled.cascades[c].events[i];
            CHECK(e.time == log.cascades[c].events[i].time);
            CHECK(e.user == log.cascades[c].events[i].user);
            CHECK(e.generation == kUnknownGeneration);
        }
    }
}

TEST_CASE("event parsing reports the offending line") {
    TempDir dir;
    const std::string path = dir.file("events.csv");
    {
        std::ofstream out(path);
        out << "cascade_id,user_id,time\n0,0,1.5\n0,zero,2.5\n";
    }
    CHECK_THROWS_WITH_AS(static_cast<void>(read_events(path, 10.0)),
                         doctest::Contains("line 3"), std::runtime_error);
}

TEST_CASE("vector files round trip and verify coverage") {
    TempDir dir;
    Rng rng(37);
    const VectorXd v = testing::random_vector(rng, 6, -2.0, 2.0);
    const std::string path = dir.file("vec.csv");
    write_vector(path, v, "value");
    CHECK(read_vector(path, 6) == v);
    CHECK_THROWS_AS(static_cast<void>(read_vector(path, 7)), std::runtime_error);
}

TEST_CASE("support files parse coordinate pairs") {
    TempDir dir;
    const std::string path = dir.file("support.csv");
    {
        std::ofstream out(path);
        out << "row,col\n0,1\n1,0\n1,1\n";
    }
    const SupportPattern support = read_support(path, 2);
    CHECK(support.m == 2);
    CHECK(support.entries.size() == 3);
}

TEST_CASE("sweep rows serialize with the table headers") {
    TempDir dir;
    std::vector<SweepRow> rows(2);
    rows[0] = {0.1, 5, 0.5, 1.25, true, false, ""};
    rows[1] = {0.2, 3, 0.4, 1.1, true, false, ""};
    const std::string path = dir.file("sweep.csv");
    write_sweep_csv(path, rows);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "gamma,# Non-zeros,Budget consumed,objective");
}

TEST_CASE("interval splitting preserves cascades") {
    EventLog log;
    log.cascades.push_back(Cascade{5.0, {{0, 1.0, 0, kNoParent}}});
    log.cascades.push_back(Cascade{5.0, {}});
    const auto intervals = split_into_intervals(log);
    REQUIRE(intervals.size() == 2);
    CHECK(intervals[0].cascades.size() == 1);
    CHECK(intervals[0].cascades[0] == log.cascades[0]);
}
