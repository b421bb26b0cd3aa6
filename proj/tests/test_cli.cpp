#include "swg/cli.hpp"
#include "swg/io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <unistd.h>

using namespace swg;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

// Scratch directory with a small corpus and a briefly trained model, shared by
// every test case of this binary.
struct Workspace {
    fs::path dir;
    Workspace() {
        dir = fs::temp_directory_path() / ("swg_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        REQUIRE(run({"gen-data", "--count", "256", "--seed", "1", "--out", p("corpus.csv")}).code == 0);
        REQUIRE(run({"train", "--corpus", p("corpus.csv"), "--steps", "20", "--seed", "2", "--out", p("w.swgw")})
                    .code == 0);
    }
    ~Workspace() { fs::remove_all(dir); }
    std::string p(const std::string & name) const { return (dir / name).string(); }
};

const Workspace & ws() {
    static Workspace w;
    return w;
}

std::vector<std::vector<double>> read_csv_numbers(const std::string & path, bool header) {
    std::vector<std::vector<double>> rows;
    const auto lines = io::split(io::read_file(path), '\n');
    for (std::size_t i = header ? 1 : 0; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty()) continue;
        std::vector<double> r;
        for (const auto & c : io::split(lines[i], ',')) r.push_back(io::parse_double(c, "cell"));
        rows.push_back(r);
    }
    return rows;
}

} // namespace

TEST_CASE("usage errors exit with 1") {
    CHECK(run({}).code == cli::kExitUsage);
    CHECK(run({"frobnicate"}).code == cli::kExitUsage);
    CHECK(run({"--help"}).code == cli::kExitOk);
    auto r = run({"gen-data", "--count", "0", "--out", ws().p("x.csv")});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find("--count") != std::string::npos);
    r = run({"train", "--corpus", ws().p("missing.csv"), "--out", ws().p("x.swgw")});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find("--corpus") != std::string::npos);
    r = run({"sample", "--weights", ws().p("w.swgw"), "--retain", "0.5", "--out", ws().p("s")});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find("--retain") != std::string::npos);
    r = run({"sample", "--weights", ws().p("w.swgw"), "--hooks", "9.v", "--out", ws().p("s")});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find("--hooks") != std::string::npos);
    r = run({"sample", "--weights", ws().p("w.swgw"), "--omega-c", "2", "--out", ws().p("s")});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find("--omega-c") != std::string::npos);
    r = run({"sample", "--weights", ws().p("w.swgw"), "--class", "12", "--out", ws().p("s")});
    CHECK(r.code == cli::kExitUsage);
    r = run({"sweep", "--weights", ws().p("w.swgw"), "--omega-s", "0,x", "--out", ws().p("m.csv")});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find("--omega-s") != std::string::npos);
    CHECK_FALSE(fs::exists(ws().p("s")));
}

TEST_CASE("data errors exit with 2 and name the file") {
    io::write_file_atomic(ws().p("bad.csv"), "0,1,2,x\n");
    auto r = run({"train", "--corpus", ws().p("bad.csv"), "--out", ws().p("x.swgw")});
    CHECK(r.code == cli::kExitData);
    CHECK(r.err.find("bad.csv") != std::string::npos);

    io::write_file_atomic(ws().p("bad.cfg"), "learning_rate = 3\n");
    r = run({"train", "--corpus", ws().p("corpus.csv"), "--config", ws().p("bad.cfg"), "--out", ws().p("x.swgw")});
    CHECK(r.code == cli::kExitData);
    CHECK(r.err.find("bad.cfg") != std::string::npos);

    io::write_file_atomic(ws().p("bad.swgw"), "NOPE and more bytes");
    r = run({"sample", "--weights", ws().p("bad.swgw"), "--out", ws().p("s")});
    CHECK(r.code == cli::kExitData);
    CHECK(r.err.find("magic") != std::string::npos);
    CHECK(r.err.find("bad.swgw") != std::string::npos);

    io::write_file_atomic(ws().p("vec_bad.csv"), "1,2,three\n");
    r = run({"weaken", "--in", ws().p("vec_bad.csv"), "--out", ws().p("o.csv")});
    CHECK(r.code == cli::kExitData);
    CHECK(r.err.find("line 1") != std::string::npos);
    CHECK_FALSE(fs::exists(ws().p("x.swgw")));
}

TEST_CASE("train writes weights and a loss curve") {
    CHECK(fs::exists(ws().p("w.swgw")));
    const auto rows = read_csv_numbers(ws().p("w.swgw.loss.csv"), true);
    CHECK(rows.size() == 20);
    CHECK(rows[0][0] == 0);
}

TEST_CASE("sample outputs") {
    const auto out = ws().p("sample");
    const auto r = run({"sample", "--weights", ws().p("w.swgw"), "--n", "5", "--seed", "3", "--omega-s", "1",
                        "--class", "cycle", "--omega-c", "0.5", "--trace-json", "--out", out});
    REQUIRE(r.code == 0);
    const auto lines = io::split(io::read_file(out + "/tokens.csv"), '\n');
    CHECK(lines[0].rfind("sample,condition,valid,class_match,score,t0,", 0) == 0);
    CHECK(lines[1].rfind("0,0,", 0) == 0);
    CHECK(lines[3].rfind("2,2,", 0) == 0);
    for (int i = 0; i < 5; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "%04d", i);
        CHECK(fs::exists(out + "/renders/sample_" + name + ".pgm"));
        CHECK(fs::exists(out + "/traces/trace_" + name + ".csv"));
        CHECK(fs::exists(out + "/traces/trace_" + name + ".json"));
    }
    const auto summary = nlohmann::json::parse(io::read_file(out + "/summary.json"));
    CHECK(summary["n"] == 5);
    for (const auto & e : fs::recursive_directory_iterator(out))
        CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
}

TEST_CASE("a single-cell sweep agrees with sample") {
    const auto out = ws().p("s0");
    REQUIRE(run({"sample", "--weights", ws().p("w.swgw"), "--n", "24", "--seed", "5", "--out", out}).code == 0);
    const auto summary = nlohmann::json::parse(io::read_file(out + "/summary.json"));
    REQUIRE(run({"sweep", "--weights", ws().p("w.swgw"), "--omega-s", "0", "--n", "24", "--seed", "5", "--out",
                 ws().p("m.csv")})
                .code == 0);
    const auto lines = io::split(io::read_file(ws().p("m.csv")), '\n');
    CHECK(lines[0] == "omega_s,omega_c,retain,hooks,weak,renorm,n,validity_rate,valid_match_rate,mean_score,"
                      "mean_final_entropy_gap");
    const auto cells = io::split(lines[1], ',');
    CHECK(io::parse_double(cells[7], "v") == summary["validity_rate"].get<double>());
    CHECK(io::parse_double(cells[9], "s") == summary["mean_score"].get<double>());
}

TEST_CASE("sweep grid shape") {
    REQUIRE(run({"sweep", "--weights", ws().p("w.swgw"), "--omega-s", "0,1,2", "--omega-c", "none,1", "--retain",
                 "0:0.1,0:0.9", "--hooks", "all.v;0.q,1.k", "--weak", "spectral,avg", "--class", "cycle", "--n", "2",
                 "--out", ws().p("grid.csv")})
                .code == 0);
    const auto lines = io::split(io::read_file(ws().p("grid.csv")), '\n');
    std::size_t rows = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) rows += !io::trim(lines[i]).empty();
    CHECK(rows == 3 * 2 * 2 * 2 * 2);
    CHECK(lines[1].find("\"all.v\"") != std::string::npos);
}

TEST_CASE("analyze-entropy aggregates cumulative entropy") {
    const auto out = ws().p("s0");
    REQUIRE(run({"analyze-entropy", "--traces", out, "--out", ws().p("ent.csv")}).code == 0);
    const auto rows = read_csv_numbers(ws().p("ent.csv"), true);
    REQUIRE(rows.size() == 64);
    // recompute the last row's base mean from the trace files
    double total = 0;
    for (int i = 0; i < 24; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "/traces/trace_%04d.csv", i);
        for (const auto & r : read_csv_numbers(out + name, true)) total += r[1];
    }
    CHECK(rows.back()[1] == 24);
    CHECK(rows.back()[2] == doctest::Approx(total / 24).epsilon(1e-12));
    CHECK(rows.back()[2] >= rows.front()[2]);
}

TEST_CASE("verify-theory") {
    const auto r = run({"verify-theory", "--dim-x", "16", "--dim-z", "4", "--trials", "100", "--out", ws().p("t.json")});
    CHECK(r.code == 0);
    const auto j = nlohmann::json::parse(io::read_file(ws().p("t.json")));
    CHECK(j["information_loss"]["violations"] == 0);
    CHECK(j["invertible_invariance"]["violations"] == 0);
    CHECK(j["ok"] == true);
}

TEST_CASE("weaken") {
    io::write_file_atomic(ws().p("vec.csv"), "1,2,3,4\n0.5,-1.5,2.25,7,1e-3\n");
    REQUIRE(run({"weaken", "--in", ws().p("vec.csv"), "--out", ws().p("vo.csv"), "--retain", "0:1", "--renorm", "none"})
                .code == 0);
    const auto in = read_csv_numbers(ws().p("vec.csv"), false);
    const auto out = read_csv_numbers(ws().p("vo.csv"), false);
    REQUIRE(out.size() == 2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < in[i].size(); ++j) CHECK(std::abs(out[i][j] - in[i][j]) < 1e-5);

    io::write_file_atomic(ws().p("imp.csv"), "1,0,0,0\n");
    REQUIRE(run({"weaken", "--in", ws().p("imp.csv"), "--out", ws().p("io.csv"), "--retain", "0:0.25", "--renorm",
                 "spatial"})
                .code == 0);
    const auto imp = read_csv_numbers(ws().p("io.csv"), false);
    REQUIRE(imp.size() == 1);
    for (double v : imp[0]) CHECK(v == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("identical flags give identical bytes") {
    auto go = [&](const std::string & tag) {
        run({"sample", "--weights", ws().p("w.swgw"), "--n", "3", "--seed", "9", "--omega-s", "2", "--out",
             ws().p("rep" + tag)});
        return io::read_file(ws().p("rep" + tag) + "/tokens.csv") +
               io::read_file(ws().p("rep" + tag) + "/renders/sample_0002.pgm") +
               io::read_file(ws().p("rep" + tag) + "/traces/trace_0001.csv");
    };
    CHECK(go("a") == go("b"));
}
