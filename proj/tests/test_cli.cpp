#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(REACG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("cli: exit codes") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("attack --help") == 0);
    CHECK(run_cli("") == 2);                          // missing subcommand
    CHECK(run_cli("frobnicate") == 2);                // unknown subcommand
    CHECK(run_cli("attack --attack bogus") == 2);     // invalid flag value
    CHECK(run_cli("attack --model missing.json --data missing.csv --out /tmp/x") == 1);
    CHECK(run_cli("gen-data --out /tmp/reacg_cli_bad.csv --classes 1") == 1);
}

TEST_CASE("cli: gen-data / train / attack / tune / report pipeline") {
    const fs::path dir = fs::temp_directory_path() / "reacg_test_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string d = dir.string();

    CHECK(run_cli("gen-data --out " + d + "/data.csv --samples 90 --classes 3 --dim 2"
                  " --spread 0.15 --seed 7") == 0);
    CHECK(fs::exists(dir / "data.csv"));

    CHECK(run_cli("train --data " + d + "/data.csv --out " + d + "/model.json"
                  " --hidden 8 --epochs 60 --lr 0.05 --seed 7") == 0);
    CHECK(fs::exists(dir / "model.json"));

    CHECK(run_cli("attack --model " + d + "/model.json --data " + d + "/data.csv"
                  " --attack reacg acg --loss cw --eps 8/255 --iters 25 --seed 1 --out " + d +
                  "/run") == 0);
    for (const char* rel : {"run/manifest.json", "run/overlap.csv", "run/reacg_cw_N25/report.json",
                            "run/reacg_cw_N25/per_image.jsonl", "run/acg_cw_N25/ctc_hist.csv"})
        CHECK(fs::exists(dir / rel));

    CHECK(run_cli("report --run " + d + "/run") == 0);
    CHECK(fs::exists(dir / "run/summary.csv"));

    CHECK(run_cli("tune --model " + d + "/model.json --data " + d + "/data.csv"
                  " --budget 4 --seed 2 --eps 0.1 --iters 30 --out " + d + "/tuning.json") == 0);
    CHECK(fs::exists(dir / "tuning.json"));

    fs::remove_all(dir);
}
