#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef TABDC_BIN
#define TABDC_BIN "./tabdc"
#endif

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(TABDC_BIN) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path write_config(const std::string& name, const std::string& body) {
    const fs::path p = fs::temp_directory_path() / name;
    std::ofstream out(p);
    out << body;
    return p;
}

}  // namespace

TEST_CASE("cli exit codes") {
    const fs::path out_dir = fs::temp_directory_path() / "tabdc_cli_test";
    fs::remove_all(out_dir);
    const auto good = write_config("cli_good.json", R"({
      "seed": 2,
      "out_dir": ")" + out_dir.string() + R"(",
      "task": "classification",
      "dataset": {"generate": {"kind": "two_gaussians", "n": 400, "d": 4, "delta": 2.0}},
      "model": {"rounds": 15},
      "condense": {"ipc": 5, "max_iters": 30, "eval_every": 15, "patience": 2}
    })");

    SUBCASE("validation failures exit 2") {
        const auto bad = write_config("cli_bad.json", R"({"dataset": {}, "rho_typo": 1})");
        CHECK(run_cli("prepare --config " + bad.string()) == 2);
        CHECK(run_cli("prepare --config /nonexistent.json") == 2);
    }
    SUBCASE("dependency failures exit 3") {
        CHECK(run_cli("condense --config " + good.string()) == 3);
    }
    SUBCASE("a full pass exits 0") {
        CHECK(run_cli("prepare --config " + good.string()) == 0);
        CHECK(run_cli("train-ref --config " + good.string()) == 0);
        CHECK(run_cli("condense --config " + good.string()) == 0);
        CHECK(run_cli("eval --config " + good.string()) == 0);
        CHECK(run_cli("report --config " + good.string()) == 0);
        CHECK(fs::exists(out_dir / "report.md"));
    }
}
