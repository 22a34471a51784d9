#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>

#include "cli_util.hpp"
#include "fradiag/data.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = test_util::temp_path("cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("usage errors exit with 2", "[cli]") {
    const auto dir = scratch("usage");
    const auto log = (dir / "log.txt").string();
    auto r = cli_util::run("frobnicate", log);
    CHECK(r.code == 2);
    CHECK(r.output.find("Usage") != std::string::npos);
    CHECK(cli_util::run("", log).code == 2);
    CHECK(cli_util::run("gen --group 1 --bogus 3", log).code == 2);
    CHECK(cli_util::run("gen --group 7 --out x.frds", log).code == 2);
    CHECK(cli_util::run("train --data does_not_exist.frds", log).code == 2);
}

TEST_CASE("runtime errors exit with 1 and a single error line", "[cli]") {
    const auto dir = scratch("runtime");
    const auto bad = dir / "bad.frds";
    std::ofstream(bad) << "not a dataset";
    const auto r = cli_util::run("eval --model " + bad.string() + " --data " + bad.string() + " --out " +
                                     (dir / "out").string(),
                                 (dir / "log.txt").string());
    CHECK(r.code == 1);
    CHECK(r.output.rfind("error: format:", 0) == 0);
    CHECK(std::count(r.output.begin(), r.output.end(), '\n') == 1);
}

TEST_CASE("gen writes a strided dataset", "[cli]") {
    const auto dir = scratch("gen");
    const auto out = dir / "g2.frds";
    const auto r = cli_util::run("gen --group 2 --seed 7 --stride 100 --out " + out.string() + " --csv " +
                                     (dir / "g2.csv").string(),
                                 (dir / "log.txt").string());
    REQUIRE(r.code == 0);
    const auto ds = fradiag::read_dataset(out.string());
    CHECK(ds.size() == 15);
    CHECK(ds.connection == fradiag::Connection::CIW);
    CHECK(fs::exists(dir / "g2.csv"));
}

TEST_CASE("default output directory comes from the environment", "[cli]") {
    const auto dir = scratch("env");
    ::setenv("FRADIAG_OUT_DIR", dir.string().c_str(), 1);
    const auto r = cli_util::run("gen --group 1 --stride 500", (dir / "log.txt").string());
    ::unsetenv("FRADIAG_OUT_DIR");
    CHECK(r.code == 0);
    bool found = false;
    for (const auto& e : fs::recursive_directory_iterator(dir)) found = found || e.path().extension() == ".frds";
    CHECK(found);
}

TEST_CASE("saved manifests locate models relative to themselves", "[cli]") {
    const auto dir = scratch("manifest");
    const auto log = (dir / "log.txt").string();
    const std::string d = dir.string();
    REQUIRE(cli_util::run("gen --group 1 --stride 100 --out " + d + "/g1.frds", log).code == 0);
    REQUIRE(cli_util::run("gen --group 2 --stride 100 --out " + d + "/g2.frds", log).code == 0);
    const std::string train = " --arch fra-dialight --scale 0.02 --epochs 1 --batch 4";
    REQUIRE(cli_util::run("train --data " + d + "/g1.frds" + train + " --out " + d + "/models/s1.fram", log).code == 0);
    REQUIRE(cli_util::run("train --data " + d + "/g2.frds --task joint" + train + " --out " + d + "/models/s2.fram", log)
                .code == 0);
    REQUIRE(cli_util::run("diagnose --stage1 " + d + "/models/s1.fram --stage2 " + d + "/models/s2.fram --ee " + d +
                              "/g1.frds --ciw " + d + "/g2.frds --save-manifest " + d + "/run/pipeline.txt --out " + d +
                              "/run/diag",
                          log)
                .code == 0);
    const std::string manifest = cli_util::slurp(dir / "run" / "pipeline.txt");
    CHECK(manifest.find("stage1.model ../models/s1.fram\n") != std::string::npos);
    CHECK(manifest.find("stage2.model ../models/s2.fram\n") != std::string::npos);
    CHECK(manifest.find(d) == std::string::npos);

    fs::rename(dir / "run", dir / "moved_run");
    CHECK(cli_util::run("diagnose --manifest " + d + "/moved_run/pipeline.txt --ee " + d + "/g1.frds --ciw " + d +
                            "/g2.frds --out " + d + "/moved_run/diag2",
                        log)
              .code == 0);
}
