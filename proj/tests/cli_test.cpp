#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "pdestride/field.hpp"
#include "pdestride/manifest.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = PDESTRIDE_CLI_PATH;

fs::path work_dir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "pdestride_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

struct RunResult {
    int code = -1;
    std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    const auto log = work_dir() / "last_run.log";
    const std::string cmd = kCli + " " + args + " > " + log.string() + " 2>&1";
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.code = (raw == -1) ? -1 : WEXITSTATUS(raw);
    std::ifstream is(log);
    std::stringstream ss;
    ss << is.rdbuf();
    r.output = ss.str();
    return r;
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// Small, fast Burgers field shared by several tests.
const std::string& burgers_prefix() {
    static const std::string prefix = [] {
        const std::string out = (work_dir() / "bg").string();
        const RunResult r = run_cli("simulate --model burgers --steps 200 --out " + out);
        REQUIRE(r.code == 0);
        return out;
    }();
    return prefix;
}

}  // namespace

TEST_CASE("unknown flags and missing subcommands fail with exit code 1") {
    CHECK(run_cli("simulate --model burgers --frobnicate 1 --out x").code == 1);
    CHECK(run_cli("").code == 1);
    CHECK(run_cli("transmogrify").code == 1);
    CHECK(run_cli("noise --in missing.json --sigma 0.1").code == 1);  // missing required
}

TEST_CASE("simulate writes fields plus a parseable manifest") {
    const std::string prefix = burgers_prefix();
    CHECK(fs::exists(prefix + "_u.json"));
    CHECK(fs::exists(prefix + "_u.bin"));
    const auto manifest_path = prefix + ".manifest.json";
    REQUIRE(fs::exists(manifest_path));
    std::ifstream is(manifest_path);
    nlohmann::json doc;
    is >> doc;
    CHECK(doc.contains("argv"));
    CHECK(doc.contains("version"));
    CHECK(doc.contains("config"));
    CHECK(doc.contains("seeds"));
    REQUIRE(doc.contains("artifacts"));
    // Recorded hashes match the artifacts on disk.
    for (const auto& [path, hash] : doc["artifacts"].items())
        CHECK(pdestride::hash_file(path) == hash.get<std::uint64_t>());
}

TEST_CASE("manifest replay reproduces artifacts bitwise") {
    const auto dir = work_dir();
    const std::string out1 = (dir / "noisy1.json").string();
    const std::string out2 = (dir / "noisy2.json").string();
    REQUIRE(run_cli("noise --in " + burgers_prefix() + "_u.json --sigma 0.02 --seed 9 --out " +
                    out1).code == 0);

    // Re-run the recorded argv with only the output path changed; the
    // binary payloads must be identical.
    std::ifstream is(out1 + ".manifest.json");
    nlohmann::json doc;
    is >> doc;
    std::string args;
    for (size_t i = 1; i < doc["argv"].size(); ++i) {
        std::string a = doc["argv"][i].get<std::string>();
        if (a == out1) a = out2;
        args += (args.empty() ? "" : " ") + a;
    }
    REQUIRE(run_cli(args).code == 0);
    CHECK(read_file(dir / "noisy1.bin") == read_file(dir / "noisy2.bin"));
}

TEST_CASE("convert round-trips bin -> csv -> bin bitwise") {
    const auto dir = work_dir();
    const std::string src = burgers_prefix() + "_u.json";
    const std::string csv = (dir / "u.csv").string();
    const std::string back = (dir / "u_back.json").string();
    REQUIRE(run_cli("convert --in " + src + " --out " + csv).code == 0);
    REQUIRE(run_cli("convert --in " + csv + " --out " + back + " --name u").code == 0);
    CHECK(read_file(burgers_prefix() + "_u.bin") == read_file(dir / "u_back.bin"));
    // Header schema of the csv form.
    std::ifstream is(csv);
    std::string header;
    std::getline(is, header);
    CHECK(header == "t,x,value");
}

TEST_CASE("a truncated payload is reported naming both files") {
    const auto dir = work_dir();
    const std::string json = (dir / "broken.json").string();
    fs::copy_file(burgers_prefix() + "_u.json", json, fs::copy_options::overwrite_existing);
    fs::copy_file(burgers_prefix() + "_u.bin", dir / "broken.bin",
                  fs::copy_options::overwrite_existing);
    fs::resize_file(dir / "broken.bin", fs::file_size(dir / "broken.bin") - 8);
    const RunResult r = run_cli("denoise --in " + json + " --out " +
                                (dir / "out.json").string());
    CHECK(r.code == 2);
    CHECK(r.output.find("broken.bin") != std::string::npos);
    CHECK(r.output.find("broken.json") != std::string::npos);
}

TEST_CASE("simulate -> dictionary -> stride recovers clean burgers") {
    const auto dir = work_dir();
    const std::string design = (dir / "bg_design.json").string();
    const std::string profile = (dir / "bg_profile.csv").string();
    const std::string model = (dir / "bg_model.json").string();
    REQUIRE(run_cli("dictionary --fields " + burgers_prefix() +
                    "_u.json --target u --preset burgers-p19 --n 250 --seed 3 --out " +
                    design).code == 0);
    REQUIRE(run_cli("stride --design " + design +
                    " --solver ihtd --b 50 --seed 1 --profile " + profile +
                    " --model " + model).code == 0);

    std::ifstream is(model);
    nlohmann::json doc;
    is >> doc;
    std::vector<std::string> labels;
    for (const auto& t : doc["support"]) labels.push_back(t["label"]);
    CHECK(labels == std::vector<std::string>{"u*u_x", "u_xx"});
    for (const auto& t : doc["support"])
        CHECK(t["importance"].get<double>() >= 0.8);
    CHECK(doc["meta"]["N"] == 250);
    CHECK(doc["meta"]["p"] == 19);
}

TEST_CASE("stride profiles are identical across thread counts") {
    const auto dir = work_dir();
    const std::string design = (dir / "det_design.json").string();
    REQUIRE(run_cli("dictionary --fields " + burgers_prefix() +
                    "_u.json --target u --preset burgers-p11 --n 120 --seed 5 --out " +
                    design).code == 0);
    const std::string p1 = (dir / "det_p1.csv").string();
    const std::string p4 = (dir / "det_p4.csv").string();
    REQUIRE(run_cli("--threads 1 stride --design " + design +
                    " --solver ihtd --b 40 --seed 2 --profile " + p1 + " --model " +
                    (dir / "det_m1.json").string()).code == 0);
    REQUIRE(run_cli("--threads 4 stride --design " + design +
                    " --solver ihtd --b 40 --seed 2 --profile " + p4 + " --model " +
                    (dir / "det_m4.json").string()).code == 0);
    CHECK(read_file(p1) == read_file(p4));
}

TEST_CASE("solve runs a one-shot solver on a design") {
    const auto dir = work_dir();
    const std::string design = (dir / "bg_design.json").string();
    REQUIRE(fs::exists(design));  // written by the stride test above
    const std::string coef = (dir / "coef.json").string();
    REQUIRE(run_cli("solve --design " + design + " --solver htp --k 2 --out " +
                    coef).code == 0);
    std::ifstream is(coef);
    nlohmann::json doc;
    is >> doc;
    CHECK(doc.contains("support"));
    // htp requires --k, the others --lambda.
    CHECK(run_cli("solve --design " + design + " --solver htp --out " +
                  (dir / "x.json").string()).code == 1);
}

TEST_CASE("achievability writes the expected table schema") {
    const auto dir = work_dir();
    const std::string table = (dir / "ach.csv").string();
    const RunResult r = run_cli(
        "achievability --preset-list p11 --n-list 60 --sigma-list 0 --reps 2 "
        "--mode stride --solver ihtd --seed 4 --out " + table);
    REQUIRE(r.code == 0);
    std::ifstream is(table);
    std::string header, row;
    std::getline(is, header);
    CHECK(header == "model,p,sigma,n,reps,successes,frequency,variance");
    REQUIRE(std::getline(is, row));
    CHECK(row.rfind("burgers,11,", 0) == 0);
}
