#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

// Runs the CLI through the shell, capturing stdout and stderr together.
Run cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " '" + std::string(DGSTAB_CLI) + "' " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    std::array<char, 4096> buf{};
    while (const std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "dgstab_test_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("help and usage errors") {
    CHECK(cli("--help").code == 0);
    CHECK(cli("constants --help").code == 0);
    CHECK(cli("no-such-command").code == 2);
    CHECK(cli("sudc").code == 2);  // --data is required
}

TEST_CASE("constants c2") {
    const auto r = cli("constants c2");
    REQUIRE(r.code == 0);
    const auto pos = r.out.find("C2 = ");
    REQUIRE(pos != std::string::npos);
    CHECK(std::stod(r.out.substr(pos + 5)) == doctest::Approx(0.05).epsilon(0.2));
}

TEST_CASE("gen-data, validation and missing files") {
    const auto dir = scratch("gen");
    const auto r = cli("gen-data --degree 6 --n 1000 --seed 7 --out " + q(dir));
    REQUIRE(r.code == 0);
    std::ifstream in(dir / "data.csv");
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);
    CHECK(line == "x0,x1,label,weight");
    while (std::getline(in, line)) rows += !line.empty();
    CHECK(rows == 1000);
    CHECK(fs::exists(dir / "boundary.json"));
    CHECK(fs::exists(dir / "manifest.json"));

    CHECK(cli("gen-data --degree 20 --out " + q(scratch("bad"))).code == 2);
    CHECK(cli("gen-data --n 0 --out " + q(scratch("bad"))).code == 2);
    CHECK(cli("sudc --data /nonexistent/data.csv --out " + q(scratch("missing"))).code == 1);
}

TEST_CASE("sudc output is independent of DG_THREADS and honours config files") {
    const auto gen = scratch("sudc_data");
    REQUIRE(cli("gen-data --degree 6 --n 1000 --seed 7 --out " + q(gen)).code == 0);
    const auto data = gen / "data.csv";
    const auto a = scratch("sudc1"), b = scratch("sudc4");
    REQUIRE(cli("sudc --data " + q(data) + " --slabs 2000 --out " + q(a), "DG_THREADS=1").code == 0);
    REQUIRE(cli("sudc --data " + q(data) + " --slabs 2000 --out " + q(b), "DG_THREADS=4").code == 0);
    CHECK(slurp(a / "sudc.csv") == slurp(b / "sudc.csv"));
    CHECK(slurp(a / "sudc.json") == slurp(b / "sudc.json"));
    const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    CHECK(manifest["command"] == "sudc");
    CHECK(manifest["artifacts"].size() >= 2);

    const auto c = scratch("sudc_cfg");
    {
        std::ofstream ini(c / "run.ini");
        ini << "[sudc]\nslabs=37\nseed=5\n";
    }
    REQUIRE(cli("--config " + q(c / "run.ini") + " sudc --data " + q(data) + " --out " + q(c)).code == 0);
    CHECK(nlohmann::json::parse(slurp(c / "sudc.json"))["n_slabs"] == 37);
}

TEST_CASE("propagate and train fixture") {
    const auto gen = scratch("prop_data");
    REQUIRE(cli("gen-data --degree 2 --n 800 --seed 1 --out " + q(gen)).code == 0);
    const auto p = scratch("prop");
    const auto r = cli("propagate --map abs --slabs 100 --data " + q(gen / "data.csv") + " --out " + q(p));
    CHECK(r.code == 0);
    CHECK(fs::exists(p / "propagation.json"));
    const auto t = scratch("train");
    const auto tr = cli("train --fixture instability --out " + q(t));
    CHECK(tr.code == 0);
    CHECK(tr.out.find("accuracy drop") != std::string::npos);
    CHECK(fs::exists(t / "trace.csv"));
}
