#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "support.hpp"
#include "uhdres/data.hpp"

using namespace uhdres;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(UHDRES_CLI_PATH) + " " + args + " > /tmp/uhdres_cli_out.txt 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string cli_output() {
    std::ifstream in("/tmp/uhdres_cli_out.txt");
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Writes a small paired dataset of structured scenes degraded by lowlight.
void write_dataset(const fs::path& root, int count, int64_t hw) {
    fs::create_directories(root / "lq");
    fs::create_directories(root / "gt");
    auto scenes = testsupport::make_test_images<float>(count, hw, hw);
    for (int i = 0; i < count; ++i) {
        SeededRng rng(100 + static_cast<uint64_t>(i));
        auto gt = scenes[static_cast<size_t>(i)].second;
        auto lq = synth_degrade(gt, DegradeKind::Lowlight, 2.2, 0.01, rng);
        std::string id = "img" + std::to_string(i);
        write_ppm(tensor_to_image(gt), (root / "gt" / (id + ".ppm")).string());
        write_ppm(tensor_to_image(lq), (root / "lq" / (id + ".ppm")).string());
    }
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("params prints a total inside the acceptance band") {
    REQUIRE(run_cli("params") == 0);
    auto out = cli_output();
    auto pos = out.find("total");
    REQUIRE(pos != std::string::npos);
    long total = std::stol(out.substr(pos + 5));
    CHECK(total >= 341037);
    CHECK(total <= 461403);
}

TEST_CASE("params accepts config files and rejects unknown keys") {
    {
        std::ofstream cfg("/tmp/uhdres_cli_cfg.txt");
        cfg << "# comment line\nmsca_kernels=3,7,11\n";
    }
    REQUIRE(run_cli("params --config /tmp/uhdres_cli_cfg.txt") == 0);
    auto out = cli_output();
    long total = std::stol(out.substr(out.find("total") + 5));
    CHECK(total < 402003);

    {
        std::ofstream cfg("/tmp/uhdres_cli_cfg.txt");
        cfg << "not_a_key=12\n";
    }
    CHECK(run_cli("params --config /tmp/uhdres_cli_cfg.txt") == 1);
    CHECK(cli_output().find("not_a_key") != std::string::npos);
}

TEST_CASE("usage errors exit with code 1") {
    CHECK(run_cli("nonsense-subcommand") == 1);
    CHECK(run_cli("infer --ckpt only.ckpt") == 1);  // missing required flags
}

TEST_CASE("missing files exit with code 2") {
    CHECK(run_cli("infer --ckpt /tmp/does_not_exist.ckpt --in /tmp/x.ppm --out /tmp/y.ppm") == 2);
}

TEST_CASE("perturb writes the documented schema and is deterministic") {
    fs::path dir = "/tmp/uhdres_cli_perturb";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto scenes = testsupport::make_test_images<float>(2, 32, 32);
    for (auto& [name, img] : scenes)
        write_ppm(tensor_to_image(img), (dir / (name + ".ppm")).string());

    REQUIRE(run_cli("perturb --images " + dir.string() + " --eps 0 --seeds 1 --out " +
                    (dir / "a.csv").string()) == 0);
    auto csv = slurp(dir / "a.csv");
    CHECK(csv.rfind("image,component,eps,seed,psnr_db\n", 0) == 0);

    // eps=0 rows are near the cap
    std::stringstream ss(csv);
    std::string line;
    std::getline(ss, line);  // header
    int rows = 0;
    while (std::getline(ss, line)) {
        double psnr_db = std::stod(line.substr(line.rfind(',') + 1));
        CHECK(psnr_db >= 80.0);
        ++rows;
    }
    CHECK(rows == 4);  // 2 images x 2 components x 1 eps x 1 seed

    REQUIRE(run_cli("perturb --images " + dir.string() + " --eps 0 --seeds 1 --out " +
                    (dir / "b.csv").string()) == 0);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    fs::remove_all(dir);
}

TEST_CASE("train then infer runs end to end and infer is idempotent") {
    fs::path data = "/tmp/uhdres_cli_data";
    fs::path out = "/tmp/uhdres_cli_run";
    fs::remove_all(data);
    fs::remove_all(out);
    write_dataset(data, 1, 24);
    {
        std::ofstream cfg("/tmp/uhdres_cli_train_cfg.txt");
        cfg << "total_steps=2\npatch_size=24\nbatch_size=1\ncheckpoint_every=2\neval_every=2\n";
    }
    REQUIRE(run_cli("train --data " + data.string() + " --out " + out.string() +
                    " --config /tmp/uhdres_cli_train_cfg.txt") == 0);
    CHECK(fs::exists(out / "log.csv"));
    CHECK(fs::exists(out / "model_latest.ckpt"));
    auto log = slurp(out / "log.csv");
    CHECK(log.rfind("step,lr,l_pixel,l_freq,l_total\n", 0) == 0);

    std::string in_img = (data / "lq" / "img0.ppm").string();
    REQUIRE(run_cli("infer --ckpt " + (out / "model_latest.ckpt").string() + " --in " + in_img +
                    " --out /tmp/uhdres_cli_restored1.ppm") == 0);
    REQUIRE(run_cli("infer --ckpt " + (out / "model_latest.ckpt").string() + " --in " + in_img +
                    " --out /tmp/uhdres_cli_restored2.ppm") == 0);
    CHECK(slurp("/tmp/uhdres_cli_restored1.ppm") == slurp("/tmp/uhdres_cli_restored2.ppm"));
    fs::remove_all(data);
    fs::remove_all(out);
}

TEST_CASE("bench emits the documented schema with monotone latency") {
    fs::path csv = "/tmp/uhdres_cli_bench.csv";
    REQUIRE(run_cli("bench --random-init --sizes 16,32 --out " + csv.string()) == 0);
    auto text = slurp(csv);
    REQUIRE(text.rfind("h,w,scale,latency_s,peak_mem_bytes,params\n", 0) == 0);
    std::stringstream ss(text);
    std::string line;
    std::getline(ss, line);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(ss, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    REQUIRE(rows.size() == 2);
    CHECK(std::stod(rows[1][3]) > std::stod(rows[0][3]));          // latency grows
    CHECK(std::stoll(rows[1][4]) > std::stoll(rows[0][4]));        // memory grows
    CHECK(std::stoll(rows[0][5]) == std::stoll(rows[1][5]));       // params constant
    CHECK(std::stod(rows[1][2]) == doctest::Approx(2.0));          // linear scale factor
    fs::remove(csv);
}

TEST_CASE("bench rejects tiny resolutions") {
    CHECK(run_cli("bench --random-init --sizes 4 --out /tmp/uhdres_cli_b2.csv") == 2);
    CHECK(run_cli("bench --sizes 16 --out /tmp/uhdres_cli_b3.csv") == 1);  // neither --ckpt nor --random-init
}

TEST_SUITE_END();
