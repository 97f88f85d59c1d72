// Exercises the shared library through the C interface only, the way an
// external consumer would: status codes, thread-local error text, opaque
// model handles, and in-memory restoration.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "dirlatent.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string>& tiny_overrides() {
    static const std::vector<std::string> o = {
        "data.height=16",      "data.width=16",       "data.frames=2",
        "data.clips=2",        "net.downsample_stages=2",
        "net.residual_blocks=1", "net.transformer_pairs=1",
        "net.heads=2",         "net.latent_dim=8",    "net.codebook_size=6",
        "net.base_channels=4", "train.steps=3",       "loss.mc_samples=1",
        "eval.clips=1",        "eval.frames=2",
    };
    return o;
}

std::vector<const char*> as_ptrs(const std::vector<std::string>& v) {
    std::vector<const char*> p;
    for (const std::string& s : v) p.push_back(s.c_str());
    return p;
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("dirlatent_capi_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is.good());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// Trains once per process; later cases reuse the checkpoint.
const std::string& shared_checkpoint() {
    static const std::string path = [] {
        const fs::path dir = fresh_dir("shared_train");
        const auto ptrs = as_ptrs(tiny_overrides());
        const dlt_status st = dlt_run("train", nullptr, ptrs.data(), ptrs.size(), -1,
                                      dir.string().c_str(), nullptr);
        REQUIRE(st == DLT_OK);
        return (dir / "model.dlc").string();
    }();
    return path;
}

}  // namespace

TEST_CASE("version and status names are stable strings") {
    CHECK(dlt_version() == std::string("0.1.0"));
    CHECK(dlt_status_name(DLT_OK) == std::string("ok"));
    CHECK(dlt_status_name(DLT_ERR_CONFIG) == std::string("config"));
    CHECK(dlt_status_name(DLT_ERR_NUMERIC) == std::string("numeric"));
    CHECK(dlt_status_name(DLT_ERR_IO) == std::string("io"));
    CHECK(dlt_status_name(DLT_ERR_CONTRACT) == std::string("contract"));
}

TEST_CASE("selftest verb succeeds and returns a summary the caller frees") {
    const fs::path dir = fresh_dir("selftest");
    char* summary = nullptr;
    const dlt_status st =
        dlt_run("selftest", nullptr, nullptr, 0, -1, dir.string().c_str(), &summary);
    CHECK(st == DLT_OK);
    CHECK(dlt_last_error() == std::string(""));
    REQUIRE(summary != nullptr);
    CHECK(std::string(summary).find("selftest passed") != std::string::npos);
    dlt_free(summary);
    CHECK(fs::is_regular_file(dir / "config.resolved.json"));
}

TEST_CASE("config document, overrides, and master seed all reach the run") {
    const fs::path dir = fresh_dir("seeded");
    const char* config = R"({"train.steps": 7})";
    const std::vector<std::string> o = {"train.steps=9"};  // overrides beat the document
    const auto ptrs = as_ptrs(o);
    const dlt_status st =
        dlt_run("gen-data", config, ptrs.data(), ptrs.size(), 5, dir.string().c_str(),
                nullptr);
    REQUIRE(st == DLT_OK);
    const json resolved = json::parse(slurp(dir / "config.resolved.json"));
    CHECK(resolved.at("train.steps").get<int64_t>() == 9);
    CHECK(resolved.at("train.seed").get<int64_t>() == 5);
    CHECK(resolved.at("degrade.seed").get<int64_t>() == 5);
}

TEST_CASE("failures map onto the documented status codes with detail text") {
    const fs::path dir = fresh_dir("errors");
    CHECK(dlt_run("restore", nullptr, nullptr, 0, -1, dir.string().c_str(), nullptr) ==
          DLT_ERR_CONFIG);
    CHECK(std::string(dlt_last_error()).find("restore") != std::string::npos);

    CHECK(dlt_run("selftest", "{not json", nullptr, 0, -1, dir.string().c_str(),
                  nullptr) == DLT_ERR_CONFIG);

    const std::vector<std::string> bad = {"no_equals_sign"};
    const auto ptrs = as_ptrs(bad);
    CHECK(dlt_run("selftest", nullptr, ptrs.data(), ptrs.size(), -1,
                  dir.string().c_str(), nullptr) == DLT_ERR_CONFIG);

    CHECK(dlt_run(nullptr, nullptr, nullptr, 0, -1, dir.string().c_str(), nullptr) ==
          DLT_ERR_CONTRACT);

    dlt_model* model = nullptr;
    CHECK(dlt_model_load((dir / "missing.dlc").string().c_str(), &model) == DLT_ERR_IO);
    CHECK(model == nullptr);
}

TEST_CASE("a trained checkpoint loads into an opaque handle with its geometry") {
    dlt_model* model = nullptr;
    REQUIRE(dlt_model_load(shared_checkpoint().c_str(), &model) == DLT_OK);
    REQUIRE(model != nullptr);

    int64_t h = 0, w = 0, ci = 0, co = 0;
    CHECK(dlt_model_geometry(model, &h, &w, &ci, &co) == DLT_OK);
    CHECK(h == 16);
    CHECK(w == 16);
    CHECK(ci == 3);
    CHECK(co == 3);
    // Null output pointers are allowed.
    CHECK(dlt_model_geometry(model, nullptr, nullptr, nullptr, nullptr) == DLT_OK);
    CHECK(dlt_model_geometry(nullptr, &h, nullptr, nullptr, nullptr) ==
          DLT_ERR_CONTRACT);
    dlt_model_free(model);
}

TEST_CASE("in-memory restoration is deterministic and validates its arguments") {
    dlt_model* model = nullptr;
    REQUIRE(dlt_model_load(shared_checkpoint().c_str(), &model) == DLT_OK);

    const int64_t frames = 2, h = 16, w = 16, c = 3;
    std::vector<double> input(static_cast<size_t>(frames * h * w * c));
    for (size_t i = 0; i < input.size(); ++i) {
        input[i] = 0.2 + 0.6 * (static_cast<double>(i % 97) / 96.0);
    }
    std::vector<double> out_a(input.size(), -1.0), out_b(input.size(), -1.0);
    REQUIRE(dlt_restore(model, input.data(), frames, "mean", 0, 0, out_a.data()) ==
            DLT_OK);
    REQUIRE(dlt_restore(model, input.data(), frames, "mean", 0, 0, out_b.data()) ==
            DLT_OK);
    CHECK(std::memcmp(out_a.data(), out_b.data(), out_a.size() * sizeof(double)) == 0);
    for (double v : out_a) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    std::vector<double> sampled(input.size());
    REQUIRE(dlt_restore(model, input.data(), frames, "sample", 0, 11, sampled.data()) ==
            DLT_OK);
    CHECK(std::memcmp(out_a.data(), sampled.data(), sampled.size() * sizeof(double)) !=
          0);

    CHECK(dlt_restore(model, input.data(), frames, "median", 0, 0, out_a.data()) ==
          DLT_ERR_CONTRACT);
    CHECK(dlt_restore(model, input.data(), 0, "mean", 0, 0, out_a.data()) ==
          DLT_ERR_CONTRACT);
    CHECK(dlt_restore(nullptr, input.data(), frames, "mean", 0, 0, out_a.data()) ==
          DLT_ERR_CONTRACT);
    dlt_model_free(model);
    dlt_model_free(nullptr);  // must be a no-op
}
