// Command-line front end. Parses flags, reads the optional config file, and
// hands everything to the shared library through the C interface; errors come
// back as status codes and are reported as one JSON object on stderr.
#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "dirlatent.h"

namespace {

int fail(const char* kind, const std::string& detail) {
    nlohmann::json err;
    err["error"] = kind;
    err["detail"] = detail;
    std::fputs((err.dump() + "\n").c_str(), stderr);
    // Configuration, contract, and file problems are usage errors; numeric
    // aborts and anything unexpected signal a failed computation.
    const std::string k = kind;
    return (k == "config" || k == "contract" || k == "io") ? 2 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dirlatent — Dirichlet-relaxed latent video restoration"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
    int64_t seed = -1;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--set", overrides, "Override a dotted config key, key=value")
        ->take_all();
    app.add_option("--seed", seed, "Master seed fanned out to all component seeds");
    app.add_option("--out", out_dir, "Artifact output directory (default: out)");

    const struct {
        const char* verb;
        const char* help;
    } verbs[] = {
        {"gen-data", "Write synthetic degraded/clean clip pairs"},
        {"train", "Train a model and write checkpoint plus loss log"},
        {"infer", "Restore a clip with a trained checkpoint"},
        {"eval", "Score a checkpoint on held-out clips"},
        {"ablate", "Run the prior-strength and decoding-mode sweeps"},
        {"selftest", "Run the built-in numeric oracle suites"},
    };
    for (const auto& v : verbs) app.add_subcommand(v.verb, v.help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("config", e.what());
    }
    const std::string verb = app.get_subcommands().front()->get_name();

    std::string config_text;
    if (!config_path.empty()) {
        std::ifstream is(config_path, std::ios::binary);
        if (!is) return fail("io", "cannot read config file '" + config_path + "'");
        std::stringstream ss;
        ss << is.rdbuf();
        config_text = ss.str();
    }

    std::vector<const char*> override_ptrs;
    override_ptrs.reserve(overrides.size());
    for (const std::string& s : overrides) override_ptrs.push_back(s.c_str());

    char* summary = nullptr;
    const dlt_status status =
        dlt_run(verb.c_str(), config_text.empty() ? nullptr : config_text.c_str(),
                override_ptrs.data(), override_ptrs.size(), seed, out_dir.c_str(),
                &summary);
    if (status != DLT_OK) return fail(dlt_status_name(status), dlt_last_error());
    if (summary != nullptr) {
        std::fputs(summary, stdout);
        dlt_free(summary);
    }
    return 0;
}
