#include "dirlatent/config.hpp"

#include <json.hpp>
#include <vector>

#include "dirlatent/errors.hpp"

namespace dirlatent {

namespace {

using nlohmann::json;

enum class Kind { I64, U64, F64, Bool, Str, VecI64 };

struct FieldRef {
    const char* key;
    Kind kind;
    void* p;
};

// Single source of truth for the key set: parsing, overrides, and the
// resolved snapshot all walk this table.
std::vector<FieldRef> fields(RunConfig& c) {
    return {
        {"task", Kind::Str, &c.train.task},
        {"checkpoint", Kind::Str, &c.checkpoint},
        {"data.clips", Kind::I64, &c.train.clips},
        {"data.frames", Kind::I64, &c.train.toy.frames},
        {"data.height", Kind::I64, &c.train.toy.height},
        {"data.width", Kind::I64, &c.train.toy.width},
        {"data.fps", Kind::F64, &c.train.toy.fps},
        {"degrade.blur_sigma_min", Kind::F64, &c.train.degrade.blur_sigma_min},
        {"degrade.blur_sigma_max", Kind::F64, &c.train.degrade.blur_sigma_max},
        {"degrade.down_factors", Kind::VecI64, &c.train.degrade.down_factors},
        {"degrade.noise_sigma_min", Kind::F64, &c.train.degrade.noise_sigma_min},
        {"degrade.noise_sigma_max", Kind::F64, &c.train.degrade.noise_sigma_max},
        {"degrade.quant_levels", Kind::VecI64, &c.train.degrade.quant_levels},
        {"degrade.seed", Kind::U64, &c.train.degrade.seed},
        {"net.height", Kind::I64, &c.train.net.height},
        {"net.width", Kind::I64, &c.train.net.width},
        {"net.in_channels", Kind::I64, &c.train.net.in_channels},
        {"net.out_channels", Kind::I64, &c.train.net.out_channels},
        {"net.downsample_stages", Kind::I64, &c.train.net.downsample_stages},
        {"net.residual_blocks", Kind::I64, &c.train.net.residual_blocks},
        {"net.transformer_pairs", Kind::I64, &c.train.net.transformer_pairs},
        {"net.heads", Kind::I64, &c.train.net.heads},
        {"net.latent_dim", Kind::I64, &c.train.net.latent_dim},
        {"net.codebook_size", Kind::I64, &c.train.net.codebook_size},
        {"net.window", Kind::I64, &c.train.net.window},
        {"net.base_channels", Kind::I64, &c.train.net.base_channels},
        {"loss.lambda1", Kind::F64, &c.train.loss.lambda1},
        {"loss.lambda2", Kind::F64, &c.train.loss.lambda2},
        {"loss.mc_samples", Kind::I64, &c.train.loss.mc_samples},
        {"loss.prior_alpha", Kind::F64, &c.train.loss.prior_alpha},
        {"loss.kl_enabled", Kind::Bool, &c.train.loss.kl_enabled},
        {"loss.feature_kind", Kind::Str, &c.train.loss.feature_kind},
        {"loss.feature_seed", Kind::U64, &c.train.loss.feature_seed},
        {"train.steps", Kind::I64, &c.train.steps},
        {"train.batch_clips", Kind::I64, &c.train.batch_clips},
        {"train.lr", Kind::F64, &c.train.lr},
        {"train.beta1", Kind::F64, &c.train.beta1},
        {"train.beta2", Kind::F64, &c.train.beta2},
        {"train.adam_eps", Kind::F64, &c.train.adam_eps},
        {"train.seed", Kind::U64, &c.train.seed},
        {"infer.mode", Kind::Str, &c.infer.mode},
        {"infer.topk", Kind::I64, &c.infer.topk},
        {"infer.seed", Kind::U64, &c.infer.seed},
        {"infer.input", Kind::Str, &c.infer_input},
        {"eval.clips", Kind::I64, &c.eval_clips},
        {"eval.frames", Kind::I64, &c.eval_frames},
        {"eval.seed", Kind::U64, &c.eval_seed},
        {"ablate.steps", Kind::I64, &c.ablate_steps},
    };
}

void assign(const FieldRef& f, const json& v) {
    switch (f.kind) {
        case Kind::I64:
            if (!v.is_number_integer() && !v.is_number_unsigned()) {
                throw ConfigError(std::string("config: '") + f.key + "' expects an integer");
            }
            *static_cast<int64_t*>(f.p) = v.get<int64_t>();
            return;
        case Kind::U64:
            if (!v.is_number_integer() && !v.is_number_unsigned()) {
                throw ConfigError(std::string("config: '") + f.key + "' expects an integer");
            }
            *static_cast<uint64_t*>(f.p) = v.get<uint64_t>();
            return;
        case Kind::F64:
            if (!v.is_number()) {
                throw ConfigError(std::string("config: '") + f.key + "' expects a number");
            }
            *static_cast<double*>(f.p) = v.get<double>();
            return;
        case Kind::Bool:
            if (!v.is_boolean()) {
                throw ConfigError(std::string("config: '") + f.key + "' expects true/false");
            }
            *static_cast<bool*>(f.p) = v.get<bool>();
            return;
        case Kind::Str:
            if (!v.is_string()) {
                throw ConfigError(std::string("config: '") + f.key + "' expects a string");
            }
            *static_cast<std::string*>(f.p) = v.get<std::string>();
            return;
        case Kind::VecI64: {
            if (!v.is_array()) {
                throw ConfigError(std::string("config: '") + f.key + "' expects an array");
            }
            std::vector<int64_t> out;
            for (const json& e : v) {
                if (!e.is_number_integer() && !e.is_number_unsigned()) {
                    throw ConfigError(std::string("config: '") + f.key +
                                      "' expects integer array entries");
                }
                out.push_back(e.get<int64_t>());
            }
            *static_cast<std::vector<int64_t>*>(f.p) = std::move(out);
            return;
        }
    }
}

json snapshot(const FieldRef& f) {
    switch (f.kind) {
        case Kind::I64:
            return *static_cast<const int64_t*>(f.p);
        case Kind::U64:
            return *static_cast<const uint64_t*>(f.p);
        case Kind::F64:
            return *static_cast<const double*>(f.p);
        case Kind::Bool:
            return *static_cast<const bool*>(f.p);
        case Kind::Str:
            return *static_cast<const std::string*>(f.p);
        case Kind::VecI64:
            return *static_cast<const std::vector<int64_t>*>(f.p);
    }
    throw ConfigError("config: unreachable field kind");
}

}  // namespace

RunConfig RunConfig::defaults() {
    RunConfig c;
    c.train.net.height = 0;      // auto: follow data.height
    c.train.net.width = 0;       // auto: follow data.width
    c.train.net.in_channels = 0;  // auto: follow the task
    return c;
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid json: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: expected a flat json object");

    RunConfig c = defaults();
    auto table = fields(c);
    for (const auto& [key, value] : j.items()) {
        bool found = false;
        for (const FieldRef& f : table) {
            if (key == f.key) {
                assign(f, value);
                found = true;
                break;
            }
        }
        if (!found) throw ConfigError("config: unknown key '" + key + "'");
    }
    return c;
}

void RunConfig::apply_override(const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("config: override must look like key=value, got '" + assignment + "'");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);

    auto table = fields(*this);
    for (const FieldRef& f : table) {
        if (key != f.key) continue;
        json v = json::parse(raw, nullptr, false);
        if (v.is_discarded() || (f.kind == Kind::Str && !v.is_string())) {
            v = raw;  // bare word: treat as a string literal
        }
        try {
            assign(f, v);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(e.what()) + " (override '" + assignment + "')");
        }
        return;
    }
    throw ConfigError("config: unknown key '" + key + "'");
}

void RunConfig::set_master_seed(uint64_t seed) {
    train.seed = seed;
    train.degrade.seed = seed;
    train.loss.feature_seed = seed ^ 0x66656174ULL;
    infer.seed = seed ^ 0x73616d70ULL;
    eval_seed = seed + 1000003ULL;
}

void RunConfig::finalize() {
    if (train.net.height == 0) train.net.height = train.toy.height;
    if (train.net.width == 0) train.net.width = train.toy.width;
    if (train.net.in_channels == 0) train.net.in_channels = train.task == "inpaint" ? 4 : 3;
}

void RunConfig::validate() const {
    train.validate();
    if (infer.mode != "mean" && infer.mode != "sample" && infer.mode != "topk" &&
        infer.mode != "argmax") {
        throw ContractError("config: unknown inference mode '" + infer.mode + "'");
    }
    if (infer.topk < 1) throw ContractError("config: infer.topk must be positive");
    if (eval_clips < 1) throw ContractError("config: eval.clips must be positive");
    if (eval_frames < 2) throw ContractError("config: eval.frames must be at least 2");
    if (ablate_steps < 5) throw ContractError("config: ablate.steps must be at least 5");
}

std::string RunConfig::resolved_json() const {
    json j = json::object();
    auto table = fields(const_cast<RunConfig&>(*this));
    for (const FieldRef& f : table) j[f.key] = snapshot(f);
    return j.dump(2) + "\n";
}

}  // namespace dirlatent
