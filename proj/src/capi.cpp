#include "dirlatent.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>
#include <vector>

#include "dirlatent/config.hpp"
#include "dirlatent/errors.hpp"
#include "dirlatent/infer.hpp"
#include "dirlatent/network.hpp"
#include "dirlatent/runner.hpp"
#include "dirlatent/serialize.hpp"
#include "dirlatent/video.hpp"

namespace {

thread_local std::string g_last_error;

char* copy_out(const std::string& text) {
    char* buf = static_cast<char*>(std::malloc(text.size() + 1));
    if (buf) std::memcpy(buf, text.c_str(), text.size() + 1);
    return buf;
}

// Runs `fn`, translating the library's exception types onto the status enum.
template <typename Fn>
dlt_status guarded(Fn&& fn) noexcept {
    try {
        fn();
        g_last_error.clear();
        return DLT_OK;
    } catch (const dirlatent::ConfigError& e) {
        g_last_error = e.what();
        return DLT_ERR_CONFIG;
    } catch (const dirlatent::IoError& e) {
        g_last_error = e.what();
        return DLT_ERR_IO;
    } catch (const dirlatent::NumericError& e) {
        g_last_error = e.what();
        return DLT_ERR_NUMERIC;
    } catch (const dirlatent::DomainError& e) {
        g_last_error = e.what();
        return DLT_ERR_NUMERIC;
    } catch (const dirlatent::ContractError& e) {
        g_last_error = e.what();
        return DLT_ERR_CONTRACT;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return DLT_ERR_UNKNOWN;
    } catch (...) {
        g_last_error = "unidentified failure";
        return DLT_ERR_UNKNOWN;
    }
}

}  // namespace

struct dlt_model {
    dirlatent::Model model;
    dirlatent::RunConfig config;
};

extern "C" {

const char* dlt_status_name(dlt_status status) {
    switch (status) {
        case DLT_OK: return "ok";
        case DLT_ERR_CONTRACT: return "contract";
        case DLT_ERR_CONFIG: return "config";
        case DLT_ERR_NUMERIC: return "numeric";
        case DLT_ERR_IO: return "io";
        case DLT_ERR_UNKNOWN: return "unknown";
    }
    return "unknown";
}

const char* dlt_last_error(void) { return g_last_error.c_str(); }

const char* dlt_version(void) { return "0.1.0"; }

void dlt_free(char* text) { std::free(text); }

dlt_status dlt_run(const char* verb, const char* config_json,
                   const char* const* overrides, size_t n_overrides, int64_t seed,
                   const char* out_dir, char** summary) {
    return guarded([&] {
        using namespace dirlatent;
        if (verb == nullptr || out_dir == nullptr) {
            throw ContractError("dlt_run: verb and out_dir must be non-null");
        }
        if (n_overrides > 0 && overrides == nullptr) {
            throw ContractError("dlt_run: overrides is null but n_overrides > 0");
        }
        RunConfig cfg = (config_json != nullptr && config_json[0] != '\0')
                            ? RunConfig::from_json_text(config_json)
                            : RunConfig::defaults();
        for (size_t i = 0; i < n_overrides; ++i) {
            if (overrides[i] == nullptr) throw ContractError("dlt_run: null override");
            cfg.apply_override(overrides[i]);
        }
        if (seed >= 0) cfg.set_master_seed(static_cast<uint64_t>(seed));
        const std::string text = runner::run_verb(verb, std::move(cfg), out_dir);
        if (summary != nullptr) *summary = copy_out(text);
    });
}

dlt_status dlt_model_load(const char* checkpoint_path, dlt_model** out) {
    return guarded([&] {
        using namespace dirlatent;
        if (checkpoint_path == nullptr || out == nullptr) {
            throw ContractError("dlt_model_load: path and out must be non-null");
        }
        const serialize::Checkpoint ck = serialize::load_checkpoint(checkpoint_path);
        RunConfig cfg = RunConfig::from_json_text(ck.config_json);
        cfg.finalize();
        Rng scratch(0);
        Model model(cfg.train.net, scratch);
        if (ck.tensors.size() != model.params().size()) {
            throw IoError("dlt_model_load: checkpoint and configuration disagree on the "
                          "parameter count");
        }
        for (Param& p : model.params()) {
            const Tensor& t = ck.tensor(p.name);
            if (t.shape() != p.shape) {
                throw IoError("dlt_model_load: tensor '" + p.name + "' has extents " +
                              shape_str(t.shape()) + ", expected " + shape_str(p.shape));
            }
            p.value.assign(t.data().begin(), t.data().end());
        }
        *out = new dlt_model{std::move(model), std::move(cfg)};
    });
}

void dlt_model_free(dlt_model* model) { delete model; }

dlt_status dlt_model_geometry(const dlt_model* model, int64_t* height, int64_t* width,
                              int64_t* in_channels, int64_t* out_channels) {
    return guarded([&] {
        if (model == nullptr) {
            throw dirlatent::ContractError("dlt_model_geometry: model is null");
        }
        const dirlatent::NetConfig& n = model->model.config();
        if (height != nullptr) *height = n.height;
        if (width != nullptr) *width = n.width;
        if (in_channels != nullptr) *in_channels = n.in_channels;
        if (out_channels != nullptr) *out_channels = n.out_channels;
    });
}

dlt_status dlt_restore(const dlt_model* model, const double* frames, int64_t n_frames,
                       const char* mode, int64_t topk, uint64_t seed,
                       double* out_frames) {
    return guarded([&] {
        using namespace dirlatent;
        if (model == nullptr || frames == nullptr || mode == nullptr ||
            out_frames == nullptr) {
            throw ContractError("dlt_restore: model, frames, mode, and out_frames must "
                                "be non-null");
        }
        if (n_frames < 1) throw ContractError("dlt_restore: n_frames must be >= 1");
        const NetConfig& n = model->model.config();
        const int64_t in_stride = n.height * n.width * n.in_channels;

        VideoSequence input;
        input.frames.reserve(static_cast<size_t>(n_frames));
        for (int64_t t = 0; t < n_frames; ++t) {
            std::vector<double> v(frames + t * in_stride, frames + (t + 1) * in_stride);
            input.frames.emplace_back(Shape{n.height, n.width, n.in_channels},
                                      std::move(v));
        }

        InferOptions opt;
        opt.mode = mode;
        if (topk > 0) opt.topk = topk;
        opt.seed = seed;
        const VideoSequence restored = infer::infer_video(model->model, input, opt);

        const int64_t out_stride = n.height * n.width * n.out_channels;
        for (int64_t t = 0; t < n_frames; ++t) {
            const auto d = restored.frames[static_cast<size_t>(t)].data();
            std::memcpy(out_frames + t * out_stride, d.data(),
                        static_cast<size_t>(out_stride) * sizeof(double));
        }
    });
}

}  // extern "C"
