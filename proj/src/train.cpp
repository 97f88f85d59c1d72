#include "dirlatent/train.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "dirlatent/codebook.hpp"
#include "dirlatent/dirichlet.hpp"
#include "dirlatent/errors.hpp"
#include "dirlatent/ops.hpp"

namespace dirlatent {

namespace {

const std::unordered_set<std::string> kGroups = {"encoder", "transformer", "head", "decoder",
                                                 "codebook"};

void validate_schedule(const std::vector<StageSpec>& stages, int64_t steps) {
    if (stages.empty()) throw ContractError("train config: schedule has no stages");
    if (stages.front().from != 0) throw ContractError("train config: schedule must start at 0");
    for (size_t i = 0; i < stages.size(); ++i) {
        const StageSpec& s = stages[i];
        if (s.from >= s.to) throw ContractError("train config: empty schedule stage");
        if (i + 1 < stages.size() && stages[i + 1].from != s.to) {
            throw ContractError("train config: schedule stages must be contiguous");
        }
        if (s.groups.empty()) throw ContractError("train config: stage trains no groups");
        for (const std::string& g : s.groups) {
            if (!kGroups.count(g)) throw ContractError("train config: unknown group '" + g + "'");
        }
    }
    if (stages.back().to != steps) {
        throw ContractError("train config: schedule must cover [0, steps)");
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (steps <= 0) throw ContractError("train config: steps must be positive");
    if (clips <= 0) throw ContractError("train config: clips must be positive");
    if (batch_clips < 1 || batch_clips > clips) {
        throw ContractError("train config: batch_clips must be in [1, clips]");
    }
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ContractError("train config: lr must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw ContractError("train config: betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw ContractError("train config: adam_eps must be positive");
    if (task != "bfr" && task != "inpaint") {
        throw ContractError("train config: unknown task '" + task + "'");
    }
    net.validate();
    loss.validate();
    degrade.validate();
    toy.validate();
    const int64_t want_in = task == "inpaint" ? 4 : 3;
    if (net.in_channels != want_in) {
        throw ContractError("train config: task '" + task + "' needs " +
                            std::to_string(want_in) + " input channels");
    }
    if (net.out_channels != 3) {
        throw ContractError("train config: restored clips have 3 channels");
    }
    if (net.height != toy.height || net.width != toy.width) {
        throw ContractError("train config: network and clip extents disagree");
    }
    if (!schedule.empty()) validate_schedule(schedule, steps);
}

std::vector<StageSpec> TrainConfig::resolved_schedule() const {
    if (!schedule.empty()) return schedule;
    const int64_t e0 = steps * 2 / 5;
    const int64_t e1 = steps * 4 / 5;
    std::vector<StageSpec> stages;
    if (e0 > 0) stages.push_back({0, e0, {"encoder", "decoder", "head"}});
    if (e1 > e0) stages.push_back({e0, e1, {"encoder", "decoder", "head", "transformer"}});
    if (steps > e1) {
        stages.push_back({e1, steps, {"encoder", "decoder", "head", "transformer", "codebook"}});
    }
    return stages;
}

namespace train {

VideoSequence inpaint_input(const VideoSequence& clean, const Tensor& mask) {
    clean.validate();
    if (clean.channels() != 3) throw ContractError("inpaint_input: expected 3-channel clips");
    if (mask.rank() != 2 || mask.dim(0) != clean.height() || mask.dim(1) != clean.width()) {
        throw ContractError("inpaint_input: mask extents must match the clip");
    }
    const int64_t h = clean.height(), w = clean.width();
    VideoSequence out;
    out.fps = clean.fps;
    out.frames.reserve(clean.frames.size());
    for (const Tensor& f : clean.frames) {
        const auto src = f.data();
        const auto m = mask.data();
        std::vector<double> px(static_cast<size_t>(h * w * 4));
        for (int64_t i = 0; i < h * w; ++i) {
            const double hole = m[static_cast<size_t>(i)];
            for (int64_t c = 0; c < 3; ++c) {
                px[static_cast<size_t>(i * 4 + c)] =
                    hole == 1.0 ? 0.0 : src[static_cast<size_t>(i * 3 + c)];
            }
            px[static_cast<size_t>(i * 4 + 3)] = hole;
        }
        out.frames.emplace_back(Shape{h, w, 4}, std::move(px));
    }
    return out;
}

std::vector<Sample> build_toy_dataset(const TrainConfig& tc) {
    tc.validate();
    Rng root(tc.seed);
    std::vector<Sample> out;
    out.reserve(static_cast<size_t>(tc.clips));
    for (int64_t i = 0; i < tc.clips; ++i) {
        Rng crng = root.split(static_cast<uint64_t>(i));
        VideoSequence clean = data::generate_toy_sequence(tc.toy, crng);
        Sample s;
        if (tc.task == "inpaint") {
            const Tensor mask = data::make_mask_brush(tc.toy.height, tc.toy.width, crng);
            s.input = inpaint_input(clean, mask);
        } else {
            s.input = data::degrade_bfr(clean, tc.degrade, crng);
        }
        s.target = std::move(clean);
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

struct AdamState {
    std::vector<double> m, v;
    int64_t t = 0;
};

// One optimization step over one stage's trainable groups; returns the
// report. Throws on non-finite losses (annotated by the caller).
LossReport step_once(Model& model, const TrainConfig& tc,
                     const std::vector<Sample>& dataset,
                     const std::vector<std::string>& groups,
                     std::unordered_map<std::string, AdamState>& opt, Rng& rng) {
    Tape tape;
    const Binding b = model.bind(tape, groups);
    const Codebook cb(b.at("codebook.items"));
    const NetConfig& nc = model.config();

    std::vector<Tensor> totals;
    LossReport mean_report;
    for (int64_t slot = 0; slot < tc.batch_clips; ++slot) {
        const Sample& sample = dataset[static_cast<size_t>(rng.below(tc.clips))];
        const Tensor x = to_batch(sample.input);
        const Tensor y = to_batch(sample.target);

        Tensor z = net::encode(b, nc, x);
        z = net::spatio_temporal_transform(b, nc, z);
        const Tensor alpha = net::predict_dirichlet_params(b, nc, z);

        std::vector<Tensor> preds;
        preds.reserve(static_cast<size_t>(tc.loss.mc_samples));
        for (int64_t s = 0; s < tc.loss.mc_samples; ++s) {
            const Tensor w = dirichlet::sample_on_tape(alpha, rng);
            preds.push_back(net::decode(b, nc, codebook::decode_convex(w, cb)));
        }

        LossReport rep;
        const Tensor elbo = objective::elbo_loss(y, preds, alpha, tc.loss, &rep);
        const Tensor feat = objective::feature_loss(y, preds[0], tc.loss);
        const Tensor total = objective::assemble_total(elbo, feat, tc.loss);
        rep.feature_term = feat.scalar_value();
        rep.total = total.scalar_value();
        totals.push_back(total);

        mean_report.total += rep.total;
        mean_report.kl_term += rep.kl_term;
        mean_report.recon_term += rep.recon_term;
        mean_report.feature_term += rep.feature_term;
    }
    Tensor batch_total = totals[0];
    for (size_t i = 1; i < totals.size(); ++i) batch_total = ops::add(batch_total, totals[i]);
    if (totals.size() > 1) {
        batch_total = ops::mul_scalar(batch_total, 1.0 / static_cast<double>(totals.size()));
    }
    const double inv_b = 1.0 / static_cast<double>(tc.batch_clips);
    mean_report.total *= inv_b;
    mean_report.kl_term *= inv_b;
    mean_report.recon_term *= inv_b;
    mean_report.feature_term *= inv_b;

    tape.backward(batch_total);

    for (Param& p : model.params()) {
        if (std::find(groups.begin(), groups.end(), Model::group_of(p.name)) == groups.end()) {
            continue;
        }
        const auto grad = tape.grad_of(b.at(p.name));
        AdamState& st = opt[p.name];
        if (st.m.empty()) {
            st.m.assign(grad.size(), 0.0);
            st.v.assign(grad.size(), 0.0);
        }
        st.t += 1;
        const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(st.t));
        const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(st.t));
        for (size_t i = 0; i < p.value.size(); ++i) {
            const double g = grad[i];
            st.m[i] = tc.beta1 * st.m[i] + (1.0 - tc.beta1) * g;
            st.v[i] = tc.beta2 * st.v[i] + (1.0 - tc.beta2) * g * g;
            p.value[i] -= tc.lr * (st.m[i] / bc1) / (std::sqrt(st.v[i] / bc2) + tc.adam_eps);
        }
    }
    return mean_report;
}

bool same_net_config(const NetConfig& a, const NetConfig& b) {
    return a.height == b.height && a.width == b.width && a.in_channels == b.in_channels &&
           a.out_channels == b.out_channels && a.downsample_stages == b.downsample_stages &&
           a.residual_blocks == b.residual_blocks && a.transformer_pairs == b.transformer_pairs &&
           a.heads == b.heads && a.latent_dim == b.latent_dim &&
           a.codebook_size == b.codebook_size && a.window == b.window &&
           a.base_channels == b.base_channels;
}

}  // namespace

TrainOutcome run(const TrainConfig& tc, const Model* warm_start) {
    tc.validate();
    if (warm_start && !same_net_config(warm_start->config(), tc.net)) {
        throw ContractError("train: warm start was built for a different network configuration");
    }

    Rng model_rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
    Model model = warm_start ? *warm_start : Model(tc.net, model_rng);
    const std::vector<Sample> dataset = build_toy_dataset(tc);
    const std::vector<StageSpec> stages = tc.resolved_schedule();

    Rng step_rng(tc.seed + 0x517cc1b727220a95ULL);
    std::unordered_map<std::string, AdamState> opt;
    std::vector<LossReport> reports;
    reports.reserve(static_cast<size_t>(tc.steps));

    size_t stage_idx = 0;
    for (int64_t step = 0; step < tc.steps; ++step) {
        while (stage_idx + 1 < stages.size() && step >= stages[stage_idx].to) ++stage_idx;
        try {
            reports.push_back(
                step_once(model, tc, dataset, stages[stage_idx].groups, opt, step_rng));
        } catch (const NumericError& e) {
            throw NumericError("train: step " + std::to_string(step) + ": " + e.what());
        } catch (const DomainError& e) {
            throw NumericError("train: step " + std::to_string(step) + ": " + e.what());
        } catch (const ContractError& e) {
            // The config was validated before the loop, so a contract failure
            // here means the numbers collapsed (NaN/overflow) mid-step.
            throw NumericError("train: step " + std::to_string(step) + ": " + e.what());
        }
    }
    return TrainOutcome{std::move(model), std::move(reports)};
}

}  // namespace train
}  // namespace dirlatent
