#pragma once

// Training objective: an evidence bound combining per-location KL to a
// symmetric prior with a Monte-Carlo absolute-error reconstruction term,
// plus a pluggable feature-distance slot and the weighted total.

#include <cstdint>
#include <string>
#include <vector>

#include "dirlatent/tensor.hpp"

namespace dirlatent {

struct LossConfig {
    double lambda1 = -1.0;  // multiplier on the evidence bound
    double lambda2 = 1.0;   // multiplier on the feature term
    int64_t mc_samples = 1;  // reconstruction samples per step
    double prior_alpha = 1.0;  // symmetric prior concentration level
    bool kl_enabled = true;
    // "none" keeps the slot at zero; "randconv" measures distance between
    // responses of one fixed random convolution (experimental extra).
    std::string feature_kind = "none";
    uint64_t feature_seed = 17;

    void validate() const;  // throws ContractError
};

// Scalar terms of one objective evaluation, for logging.
struct LossReport {
    double total = 0.0;
    double kl_term = 0.0;
    double recon_term = 0.0;
    double feature_term = 0.0;
};

namespace objective {

// Mean absolute deviation; the additive likelihood constant is dropped.
// Differentiable; the subgradient at exact ties is zero.
Tensor laplacian_nll(const Tensor& y, const Tensor& y_pred);

// Evidence bound for one batch:
//   -(sum over locations of KL(alpha_hat, prior)) - (1/L) * sum_l MAE(y, pred_l)
// with L = sampled_preds.size(). The KL term is zero when disabled. Fills
// `report` (if non-null) with the individual terms.
Tensor elbo_loss(const Tensor& y, const std::vector<Tensor>& sampled_preds,
                 const Tensor& alpha_hat, const LossConfig& cfg, LossReport* report = nullptr);

// lambda1 * elbo + lambda2 * feature; rejects non-finite values.
Tensor assemble_total(const Tensor& elbo, const Tensor& feature, const LossConfig& cfg);

// Feature-distance slot; see LossConfig::feature_kind.
Tensor feature_loss(const Tensor& y, const Tensor& y_pred, const LossConfig& cfg);

// One training-log line: {"step":…,"total":…,"kl":…,"recon":…,"feature":…}.
std::string report_json_line(int64_t step, const LossReport& report);

}  // namespace objective
}  // namespace dirlatent
