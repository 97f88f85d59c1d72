#include "dirlatent/objective.hpp"

#include <cmath>
#include <json.hpp>
#include <vector>

#include "dirlatent/dirichlet.hpp"
#include "dirlatent/errors.hpp"
#include "dirlatent/ops.hpp"
#include "dirlatent/rng.hpp"

namespace dirlatent {

void LossConfig::validate() const {
    if (!std::isfinite(lambda1) || !std::isfinite(lambda2)) {
        throw ContractError("loss config: multipliers must be finite");
    }
    if (mc_samples < 1) throw ContractError("loss config: mc_samples must be >= 1");
    if (kl_enabled && !(prior_alpha > 0.0)) {
        throw ContractError("loss config: prior_alpha must be positive when the KL term is on");
    }
    if (feature_kind != "none" && feature_kind != "randconv") {
        throw ContractError("loss config: unknown feature_kind '" + feature_kind + "'");
    }
}

namespace objective {

Tensor laplacian_nll(const Tensor& y, const Tensor& y_pred) {
    return ops::mean(ops::abs(ops::sub(y, y_pred)));
}

Tensor elbo_loss(const Tensor& y, const std::vector<Tensor>& sampled_preds,
                 const Tensor& alpha_hat, const LossConfig& cfg, LossReport* report) {
    cfg.validate();
    if (sampled_preds.empty()) {
        throw ContractError("elbo_loss: need at least one sampled prediction");
    }
    Tensor recon = laplacian_nll(y, sampled_preds[0]);
    for (size_t l = 1; l < sampled_preds.size(); ++l) {
        recon = ops::add(recon, laplacian_nll(y, sampled_preds[l]));
    }
    recon = ops::mul_scalar(recon, 1.0 / static_cast<double>(sampled_preds.size()));

    const Tensor kl_sum =
        cfg.kl_enabled ? ops::sum(dirichlet::kl_to_symmetric_prior(alpha_hat, cfg.prior_alpha))
                       : Tensor::scalar(0.0);
    const Tensor elbo = ops::mul_scalar(ops::add(kl_sum, recon), -1.0);
    if (report != nullptr) {
        report->kl_term = kl_sum.scalar_value();
        report->recon_term = recon.scalar_value();
        report->feature_term = 0.0;
        report->total = elbo.scalar_value();
    }
    return elbo;
}

Tensor assemble_total(const Tensor& elbo, const Tensor& feature, const LossConfig& cfg) {
    cfg.validate();
    if (!std::isfinite(elbo.scalar_value()) || !std::isfinite(feature.scalar_value())) {
        throw NumericError("assemble_total: non-finite loss term");
    }
    const Tensor total =
        ops::add(ops::mul_scalar(elbo, cfg.lambda1), ops::mul_scalar(feature, cfg.lambda2));
    if (!std::isfinite(total.scalar_value())) {
        throw NumericError("assemble_total: non-finite total");
    }
    return total;
}

Tensor feature_loss(const Tensor& y, const Tensor& y_pred, const LossConfig& cfg) {
    cfg.validate();
    if (cfg.feature_kind == "none") return Tensor::scalar(0.0);
    if (y.rank() != 4) {
        throw ContractError("feature_loss: expected [r, c, h, w] sequences, got " +
                            shape_str(y.shape()));
    }
    // Fixed random 3x3 filter bank; the seed pins the filters so the distance
    // is a deterministic function of its inputs.
    const int64_t c = y.dim(1), filters = 8;
    Rng rng(cfg.feature_seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(9 * c));
    std::vector<double> w(static_cast<size_t>(filters * c * 9));
    for (double& v : w) v = rng.uniform(-bound, bound);
    const Tensor bank({filters, c, 3, 3}, std::move(w));
    return ops::mean(
        ops::abs(ops::sub(ops::conv2d(y, bank, 1, 1), ops::conv2d(y_pred, bank, 1, 1))));
}

std::string report_json_line(int64_t step, const LossReport& report) {
    const nlohmann::json j = {{"step", step},
                              {"total", report.total},
                              {"kl", report.kl_term},
                              {"recon", report.recon_term},
                              {"feature", report.feature_term}};
    return j.dump();
}

}  // namespace objective
}  // namespace dirlatent
