#pragma once

#include <utility>
#include <vector>

#include "dmada/networks.hpp"
#include "dmada/tensor.hpp"

namespace dmada::losses {

struct AdvTerms {
  Tensor adv_s;  // E[log D(x^s)] + E[log(1-D(x^s_g))]
  Tensor adv_t;  // E[log(1-D(x^t_g))]
  Tensor adv_m;  // E[log(1-D(x^m_g))]
};

struct PseudoLabels {
  std::vector<std::size_t> kept;  // target rows with confidence >= tau
  std::vector<int> labels;        // argmax class per kept row
};

// one-hot [B x K] constant tensor
Tensor one_hot(const std::vector<int>& y, std::size_t k);

// mean over batch of 1/2 sum_i (mu_i^2 + sigma_i^2 - 2 ln sigma_i - 1)
Tensor kl_loss(const LatentCode& code);

// mean cross-entropy of source rows against hard labels
Tensor classifier_loss(const Tensor& logits, const std::vector<int>& y);

// discriminator-side adversarial terms; scores are sigmoid outputs [B x 1]
AdvTerms adversarial_losses(const Tensor& d_real_s, const Tensor& d_fake_s,
                            const Tensor& d_fake_t, const Tensor& d_fake_m);
// pieces of the above, used when not every stream is active
Tensor adv_real_fake(const Tensor& d_real, const Tensor& d_fake);
Tensor adv_fake(const Tensor& d_fake);

// generator-side term to descend: -E[log D(x_g)] (non-saturating, default)
// or E[log(1-D(x_g))] (saturating)
Tensor generator_adversarial(const Tensor& d_fake, bool saturating);

// binary cross-entropy of the mixed image's domain score against lambda
Tensor soft_domain_loss(const Tensor& dom_score_m, double l_dom_m);

// per-row soft labels, for the per-sample-lambda configuration
Tensor soft_domain_loss(const Tensor& dom_score_m,
                        const std::vector<double>& l_dom_m);

// batch mean of max(0, ||f_a-f_p||^2 - ||f_a-f_n||^2 + margin)
Tensor triplet_loss(const Tensor& f_a, const Tensor& f_p, const Tensor& f_n,
                    double margin);
Tensor triplet_loss(const Tensor& f_a, const Tensor& f_p, const Tensor& f_n,
                    const std::vector<double>& margins);

PseudoLabels pseudo_filter(const Tensor& target_logits, double tau);

// D_cls cross-entropies on decoded source/target images; second term is 0
// when no pseudo-labeled row is kept
std::pair<Tensor, Tensor> class_consistency_losses(
    const Tensor& d_cls_logits_s_g, const std::vector<int>& y_s,
    const Tensor& d_cls_logits_t_g, const PseudoLabels& pseudo);

// linear ramp tau_start -> tau_end over the training run
double tau_schedule(int epoch, int total_epochs, double tau_start,
                    double tau_end);

}  // namespace dmada::losses
