#include "dmada/losses.hpp"

#include <algorithm>
#include <cmath>

namespace dmada::losses {

namespace {

constexpr double kScoreClamp = 1e-7;

void check_score_range(const Tensor& score, const char* who) {
  for (double v : score.values()) {
    if (!(v >= 0.0 && v <= 1.0))
      throw ValueError(std::string(who) + ": score " + std::to_string(v) +
                       " outside [0,1]");
  }
}

// log of a probability, clamped away from 0 and 1
Tensor safe_log(const Tensor& score) {
  return log_op(clamp(score, kScoreClamp, 1.0 - kScoreClamp));
}

Tensor safe_log1m(const Tensor& score) {
  Tensor one_minus = add_scalar(neg(score), 1.0);
  return log_op(clamp(one_minus, kScoreClamp, 1.0 - kScoreClamp));
}

}  // namespace

Tensor one_hot(const std::vector<int>& y, std::size_t k) {
  std::vector<double> v(y.size() * k, 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || static_cast<std::size_t>(y[i]) >= k)
      throw ValueError("one_hot: label " + std::to_string(y[i]) +
                       " out of [0," + std::to_string(k) + ")");
    v[i * k + y[i]] = 1.0;
  }
  return Tensor::from({y.size(), k}, std::move(v));
}

Tensor kl_loss(const LatentCode& code) {
  for (double s : code.sigma.values()) {
    if (!(s > 0))
      throw ValueError("kl_loss: non-positive sigma " + std::to_string(s));
  }
  Tensor mu2 = square(code.mu);
  Tensor s2 = square(code.sigma);
  Tensor log_s = log_op(code.sigma);
  Tensor per_dim =
      add_scalar(add(mu2, sub(s2, mul_scalar(log_s, 2.0))), -1.0);
  return mul_scalar(mean(row_sum(per_dim)), 0.5);
}

Tensor classifier_loss(const Tensor& logits, const std::vector<int>& y) {
  return softmax_cross_entropy(logits, one_hot(y, logits.cols()));
}

Tensor adv_real_fake(const Tensor& d_real, const Tensor& d_fake) {
  check_score_range(d_real, "adv_real_fake");
  check_score_range(d_fake, "adv_real_fake");
  return add(mean(safe_log(d_real)), mean(safe_log1m(d_fake)));
}

Tensor adv_fake(const Tensor& d_fake) {
  check_score_range(d_fake, "adv_fake");
  return mean(safe_log1m(d_fake));
}

AdvTerms adversarial_losses(const Tensor& d_real_s, const Tensor& d_fake_s,
                            const Tensor& d_fake_t, const Tensor& d_fake_m) {
  AdvTerms out;
  out.adv_s = adv_real_fake(d_real_s, d_fake_s);
  out.adv_t = adv_fake(d_fake_t);
  out.adv_m = adv_fake(d_fake_m);
  return out;
}

Tensor generator_adversarial(const Tensor& d_fake, bool saturating) {
  check_score_range(d_fake, "generator_adversarial");
  if (saturating) return mean(safe_log1m(d_fake));
  return neg(mean(safe_log(d_fake)));
}

Tensor soft_domain_loss(const Tensor& dom_score_m, double l_dom_m) {
  if (!(l_dom_m >= 0.0 && l_dom_m <= 1.0))
    throw ValueError("soft_domain_loss: label " + std::to_string(l_dom_m) +
                     " outside [0,1]");
  check_score_range(dom_score_m, "soft_domain_loss");
  Tensor term = add(mul_scalar(safe_log(dom_score_m), l_dom_m),
                    mul_scalar(safe_log1m(dom_score_m), 1.0 - l_dom_m));
  return neg(mean(term));
}

Tensor soft_domain_loss(const Tensor& dom_score_m,
                        const std::vector<double>& l_dom_m) {
  if (l_dom_m.size() != dom_score_m.rows())
    throw ShapeError("soft_domain_loss: " + std::to_string(l_dom_m.size()) +
                     " labels for " + std::to_string(dom_score_m.rows()) +
                     " scores");
  for (double l : l_dom_m) {
    if (!(l >= 0.0 && l <= 1.0))
      throw ValueError("soft_domain_loss: label " + std::to_string(l) +
                       " outside [0,1]");
  }
  check_score_range(dom_score_m, "soft_domain_loss");
  std::vector<double> lam = l_dom_m, one_minus(l_dom_m.size());
  for (std::size_t i = 0; i < l_dom_m.size(); ++i)
    one_minus[i] = 1.0 - l_dom_m[i];
  const std::size_t n = lam.size();
  Tensor lam_t = Tensor::from({n, 1}, std::move(lam));
  Tensor om_t = Tensor::from({n, 1}, std::move(one_minus));
  Tensor term = add(mul(safe_log(dom_score_m), lam_t),
                    mul(safe_log1m(dom_score_m), om_t));
  return neg(mean(term));
}

Tensor triplet_loss(const Tensor& f_a, const Tensor& f_p, const Tensor& f_n,
                    const std::vector<double>& margins) {
  if (f_a.shape() != f_p.shape() || f_a.shape() != f_n.shape())
    throw ShapeError("triplet_loss: feature shape mismatch");
  if (margins.size() != f_a.rows())
    throw ShapeError("triplet_loss: " + std::to_string(margins.size()) +
                     " margins for " + std::to_string(f_a.rows()) + " rows");
  for (double m : margins) {
    if (!(m >= 0.0 && m <= 1.0))
      throw ValueError("triplet_loss: margin " + std::to_string(m) +
                       " outside [0,1]");
  }
  Tensor d_ap = row_sum(square(sub(f_a, f_p)));
  Tensor d_an = row_sum(square(sub(f_a, f_n)));
  Tensor margin_t = Tensor::from({margins.size()}, margins);
  Tensor hinge = relu(add(sub(d_ap, d_an), margin_t));
  return mean(hinge);
}

Tensor triplet_loss(const Tensor& f_a, const Tensor& f_p, const Tensor& f_n,
                    double margin) {
  if (f_a.shape() != f_p.shape() || f_a.shape() != f_n.shape())
    throw ShapeError("triplet_loss: feature shape mismatch " +
                     shape_str(f_a.shape()) + " / " + shape_str(f_p.shape()) +
                     " / " + shape_str(f_n.shape()));
  if (!(margin >= 0.0 && margin <= 1.0))
    throw ValueError("triplet_loss: margin " + std::to_string(margin) +
                     " outside [0,1]");
  Tensor d_ap = row_sum(square(sub(f_a, f_p)));
  Tensor d_an = row_sum(square(sub(f_a, f_n)));
  Tensor hinge = relu(add_scalar(sub(d_ap, d_an), margin));
  return mean(hinge);
}

PseudoLabels pseudo_filter(const Tensor& target_logits, double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw ValueError("pseudo_filter: tau " + std::to_string(tau) +
                     " outside (0,1)");
  const std::size_t b = target_logits.rows(), k = target_logits.cols();
  const auto probs = softmax_rows(target_logits);
  PseudoLabels out;
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (probs[i * k + j] > probs[i * k + best]) best = j;
    if (probs[i * k + best] >= tau) {
      out.kept.push_back(i);
      out.labels.push_back(static_cast<int>(best));
    }
  }
  return out;
}

std::pair<Tensor, Tensor> class_consistency_losses(
    const Tensor& d_cls_logits_s_g, const std::vector<int>& y_s,
    const Tensor& d_cls_logits_t_g, const PseudoLabels& pseudo) {
  Tensor cls_s_g = classifier_loss(d_cls_logits_s_g, y_s);
  Tensor cls_t_g;
  if (pseudo.kept.empty()) {
    cls_t_g = Tensor::scalar(0.0);
  } else {
    Tensor kept_logits = gather_rows(d_cls_logits_t_g, pseudo.kept);
    cls_t_g = classifier_loss(kept_logits, pseudo.labels);
  }
  return {cls_s_g, cls_t_g};
}

double tau_schedule(int epoch, int total_epochs, double tau_start,
                    double tau_end) {
  if (total_epochs < 1 || epoch < 0 || epoch > total_epochs)
    throw ValueError("tau_schedule: epoch " + std::to_string(epoch) +
                     " outside [0," + std::to_string(total_epochs) + "]");
  if (!(tau_end > 0.0 && tau_end <= tau_start && tau_start < 1.0))
    throw ValueError("tau_schedule: need 0 < tau_end <= tau_start < 1");
  return tau_start - (tau_start - tau_end) * static_cast<double>(epoch) /
                         static_cast<double>(total_epochs);
}

}  // namespace dmada::losses
