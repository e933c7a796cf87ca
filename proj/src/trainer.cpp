#include "dmada/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "dmada/losses.hpp"

namespace dmada::trainer {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

Tensor block_rows(const std::vector<mixup::ClassLabelBlock>& blocks) {
  const std::size_t b = blocks.size();
  const std::size_t k = blocks.front().l_cls.size();
  std::vector<double> v(b * (k + 1));
  for (std::size_t i = 0; i < b; ++i) {
    std::copy(blocks[i].l_cls.begin(), blocks[i].l_cls.end(),
              v.begin() + i * (k + 1));
    v[i * (k + 1) + k] = blocks[i].l_comp;
  }
  return Tensor::from({b, k + 1}, std::move(v));
}

Tensor block_source(const std::vector<int>& y, std::size_t k) {
  std::vector<mixup::ClassLabelBlock> rows;
  rows.reserve(y.size());
  for (int label : y)
    rows.push_back(
        mixup::build_class_block(mixup::BlockKind::source, k, label));
  return block_rows(rows);
}

Tensor block_target(std::size_t b, std::size_t k) {
  std::vector<mixup::ClassLabelBlock> rows(
      b, mixup::build_class_block(mixup::BlockKind::target, k));
  return block_rows(rows);
}

Tensor block_mixup(const std::vector<int>& y, std::size_t k,
                   const LambdaDraw& lam) {
  std::vector<mixup::ClassLabelBlock> rows;
  rows.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double l = lam.per_sample ? lam.values[i] : lam.value;
    rows.push_back(
        mixup::build_class_block(mixup::BlockKind::mixup, k, y[i], l));
  }
  return block_rows(rows);
}

double checked(const Tensor& t, const char* term) {
  const double v = t.item();
  if (!std::isfinite(v))
    throw NumericError(std::string("train_step: ") + term + " is non-finite");
  return v;
}

Tensor sum_terms(const std::vector<Tensor>& terms) {
  Tensor acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return acc;
}

// per-row 0/1 mask selecting source (lambda >= 0.5) vs target rows
std::vector<double> source_positive_mask(const std::vector<double>& lambdas) {
  std::vector<double> mask(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i)
    mask[i] = lambdas[i] >= 0.5 ? 1.0 : 0.0;
  return mask;
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp);
    os << text;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::string MetricsRecord::csv_header() {
  return "epoch,kl,cls_c,adv_s,adv_t,adv_m,soft_m,tri_m,cls_s_g,cls_t_g,"
         "target_accuracy,a_distance,pseudo_kept_fraction,wall_time_seconds";
}

std::string MetricsRecord::csv_row() const {
  std::ostringstream os;
  os << epoch << "," << fmt(losses.kl) << "," << fmt(losses.cls_c) << ","
     << fmt(losses.adv_s) << "," << fmt(losses.adv_t) << ","
     << fmt(losses.adv_m) << "," << fmt(losses.soft_m) << ","
     << fmt(losses.tri_m) << "," << fmt(losses.cls_s_g) << ","
     << fmt(losses.cls_t_g) << "," << fmt(target_accuracy) << ","
     << fmt(a_distance) << "," << fmt(pseudo_kept_fraction) << ","
     << fmt(wall_time_seconds);
  return os.str();
}

LossValues train_step(ModelSet& models, const data::Batch& batch,
                      double lambda, double tau, const RunConfig& cfg,
                      Rng& z_rng) {
  return train_step(models, batch, LambdaDraw::batch(lambda), tau, cfg, z_rng);
}

LossValues train_step(ModelSet& models, const data::Batch& batch,
                      const LambdaDraw& lam, double tau, const RunConfig& cfg,
                      Rng& z_rng) {
  const std::size_t b = batch.x_s.rows();
  const std::size_t k = models.dims.num_classes;
  const bool use_pm = cfg.pixel_mixup;
  const bool use_fm = cfg.feature_mixup;
  const bool use_tri = cfg.triplet && use_pm;
  const bool use_dcls = cfg.d_cls_branch;
  const bool use_pseudo = cfg.pseudo_labels && use_dcls;
  const bool adv_on = cfg.phi > 0;
  const bool mix_terms_on = use_pm && cfg.omega > 0;

  LossValues out;
  auto fresh_z = [&] {
    return sample_gaussian({b, models.dims.d_noise}, z_rng);
  };
  auto step = [&](Subnet which) {
    // a head can sit out of the active objective (e.g. D_cls off): only
    // parameters the backward pass touched are stepped
    for (auto* p : models.params(which))
      if (p->value.has_grad()) adam_step(p->value, p->adam);
  };

  const Tensor blk_s = block_source(batch.y_s, k);
  const Tensor blk_t = block_target(b, k);
  Tensor blk_m;
  if (use_fm) blk_m = block_mixup(batch.y_s, k, lam);

  // raw mixed image; constant w.r.t. parameters, shared across stages
  Tensor x_m;
  if (use_pm) {
    x_m = lam.per_sample
              ? mixup::pixel_mixup_rows(batch.x_s, batch.x_t, lam.values)
              : mixup::pixel_mixup(batch.x_s, batch.x_t, lam.value).first;
  }

  auto mixed_code = [&](const LatentCode& cs, const LatentCode& ct) {
    if (lam.per_sample) {
      auto [mu, sigma] = mixup::feature_mixup_rows(cs.mu, cs.sigma, ct.mu,
                                                   ct.sigma, lam.values);
      return LatentCode{mu, sigma};
    }
    auto [mu, sigma] =
        mixup::feature_mixup(cs.mu, cs.sigma, ct.mu, ct.sigma, lam.value);
    return LatentCode{mu, sigma};
  };

  // ---- stage 1: discriminator ----
  if (use_dcls || adv_on || mix_terms_on) {
    models.zero_all_grads();
    const LatentCode code_s = models.encoder(batch.x_s);
    const LatentCode code_t = models.encoder(batch.x_t);
    std::vector<Tensor> terms;

    std::optional<DiscriminatorOutput> out_fake_s;
    if (use_dcls || adv_on)
      out_fake_s = models.discriminator(models.decoder(code_s, fresh_z(), blk_s));

    if (use_dcls) {
      Tensor l = losses::classifier_loss(out_fake_s->cls_logits, batch.y_s);
      out.cls_s_g = checked(l, "cls_s_g");
      terms.push_back(l);
    }

    if (mix_terms_on) {
      const DiscriminatorOutput out_m = models.discriminator(x_m);
      Tensor soft = lam.per_sample
                        ? losses::soft_domain_loss(out_m.dom_score, lam.values)
                        : losses::soft_domain_loss(out_m.dom_score, lam.value);
      out.soft_m = checked(soft, "soft_m");
      Tensor mix_sum = soft;
      if (use_tri) {
        const DiscriminatorOutput out_s_raw = models.discriminator(batch.x_s);
        const DiscriminatorOutput out_t_raw = models.discriminator(batch.x_t);
        Tensor tri;
        if (lam.per_sample) {
          const auto mask = source_positive_mask(lam.values);
          std::vector<double> inv(mask.size());
          std::vector<double> margins(mask.size());
          for (std::size_t i = 0; i < mask.size(); ++i) {
            inv[i] = 1.0 - mask[i];
            margins[i] = std::abs(2.0 * lam.values[i] - 1.0);
          }
          const Tensor mask_t = Tensor::from({mask.size()}, mask);
          const Tensor inv_t = Tensor::from({inv.size()}, inv);
          const Tensor f_p = add(scale_rows(out_s_raw.features, mask_t),
                                 scale_rows(out_t_raw.features, inv_t));
          const Tensor f_n = add(scale_rows(out_t_raw.features, mask_t),
                                 scale_rows(out_s_raw.features, inv_t));
          tri = losses::triplet_loss(out_m.features, f_p, f_n, margins);
        } else {
          const auto roles = mixup::triplet_roles(lam.value);
          const Tensor& f_p = roles.positive == mixup::Role::source
                                  ? out_s_raw.features
                                  : out_t_raw.features;
          const Tensor& f_n = roles.negative == mixup::Role::source
                                  ? out_s_raw.features
                                  : out_t_raw.features;
          tri = losses::triplet_loss(out_m.features, f_p, f_n, roles.margin);
        }
        out.tri_m = checked(tri, "tri_m");
        mix_sum = add(mix_sum, tri);
      }
      terms.push_back(mul_scalar(mix_sum, cfg.omega));
    }

    if (adv_on) {
      const DiscriminatorOutput out_real_s = models.discriminator(batch.x_s);
      const DiscriminatorOutput out_fake_t =
          models.discriminator(models.decoder(code_t, fresh_z(), blk_t));
      Tensor adv_s =
          losses::adv_real_fake(out_real_s.dom_score, out_fake_s->dom_score);
      Tensor adv_t = losses::adv_fake(out_fake_t.dom_score);
      out.adv_s = checked(adv_s, "adv_s");
      out.adv_t = checked(adv_t, "adv_t");
      Tensor adv_sum = add(adv_s, adv_t);
      if (use_fm) {
        const LatentCode code_m = mixed_code(code_s, code_t);
        const DiscriminatorOutput out_fake_m =
            models.discriminator(models.decoder(code_m, fresh_z(), blk_m));
        Tensor adv_m = losses::adv_fake(out_fake_m.dom_score);
        out.adv_m = checked(adv_m, "adv_m");
        adv_sum = add(adv_sum, adv_m);
      }
      // D ascends the adversarial terms
      terms.push_back(mul_scalar(adv_sum, -cfg.phi));
    }

    Tensor objective = sum_terms(terms);
    if (objective.requires_grad()) {
      objective.backward();
      step(Subnet::discriminator);
    }
  }

  // ---- stage 2: decoder ----
  if (use_dcls || adv_on) {
    models.zero_all_grads();
    const LatentCode code_s = models.encoder(batch.x_s);
    const DiscriminatorOutput out_fake_s =
        models.discriminator(models.decoder(code_s, fresh_z(), blk_s));
    std::vector<Tensor> terms;
    if (use_dcls)
      terms.push_back(losses::classifier_loss(out_fake_s.cls_logits, batch.y_s));
    if (adv_on)
      terms.push_back(mul_scalar(
          losses::generator_adversarial(out_fake_s.dom_score,
                                        cfg.saturating_gen),
          cfg.phi));
    Tensor objective = sum_terms(terms);
    checked(objective, "decoder objective");
    if (objective.requires_grad()) {
      objective.backward();
      step(Subnet::decoder);
    }
  }

  // ---- stage 3: classifier ----
  {
    models.zero_all_grads();
    const LatentCode code_s = models.encoder(batch.x_s);
    Tensor l_c = losses::classifier_loss(models.classifier(code_s), batch.y_s);
    out.cls_c = checked(l_c, "cls_c");
    l_c.backward();
    step(Subnet::classifier);
  }

  // ---- stage 4: encoder ----
  {
    models.zero_all_grads();
    // with every adaptation mechanism off, target data must not influence
    // the encoder; the prior then regularizes source codes only
    const bool uses_target = use_pm || use_fm || adv_on || use_dcls;
    const LatentCode code_s = models.encoder(batch.x_s);
    LatentCode code_t;
    if (uses_target) code_t = models.encoder(batch.x_t);
    std::vector<Tensor> terms;
    terms.push_back(losses::classifier_loss(models.classifier(code_s),
                                            batch.y_s));
    Tensor kl = uses_target
                    ? add(losses::kl_loss(code_s), losses::kl_loss(code_t))
                    : losses::kl_loss(code_s);
    out.kl = checked(kl, "kl");
    terms.push_back(mul_scalar(kl, cfg.omega));

    std::optional<Tensor> x_t_g;
    if ((use_dcls && use_pseudo) || adv_on)
      x_t_g = models.decoder(code_t, fresh_z(), blk_t);
    std::optional<DiscriminatorOutput> out_fake_t;
    if (x_t_g) out_fake_t = models.discriminator(*x_t_g);

    if (use_dcls) {
      const DiscriminatorOutput out_fake_s =
          models.discriminator(models.decoder(code_s, fresh_z(), blk_s));
      terms.push_back(
          losses::classifier_loss(out_fake_s.cls_logits, batch.y_s));
    }
    if (use_pseudo) {
      const Tensor target_logits = models.classifier(code_t);
      const auto pseudo = losses::pseudo_filter(target_logits, tau);
      out.pseudo_kept = static_cast<int>(pseudo.kept.size());
      if (!pseudo.kept.empty()) {
        Tensor kept_logits = gather_rows(out_fake_t->cls_logits, pseudo.kept);
        Tensor l_t = losses::classifier_loss(kept_logits, pseudo.labels);
        out.cls_t_g = checked(l_t, "cls_t_g");
        terms.push_back(l_t);
      }
    }
    if (adv_on) {
      terms.push_back(mul_scalar(
          losses::generator_adversarial(out_fake_t->dom_score,
                                        cfg.saturating_gen),
          cfg.phi));
      if (use_fm) {
        const LatentCode code_m = mixed_code(code_s, code_t);
        const DiscriminatorOutput out_fake_m =
            models.discriminator(models.decoder(code_m, fresh_z(), blk_m));
        terms.push_back(mul_scalar(
            losses::generator_adversarial(out_fake_m.dom_score,
                                          cfg.saturating_gen),
            cfg.phi));
      }
    }
    Tensor objective = sum_terms(terms);
    checked(objective, "encoder objective");
    objective.backward();
    step(Subnet::encoder);
  }

  return out;
}

TrainResult train(data::TrainView view, const RunConfig& cfg,
                  const EvalHook& hook, const std::filesystem::path& run_dir) {
  cfg.validate();
  if (view.source->dim() != static_cast<std::size_t>(view.target_images->cols()))
    throw ShapeError("train: source dim " + std::to_string(view.source->dim()) +
                     " != target dim " +
                     std::to_string(view.target_images->cols()));
  const bool needs_lambda = cfg.pixel_mixup || cfg.feature_mixup;

  Rng master(cfg.seed);
  Rng init_rng = master.fork();
  Rng batch_rng = master.fork();
  Rng lambda_rng = master.fork();
  Rng z_rng = master.fork();

  ModelSet models(cfg.dims_for(view.source->dim(), view.num_classes),
                  init_rng);
  models.set_learning_rate(cfg.learning_rate);
  data::BatchSampler sampler(view, static_cast<std::size_t>(cfg.batch_size),
                             std::move(batch_rng));
  const std::size_t iters = sampler.iterations_per_epoch();

  std::ofstream metrics_csv;
  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir);
    write_text_atomic(run_dir / "config.cfg", cfg.snapshot());
    metrics_csv.open(run_dir / "metrics.csv", std::ios::trunc);
    if (!metrics_csv) throw IoError("train: cannot write metrics.csv");
    metrics_csv << MetricsRecord::csv_header() << "\n";
  }

  TrainResult result;
  result.metrics.reserve(cfg.epochs);
  EvalResult last_eval;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double tau =
        losses::tau_schedule(epoch, cfg.epochs, cfg.tau_start, cfg.tau_end);
    LossValues acc;
    long kept_total = 0;
    for (std::size_t it = 0; it < iters; ++it) {
      const data::Batch batch = sampler.next();
      LambdaDraw lam;
      if (needs_lambda) {
        if (cfg.per_sample_lambda) {
          std::vector<double> ls(batch.x_s.rows());
          for (auto& l : ls) l = mixup::sample_lambda(cfg.alpha, lambda_rng);
          lam = LambdaDraw::rows(std::move(ls));
        } else {
          lam = LambdaDraw::batch(mixup::sample_lambda(cfg.alpha, lambda_rng));
        }
      }
      const LossValues lv = train_step(models, batch, lam, tau, cfg, z_rng);
      acc.kl += lv.kl;
      acc.cls_c += lv.cls_c;
      acc.adv_s += lv.adv_s;
      acc.adv_t += lv.adv_t;
      acc.adv_m += lv.adv_m;
      acc.soft_m += lv.soft_m;
      acc.tri_m += lv.tri_m;
      acc.cls_s_g += lv.cls_s_g;
      acc.cls_t_g += lv.cls_t_g;
      kept_total += lv.pseudo_kept;
    }
    const double inv = 1.0 / static_cast<double>(iters);
    MetricsRecord rec;
    rec.epoch = epoch;
    rec.losses = {acc.kl * inv,     acc.cls_c * inv, acc.adv_s * inv,
                  acc.adv_t * inv,  acc.adv_m * inv, acc.soft_m * inv,
                  acc.tri_m * inv,  acc.cls_s_g * inv,
                  acc.cls_t_g * inv, static_cast<int>(kept_total)};
    rec.pseudo_kept_fraction =
        static_cast<double>(kept_total) /
        static_cast<double>(iters * static_cast<std::size_t>(cfg.batch_size));
    if (hook && (epoch % cfg.eval_every == 0 || epoch + 1 == cfg.epochs)) {
      last_eval = hook(models, epoch);
    }
    rec.target_accuracy = last_eval.target_accuracy;
    rec.a_distance = last_eval.a_distance;
    rec.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.metrics.push_back(rec);
    if (!run_dir.empty()) {
      metrics_csv << rec.csv_row() << "\n";
      metrics_csv.flush();
      if ((epoch + 1) % cfg.checkpoint_every == 0 ||
          epoch + 1 == cfg.epochs) {
        const auto tmp = run_dir / "checkpoint.bin.tmp";
        models.save_checkpoint(tmp);
        std::filesystem::rename(tmp, run_dir / "checkpoint.bin");
      }
    }
  }

  if (!run_dir.empty()) {
    double best = 0.0;
    for (const auto& r : result.metrics)
      best = std::max(best, r.target_accuracy);
    std::ostringstream os;
    os << "final_target_accuracy = "
       << fmt(result.metrics.back().target_accuracy) << "\n"
       << "best_target_accuracy = " << fmt(best) << "\n"
       << "final_a_distance = " << fmt(result.metrics.back().a_distance)
       << "\n";
    write_text_atomic(run_dir / "summary.txt", os.str());
  }

  result.models = std::move(models);
  return result;
}

RunConfig baseline_config(RunConfig cfg) {
  cfg.pixel_mixup = false;
  cfg.feature_mixup = false;
  cfg.triplet = false;
  cfg.d_cls_branch = false;
  cfg.pseudo_labels = false;
  cfg.phi = 0.0;
  return cfg;
}

TrainResult source_only_baseline(data::TrainView view, const RunConfig& cfg,
                                 const EvalHook& hook,
                                 const std::filesystem::path& run_dir) {
  return train(view, baseline_config(cfg), hook, run_dir);
}

}  // namespace dmada::trainer
