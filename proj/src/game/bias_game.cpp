#include "confattr/bias_game.hpp"

#include <cmath>
#include <fstream>
#include <mutex>
#include <span>
#include <string>

#include <json.hpp>

#include "confattr/error.hpp"
#include "confattr/kernels.hpp"

namespace confattr {

namespace {

using Rows = std::vector<Eigen::Index>;

double mean_in_order(const Eigen::VectorXd& v) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) sum += v[i];
  return sum / static_cast<double>(v.size());
}

// Applies fn(train_rows, eval_rows) per fold and scatters the predictions.
// With fewer than two folds fn is called once with empty row lists, meaning
// "all rows" for both roles.
template <class Fn>
Eigen::VectorXd over_folds(std::size_t n, std::size_t folds, Fn&& fn) {
  if (folds <= 1) return fn(Rows{}, Rows{});
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (std::size_t f = 0; f < folds; ++f) {
    Rows train, eval;
    for (std::size_t i = 0; i < n; ++i) (i % folds == f ? eval : train).push_back(static_cast<Eigen::Index>(i));
    if (eval.empty()) continue;
    const Eigen::VectorXd part = fn(train, eval);
    for (std::size_t t = 0; t < eval.size(); ++t) out[eval[t]] = part[static_cast<Eigen::Index>(t)];
  }
  return out;
}

}  // namespace

std::string_view to_string(ValueMode mode) {
  switch (mode) {
    case ValueMode::Signed: return "signed";
    case ValueMode::Absolute: return "absolute";
    case ValueMode::Squared: return "squared";
  }
  return "signed";
}

ValueMode value_mode_from_string(std::string_view name) {
  for (auto m : {ValueMode::Signed, ValueMode::Absolute, ValueMode::Squared}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown value mode '" + std::string(name) + "'");
}

Eigen::VectorXd arm_contrast(const RegressionBackend& backend, const Eigen::MatrixXd& x_train,
                             const Eigen::VectorXd& a_train, const Eigen::VectorXd& y_train,
                             const Eigen::MatrixXd& x_eval) {
  if (x_train.rows() != a_train.size() || x_train.rows() != y_train.size()) {
    throw Error(ErrorCode::LengthMismatch, "training rows, treatment and outcome lengths differ");
  }
  Rows treated, control;
  for (Eigen::Index i = 0; i < a_train.size(); ++i) (a_train[i] == 1.0 ? treated : control).push_back(i);
  if (treated.empty() || control.empty()) throw Error(ErrorCode::EmptyArm, "a treatment arm has no training rows");

  const Eigen::VectorXd m1 = fit(backend, x_train(treated, Eigen::all), y_train(treated)).predict(x_eval);
  const Eigen::VectorXd m0 = fit(backend, x_train(control, Eigen::all), y_train(control)).predict(x_eval);
  Eigen::VectorXd out(x_eval.rows());
  const auto len = static_cast<std::size_t>(out.size());
  kernels::subtract(std::span<const double>(m1.data(), len), std::span<const double>(m0.data(), len),
                    std::span<double>(out.data(), len));
  return out;
}

BiasGame::BiasGame(Dataset ds, RegressionBackend backend, GameOptions options)
    : ds_(std::move(ds)), backend_(backend), options_(options) {
  if (options_.threads == 0) options_.threads = configured_threads();
  pseudo_.tau_hat = compute_contrast(CoalitionMask::full(ds_.p()));
  pseudo_.tau_bar = mean_in_order(pseudo_.tau_hat);
}

std::unique_ptr<BiasGame> build_game(Dataset ds, RegressionBackend backend, GameOptions options) {
  return std::make_unique<BiasGame>(std::move(ds), backend, options);
}

void BiasGame::check_width(const CoalitionMask& mask) const {
  if (mask.width() != ds_.p()) {
    throw Error(ErrorCode::WidthMismatch,
                "mask width " + std::to_string(mask.width()) + " differs from p = " + std::to_string(ds_.p()));
  }
}

Eigen::VectorXd BiasGame::compute_contrast(const CoalitionMask& mask) const {
  const Eigen::MatrixXd xs = subset_columns(ds_.x(), mask);
  return over_folds(ds_.n(), options_.crossfit_folds, [&](const Rows& train, const Rows& eval) {
    if (eval.empty()) return arm_contrast(backend_, xs, ds_.a(), ds_.y(), xs);
    return arm_contrast(backend_, xs(train, Eigen::all), ds_.a()(train), ds_.y()(train), xs(eval, Eigen::all));
  });
}

Eigen::VectorXd BiasGame::compute_projection(const CoalitionMask& mask) const {
  const Eigen::MatrixXd xs = subset_columns(ds_.x(), mask);
  const Eigen::VectorXd& t = pseudo_.tau_hat;
  return over_folds(ds_.n(), options_.crossfit_folds, [&](const Rows& train, const Rows& eval) {
    if (eval.empty()) return fit(backend_, xs, t, mask).predict(xs);
    return fit(backend_, xs(train, Eigen::all), t(train), mask).predict(xs(eval, Eigen::all));
  });
}

double BiasGame::signed_value(const Eigen::VectorXd& delta) const {
  return -(mean_in_order(delta) - pseudo_.tau_bar);
}

double BiasGame::apply_mode(double v) const {
  switch (options_.value_mode) {
    case ValueMode::Signed: return v;
    case ValueMode::Absolute: return -std::abs(v);
    case ValueMode::Squared: return -(v * v);
  }
  return v;
}

BiasGame::Entry* BiasGame::find(const CoalitionMask& mask) const {
  std::shared_lock lock(mutex_);
  auto it = cache_.find(mask);
  return it == cache_.end() ? nullptr : it->second.get();
}

BiasGame::Entry& BiasGame::ensure(const CoalitionMask& mask) {
  check_width(mask);
  if (Entry* hit = find(mask)) {
    ++hit->hits;
    ++total_hits_;
    return *hit;
  }
  auto fresh = std::make_unique<Entry>();
  fresh->delta = compute_contrast(mask);
  fresh->global = signed_value(fresh->delta);

  std::unique_lock lock(mutex_);
  auto [it, inserted] = cache_.try_emplace(mask, std::move(fresh));
  if (inserted) {
    ++eval_count_;
  } else {
    // Another thread got there first; its value has the same bits.
    ++it->second->hits;
    ++total_hits_;
  }
  return *it->second;
}

const Eigen::VectorXd& BiasGame::ensure_projection(Entry& entry, const CoalitionMask& mask) {
  {
    std::shared_lock lock(mutex_);
    if (entry.g) return *entry.g;
  }
  auto g = std::make_shared<const Eigen::VectorXd>(compute_projection(mask));
  std::unique_lock lock(mutex_);
  if (!entry.g) entry.g = std::move(g);
  return *entry.g;
}

Eigen::VectorXd BiasGame::observational_contrast(const CoalitionMask& mask) { return ensure(mask).delta; }

Eigen::VectorXd BiasGame::cate_projection(const CoalitionMask& mask) {
  Entry& entry = ensure(mask);
  return ensure_projection(entry, mask);
}

double BiasGame::global_value(const CoalitionMask& mask) { return ensure(mask).global; }

double BiasGame::value(const CoalitionMask& mask) { return apply_mode(global_value(mask)); }

Eigen::VectorXd BiasGame::local_values(const CoalitionMask& mask) {
  Entry& entry = ensure(mask);
  const Eigen::VectorXd& g = ensure_projection(entry, mask);
  Eigen::VectorXd bias(entry.delta.size());
  const auto len = static_cast<std::size_t>(bias.size());
  kernels::subtract(std::span<const double>(entry.delta.data(), len), std::span<const double>(g.data(), len),
                    std::span<double>(bias.data(), len));
  switch (options_.value_mode) {
    case ValueMode::Signed: return -bias;
    case ValueMode::Absolute: return -bias.cwiseAbs();
    case ValueMode::Squared: return -bias.cwiseAbs2();
  }
  return -bias;
}

CoalitionValue BiasGame::coalition_value(const CoalitionMask& mask) {
  CoalitionValue out;
  out.local_values = local_values(mask);
  Entry& entry = ensure(mask);
  out.global_value = apply_mode(entry.global);
  out.delta_s = entry.delta;
  out.g_s = *entry.g;
  return out;
}

std::vector<double> BiasGame::values(std::span<const CoalitionMask> masks) {
  // Evaluate the distinct uncached masks concurrently, then resolve the
  // whole batch in input order so hit counts do not depend on scheduling.
  std::vector<CoalitionMask> missing;
  {
    std::shared_lock lock(mutex_);
    std::map<CoalitionMask, bool> queued;
    for (const auto& m : masks) {
      check_width(m);
      if (!cache_.contains(m) && queued.try_emplace(m, true).second) missing.push_back(m);
    }
  }
  std::vector<std::unique_ptr<Entry>> computed(missing.size());
  parallel_for(missing.size(), options_.threads, [&](std::size_t t) {
    auto e = std::make_unique<Entry>();
    e->delta = compute_contrast(missing[t]);
    e->global = signed_value(e->delta);
    computed[t] = std::move(e);
  });
  {
    std::unique_lock lock(mutex_);
    for (std::size_t t = 0; t < missing.size(); ++t) {
      if (cache_.try_emplace(missing[t], std::move(computed[t])).second) ++eval_count_;
    }
  }

  std::vector<double> out;
  out.reserve(masks.size());
  std::map<CoalitionMask, bool> seen;
  for (const auto& m : missing) seen.emplace(m, false);
  for (const auto& m : masks) {
    Entry* e = find(m);
    auto it = seen.find(m);
    if (it != seen.end() && !it->second) {
      it->second = true;  // first request of a freshly computed mask
    } else {
      ++e->hits;
      ++total_hits_;
    }
    out.push_back(apply_mode(e->global));
  }
  return out;
}

std::size_t BiasGame::cache_size() const {
  std::shared_lock lock(mutex_);
  return cache_.size();
}

std::vector<CoalitionLogRecord> BiasGame::log() const {
  std::shared_lock lock(mutex_);
  std::vector<CoalitionLogRecord> out;
  out.reserve(cache_.size());
  for (const auto& [mask, entry] : cache_) out.push_back({mask, apply_mode(entry->global), entry->hits.load()});
  return out;
}

void BiasGame::write_log(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& rec : log()) {
    nlohmann::ordered_json j;
    j["mask_bits_hex"] = rec.mask.to_hex();
    j["global_value"] = rec.global_value;
    j["n_cache_hits"] = rec.n_cache_hits;
    os << j.dump() << '\n';
  }
  if (!os) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace confattr
