#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dlrisk/core.hpp"

namespace dlrisk {

/// Side information for a fit. Labels are class indices (1 = hedge).
struct FitContext {
  std::uint64_t seed = 1;
  /// Optional grouping key per row (trader id) for internal validation splits.
  const std::vector<std::int64_t>* groups = nullptr;
};

/// Shared scoring contract of every model: fit on scaled features, return
/// P(hedge) per row, reject inputs built with a different feature schema.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::string kind() const = 0;
  virtual void fit(const Matrix& x, const IntVector& y, const FitContext& ctx) = 0;
  virtual Vector predict_proba(const Matrix& x) const = 0;
  /// Fitted parameters as JSON (the checkpoint header's "model" object).
  virtual std::string to_json() const = 0;

  /// Fingerprint of the schema the model was trained on; empty disables the check.
  void set_schema(std::string fingerprint) { schema_ = std::move(fingerprint); }
  const std::string& schema() const { return schema_; }

  /// predict_proba after checking the schema fingerprint.
  Vector score(const Matrix& x, const std::string& fingerprint) const {
    if (!schema_.empty() && fingerprint != schema_)
      throw InvalidArgument(kind() + ": feature schema does not match the one used for training");
    return predict_proba(x);
  }

 protected:
  void check_fit_input(const Matrix& x, const IntVector& y) const {
    require(x.rows() == y.size(), kind() + ": row count does not match label count");
    require(x.rows() > 0, kind() + ": empty training set");
    require(x.allFinite(), kind() + ": non-finite features");
    const auto pos = (y.array() == 1).count();
    require((y.array() == 0).count() + pos == y.size(), kind() + ": labels must be 0 or 1");
    require(pos > 0 && pos < y.size(), kind() + ": training data has a single class");
  }

 private:
  std::string schema_;
};

using ClassifierFactory = std::function<std::unique_ptr<Classifier>()>;

struct NamedFactory {
  std::string name;
  ClassifierFactory make;
};

}  // namespace dlrisk
