#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

namespace windscale {

// ----------------------------------------------------------------------------
// Variable catalog
// ----------------------------------------------------------------------------

enum class Variable : std::uint8_t {
  U_surf,
  V_surf,
  T_surf,
  T_546,
  U_546,
  V_546,
  W_546,
  u10,
  v10,
  me,
  mg,
  z0,
};

enum class VariableRole : std::uint8_t { Predictor, Predictand, Covariate };

struct VariableInfo {
  Variable id;
  std::string_view name;
  std::string_view units;
  VariableRole role;
  std::string_view description;
};

const std::array<VariableInfo, 12>& variable_catalog();
const VariableInfo& variable_info(Variable v);
std::string_view variable_name(Variable v);
std::optional<Variable> parse_variable(std::string_view name);

/// Coarse dynamic inputs, in network channel order.
inline constexpr std::array<Variable, 7> kPredictors{
    Variable::U_surf, Variable::V_surf, Variable::T_surf, Variable::T_546,
    Variable::U_546,  Variable::V_546,  Variable::W_546};
/// Fine targets.
inline constexpr std::array<Variable, 2> kPredictands{Variable::u10, Variable::v10};
/// Static fine-grid conditioning fields.
inline constexpr std::array<Variable, 3> kCovariates{Variable::me, Variable::mg, Variable::z0};

inline constexpr std::int64_t kScaleFactor = 8;

// ----------------------------------------------------------------------------
// FieldGrid
// ----------------------------------------------------------------------------

/// Rectangular multi-channel field with layout (C, H, W), stored as float64.
///
/// Instances are immutable: the constructor takes a private copy of the data
/// and no accessor hands out a mutable view. Copies share storage.
class FieldGrid {
 public:
  FieldGrid() = default;

  /// Throws ShapeError on a channel/shape mismatch, NumericError on non-finite
  /// values and ShapeError when the mask channel leaves [0, 1].
  FieldGrid(std::vector<Variable> channels, const torch::Tensor& data, double spacing_km = 2.5,
            std::string timestamp = {});

  /// Structural checks only (channel count, shape). Value invariants are left
  /// to `validate_pair` so that imported data can be diagnosed instead of
  /// rejected outright.
  static FieldGrid unvalidated(std::vector<Variable> channels, const torch::Tensor& data,
                               double spacing_km = 2.5, std::string timestamp = {});

  const std::vector<Variable>& channels() const { return channels_; }
  /// (C, H, W) float64, contiguous. Treat as read-only.
  const torch::Tensor& data() const { return data_; }
  std::int64_t channel_count() const { return static_cast<std::int64_t>(channels_.size()); }
  std::int64_t height() const { return data_.defined() ? data_.size(1) : 0; }
  std::int64_t width() const { return data_.defined() ? data_.size(2) : 0; }
  double spacing_km() const { return spacing_km_; }
  const std::string& timestamp() const { return timestamp_; }
  bool empty() const { return !data_.defined(); }

  std::optional<std::int64_t> index_of(Variable v) const;
  bool has(Variable v) const { return index_of(v).has_value(); }
  /// (H, W) slice of one channel; throws ShapeError when absent.
  torch::Tensor channel(Variable v) const;

  FieldGrid select(std::span<const Variable> wanted) const;
  /// Same metadata, new values. The new tensor must have the same channel count.
  FieldGrid with_data(const torch::Tensor& data) const;
  FieldGrid window(std::int64_t top, std::int64_t left, std::int64_t height,
                   std::int64_t width) const;

  /// Human-readable list of value-level invariant violations (empty when valid).
  std::vector<std::string> value_violations(std::string_view label) const;

 private:
  struct Unchecked {};
  FieldGrid(Unchecked, std::vector<Variable> channels, const torch::Tensor& data, double spacing_km,
            std::string timestamp);

  std::vector<Variable> channels_;
  torch::Tensor data_;
  double spacing_km_ = 2.5;
  std::string timestamp_;
};

bool same_values(const FieldGrid& a, const FieldGrid& b);

// ----------------------------------------------------------------------------
// SamplePair and Batch
// ----------------------------------------------------------------------------

/// One forecast hour: 7 coarse predictors, 2 fine predictands and the static
/// covariates that every pair of a dataset shares.
struct SamplePair {
  FieldGrid low;
  FieldGrid high;
  FieldGrid covariates;
  std::string timestamp;
  std::int64_t hour = 0;
};

/// Network-ready crops. `covariates` holds one window per batch item because
/// the crops of one batch come from different parts of the domain.
struct Batch {
  torch::Tensor low;         // (B, 7, h, w)
  torch::Tensor high;        // (B, 2, 8h, 8w)
  torch::Tensor covariates;  // (B, 3, 8h, 8w) or (3, 8h, 8w)
};

/// Empty iff every SamplePair invariant holds.
std::vector<std::string> validate_pair(const SamplePair& pair);

/// Empty iff all pairs carry bit-identical covariates.
std::vector<std::string> validate_static_covariates(std::span<const SamplePair> pairs);

/// Aligned window of a pair. `top_hr` and `left_hr` are fine-grid offsets and
/// must be multiples of 8; the coarse window starts at (top_hr/8, left_hr/8).
SamplePair crop(const SamplePair& pair, std::int64_t top_hr, std::int64_t left_hr,
                std::int64_t size_hr = 128);

/// Stack crops (all the same size) into a Batch with per-item covariates.
Batch stack_batch(std::span<const SamplePair> crops);

}  // namespace windscale
