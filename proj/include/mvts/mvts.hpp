#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvts/dataset.hpp"
#include "mvts/metrics.hpp"
#include "mvts/network.hpp"

namespace mvts {

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when the loss stops being finite; names epoch and batch.
class TrainingError : public ModelError {
public:
    using ModelError::ModelError;
};

struct BranchSet {
    bool deep = true;
    bool shallow = true;
    bool text = true;

    std::size_t count() const { return std::size_t{deep} + std::size_t{shallow} + std::size_t{text}; }
    /// "MVTs" for all three, "deep-only" etc. for one, "deep+text" style otherwise.
    std::string label() const;
    static BranchSet parse(const std::string& spec);  // e.g. "deep,text" or "all"
    bool operator==(const BranchSet&) const = default;
};

enum class LossMode { combined, mape_only, mean_only };

std::string to_string(LossMode mode);
LossMode parse_loss_mode(const std::string& text);

struct MvtsConfig {
    double alpha = 1.0;
    std::size_t image_side = 128;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    BranchSet branches;
    LossMode loss = LossMode::combined;
    std::size_t patience = 10;
    double validation_fraction = 0.1;
    /// Adam step for a weight with fan-in f is learning_rate * min(1, lr_fan_in / f); 0 turns this off.
    double lr_fan_in = 30.0;
    bool normalize_targets = true;
    /// Training-loss threshold whose first crossing is recorded.
    std::optional<double> target_loss;

    void validate() const;
    nlohmann::json to_json() const;
    /// Unknown keys are rejected.
    static MvtsConfig from_json(const nlohmann::json& j);
};

struct LossValue {
    double total = 0.0;
    double mape_term = 0.0;  // L_M
    double mean_term = 0.0;  // L_A
};

/// L_M = mean |y - y'| / y, L_A = |mean y - mean y'| / mean y, L = L_M + alpha L_A.
LossValue loss_combined(std::span<const double> y, std::span<const double> y_pred, double alpha);

/// Loss under `mode` plus its subgradient w.r.t. y_pred (sign(0) = 0).
LossValue loss_with_gradient(std::span<const double> y, std::span<const double> y_pred, double alpha, LossMode mode,
                             std::span<double> grad);

/// The objective optimised under `mode`.
double objective(const LossValue& value, double alpha, LossMode mode);

struct MvtsInput {
    const Tensor* text = nullptr;
    const Tensor* deep = nullptr;
    const Tensor* images = nullptr;
};

/// Three branches, each ending in 4 ReLU units, concatenated into a Dense(4)+ReLU,
/// Dense(1)+linear head.
class MvtsNetwork {
public:
    MvtsNetwork(const MvtsConfig& config, std::size_t text_width, std::size_t deep_width = 1000);

    /// Head output, batch x 1, in the price scaler's normalised units.
    Tensor forward(const MvtsInput& input);
    /// Accumulates parameter gradients from d loss / d head output.
    void backward(const Tensor& grad_output);

    void set_mode(Mode mode);
    Mode mode() const { return mode_; }

    const BranchSet& branches() const { return branches_; }
    std::size_t text_width() const { return text_width_; }
    std::size_t deep_width() const { return deep_width_; }
    std::size_t image_side() const { return image_side_; }
    std::size_t fusion_width() const { return 4 * branches_.count(); }

    Network& deep_branch() { return deep_; }
    Network& shallow_branch() { return shallow_; }
    Network& text_branch() { return text_; }
    Network& head() { return head_; }

    /// Enabled branches in deep, shallow, text order, then the head.
    std::vector<Parameter*> parameters();
    std::vector<Layer*> layers();
    std::size_t parameter_count();
    void zero_grad();

    /// Data-dependent start: every Dense unit feeding a ReLU is shifted to be active on
    /// `batch`, and the output layer starts as the constant `target_mean`.
    void prime(const MvtsInput& batch, double target_mean);

    /// Parameters and buffers (BatchNorm running statistics).
    std::vector<Tensor> state();
    void load_state(const std::vector<Tensor>& values);

private:
    std::vector<Network*> enabled();

    BranchSet branches_;
    std::size_t text_width_, deep_width_, image_side_;
    Network deep_, shallow_, text_, head_;
    Mode mode_ = Mode::train;
};

struct TrainHistory {
    std::vector<double> train_loss;       // objective, batch-size weighted mean per epoch
    std::vector<double> validation_mape;  // percent; empty without a validation split
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    bool stopped_early = false;
    std::optional<std::size_t> epochs_to_target;
    double seconds = 0.0;

    /// Without wall-clock time, so identical runs serialise identically.
    nlohmann::json to_json() const;
};

/// Primes the network, then runs mini-batch Adam on `rows`; 10% of them (seeded) are
/// held out for early stopping and the best parameters are restored at the end.
TrainHistory train_mvts(MvtsNetwork& network, const EncodedDataset& data, std::span<const std::size_t> rows,
                        const MvtsConfig& config);

/// Predicted prices in original units for `rows` of `data`.
std::vector<double> predict_mvts(MvtsNetwork& network, const EncodedDataset& data, std::span<const std::size_t> rows);

/// Batch inputs for `rows`; branches without data are left null.
struct MvtsBatch {
    Tensor text, deep, images;
    MvtsInput input() const;
};
MvtsBatch gather_batch(const EncodedDataset& data, std::span<const std::size_t> rows, const BranchSet& branches);

struct VariantSpec {
    std::string name;
    BranchSet branches;
    LossMode loss = LossMode::combined;
    bool normalize_targets = true;
    std::size_t epochs = 0;  // 0 keeps the base config's budget
};

struct VariantResult {
    VariantSpec spec;
    std::vector<double> predictions;  // test rows, original units
    TrainHistory history;
};

/// Trains each variant on the same split, seed and budget; `threads` > 1 trains in parallel.
/// Variants with normalize_targets = false use `raw` (identity price scaler).
std::vector<VariantResult> run_variants(const EncodedDataset& normalized, const EncodedDataset* raw, const Split& split,
                                        const MvtsConfig& base, std::span<const VariantSpec> variants,
                                        std::size_t threads = 1);

/// deep-only, text-only, shallow-only, MVTs.
std::vector<VariantSpec> branch_variants();
/// L_M, L_A, combined over all branches.
std::vector<VariantSpec> loss_variants();

/// Branch ablation report in column order deep-only, text-only, shallow-only, MVTs.
MetricsReport ablate(const EncodedDataset& data, const Split& split, const MvtsConfig& config,
                     const std::string& dataset_id = "", std::size_t threads = 1);

/// Checkpoint plus JSON sidecar (config, schema hash, scalers, widths).
void save_mvts(MvtsNetwork& network, const MvtsConfig& config, const EncodedDataset& data,
               const std::filesystem::path& checkpoint_path);
struct LoadedMvts {
    MvtsConfig config;
    nlohmann::json sidecar;
    MvtsNetwork network;
};
LoadedMvts load_mvts(const std::filesystem::path& checkpoint_path);

}  // namespace mvts
