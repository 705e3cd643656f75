// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "flow.hpp"
#include "recurrent.hpp"
#include "samples.hpp"

namespace grusnf {

struct ModelDims {
  std::size_t dim = 10;     // d
  std::size_t hidden = 64;  // H
  std::size_t layers = 4;   // n
  std::size_t width = 64;   // conditioner hidden width
  double scale_cap = 2.0;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct TrainingMeta {
  std::uint64_t epochs = 0;
  double final_nll = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
};

/// GRU state encoder + conditional coupling flow over the next frame.
struct GruNfModel {
  ModelDims dims;
  GruParams gru;
  FlowStack flow;
  TrainingMeta meta;
};

/// GRU weights uniform(-1/sqrt(H), 1/sqrt(H)), flow at identity.
GruNfModel init_model(const ModelDims& dims, std::uint64_t seed);
void validate_model(const GruNfModel& model);

/// Every trainable matrix in checkpoint order: GRU weights, then per layer
/// the eight conditioner weights.
std::vector<DenseMatrix*> parameters(GruNfModel& model);
std::vector<const DenseMatrix*> parameters(const GruNfModel& model);
std::vector<std::string> parameter_names(const GruNfModel& model);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta = 0.5;  // weight of the auxiliary readout MSE
  std::uint64_t seed = 0;
  double clip_norm = 5.0;
};

void validate_train_config(const TrainConfig& cfg);

struct LossParts {
  double nll = 0.0;    // mean negative log-likelihood per predicted frame
  double mse = 0.0;    // mean squared readout error per predicted frame
  double total = 0.0;  // nll + beta * mse
};

/// Teacher-forced loss of one sequence: frame t (t >= 1) is scored under the
/// flow conditioned on the state after frames 0..t-1.
LossParts nll_loss(const GruNfModel& model, const KeypointSequence& seq, double beta);
/// Same quantity averaged over a set of equal-or-mixed-length sequences,
/// weighting every predicted frame equally.
LossParts dataset_loss(const GruNfModel& model, const std::vector<KeypointSequence>& seqs,
                       double beta);

/// Batched taped loss (B sequences of equal length, frames[t] is B x d).
/// Returns the scalar loss node; `nll_out`/`mse_out` receive the parts.
Var batch_loss_node(GradTape& tape, const GruNfModel& model, std::span<const Var> params,
                    const std::vector<DenseMatrix>& frames, double beta, double* nll_out,
                    double* mse_out);

/// Scalar loss for the given seq as a function of freshly registered
/// parameters. Used by gradient checks.
ScalarFn loss_function(const GruNfModel& model, const KeypointSequence& seq, double beta);

struct EpochStats {
  std::size_t epoch = 0;
  double train_nll = 0.0;
  double val_nll = 0.0;
};

struct TrainResult {
  double initial_val_nll = 0.0;
  std::vector<EpochStats> curve;
};

/// Raised when the loss stops being finite; the model passed to train() has
/// been restored to the last finite parameters.
class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, std::size_t epoch, std::size_t batch)
      : NumericError(what), epoch_(epoch), batch_(batch) {}
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Adam with global-norm clipping on the teacher-forced loss. Deterministic
/// for a fixed cfg.seed. Validation NLL uses `val` (or train when empty).
TrainResult train(GruNfModel& model, const std::vector<KeypointSequence>& train_set,
                  const std::vector<KeypointSequence>& val, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

std::string format_loss_csv(const TrainResult& result);

/// Autoregressive GRU-NF sampling: encode the window, then N times draw
/// z ~ N(0, I), invert the flow and feed the sample back. Trajectory i uses
/// the stream ("sampling/z", window_index, i), so any `threads` value yields
/// the same set.
SampleSet sample_plain(const GruNfModel& model, const DenseMatrix& window, std::size_t horizon,
                       std::size_t count, std::uint64_t seed, std::size_t window_index = 0,
                       std::size_t threads = 1);

/// Encoded state after the window; h0 = 0.
DenseMatrix encode(const GruNfModel& model, const DenseMatrix& window);
/// D x d standard normal latents for rows [begin, end) of the window's draws
/// at one step; row i is drawn from trajectory i's stream.
void draw_latents(std::vector<Rng>& streams, DenseMatrix& z);
std::vector<Rng> latent_streams(std::uint64_t seed, std::size_t window_index,
                                std::size_t begin, std::size_t end);

std::string encode_checkpoint(const GruNfModel& model);
GruNfModel decode_checkpoint(const std::string& bytes);
void save_checkpoint(const GruNfModel& model, const std::filesystem::path& path);
GruNfModel load_checkpoint(const std::filesystem::path& path);

/// Runs `body(begin, end)` over contiguous chunks of [0, count) on up to
/// `threads` threads; rethrows the first exception.
void parallel_chunks(std::size_t count, std::size_t threads,
                     const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace grusnf
