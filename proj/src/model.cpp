// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <map>
#include <sstream>
#include <thread>

#include "io.hpp"

namespace grusnf {
namespace {

constexpr char kMagic[8] = {'G', 'R', 'U', 'S', 'N', 'F', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

struct LiftedWeights {
  GruWeights<Var> gru;
  std::vector<CouplingWeights<Var>> layers;
};

LiftedWeights lift(std::span<const Var> params, std::size_t layer_count) {
  LiftedWeights w;
  std::size_t i = 0;
  auto take = [&](const char*, Var& v) {
    if (i >= params.size()) throw ContractError("too few parameters for model layout");
    v = params[i++];
  };
  for_each_weight(w.gru, take);
  w.layers.resize(layer_count);
  for (auto& layer : w.layers) for_each_weight(layer, take);
  if (i != params.size()) throw ContractError("too many parameters for model layout");
  return w;
}

/// Sum over the batch and predicted frames of log p(frame) and of the squared
/// readout error.
template <class M, class Layers>
std::pair<M, M> sequence_terms(const std::vector<M>& frames, const M& h0,
                               const GruWeights<M>& gru, const FlowStack& flow,
                               const Layers& layers) {
  M h = h0;
  M lp_sum = lift_constant(h0, DenseMatrix(1, 1));
  M sq_sum = lift_constant(h0, DenseMatrix(1, 1));
  for (std::size_t t = 1; t < frames.size(); ++t) {
    h = gru_cell(frames[t - 1], h, gru);
    lp_sum = add(lp_sum, sum(flow_log_prob(frames[t], h, flow, layers)));
    sq_sum = add(sq_sum, sum(square(sub(readout(h, gru), frames[t]))));
  }
  return {lp_sum, sq_sum};
}

std::vector<DenseMatrix> batch_frames(const std::vector<const KeypointSequence*>& seqs) {
  const std::size_t length = seqs.front()->length();
  const std::size_t d = seqs.front()->dim();
  std::vector<DenseMatrix> frames(length, DenseMatrix(seqs.size(), d));
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    for (std::size_t t = 0; t < length; ++t) {
      auto src = seqs[b]->frames.row_span(t);
      std::copy(src.begin(), src.end(), frames[t].row_span(b).begin());
    }
  }
  return frames;
}

void check_sequence_for(const GruNfModel& model, const KeypointSequence& seq) {
  if (seq.length() < 2) throw ContractError("sequence " + seq.id + " needs at least 2 frames");
  if (seq.dim() != model.dims.dim) {
    throw ShapeError("sequence " + seq.id + " has d=" + std::to_string(seq.dim()) +
                     " but the model expects d=" + std::to_string(model.dims.dim));
  }
}

// Plain-path sums for one batch of equal-length sequences.
std::pair<double, double> batch_sums(const GruNfModel& model,
                                     const std::vector<const KeypointSequence*>& seqs) {
  const auto frames = batch_frames(seqs);
  const DenseMatrix h0(seqs.size(), model.dims.hidden);
  auto [lp, sq] = sequence_terms(frames, h0, model.gru, model.flow, StackWeights{model.flow});
  return {lp[0], sq[0]};
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::string raw(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (pos_ + n > bytes_.size()) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what);
    }
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void validate_sample_set(const SampleSet& set) {
  if (set.trajectories.empty()) throw ContractError("sample set is empty");
  for (const auto& t : set.trajectories) {
    if (t.rows() != set.horizon || t.cols() != set.dim) {
      throw ContractError("sample set " + set.window_id + " has inconsistent trajectory shapes");
    }
  }
}

GruNfModel init_model(const ModelDims& dims, std::uint64_t seed) {
  if (dims.dim < 2 || dims.hidden == 0 || dims.width == 0 || !(dims.scale_cap > 0.0)) {
    throw ContractError("invalid model dimensions");
  }
  GruNfModel model;
  model.dims = dims;
  Rng rng = make_stream(seed, "init");
  model.gru = init_gru(dims.dim, dims.hidden, rng);
  model.flow = init_flow(dims.dim, dims.hidden, dims.layers, dims.width, dims.scale_cap, rng);
  model.meta.seed = seed;
  return model;
}

void validate_model(const GruNfModel& model) {
  validate_gru(model.gru);
  validate_flow(model.flow);
  const ModelDims& d = model.dims;
  if (gru_input_dim(model.gru) != d.dim || gru_hidden_dim(model.gru) != d.hidden ||
      model.flow.dim != d.dim || model.flow.cond_dim != d.hidden ||
      model.flow.size() != d.layers || model.flow.width != d.width ||
      model.flow.scale_cap != d.scale_cap) {
    throw ShapeError("model parts disagree with the model dimension header");
  }
}

std::vector<DenseMatrix*> parameters(GruNfModel& model) {
  std::vector<DenseMatrix*> out;
  auto push = [&](const char*, DenseMatrix& m) { out.push_back(&m); };
  for_each_weight(model.gru, push);
  for (auto& layer : model.flow.layers) for_each_weight(layer.weights, push);
  return out;
}

std::vector<const DenseMatrix*> parameters(const GruNfModel& model) {
  auto mut = parameters(const_cast<GruNfModel&>(model));
  return {mut.begin(), mut.end()};
}

std::vector<std::string> parameter_names(const GruNfModel& model) {
  std::vector<std::string> names;
  GruNfModel& m = const_cast<GruNfModel&>(model);
  for_each_weight(m.gru, [&](const char* n, DenseMatrix&) { names.push_back(std::string("gru.") + n); });
  for (std::size_t k = 0; k < m.flow.size(); ++k) {
    for_each_weight(m.flow.layers[k].weights, [&](const char* n, DenseMatrix&) {
      names.push_back("flow." + std::to_string(k) + "." + n);
    });
  }
  return names;
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(cfg.beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (!(cfg.clip_norm > 0.0)) throw ConfigError("gradient clip norm must be positive");
}

LossParts nll_loss(const GruNfModel& model, const KeypointSequence& seq, double beta) {
  check_sequence_for(model, seq);
  auto [lp, sq] = batch_sums(model, {&seq});
  const double steps = static_cast<double>(seq.length() - 1);
  LossParts parts{-lp / steps, sq / steps, 0.0};
  parts.total = parts.nll + beta * parts.mse;
  if (!std::isfinite(parts.total)) throw NumericError("non-finite loss for sequence " + seq.id);
  return parts;
}

LossParts dataset_loss(const GruNfModel& model, const std::vector<KeypointSequence>& seqs,
                       double beta) {
  if (seqs.empty()) throw ContractError("dataset_loss: no sequences");
  constexpr std::size_t kChunk = 64;
  double lp_total = 0.0, sq_total = 0.0, steps = 0.0;
  std::size_t i = 0;
  while (i < seqs.size()) {
    std::vector<const KeypointSequence*> chunk;
    const std::size_t length = seqs[i].length();
    while (i < seqs.size() && chunk.size() < kChunk && seqs[i].length() == length) {
      check_sequence_for(model, seqs[i]);
      chunk.push_back(&seqs[i++]);
    }
    auto [lp, sq] = batch_sums(model, chunk);
    lp_total += lp;
    sq_total += sq;
    steps += static_cast<double>(chunk.size() * (length - 1));
  }
  LossParts parts{-lp_total / steps, sq_total / steps, 0.0};
  parts.total = parts.nll + beta * parts.mse;
  return parts;
}

Var batch_loss_node(GradTape& tape, const GruNfModel& model, std::span<const Var> params,
                    const std::vector<DenseMatrix>& frames, double beta, double* nll_out,
                    double* mse_out) {
  if (frames.size() < 2) throw ContractError("batch_loss: sequences need at least 2 frames");
  const LiftedWeights w = lift(params, model.flow.size());
  std::vector<Var> frame_vars;
  frame_vars.reserve(frames.size());
  for (const auto& f : frames) frame_vars.push_back(tape.constant(f));
  const std::size_t batch = frames.front().rows();
  const Var h0 = tape.constant(DenseMatrix(batch, model.dims.hidden));
  auto [lp, sq] = sequence_terms(frame_vars, h0, w.gru, model.flow, w.layers);
  const double denom = static_cast<double>(batch * (frames.size() - 1));
  if (nll_out) *nll_out = -lp.value()[0] / denom;
  if (mse_out) *mse_out = sq.value()[0] / denom;
  return add(scale(lp, -1.0 / denom), scale(sq, beta / denom));
}

ScalarFn loss_function(const GruNfModel& model, const KeypointSequence& seq, double beta) {
  check_sequence_for(model, seq);
  std::vector<DenseMatrix> frames;
  for (std::size_t t = 0; t < seq.length(); ++t) frames.push_back(DenseMatrix::row(seq.frames.row_span(t)));
  return [&model, frames, beta](GradTape& tape, std::span<const Var> params) {
    return batch_loss_node(tape, model, params, frames, beta, nullptr, nullptr);
  };
}

TrainResult train(GruNfModel& model, const std::vector<KeypointSequence>& train_set,
                  const std::vector<KeypointSequence>& val, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  validate_train_config(cfg);
  validate_model(model);
  if (train_set.empty()) throw ContractError("train: empty training set");
  for (const auto& s : train_set) check_sequence_for(model, s);
  const auto& held_out = val.empty() ? train_set : val;

  TrainResult result;
  result.initial_val_nll = dataset_loss(model, held_out, cfg.beta).nll;

  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < train_set.size(); ++i) buckets[train_set[i].length()].push_back(i);

  auto params = parameters(model);
  std::vector<DenseMatrix> m1, m2;
  for (auto* p : params) {
    m1.emplace_back(p->rows(), p->cols());
    m2.emplace_back(p->rows(), p->cols());
  }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::uint64_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng = make_stream(cfg.seed, "train/shuffle", {epoch});
    std::vector<std::vector<std::size_t>> batches;
    for (auto& [length, idx] : buckets) {
      std::vector<std::size_t> order = idx;
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                             order.begin() + static_cast<std::ptrdiff_t>(
                                                 std::min(order.size(), b + cfg.batch_size)));
      }
    }
    std::shuffle(batches.begin(), batches.end(), rng);

    double nll_weighted = 0.0, frames_seen = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      std::vector<const KeypointSequence*> seqs;
      for (std::size_t i : batches[bi]) seqs.push_back(&train_set[i]);
      const auto frames = batch_frames(seqs);

      std::vector<DenseMatrix> snapshot;
      snapshot.reserve(params.size());
      for (auto* p : params) snapshot.push_back(*p);
      auto restore = [&] {
        for (std::size_t i = 0; i < params.size(); ++i) *params[i] = snapshot[i];
      };

      GradTape tape;
      std::vector<Var> vars;
      vars.reserve(params.size());
      for (auto* p : params) vars.push_back(tape.parameter(*p));
      double nll = 0.0;
      const Var loss = batch_loss_node(tape, model, vars, frames, cfg.beta, &nll, nullptr);
      if (!std::isfinite(loss.value()[0])) {
        restore();
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(bi),
                            epoch, bi);
      }
      auto grads = tape.backward(loss);

      double norm_sq = 0.0;
      for (const auto& g : grads) norm_sq += squared_norm(g.values());
      const double norm = std::sqrt(norm_sq);
      const double clip = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;

      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      bool finite = std::isfinite(norm);
      for (std::size_t p = 0; p < params.size() && finite; ++p) {
        auto w = params[p]->values();
        auto g = grads[p].values();
        auto a = m1[p].values();
        auto b = m2[p].values();
        for (std::size_t i = 0; i < w.size(); ++i) {
          const double gi = g[i] * clip;
          a[i] = kBeta1 * a[i] + (1.0 - kBeta1) * gi;
          b[i] = kBeta2 * b[i] + (1.0 - kBeta2) * gi * gi;
          w[i] -= cfg.learning_rate * (a[i] / c1) / (std::sqrt(b[i] / c2) + kEps);
          finite = finite && std::isfinite(w[i]);
        }
      }
      if (!finite) {
        restore();
        throw TrainingError("non-finite update at epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(bi),
                            epoch, bi);
      }
      const double n_frames = static_cast<double>(seqs.size() * (frames.size() - 1));
      nll_weighted += nll * n_frames;
      frames_seen += n_frames;
    }

    EpochStats stats{epoch, nll_weighted / frames_seen, dataset_loss(model, held_out, cfg.beta).nll};
    if (!std::isfinite(stats.val_nll)) {
      throw TrainingError("non-finite validation NLL at epoch " + std::to_string(epoch), epoch, 0);
    }
    result.curve.push_back(stats);
    model.meta.epochs += 1;
    model.meta.final_nll = stats.val_nll;
    if (on_epoch) on_epoch(stats);
  }
  model.meta.seed = cfg.seed;
  return result;
}

std::string format_loss_csv(const TrainResult& result) {
  std::string out = "epoch,train_nll,val_nll\n";
  for (const auto& e : result.curve) {
    out += std::to_string(e.epoch) + "," + format_double(e.train_nll, 17) + "," +
           format_double(e.val_nll, 17) + "\n";
  }
  return out;
}

DenseMatrix encode(const GruNfModel& model, const DenseMatrix& window) {
  if (window.cols() != model.dims.dim) {
    throw ShapeError("window has d=" + std::to_string(window.cols()) + " but the model expects d=" +
                     std::to_string(model.dims.dim));
  }
  return encode_window(window, model.gru, DenseMatrix(1, model.dims.hidden));
}

std::vector<Rng> latent_streams(std::uint64_t seed, std::size_t window_index, std::size_t begin,
                                std::size_t end) {
  std::vector<Rng> streams;
  streams.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    streams.push_back(make_stream(seed, "sampling/z", {window_index, i}));
  }
  return streams;
}

void draw_latents(std::vector<Rng>& streams, DenseMatrix& z) {
  for (std::size_t r = 0; r < z.rows(); ++r) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : z.row_span(r)) v = normal(streams[r]);
  }
}

void parallel_chunks(std::size_t count, std::size_t threads,
                     const std::function<void(std::size_t, std::size_t)>& body) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    body(0, count);
    return;
  }
  const std::size_t chunk = (count + threads - 1) / threads;
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk, end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, t, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

SampleSet sample_plain(const GruNfModel& model, const DenseMatrix& window, std::size_t horizon,
                       std::size_t count, std::uint64_t seed, std::size_t window_index,
                       std::size_t threads) {
  if (horizon == 0 || count == 0) throw ContractError("sample_plain: horizon and count must be >= 1");
  const DenseMatrix h_window = encode(model, window);
  const std::size_t d = model.dims.dim;
  SampleSet set;
  set.model_tag = "plain";
  set.horizon = horizon;
  set.dim = d;
  set.trajectories.assign(count, DenseMatrix(horizon, d));
  parallel_chunks(count, threads, [&](std::size_t begin, std::size_t end) {
    const std::size_t rows = end - begin;
    auto streams = latent_streams(seed, window_index, begin, end);
    DenseMatrix h = repeat_row(h_window, rows);
    DenseMatrix z(rows, d);
    for (std::size_t t = 0; t < horizon; ++t) {
      draw_latents(streams, z);
      const DenseMatrix y = inverse(z, h, model.flow);
      for (std::size_t r = 0; r < rows; ++r) {
        auto src = y.row_span(r);
        std::copy(src.begin(), src.end(), set.trajectories[begin + r].row_span(t).begin());
      }
      h = gru_step(y, h, model.gru);
    }
  });
  return set;
}

std::string encode_checkpoint(const GruNfModel& model) {
  validate_model(model);
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kFormatVersion);
  const ModelDims& d = model.dims;
  put_u64(out, d.dim);
  put_u64(out, d.hidden);
  put_u64(out, d.layers);
  put_u64(out, d.width);
  put_f64(out, d.scale_cap);
  put_u64(out, model.meta.epochs);
  put_f64(out, model.meta.final_nll);
  put_u64(out, model.meta.seed);
  const auto params = parameters(model);
  put_u64(out, params.size());
  for (const DenseMatrix* p : params) {
    put_u64(out, p->rows());
    put_u64(out, p->cols());
    for (double v : p->values()) put_f64(out, v);
  }
  return out;
}

GruNfModel decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("not a grusnf checkpoint (bad magic bytes)");
  }
  in.raw(sizeof kMagic, "magic");
  const std::uint32_t version = in.u32("version");
  if (version != kFormatVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) +
                      " (expected " + std::to_string(kFormatVersion) + ")");
  }
  ModelDims dims;
  dims.dim = in.u64("dimension header");
  dims.hidden = in.u64("dimension header");
  dims.layers = in.u64("dimension header");
  dims.width = in.u64("dimension header");
  dims.scale_cap = in.f64("dimension header");
  if (dims.dim < 2 || dims.dim > 100000 || dims.hidden == 0 || dims.hidden > 100000 ||
      dims.layers < 2 || dims.layers > 1000 || dims.width == 0 || dims.width > 100000 ||
      !(dims.scale_cap > 0.0)) {
    throw FormatError("checkpoint dimension header is inconsistent");
  }
  GruNfModel model = init_model(dims, 0);
  model.meta.epochs = in.u64("metadata");
  model.meta.final_nll = in.f64("metadata");
  model.meta.seed = in.u64("metadata");
  auto params = parameters(model);
  const std::uint64_t count = in.u64("parameter count");
  if (count != params.size()) {
    throw FormatError("checkpoint has " + std::to_string(count) + " parameter blocks, expected " +
                      std::to_string(params.size()));
  }
  const auto names = parameter_names(model);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::uint64_t rows = in.u64("block header");
    const std::uint64_t cols = in.u64("block header");
    if (rows != params[i]->rows() || cols != params[i]->cols()) {
      throw FormatError("checkpoint block " + names[i] + " is " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", dimension header implies " +
                        std::to_string(params[i]->rows()) + "x" +
                        std::to_string(params[i]->cols()));
    }
    for (double& v : params[i]->values()) v = in.f64(names[i].c_str());
  }
  if (!in.at_end()) throw FormatError("checkpoint has trailing bytes");
  return model;
}

void save_checkpoint(const GruNfModel& model, const std::filesystem::path& path) {
  write_text_file(path, encode_checkpoint(model));
}

GruNfModel load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_text_file(path));
}

}  // namespace grusnf
