// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Pre-LN encoder-decoder transformer. Blocks whose 1-based index appears in
// ModelConfig::routed_layers carry a task-routed expert bank instead of the
// dense feed-forward sublayer, in both stacks.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trmoe/moe.hpp"
#include "trmoe/ops.hpp"
#include "trmoe/task.hpp"
#include "trmoe/tensor.hpp"

namespace trmoe {

inline constexpr int kPadId = 0;
inline constexpr int kEosId = 1;
inline constexpr int kUnkId = 2;

struct ModelConfig {
    std::size_t vocab_size = 32;
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t d_ff = 128;
    std::size_t n_encoder_blocks = 4;
    std::size_t n_decoder_blocks = 4;
    std::size_t max_seq_len = 128;
    double dropout_rate = 0.1;
    std::vector<std::size_t> routed_layers{2, 4};
    std::size_t n_experts = 5;
    std::size_t top_k = 2;
    std::size_t d_task = 32;
    std::size_t d_router_hidden = 32;
    double init_std = 0.02;
    // Experts start as copies of one dense FFN plus this much gaussian noise,
    // unless fresh_experts is set.
    double expert_noise_std = 0.01;
    bool fresh_experts = false;
    double ln_eps = 1e-6;
    std::uint64_t seed = 7;

    /// Throws ConfigError naming the first offending field.
    void validate() const;
    std::string to_json() const;
    static ModelConfig from_json(std::string_view text);
};

enum class Stack { Encoder, Decoder };

struct Attention {
    std::vector<Tensor> wq, wk, wv;  // per head, [d_model, d_head]
    Tensor wo;                       // [d_model, d_model]
};

struct RoutedFfn {
    Router router;
    ExpertBank bank;
};

struct Block {
    Stack stack = Stack::Encoder;
    std::size_t index = 1;  // 1-based within its stack
    Tensor self_ln;
    Attention self_attn;
    Tensor cross_ln;
    std::optional<Attention> cross_attn;  // decoder only
    Tensor ffn_ln;
    std::optional<FeedForward> ffn;  // dense blocks
    std::optional<RoutedFfn> moe;    // routed blocks

    std::string name() const;
};

/// Per routed block, one dense gate per task (indexed by task code).
using LayerGates = std::array<Tensor, kNumTasks>;

class Model {
public:
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    static Model build(const ModelConfig& config, Rng& rng);

    /// Deep copy of every parameter.
    Model clone() const;

    const ModelConfig& config() const noexcept { return config_; }
    std::vector<NamedTensor>& parameters() noexcept { return params_; }
    const std::vector<NamedTensor>& parameters() const noexcept { return params_; }
    const Tensor* find_parameter(std::string_view name) const;
    std::size_t parameter_count() const;
    void zero_grad();

    const std::vector<Block>& encoder_blocks() const noexcept { return encoder_; }
    const std::vector<Block>& decoder_blocks() const noexcept { return decoder_; }
    const TaskEmbeddingTable& task_embeddings() const noexcept { return task_table_; }

    /// Routed blocks, encoder first, in index order ("enc.2", "dec.2", ...).
    std::vector<const Block*> routed_blocks() const;
    std::vector<std::string> routed_layer_names() const;

    std::vector<GateDistribution> compute_gates(TaskId task) const;
    std::vector<LayerGates> dense_gates() const;

    /// Encoder output [prompt_len, d_model]. With final_norm == false the raw
    /// residual stream is returned.
    Tensor encode(std::span<const int> prompt, TaskId task, Mode mode, Rng* rng,
                  const std::vector<GateDistribution>* gates = nullptr, bool final_norm = true) const;
    Tensor decode_hidden(const Tensor& memory, std::span<const int> decoder_input, TaskId task,
                         Mode mode, Rng* rng, const std::vector<GateDistribution>* gates = nullptr,
                         bool final_norm = true) const;
    Tensor project(const Tensor& hidden) const;

    /// Logits [target_len, vocab]. Row s conditions on target[<s] (the
    /// decoder input is the target shifted right behind PAD) and the whole
    /// prompt.
    Tensor forward_teacher_forced(std::span<const int> prompt, std::span<const int> target,
                                  TaskId task, Mode mode, Rng* rng = nullptr,
                                  const std::vector<GateDistribution>* gates = nullptr) const;

    /// Eval-mode argmax decoding; stops after EOS (which is included) or
    /// max_new_tokens. Ties go to the lowest token id.
    std::vector<int> greedy_decode(std::span<const int> prompt, TaskId task,
                                   std::size_t max_new_tokens) const;

    /// Resets the per-expert evaluation counters of every bank.
    void reset_expert_counters() const;

private:
    Model() = default;
    Tensor embed(std::span<const int> ids, const Tensor& positions, Mode mode, Rng* rng) const;
    Tensor run_block(const Block& block, Tensor x, const Tensor* memory, TaskId task, Mode mode,
                     Rng* rng, const GateDistribution* gate) const;
    Tensor attend(const Attention& attn, const Tensor& x, const Tensor& memory, bool causal) const;
    void check_tokens(std::span<const int> ids, const char* what) const;
    void register_parameters();

    ModelConfig config_;
    Tensor token_embedding_;
    Tensor encoder_positions_;
    Tensor decoder_positions_;
    std::vector<Block> encoder_;
    std::vector<Block> decoder_;
    Tensor encoder_final_ln_;
    Tensor decoder_final_ln_;
    Tensor out_w_;
    Tensor out_b_;
    TaskEmbeddingTable task_table_;
    std::vector<NamedTensor> params_;
};

inline Model build_model(const ModelConfig& config, Rng& rng) { return Model::build(config, rng); }

}  // namespace trmoe
