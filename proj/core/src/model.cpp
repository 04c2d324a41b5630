// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trmoe/errors.hpp"

namespace trmoe {

namespace {

Attention init_attention(std::size_t d_model, std::size_t n_heads, double std, Rng& rng) {
    Attention a;
    const std::size_t dh = d_model / n_heads;
    for (std::size_t h = 0; h < n_heads; ++h) {
        a.wq.push_back(randn({d_model, dh}, std, rng));
        a.wk.push_back(randn({d_model, dh}, std, rng));
        a.wv.push_back(randn({d_model, dh}, std, rng));
    }
    a.wo = randn({d_model, d_model}, std, rng);
    return a;
}

Tensor ones(std::size_t n) { return Tensor::full({n}, 1.0, true); }

std::vector<std::uint8_t> causal_mask(std::size_t n) {
    std::vector<std::uint8_t> mask(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) mask[i * n + j] = 1;
    return mask;
}

// Large enough that exp(masked - max) underflows to exactly 0.
constexpr double kMaskedScore = -1e30;

}  // namespace

std::string Block::name() const {
    return std::string(stack == Stack::Encoder ? "enc." : "dec.") + std::to_string(index);
}

Model Model::build(const ModelConfig& config, Rng& rng) {
    config.validate();
    Model m;
    m.config_ = config;
    const double s = config.init_std;
    const std::size_t d = config.d_model;
    m.token_embedding_ = randn({config.vocab_size, d}, s, rng);
    m.encoder_positions_ = randn({config.max_seq_len, d}, s, rng);
    m.decoder_positions_ = randn({config.max_seq_len, d}, s, rng);
    if (!config.routed_layers.empty()) m.task_table_ = TaskEmbeddingTable::init(config.d_task, s, rng);

    auto routed = [&](std::size_t index) {
        return std::find(config.routed_layers.begin(), config.routed_layers.end(), index) !=
               config.routed_layers.end();
    };
    auto make_block = [&](Stack stack, std::size_t index) {
        Block b;
        b.stack = stack;
        b.index = index;
        b.self_ln = ones(d);
        b.self_attn = init_attention(d, config.n_heads, s, rng);
        if (stack == Stack::Decoder) {
            b.cross_ln = ones(d);
            b.cross_attn = init_attention(d, config.n_heads, s, rng);
        }
        if (routed(index)) {
            RoutedFfn r;
            r.router = Router::init(config.d_task, config.d_router_hidden, config.n_experts, s, rng);
            if (config.fresh_experts) {
                r.bank.ln_gain = ones(d);
                for (std::size_t e = 0; e < config.n_experts; ++e)
                    r.bank.experts.push_back(FeedForward::init(d, config.d_ff, s, rng));
                r.bank.calls.assign(config.n_experts, 0);
            } else {
                const FeedForward dense = FeedForward::init(d, config.d_ff, s, rng);
                r.bank = init_experts(dense, config.n_experts, config.expert_noise_std, rng);
            }
            b.moe = std::move(r);
        } else {
            b.ffn_ln = ones(d);
            b.ffn = FeedForward::init(d, config.d_ff, s, rng);
        }
        return b;
    };
    for (std::size_t i = 1; i <= config.n_encoder_blocks; ++i) m.encoder_.push_back(make_block(Stack::Encoder, i));
    for (std::size_t i = 1; i <= config.n_decoder_blocks; ++i) m.decoder_.push_back(make_block(Stack::Decoder, i));
    m.encoder_final_ln_ = ones(d);
    m.decoder_final_ln_ = ones(d);
    m.out_w_ = randn({d, config.vocab_size}, s, rng);
    m.out_b_ = Tensor::zeros({config.vocab_size}, true);
    m.register_parameters();
    return m;
}

void Model::register_parameters() {
    params_.clear();
    auto add_param = [&](std::string name, const Tensor& t) { params_.push_back({std::move(name), t}); };
    auto add_attention = [&](const std::string& prefix, const Attention& a) {
        for (std::size_t h = 0; h < a.wq.size(); ++h) {
            add_param(prefix + ".q" + std::to_string(h), a.wq[h]);
            add_param(prefix + ".k" + std::to_string(h), a.wk[h]);
            add_param(prefix + ".v" + std::to_string(h), a.wv[h]);
        }
        add_param(prefix + ".o", a.wo);
    };
    auto add_ffn = [&](const std::string& prefix, const FeedForward& f) {
        add_param(prefix + ".w1", f.w1);
        add_param(prefix + ".b1", f.b1);
        add_param(prefix + ".w2", f.w2);
        add_param(prefix + ".b2", f.b2);
    };
    add_param("embed.tokens", token_embedding_);
    add_param("enc.pos", encoder_positions_);
    add_param("dec.pos", decoder_positions_);
    if (task_table_.weights.defined()) add_param("task_embedding", task_table_.weights);
    for (const auto* stack : {&encoder_, &decoder_}) {
        for (const Block& b : *stack) {
            const std::string n = b.name();
            add_param(n + ".self.ln", b.self_ln);
            add_attention(n + ".self", b.self_attn);
            if (b.cross_attn) {
                add_param(n + ".cross.ln", b.cross_ln);
                add_attention(n + ".cross", *b.cross_attn);
            }
            if (b.moe) {
                const Router& r = b.moe->router;
                add_param(n + ".moe.router.ln", r.ln_gain);
                add_param(n + ".moe.router.w1", r.w1);
                add_param(n + ".moe.router.b1", r.b1);
                add_param(n + ".moe.router.w2", r.w2);
                add_param(n + ".moe.router.b2", r.b2);
                add_param(n + ".moe.ln", b.moe->bank.ln_gain);
                for (std::size_t e = 0; e < b.moe->bank.size(); ++e)
                    add_ffn(n + ".moe.expert" + std::to_string(e), b.moe->bank.experts[e]);
            } else {
                add_param(n + ".ffn.ln", b.ffn_ln);
                add_ffn(n + ".ffn", *b.ffn);
            }
        }
    }
    add_param("enc.final_ln", encoder_final_ln_);
    add_param("dec.final_ln", decoder_final_ln_);
    add_param("out.w", out_w_);
    add_param("out.b", out_b_);
}

Model Model::clone() const {
    Rng scratch(0);
    Model copy = Model::build(config_, scratch);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto src = params_[i].tensor.data();
        auto dst = copy.params_[i].tensor.mutable_data();
        std::copy(src.begin(), src.end(), dst.begin());
        copy.params_[i].tensor.set_requires_grad(params_[i].tensor.requires_grad());
    }
    return copy;
}

const Tensor* Model::find_parameter(std::string_view name) const {
    for (const auto& p : params_)
        if (p.name == name) return &p.tensor;
    return nullptr;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.size();
    return n;
}

void Model::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

std::vector<const Block*> Model::routed_blocks() const {
    std::vector<const Block*> out;
    for (const auto* stack : {&encoder_, &decoder_})
        for (const Block& b : *stack)
            if (b.moe) out.push_back(&b);
    return out;
}

std::vector<std::string> Model::routed_layer_names() const {
    std::vector<std::string> names;
    for (const Block* b : routed_blocks()) names.push_back(b->name());
    return names;
}

std::vector<GateDistribution> Model::compute_gates(TaskId task) const {
    std::vector<GateDistribution> gates;
    for (const Block* b : routed_blocks())
        gates.push_back(route_topk(b->moe->router, task_table_, task, config_.top_k, config_.ln_eps));
    return gates;
}

std::vector<LayerGates> Model::dense_gates() const {
    std::vector<LayerGates> out;
    for (const Block* b : routed_blocks()) {
        LayerGates g;
        for (TaskId t : kAllTasks) g[task_index(t)] = route(b->moe->router, task_table_, t, config_.ln_eps);
        out.push_back(std::move(g));
    }
    return out;
}

void Model::check_tokens(std::span<const int> ids, const char* what) const {
    if (ids.empty()) throw DataError(std::string(what) + ": empty token sequence");
    if (ids.size() > config_.max_seq_len)
        throw DataError(std::string(what) + ": overlength sequence of " + std::to_string(ids.size()) +
                        " tokens (max_seq_len " + std::to_string(config_.max_seq_len) + ")");
    for (int id : ids)
        if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size)
            throw DataError(std::string(what) + ": out-of-vocabulary id " + std::to_string(id));
}

Tensor Model::embed(std::span<const int> ids, const Tensor& positions, Mode mode, Rng* rng) const {
    std::vector<int> pos(ids.size());
    std::iota(pos.begin(), pos.end(), 0);
    const Tensor x = add(embedding(token_embedding_, ids), embedding(positions, pos));
    return dropout(x, config_.dropout_rate, mode, rng);
}

Tensor Model::attend(const Attention& attn, const Tensor& x, const Tensor& memory, bool causal) const {
    const std::size_t heads = attn.wq.size();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(config_.d_model / heads));
    std::vector<std::uint8_t> mask;
    if (causal) mask = causal_mask(x.dim(0));
    std::vector<Tensor> contexts;
    contexts.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const Tensor q = matmul(x, attn.wq[h]);
        const Tensor k = matmul(memory, attn.wk[h]);
        const Tensor v = matmul(memory, attn.wv[h]);
        Tensor scores = scale(matmul_nt(q, k), inv_sqrt);
        if (causal) scores = masked_fill(scores, mask, kMaskedScore);
        contexts.push_back(matmul(softmax(scores, 1), v));
    }
    const Tensor ctx = heads == 1 ? contexts.front() : concat(contexts, 1);
    return matmul(ctx, attn.wo);
}

Tensor Model::run_block(const Block& block, Tensor x, const Tensor* memory, TaskId, Mode mode, Rng* rng,
                        const GateDistribution* gate) const {
    const double rate = config_.dropout_rate;
    const double eps = config_.ln_eps;
    {
        const Tensor n = layer_norm(x, block.self_ln, eps);
        x = add(x, dropout(attend(block.self_attn, n, n, block.stack == Stack::Decoder), rate, mode, rng));
    }
    if (block.cross_attn) {
        const Tensor n = layer_norm(x, block.cross_ln, eps);
        x = add(x, dropout(attend(*block.cross_attn, n, *memory, false), rate, mode, rng));
    }
    if (block.moe) return moe_ffn_forward(block.moe->bank, *gate, x, mode, rng, rate, eps);
    return add(x, dropout((*block.ffn)(layer_norm(x, block.ffn_ln, eps)), rate, mode, rng));
}

Tensor Model::encode(std::span<const int> prompt, TaskId task, Mode mode, Rng* rng,
                     const std::vector<GateDistribution>* gates, bool final_norm) const {
    check_tokens(prompt, "encode");
    std::vector<GateDistribution> own;
    if (gates == nullptr && !config_.routed_layers.empty()) {
        own = compute_gates(task);
        gates = &own;
    }
    Tensor x = embed(prompt, encoder_positions_, mode, rng);
    std::size_t g = 0;
    for (const Block& b : encoder_) x = run_block(b, x, nullptr, task, mode, rng, b.moe ? &(*gates)[g++] : nullptr);
    return final_norm ? layer_norm(x, encoder_final_ln_, config_.ln_eps) : x;
}

Tensor Model::decode_hidden(const Tensor& memory, std::span<const int> decoder_input, TaskId task, Mode mode,
                            Rng* rng, const std::vector<GateDistribution>* gates, bool final_norm) const {
    check_tokens(decoder_input, "decode");
    std::vector<GateDistribution> own;
    if (gates == nullptr && !config_.routed_layers.empty()) {
        own = compute_gates(task);
        gates = &own;
    }
    std::size_t g = 0;
    for (const Block& b : encoder_)
        if (b.moe) ++g;
    Tensor x = embed(decoder_input, decoder_positions_, mode, rng);
    for (const Block& b : decoder_) x = run_block(b, x, &memory, task, mode, rng, b.moe ? &(*gates)[g++] : nullptr);
    return final_norm ? layer_norm(x, decoder_final_ln_, config_.ln_eps) : x;
}

Tensor Model::project(const Tensor& hidden) const { return add(matmul(hidden, out_w_), out_b_); }

Tensor Model::forward_teacher_forced(std::span<const int> prompt, std::span<const int> target, TaskId task,
                                     Mode mode, Rng* rng, const std::vector<GateDistribution>* gates) const {
    check_tokens(target, "target");
    std::vector<GateDistribution> own;
    if (gates == nullptr && !config_.routed_layers.empty()) {
        own = compute_gates(task);
        gates = &own;
    }
    std::vector<int> decoder_input;
    decoder_input.reserve(target.size());
    decoder_input.push_back(kPadId);
    decoder_input.insert(decoder_input.end(), target.begin(), target.end() - 1);
    const Tensor memory = encode(prompt, task, mode, rng, gates);
    return project(decode_hidden(memory, decoder_input, task, mode, rng, gates));
}

std::vector<int> Model::greedy_decode(std::span<const int> prompt, TaskId task, std::size_t max_new_tokens) const {
    NoGradGuard no_grad;
    std::vector<GateDistribution> gates;
    if (!config_.routed_layers.empty()) gates = compute_gates(task);
    const Tensor memory = encode(prompt, task, Mode::Eval, nullptr, &gates);
    std::vector<int> input{kPadId};
    std::vector<int> out;
    while (out.size() < max_new_tokens && input.size() <= config_.max_seq_len) {
        const Tensor hidden = decode_hidden(memory, input, task, Mode::Eval, nullptr, &gates);
        // Only the last position is needed for the next token.
        const std::size_t last = hidden.dim(0) - 1;
        const auto h = hidden.data().subspan(last * config_.d_model, config_.d_model);
        const Tensor logits = project(Tensor::matrix(1, config_.d_model, {h.begin(), h.end()}));
        const auto l = logits.data();
        int best = 0;
        for (std::size_t v = 1; v < l.size(); ++v)
            if (l[v] > l[static_cast<std::size_t>(best)]) best = static_cast<int>(v);
        out.push_back(best);
        if (best == kEosId) break;
        input.push_back(best);
    }
    return out;
}

void Model::reset_expert_counters() const {
    for (const Block* b : routed_blocks()) b->moe->bank.reset_counters();
}

}  // namespace trmoe
