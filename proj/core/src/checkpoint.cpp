// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "trmoe/errors.hpp"

namespace trmoe {

namespace {

using Kind = CheckpointError::Kind;

template <typename T>
void put(std::string& out, T v) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : s_(bytes) {}

    template <typename T>
    T get(const char* what) {
        need(sizeof(T), what);
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<T>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        return v;
    }
    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string out = s_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::string rest() { return s_.substr(pos_); }

private:
    void need(std::size_t n, const char* what) {
        if (s_.size() - pos_ < n)
            throw CheckpointError(Kind::Truncated, std::string("checkpoint truncated while reading ") + what);
    }
    const std::string& s_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Model& model, const CheckpointMeta& meta) {
    std::string out = "TRMO";
    put<std::uint32_t>(out, kCheckpointVersion);
    const auto& params = model.parameters();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put<std::uint16_t>(out, static_cast<std::uint16_t>(p.name.size()));
        out += p.name;
        const Shape& shape = p.tensor.shape();
        put<std::uint8_t>(out, static_cast<std::uint8_t>(shape.size()));
        for (auto d : shape) put<std::uint64_t>(out, d);
        for (double v : p.tensor.data()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    nlohmann::ordered_json trailer;
    trailer["model"] = nlohmann::ordered_json::parse(model.config().to_json());
    trailer["train"] = nlohmann::ordered_json::parse(meta.train.to_json());
    trailer["step"] = meta.step;
    trailer["rng_state"] = meta.rng_state;
    trailer["vocab"] = meta.vocab.tokens();
    out += trailer.dump();
    return out;
}

LoadedCheckpoint decode_checkpoint(const std::string& bytes) {
    Reader r(bytes);
    if (r.bytes(4, "magic") != "TRMO") throw CheckpointError(Kind::BadMagic, "not a checkpoint: bad magic");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion)
        throw CheckpointError(Kind::BadVersion, "unsupported checkpoint version " + std::to_string(version));
    const auto count = r.get<std::uint32_t>("tensor count");
    struct Entry {
        std::string name;
        Shape shape;
        std::vector<double> values;
    };
    std::vector<Entry> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
        Entry e;
        e.name = r.bytes(r.get<std::uint16_t>("name length"), "tensor name");
        const auto rank = r.get<std::uint8_t>("rank");
        if (rank == 0) throw CheckpointError(Kind::ShapeMismatch, "tensor " + e.name + " has rank 0");
        std::uint64_t n = 1;
        for (std::uint8_t k = 0; k < rank; ++k) {
            const auto d = r.get<std::uint64_t>("dims");
            if (d == 0 || d > (std::uint64_t{1} << 32))
                throw CheckpointError(Kind::ShapeMismatch, "tensor " + e.name + " has an invalid dimension");
            e.shape.push_back(static_cast<std::size_t>(d));
            n *= d;
            if (n > bytes.size()) throw CheckpointError(Kind::Truncated, "tensor " + e.name + " exceeds the file size");
        }
        e.values.resize(static_cast<std::size_t>(n));
        for (auto& v : e.values) v = std::bit_cast<float>(r.get<std::uint32_t>("tensor payload"));
        entries.push_back(std::move(e));
    }

    nlohmann::json trailer;
    try {
        trailer = nlohmann::json::parse(r.rest());
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(Kind::BadTrailer, std::string("checkpoint trailer is not valid JSON: ") + e.what());
    }
    ModelConfig mcfg;
    CheckpointMeta meta;
    try {
        mcfg = ModelConfig::from_json(trailer.at("model").dump());
        meta.train = TrainConfig::from_json(trailer.at("train").dump());
        meta.step = trailer.at("step").get<std::size_t>();
        meta.rng_state = trailer.at("rng_state").get<std::string>();
        meta.vocab = Vocabulary::from_tokens(trailer.at("vocab").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(Kind::BadTrailer, std::string("checkpoint trailer incomplete: ") + e.what());
    } catch (const Error& e) {
        throw CheckpointError(Kind::BadTrailer, std::string("checkpoint trailer invalid: ") + e.what());
    }

    Rng scratch(0);
    Model model = [&] {
        try {
            return Model::build(mcfg, scratch);
        } catch (const ConfigError& e) {
            throw CheckpointError(Kind::BadTrailer, std::string("checkpoint model config invalid: ") + e.what());
        }
    }();
    auto& params = model.parameters();
    if (params.size() != entries.size())
        throw CheckpointError(Kind::ShapeMismatch, "checkpoint holds " + std::to_string(entries.size()) +
                                                       " tensors, the model expects " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name != entries[i].name || params[i].tensor.shape() != entries[i].shape)
            throw CheckpointError(Kind::ShapeMismatch, "tensor table mismatch at " + entries[i].name + " " +
                                                           shape_str(entries[i].shape) + ", expected " +
                                                           params[i].name + " " + shape_str(params[i].tensor.shape()));
        auto dst = params[i].tensor.mutable_data();
        std::copy(entries[i].values.begin(), entries[i].values.end(), dst.begin());
    }
    return {std::move(model), std::move(meta)};
}

void save_checkpoint(const std::string& path, const Model& model, const CheckpointMeta& meta) {
    const std::string bytes = encode_checkpoint(model, meta);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(Kind::Io, "cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(Kind::Io, "write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(Kind::Io, "cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace trmoe
