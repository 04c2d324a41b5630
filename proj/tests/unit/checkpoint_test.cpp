// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "test_util.hpp"
#include "trmoe/checkpoint.hpp"
#include "trmoe/errors.hpp"
#include "trmoe/metrics.hpp"

namespace trmoe {
namespace {

using testing::tiny_config;
using testing::values;

CheckpointMeta sample_meta() {
    CheckpointMeta meta;
    meta.train.lr = 2e-3;
    meta.train.lambda_sep = 0.25;
    meta.step = 42;
    std::ostringstream state;
    state << Rng(3);
    meta.rng_state = state.str();
    meta.vocab = Vocabulary::from_tokens({"<pad>", "<eos>", "<unk>", "a", "b"});
    return meta;
}

Model sample_model(std::uint64_t seed, std::size_t d_ff = 32) {
    ModelConfig c = tiny_config();
    c.init_std = 0.3;
    c.d_ff = d_ff;
    Rng rng(seed);
    return Model::build(c, rng);
}

CheckpointError::Kind decode_kind(const std::string& bytes) {
    try {
        decode_checkpoint(bytes);
    } catch (const CheckpointError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected CheckpointError";
    return CheckpointError::Kind::Io;
}

TEST(Checkpoint, HeaderLayout) {
    const Model m = sample_model(1);
    const std::string bytes = encode_checkpoint(m, sample_meta());
    ASSERT_GT(bytes.size(), 12u);
    EXPECT_EQ(bytes.substr(0, 4), "TRMO");
    std::uint32_t version = 0, count = 0;
    std::memcpy(&version, bytes.data() + 4, 4);
    std::memcpy(&count, bytes.data() + 8, 4);
    EXPECT_EQ(version, 1u);
    EXPECT_EQ(count, m.parameters().size());
    std::uint16_t name_len = 0;
    std::memcpy(&name_len, bytes.data() + 12, 2);
    EXPECT_EQ(bytes.substr(14, name_len), m.parameters()[0].name);
}

TEST(Checkpoint, RoundTripRestoresEverything) {
    const Model m = sample_model(2);
    const CheckpointMeta meta = sample_meta();
    const LoadedCheckpoint back = decode_checkpoint(encode_checkpoint(m, meta));
    EXPECT_EQ(back.meta.step, 42u);
    EXPECT_EQ(back.meta.rng_state, meta.rng_state);
    EXPECT_EQ(back.meta.vocab, meta.vocab);
    EXPECT_EQ(back.meta.train.to_json(), meta.train.to_json());
    EXPECT_EQ(back.model.config().to_json(), m.config().to_json());
    ASSERT_EQ(back.model.parameters().size(), m.parameters().size());
    for (std::size_t i = 0; i < m.parameters().size(); ++i) {
        const auto a = values(m.parameters()[i].tensor), b = values(back.model.parameters()[i].tensor);
        for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(static_cast<float>(a[j]), b[j]);
    }
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
    testing::TempDir dir;
    const Model m = sample_model(3);
    save_checkpoint(dir.file("a.bin"), m, sample_meta());
    const LoadedCheckpoint back = load_checkpoint(dir.file("a.bin"));
    save_checkpoint(dir.file("b.bin"), back.model, back.meta);
    std::ifstream a(dir.file("a.bin"), std::ios::binary), b(dir.file("b.bin"), std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    EXPECT_EQ(sa, sb);
}

TEST(Checkpoint, ForwardBitExactAtStoragePrecision) {
    Model m = sample_model(4);
    for (auto& p : m.parameters())
        for (double& v : p.tensor.mutable_data()) v = static_cast<float>(v);
    const LoadedCheckpoint back = decode_checkpoint(encode_checkpoint(m, sample_meta()));
    const std::vector<int> prompt{4, 5, 6, 7}, target{8, 9, 1};
    for (TaskId t : kAllTasks)
        EXPECT_EQ(values(m.forward_teacher_forced(prompt, target, t, Mode::Eval)),
                  values(back.model.forward_teacher_forced(prompt, target, t, Mode::Eval)));
}

TEST(Checkpoint, EvalMetricsPreserved) {
    std::vector<AnnotatedInstance> insts{{"the soup was cold", "soup", Polarity::Negative, true, ""},
                                         {"the pasta was great", "pasta", Polarity::Positive, false, ""},
                                         {"the fan is okay", "fan", Polarity::Neutral, false, ""}};
    const auto texts = vocabulary_texts(insts);
    const Vocabulary v = Vocabulary::build(texts);
    ModelConfig c = tiny_config();
    c.vocab_size = v.size();
    c.init_std = 0.5;
    Rng rng(5);
    const Model m = Model::build(c, rng);
    CheckpointMeta meta = sample_meta();
    meta.vocab = v;
    const LoadedCheckpoint back = decode_checkpoint(encode_checkpoint(m, meta));
    const EvalReport a = evaluate(m, insts, v), b = evaluate(back.model, insts, back.meta.vocab);
    EXPECT_NEAR(a.all_accuracy, b.all_accuracy, 1e-6);
    EXPECT_NEAR(a.all_macro_f1, b.all_macro_f1, 1e-6);
    EXPECT_NEAR(a.imp_accuracy, b.imp_accuracy, 1e-6);
}

TEST(Checkpoint, CorruptionsRejectedWithKinds) {
    const Model m = sample_model(6);
    const std::string good = encode_checkpoint(m, sample_meta());

    std::string bad = good;
    bad[0] = 'X';
    EXPECT_EQ(decode_kind(bad), CheckpointError::Kind::BadMagic);
    EXPECT_EQ(decode_kind("TR"), CheckpointError::Kind::Truncated);

    bad = good;
    bad[4] = 2;
    EXPECT_EQ(decode_kind(bad), CheckpointError::Kind::BadVersion);

    EXPECT_EQ(decode_kind(good.substr(0, 10)), CheckpointError::Kind::Truncated);
    EXPECT_EQ(decode_kind(good.substr(0, good.size() / 2)), CheckpointError::Kind::Truncated);

    const auto trailer_at = good.rfind("{\"model\"");
    ASSERT_NE(trailer_at, std::string::npos);
    EXPECT_EQ(decode_kind(good.substr(0, trailer_at) + "{\"model\":"), CheckpointError::Kind::BadTrailer);
    EXPECT_EQ(decode_kind(good.substr(0, trailer_at) + "{}"), CheckpointError::Kind::BadTrailer);

    const Model wider = sample_model(6, 48);
    const std::string other = encode_checkpoint(wider, sample_meta());
    EXPECT_EQ(decode_kind(good.substr(0, trailer_at) + other.substr(other.rfind("{\"model\""))),
              CheckpointError::Kind::ShapeMismatch);
}

TEST(Checkpoint, MissingFileIsIoError) {
    testing::TempDir dir;
    try {
        load_checkpoint(dir.file("none.bin"));
        ADD_FAILURE();
    } catch (const CheckpointError& e) {
        EXPECT_EQ(e.kind(), CheckpointError::Kind::Io);
    }
    EXPECT_THROW(save_checkpoint(dir.file("no/such/dir/x.bin"), sample_model(1), sample_meta()), CheckpointError);
}

}  // namespace
}  // namespace trmoe
